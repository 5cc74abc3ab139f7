"""Typed protocol messages, per-link bit accounting, and entity views.

Every transmitted value in a round is appended here exactly once, so the
transcript is both the communication-cost ledger and the substrate for
the honest-but-curious adversary views (an entity's view is the set of
messages addressed to it; there is no cross-link eavesdropping).

Two accounting modes exist:

* "paper"  -- ciphertexts at 2x the key width, masked and plain scalars
  at the 24-bit plaintext representation (bounded-noise masking);
* "strict" -- masked scalars at the modulus width, as required when the
  masks are uniform over Z_n.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

TARGET = "target"
AGGREGATOR = "aggregator"


def anchor_entity(anchor_id: int) -> str:
    return f"anchor:{anchor_id}"


def is_anchor(entity: str) -> bool:
    return entity.startswith("anchor:")


# message kinds
PUBLIC_KEY = "public_key"
ENC_NOISE = "enc_noise"                  # anchor's encrypted noise share
ENC_NOISE_SUM = "enc_noise_sum"          # aggregated encrypted noise
MASKED_GRAM = "masked_gram"              # anchor's masked rank-one Gram term
MASKED_RHS = "masked_rhs_part"           # anchor's masked rhs contribution
ENC_SEND_TIME = "enc_send_time"          # target's encrypted send timestamp
ENC_CROSS_TERM = "enc_cross_term"        # anchor's encrypted cross term (4 cts)
SEND_TIME = "send_time"                  # target's plaintext send timestamp
ENC_CROSS_SUM = "enc_cross_sum"          # aggregated cross terms (4 cts)
MASKED_DIRECTION = "masked_direction"    # masked direction-row share (3 scalars)
SELECTION = "selection"                  # chosen anchor subset

PLAINTEXT_BITS = 24
ID_BITS = 16


@dataclass(frozen=True)
class WireAccounting:
    mode: str
    key_bits: int

    def __post_init__(self):
        if self.mode not in ("paper", "strict"):
            raise ValueError(f"unknown accounting mode {self.mode!r}")

    @property
    def ciphertext_bits(self) -> int:
        return 2 * self.key_bits

    @property
    def masked_scalar_bits(self) -> int:
        return PLAINTEXT_BITS if self.mode == "paper" else self.key_bits

    @property
    def plain_scalar_bits(self) -> int:
        return PLAINTEXT_BITS

    @property
    def public_key_bits(self) -> int:
        return 2 * self.key_bits

    def message_bits(self, kind: str, payload) -> int:
        if kind == PUBLIC_KEY:
            return self.public_key_bits
        if kind in (ENC_NOISE, ENC_NOISE_SUM, ENC_SEND_TIME):
            return self.ciphertext_bits
        if kind in (ENC_CROSS_TERM, ENC_CROSS_SUM):
            return 4 * self.ciphertext_bits
        if kind == MASKED_GRAM:
            return 16 * self.masked_scalar_bits
        if kind == MASKED_RHS:
            return 4 * self.masked_scalar_bits
        if kind == MASKED_DIRECTION:
            return 3 * self.masked_scalar_bits
        if kind == SEND_TIME:
            return self.plain_scalar_bits
        if kind == SELECTION:
            return len(payload["selected"]) * ID_BITS
        raise ValueError(f"unknown message kind {kind!r}")


@dataclass(frozen=True)
class ProtocolMessage:
    round_no: int
    sender: str
    recipient: str
    kind: str
    payload: dict
    bit_size: int


def payload_digest(payload) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class Transcript:
    accounting: WireAccounting
    messages: list[ProtocolMessage] = field(default_factory=list)

    def send(self, round_no: int, sender: str, recipient: str,
             kind: str, payload: dict) -> ProtocolMessage:
        msg = ProtocolMessage(round_no, sender, recipient, kind, payload,
                              self.accounting.message_bits(kind, payload))
        self.messages.append(msg)
        return msg

    @property
    def total_bits(self) -> int:
        return sum(m.bit_size for m in self.messages)

    def bits_by_link(self) -> dict[tuple[str, str], int]:
        links: dict[tuple[str, str], int] = {}
        for m in self.messages:
            key = (m.sender, m.recipient)
            links[key] = links.get(key, 0) + m.bit_size
        return links

    def view(self, entity: str) -> list[ProtocolMessage]:
        """Messages the entity received (honest-but-curious view)."""
        return [m for m in self.messages if m.recipient == entity]

    def of_kind(self, kind: str) -> list[ProtocolMessage]:
        return [m for m in self.messages if m.kind == kind]

    def to_jsonl(self, fp) -> None:
        """One line per message; payload bodies are digested, not dumped."""
        for m in self.messages:
            fp.write(json.dumps({
                "round": m.round_no,
                "from": m.sender,
                "to": m.recipient,
                "kind": m.kind,
                "bit_size": m.bit_size,
                "payload_digest": payload_digest(m.payload),
            }) + "\n")

"""Zero-sum noise generation over the Paillier ciphertext channel.

One exchange produces one zero-sum set: every anchor draws a share and
uploads it encrypted to the aggregator, the aggregator homomorphically
sums the ciphertexts without being able to decrypt, and the target
decrypts the sum and takes its negation as the balancing share.  No
individual share ever travels in plaintext, and the target only ever
learns the sum.

Exchanges are repeated per scalar element to expand into the mask
families used by the protocol: a 4x4 matrix per entity for the Gram
terms, a 4-vector per entity for the rhs terms, and an independent
3-vector set per selection candidate (reusing one set across candidates
would let the aggregator difference a candidate's masked and unmasked
messages and recover its position).
"""

from __future__ import annotations

from dataclasses import dataclass
from random import Random

from privloc import paillier
from privloc.paillier import Ciphertext, PaillierPrivateKey, PaillierPublicKey
from privloc.transcript import (AGGREGATOR, ENC_NOISE, ENC_NOISE_SUM, TARGET,
                                Transcript, anchor_entity)


def draw_share(n: int, rng: Random, noise_bits: int | None = None) -> int:
    """One noise share as a residue.

    Uniform over Z_n by default (perfect hiding); when noise_bits is
    given, uniform over +-2^noise_bits instead, which reproduces the
    bounded plaintext widths of the paper accounting mode.
    """
    if noise_bits is None:
        return rng.randrange(n)
    bound = 1 << noise_bits
    return rng.randint(-bound, bound) % n


def anchor_generate_and_encrypt(pk: PaillierPublicKey, rng: Random,
                                noise_bits: int | None = None
                                ) -> tuple[int, Ciphertext]:
    share = draw_share(pk.n, rng, noise_bits)
    return share, paillier.encrypt(pk, share, rng)


def aggregator_sum_encrypted(pk: PaillierPublicKey,
                             cts: list[Ciphertext]) -> Ciphertext:
    if not cts:
        raise ValueError("no ciphertexts to aggregate")
    acc = cts[0]
    for ct in cts[1:]:
        acc = paillier.hom_add(pk, acc, ct)
    return acc


def target_derive_balancing_share(sum_ct: Ciphertext,
                                  sk: PaillierPrivateKey) -> int:
    return (sk.n - paillier.decrypt(sk, sum_ct)) % sk.n


def run_zero_sum_exchange(pk, sk, anchor_ids: list[int], rng: Random,
                          transcript: Transcript, round_no: int, element: str,
                          noise_bits: int | None = None) -> dict[str, int]:
    """One full exchange; returns every entity's share, keyed by entity id."""
    shares: dict[str, int] = {}
    cts = []
    for i in anchor_ids:
        share, ct = anchor_generate_and_encrypt(pk, rng, noise_bits)
        shares[anchor_entity(i)] = share
        cts.append(ct)
        transcript.send(round_no, anchor_entity(i), AGGREGATOR, ENC_NOISE,
                        {"element": element, "ct": ct.value})
    sum_ct = aggregator_sum_encrypted(pk, cts)
    transcript.send(round_no, AGGREGATOR, TARGET, ENC_NOISE_SUM,
                    {"element": element, "ct": sum_ct.value})
    shares[TARGET] = target_derive_balancing_share(sum_ct, sk)
    return shares


@dataclass
class NoiseFamily:
    """Per-entity zero-sum masks for one round.

    gram_masks[entity] is a 4x4 residue matrix, rhs_masks[entity] a
    4-vector, and row_masks[candidate][entity] a 3-vector; each indexed
    position sums to zero over all entities mod n.
    """

    gram_masks: dict[str, list[list[int]]]
    rhs_masks: dict[str, list[int]]
    row_masks: dict[int, dict[str, list[int]]]

    @staticmethod
    def zeros(anchor_ids: list[int], candidate_ids: list[int]) -> "NoiseFamily":
        """All-zero masks; only used as a deliberately broken debug mode."""
        entities = [TARGET] + [anchor_entity(i) for i in anchor_ids]
        return NoiseFamily(
            gram_masks={e: [[0] * 4 for _ in range(4)] for e in entities},
            rhs_masks={e: [0] * 4 for e in entities},
            row_masks={c: {e: [0] * 3 for e in entities} for c in candidate_ids},
        )


def expand_noise_family(pk, sk, anchor_ids: list[int], candidate_ids: list[int],
                        rng: Random, transcript: Transcript, round_no: int,
                        noise_bits: int | None = None) -> NoiseFamily:
    """Run the exchange once per masked scalar element of every family."""
    if not anchor_ids:
        raise ValueError("need at least one anchor")
    entities = [TARGET] + [anchor_entity(i) for i in anchor_ids]
    gram = {e: [[0] * 4 for _ in range(4)] for e in entities}
    rhs = {e: [0] * 4 for e in entities}
    rows: dict[int, dict[str, list[int]]] = {}

    for j in range(4):
        for k in range(4):
            shares = run_zero_sum_exchange(pk, sk, anchor_ids, rng, transcript,
                                           round_no, f"gram:{j}{k}", noise_bits)
            for e in entities:
                gram[e][j][k] = shares[e]
    for j in range(4):
        shares = run_zero_sum_exchange(pk, sk, anchor_ids, rng, transcript,
                                       round_no, f"rhs:{j}", noise_bits)
        for e in entities:
            rhs[e][j] = shares[e]
    for cand in candidate_ids:
        per_entity = {e: [0] * 3 for e in entities}
        for j in range(3):
            shares = run_zero_sum_exchange(pk, sk, anchor_ids, rng, transcript,
                                           round_no, f"row:{cand}:{j}", noise_bits)
            for e in entities:
                per_entity[e][j] = shares[e]
        rows[cand] = per_entity
    return NoiseFamily(gram, rhs, rows)

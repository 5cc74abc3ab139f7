"""Time-of-arrival measurement model and least-squares localization.

This is the plaintext reference pipeline: it produces ground-truth
("raw ToA") estimates and serves as the oracle the private protocol is
checked against.  Two parallel assemblies of the linear system exist:

* float path   -- build_system/ls_solve on real-valued ranges;
* integer path -- quantized_normal_equations/solve_quantized on values
  quantized once at the codec grid, matching bit-for-bit what the
  protocol's masked/encrypted pipeline recovers.

Timestamps are handled in distance units (multiplied by the propagation
speed) so that every quantity shares one fixed-point lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from random import Random

import numpy as np

from privloc.encoding import SignedFixedCodec

SPEED_OF_LIGHT = 299_792_458.0

# double precision cliff for the normal equations
CONDITION_LIMIT = 1e12


class GeometryError(Exception):
    """Anchor geometry too degenerate to localize."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


@dataclass(frozen=True)
class Position:
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @staticmethod
    def from_array(a) -> "Position":
        return Position(float(a[0]), float(a[1]), float(a[2]))

    def distance_to(self, other: "Position") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))


@dataclass(frozen=True)
class RangeObservation:
    """One ranging exchange: target sends at t_send, anchor receives at t_recv."""

    anchor_id: int
    t_send: float
    t_recv: float

    @property
    def tau_send(self) -> float:
        """Send timestamp in distance units (meters)."""
        return SPEED_OF_LIGHT * self.t_send

    @property
    def tau_recv(self) -> float:
        return SPEED_OF_LIGHT * self.t_recv

    @property
    def measured_range(self) -> float:
        return self.tau_recv - self.tau_send


def simulate_range(target: Position, anchor: Position, sigma_ns: float,
                   rng: Random, anchor_id: int = 0, t_send: float = 0.0) -> RangeObservation:
    """Draw one ToA observation with Gaussian timing noise of sigma_ns ns."""
    if sigma_ns < 0:
        raise ValueError("sigma_ns must be >= 0")
    tof = target.distance_to(anchor) / SPEED_OF_LIGHT
    noise = rng.gauss(0.0, sigma_ns * 1e-9) if sigma_ns else 0.0
    return RangeObservation(anchor_id, t_send, t_send + tof + noise)


def design_row(anchor: Position) -> np.ndarray:
    """Row [-2x, -2y, -2z, 1] of the linearized range system."""
    return np.array([-2.0 * anchor.x, -2.0 * anchor.y, -2.0 * anchor.z, 1.0])


def anchor_self_term(obs: RangeObservation, anchor: Position) -> float:
    """The anchor-private part of the rhs: (v*t_recv)^2 - ||p_i||^2."""
    return obs.tau_recv ** 2 - (anchor.x ** 2 + anchor.y ** 2 + anchor.z ** 2)


def build_system(observations: list[RangeObservation],
                 anchors: list[Position]) -> tuple[np.ndarray, np.ndarray]:
    """Assemble the m x 4 system A x = b from ranges and anchor positions.

    b is computed two ways -- directly from the measured range, and from
    the timestamp decomposition the private protocol uses -- and the two
    must agree to machine precision.
    """
    m = len(observations)
    if m != len(anchors):
        raise ValueError("observations and anchors must align")
    if m < 4:
        raise ValueError(f"need at least 4 anchors, got {m}")
    A = np.stack([design_row(a) for a in anchors])
    b_direct = np.empty(m)
    b_split = np.empty(m)
    scale = np.empty(m)
    for i, (obs, anchor) in enumerate(zip(observations, anchors)):
        r_sq = anchor.x ** 2 + anchor.y ** 2 + anchor.z ** 2
        b_direct[i] = obs.measured_range ** 2 - r_sq
        b_split[i] = (obs.tau_send ** 2
                      - 2.0 * obs.tau_recv * obs.tau_send
                      + anchor_self_term(obs, anchor))
        # relative to the operands: the split form cancels from tau^2 level
        scale[i] = max(abs(b_direct[i]), obs.tau_send ** 2, r_sq, 1.0)
    if np.any(np.abs(b_direct - b_split) / scale > 1e-9):
        raise ValueError("rhs assemblies disagree beyond float tolerance")
    return A, b_direct


def _solve_normal(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise GeometryError(f"normal equations ill-conditioned (cond={cond:.3g})",
                            condition=cond)
    return np.linalg.solve(gram, rhs)


def ls_solve(A: np.ndarray, b: np.ndarray) -> tuple[Position, float]:
    """Normal-equations solution; returns the position and the R0 component."""
    x = _solve_normal(A.T @ A, A.T @ b)
    return Position.from_array(x[:3]), float(x[3])


@dataclass(frozen=True)
class QuantizedAnchorTerms:
    """Everything an anchor derives from one observation, on the integer grid.

    Coordinates and distance-domain timestamps are quantized once at
    scale S; all higher-scale quantities are exact integer products, so
    the private pipeline and the plaintext oracle agree bit-for-bit.
    """

    anchor_id: int
    coords: tuple[int, int, int]          # scale S
    row: tuple[int, int, int, int]        # (-2qx, -2qy, -2qz, S), scale S
    q_tau_recv: int                       # scale S
    q_tau_send: int                       # scale S (held by the target)
    self_term: int                        # q_tau_recv^2 - ||q_coords||^2, scale S^2

    @property
    def rhs_entry(self) -> int:
        """b_i on the grid at scale S^2."""
        return (self.q_tau_send * self.q_tau_send
                - 2 * self.q_tau_recv * self.q_tau_send
                + self.self_term)


def quantize_anchor_terms(obs: RangeObservation, anchor: Position,
                          codec: SignedFixedCodec) -> QuantizedAnchorTerms:
    qx, qy, qz = (codec.quantize(anchor.x), codec.quantize(anchor.y),
                  codec.quantize(anchor.z))
    qtr = codec.quantize(obs.tau_recv)
    qts = codec.quantize(obs.tau_send)
    return QuantizedAnchorTerms(
        anchor_id=obs.anchor_id,
        coords=(qx, qy, qz),
        row=(-2 * qx, -2 * qy, -2 * qz, codec.scale),
        q_tau_recv=qtr,
        q_tau_send=qts,
        self_term=qtr * qtr - (qx * qx + qy * qy + qz * qz),
    )


def quantized_normal_equations(terms: list[QuantizedAnchorTerms]
                               ) -> tuple[list[list[int]], list[int]]:
    """Plaintext integer assembly of (A^T A, A^T b) at scales S^2 and S^3."""
    gram = [[0] * 4 for _ in range(4)]
    rhs = [0] * 4
    for t in terms:
        b_i = t.rhs_entry
        for j in range(4):
            rhs[j] += t.row[j] * b_i
            for k in range(4):
                gram[j][k] += t.row[j] * t.row[k]
    return gram, rhs


def solve_quantized(gram: list[list[int]], rhs: list[int],
                    codec: SignedFixedCodec) -> tuple[Position, float]:
    """Decode the integer system to floats and run the shared solver."""
    s2 = float(codec.scale) ** 2
    s3 = float(codec.scale) ** 3
    gram_f = np.array([[v / s2 for v in row] for row in gram])
    rhs_f = np.array([v / s3 for v in rhs])
    x = _solve_normal(gram_f, rhs_f)
    return Position.from_array(x[:3]), float(x[3])

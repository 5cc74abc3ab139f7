"""Geometric dilution of precision and contribution-based anchor selection.

The contribution of an anchor is the increase in squared GDOP caused by
deleting its observation row, computed with a rank-one (Sherman-Morrison)
update instead of refactoring the full matrix.  Greedy selection removes
the minimum-contribution anchor until the requested subset size remains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from privloc.encoding import SignedFixedCodec

# below this, 1 - h G h^T means the row is essential: removing it
# collapses the rank, so its contribution is treated as infinite
ESSENTIAL_DENOMINATOR = 1e-12

_RANK_EPS = 1e-12


@dataclass(frozen=True)
class ObservationMatrix:
    """Unit direction rows from the estimated target to each anchor."""

    rows: np.ndarray            # (m, 3), unit rows
    anchor_ids: tuple[int, ...]

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.shape[1] != 3:
            raise ValueError("rows must be (m, 3)")
        if self.rows.shape[0] != len(self.anchor_ids):
            raise ValueError("row/id mismatch")
        norms = np.linalg.norm(self.rows, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("rows must be unit vectors")

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    def without_row(self, i: int) -> "ObservationMatrix":
        keep = [k for k in range(self.m) if k != i]
        return ObservationMatrix(self.rows[keep],
                                 tuple(self.anchor_ids[k] for k in keep))


def observation_matrix(est_target: np.ndarray,
                       anchors: dict[int, np.ndarray]) -> ObservationMatrix:
    """Rows (p_hat - p_i)/d_i with d_i the estimated range."""
    ids = sorted(anchors)
    rows = []
    for i in ids:
        diff = np.asarray(est_target, dtype=float) - np.asarray(anchors[i], dtype=float)
        d = np.linalg.norm(diff)
        if d == 0.0:
            raise ValueError(f"anchor {i} coincides with the target estimate")
        rows.append(diff / d)
    return ObservationMatrix(np.stack(rows), tuple(ids))


def _inverse_or_none(gram: np.ndarray):
    w = np.linalg.eigvalsh(gram)
    if w[0] <= _RANK_EPS * max(w[-1], 1.0):
        return None
    return np.linalg.inv(gram)


def gdop(obs: ObservationMatrix) -> float:
    """sqrt(trace((H^T H)^-1)); inf when the geometry loses rank."""
    if obs.m < 3:
        return math.inf
    inv = _inverse_or_none(obs.rows.T @ obs.rows)
    if inv is None:
        return math.inf
    return math.sqrt(np.trace(inv))


def contribution(obs: ObservationMatrix, i: int) -> float:
    """Increase in squared GDOP if row i were removed.

    Equals gdop(without i)^2 - gdop(all)^2; computed via the rank-one
    update trace(G h^T h G) / (1 - h G h^T).  Rows whose removal breaks
    observability get +inf.
    """
    if obs.m < 4:
        return math.inf
    inv = _inverse_or_none(obs.rows.T @ obs.rows)
    if inv is None:
        return math.inf
    h = obs.rows[i]
    gh = inv @ h
    denom = 1.0 - float(h @ gh)
    if denom <= ESSENTIAL_DENOMINATOR:
        return math.inf
    return float(gh @ gh) / denom


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple[int, ...]
    removal_trace: tuple[tuple[int, float], ...]


def greedy_select(obs: ObservationMatrix, n: int) -> SelectionResult:
    """Drop minimum-contribution anchors until n remain.

    No-op when m <= n.  Ties break toward the lowest anchor id; +inf
    contributions are only removed once no finite one is left.
    """
    if n < 4:
        raise ValueError("selection size must be >= 4")
    current = obs
    trace: list[tuple[int, float]] = []
    while current.m > n:
        contribs = [contribution(current, i) for i in range(current.m)]
        best = min(range(current.m),
                   key=lambda i: (contribs[i], current.anchor_ids[i]))
        trace.append((current.anchor_ids[best], contribs[best]))
        current = current.without_row(best)
    return SelectionResult(current.anchor_ids, tuple(trace))


def reconstruct_direction_row(masked_vectors: list[list[int]], expected: int,
                              codec: SignedFixedCodec) -> np.ndarray:
    """Aggregator-side recovery of one unit direction row.

    Sums the per-entity masked 3-vectors for a single candidate; the
    zero-sum masks cancel, leaving the quantized difference between the
    target estimate and the candidate position, which is then normalized.
    """
    if len(masked_vectors) != expected:
        raise ValueError(f"expected {expected} masked vectors, got {len(masked_vectors)}")
    diff = np.empty(3)
    for j in range(3):
        total = sum(vec[j] for vec in masked_vectors) % codec.modulus
        diff[j] = codec.decode(total)
    norm = np.linalg.norm(diff)
    if norm == 0.0:
        raise ValueError("degenerate row: candidate coincides with the estimate")
    return diff / norm

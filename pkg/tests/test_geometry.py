import math
import random

import numpy as np
import pytest

from privloc.encoding import SignedFixedCodec
from privloc.geometry import (SPEED_OF_LIGHT, GeometryError, Position,
                              build_system, design_row, ls_solve,
                              quantize_anchor_terms,
                              quantized_normal_equations, simulate_range,
                              solve_quantized)


def random_scene(rng, m, zlo=0.0, zhi=100.0):
    target = Position(rng.uniform(0, 1000), rng.uniform(0, 1000),
                      rng.uniform(zlo, zhi))
    anchors = [Position(rng.uniform(0, 1000), rng.uniform(0, 1000),
                        rng.uniform(zlo, zhi)) for _ in range(m)]
    return target, anchors


def observe(target, anchors, sigma, rng):
    return [simulate_range(target, a, sigma, rng, anchor_id=i,
                           t_send=rng.uniform(1e-4, 1e-3))
            for i, a in enumerate(anchors)]


def test_noiseless_range_is_distance():
    obs = simulate_range(Position(0, 0, 0), Position(300, 0, 0), 0.0,
                         random.Random(0))
    assert obs.measured_range == pytest.approx(300.0, abs=1e-9)


def test_range_noise_statistics():
    rng = random.Random(1)
    target, anchor = Position(0, 0, 0), Position(500, 0, 0)
    errors = [simulate_range(target, anchor, 6.1, rng).measured_range - 500.0
              for _ in range(10_000)]
    std = float(np.std(errors))
    assert std == pytest.approx(6.1e-9 * SPEED_OF_LIGHT, rel=0.05)  # ~1.829 m


def test_anchor_at_target_degenerate():
    rng = random.Random(2)
    obs = simulate_range(Position(1, 2, 3), Position(1, 2, 3), 6.1, rng)
    assert abs(obs.measured_range) < 1e-5  # |noise| only


def test_design_row_definitional():
    row = design_row(Position(3.0, -4.0, 5.0))
    assert np.array_equal(row, [-6.0, 8.0, -10.0, 1.0])


def test_build_system_matches_hand_assembly():
    rng = random.Random(3)
    target, anchors = random_scene(rng, 6)
    obs = observe(target, anchors, 6.1, rng)
    A, b = build_system(obs, anchors)
    for i, (o, a) in enumerate(zip(obs, anchors)):
        assert np.array_equal(A[i], [-2 * a.x, -2 * a.y, -2 * a.z, 1.0])
        d = o.measured_range
        assert b[i] == pytest.approx(d * d - (a.x ** 2 + a.y ** 2 + a.z ** 2),
                                     rel=1e-12)


def test_build_system_needs_four_anchors():
    rng = random.Random(4)
    target, anchors = random_scene(rng, 3)
    obs = observe(target, anchors, 0.0, rng)
    with pytest.raises(ValueError):
        build_system(obs, anchors)


def test_noiseless_exact_recovery_and_r0():
    rng = random.Random(5)
    target, anchors = random_scene(rng, 6)
    obs = observe(target, anchors, 0.0, rng)
    pos, r0 = ls_solve(*build_system(obs, anchors))
    assert pos.distance_to(target) < 1e-6
    want_r0 = target.x ** 2 + target.y ** 2 + target.z ** 2
    assert r0 == pytest.approx(want_r0, rel=1e-6)


def test_coplanar_anchors_rejected():
    rng = random.Random(6)
    target = Position(400, 400, 50)
    anchors = [Position(rng.uniform(0, 1000), rng.uniform(0, 1000), 30.0)
               for _ in range(8)]
    obs = observe(target, anchors, 0.0, rng)
    with pytest.raises(GeometryError) as err:
        ls_solve(*build_system(obs, anchors))
    assert err.value.condition is None or err.value.condition > 1e12


def test_residual_orthogonality():
    rng = random.Random(7)
    target, anchors = random_scene(rng, 10)
    obs = observe(target, anchors, 6.1, rng)
    A, b = build_system(obs, anchors)
    pos, r0 = ls_solve(A, b)
    x = np.array([pos.x, pos.y, pos.z, r0])
    residual = A.T @ (A @ x - b)
    assert np.all(np.abs(residual) / (np.abs(A.T @ b) + 1.0) < 1e-9)


def test_rmse_improves_with_anchor_count():
    rng = random.Random(8)
    rmse = {}
    for m in (6, 12, 24):
        sq = []
        for _ in range(200):
            target, anchors = random_scene(rng, m)
            obs = observe(target, anchors, 6.1, rng)
            try:
                pos, _ = ls_solve(*build_system(obs, anchors))
            except GeometryError:
                continue
            sq.append(pos.distance_to(target) ** 2)
        rmse[m] = math.sqrt(sum(sq) / len(sq))
    assert rmse[6] > rmse[12] > rmse[24]


def test_quantized_pipeline_tracks_float():
    rng = random.Random(9)
    codec = SignedFixedCodec(12, (1 << 256) - 1)
    target, anchors = random_scene(rng, 12)
    obs = observe(target, anchors, 6.1, rng)
    pos_f, _ = ls_solve(*build_system(obs, anchors))
    terms = [quantize_anchor_terms(o, anchors[o.anchor_id], codec) for o in obs]
    gram, rhs = quantized_normal_equations(terms)
    pos_q, _ = solve_quantized(gram, rhs, codec)
    assert pos_q.distance_to(pos_f) < 5e-3


def test_quantized_rhs_identity():
    # the masked-path split of b equals the direct (range^2 - R) form,
    # exactly, on the integer grid
    rng = random.Random(10)
    codec = SignedFixedCodec(12, (1 << 256) - 1)
    target, anchors = random_scene(rng, 8)
    for o in observe(target, anchors, 6.1, rng):
        t = quantize_anchor_terms(o, anchors[o.anchor_id], codec)
        qd = t.q_tau_recv - t.q_tau_send
        direct = qd * qd - sum(c * c for c in t.coords)
        assert t.rhs_entry == direct

import random

import pytest

from privloc.encoding import SignedFixedCodec


@pytest.fixture
def codec():
    return SignedFixedCodec(10, (1 << 64) - 59)


def test_signed_encode_examples(codec):
    n = codec.modulus
    assert codec.encode(-1.5) == n - 1536
    assert codec.decode(n - 1536) == -1.5
    assert codec.encode(0) == 0
    assert codec.decode(0) == 0.0


def test_dyadic_roundtrip_exact(codec):
    rng = random.Random(1)
    for _ in range(500):
        x = rng.randrange(-(1 << 30), 1 << 30) / (1 << 10)
        assert codec.decode(codec.encode(x)) == x


def test_scale_powers(codec):
    # products of scale-1 values live at scale 2, sums decode exactly
    rng = random.Random(2)
    for _ in range(100):
        a = rng.randrange(-(1 << 20), 1 << 20)
        b = rng.randrange(-(1 << 20), 1 << 20)
        residue = codec.to_residue(a * b)
        assert codec.decode(residue, power=2) == (a * b) / (1 << 20)


def test_sum_of_encoded_decodes_to_sum(codec):
    rng = random.Random(3)
    xs = [rng.randrange(-(1 << 25), 1 << 25) / (1 << 10) for _ in range(40)]
    total = sum(codec.encode(x) for x in xs) % codec.modulus
    assert codec.decode(total) == pytest.approx(sum(xs), abs=1e-9)


def test_overflow_rejected(codec):
    with pytest.raises(ValueError):
        codec.encode(2.0 ** 60)
    with pytest.raises(ValueError):
        codec.to_residue(codec.modulus // 2 + 1)
    with pytest.raises(ValueError):
        codec.from_residue(-1)


def test_centered_residues(codec):
    n = codec.modulus
    assert codec.from_residue(n - 5) == -5
    assert codec.from_residue(5) == 5
    assert codec.to_residue(-5) == n - 5

import json
import math
import random

import pytest

from privloc import paillier
from privloc.paillier import (Ciphertext, CiphertextError, KeyMismatchError,
                              ct_vec_matmul, decrypt, encrypt, hom_add,
                              hom_scalar_mul, keygen, keypair_from_primes)


def test_toy_keypair():
    pk, sk = keypair_from_primes(5, 7)
    assert pk.n == 35 and pk.g == 36
    assert sk.lam == 12 and sk.alpha == 3
    assert sk.alpha * 12 % 35 == 1


def test_toy_encrypt_decrypt(toy_key):
    pk, sk = toy_key
    rng = random.Random(0)
    assert encrypt(pk, 0, rng, r=1).value == 1
    c = encrypt(pk, 3, rng, r=1)
    assert c.value == 106
    assert decrypt(sk, c) == 3
    assert decrypt(sk, encrypt(pk, 0, rng)) == 0


def test_toy_homomorphic_ops(toy_key):
    pk, sk = toy_key
    rng = random.Random(0)
    c3 = encrypt(pk, 3, rng, r=1)
    c4 = encrypt(pk, 4, rng, r=1)
    s = hom_add(pk, c3, c4)
    assert s.value == 246
    assert decrypt(sk, s) == 7
    d = hom_scalar_mul(pk, 2, c3)
    assert d.value == 211
    assert decrypt(sk, d) == 6
    # identities
    assert decrypt(sk, hom_add(pk, c3, encrypt(pk, 0, rng, r=1))) == 3
    assert decrypt(sk, hom_scalar_mul(pk, 1, c3)) == 3


def test_keygen_sizes_and_determinism():
    pk, sk = keygen(512, random.Random(42))
    assert pk.n.bit_length() == 512
    assert pk.g == pk.n + 1
    # Eq.-style private key identity: alpha * L(g^lambda mod n^2) = 1 mod n
    u = pow(pk.g, sk.lam, pk.n_sq)
    assert (u - 1) % pk.n == 0
    assert (u - 1) // pk.n * sk.alpha % pk.n == 1
    pk2, sk2 = keygen(512, random.Random(42))
    assert (pk2, sk2) == (pk, sk)
    with pytest.raises(ValueError):
        keygen(8, random.Random(0))


def test_roundtrip_randomized(key_512):
    pk, sk = key_512
    rng = random.Random(7)
    for _ in range(200):
        m = rng.randrange(pk.n)
        assert decrypt(sk, encrypt(pk, m, rng)) == m


def test_additivity_and_scalar(key_512):
    pk, sk = key_512
    rng = random.Random(8)
    for _ in range(100):
        m1, m2, k = rng.randrange(pk.n), rng.randrange(pk.n), rng.randrange(pk.n)
        c1, c2 = encrypt(pk, m1, rng), encrypt(pk, m2, rng)
        assert decrypt(sk, hom_add(pk, c1, c2)) == (m1 + m2) % pk.n
        assert decrypt(sk, hom_scalar_mul(pk, k, c1)) == k * m1 % pk.n


def test_fold_of_shares_decrypts_to_sum(key_512):
    pk, sk = key_512
    rng = random.Random(9)
    shares = [rng.randrange(pk.n) for _ in range(12)]
    acc = encrypt(pk, shares[0], rng)
    for s in shares[1:]:
        acc = hom_add(pk, acc, encrypt(pk, s, rng))
    assert decrypt(sk, acc) == sum(shares) % pk.n


def test_carmichael_identities(key_512):
    pk, sk = key_512
    rng = random.Random(10)
    for _ in range(50):
        y = rng.randrange(2, pk.n)
        if math.gcd(y, pk.n) != 1:
            continue
        assert pow(y, sk.lam, pk.n) == 1
        assert pow(y, pk.n * sk.lam, pk.n_sq) == 1


def test_reencryption_freshness(key_512):
    pk, _ = key_512
    rng = random.Random(11)
    seen = {encrypt(pk, 123, rng).value for _ in range(50)}
    assert len(seen) == 50


def test_encrypt_range_errors(key_128):
    pk, _ = key_128
    rng = random.Random(0)
    with pytest.raises(ValueError):
        encrypt(pk, pk.n, rng)
    with pytest.raises(ValueError):
        encrypt(pk, -1, rng)


def test_key_binding_and_corruption(key_128):
    pk, sk = key_128
    rng = random.Random(0)
    other_pk, other_sk = paillier.keygen(128, random.Random(99))
    ct = encrypt(pk, 5, rng)
    with pytest.raises(KeyMismatchError):
        decrypt(other_sk, ct)
    with pytest.raises(KeyMismatchError):
        hom_add(pk, ct, encrypt(other_pk, 1, rng))
    with pytest.raises(KeyMismatchError):
        hom_scalar_mul(other_pk, 2, ct)
    # a multiple of n is never a valid residue under this key
    with pytest.raises(CiphertextError):
        decrypt(sk, Ciphertext(pk.n, pk.key_id))


def test_ct_vec_matmul(key_128):
    pk, sk = key_128
    rng = random.Random(3)
    v = [encrypt(pk, x, rng) for x in (1, 2)]
    eye = [[1, 0], [0, 1]]
    assert [decrypt(sk, c) for c in ct_vec_matmul(pk, eye, v)] == [1, 2]
    ones = [[1, 1], [1, 1]]
    assert [decrypt(sk, c) for c in ct_vec_matmul(pk, ones, v)] == [3, 3]
    for _ in range(25):
        mat = [[rng.randrange(pk.n) for _ in range(4)] for _ in range(4)]
        msgs = [rng.randrange(pk.n) for _ in range(4)]
        cts = [encrypt(pk, x, rng) for x in msgs]
        got = [decrypt(sk, c) for c in ct_vec_matmul(pk, mat, cts)]
        want = [sum(mat[j][k] * msgs[k] for k in range(4)) % pk.n
                for j in range(4)]
        assert got == want
    with pytest.raises(ValueError):
        ct_vec_matmul(pk, [[1, 2, 3]], v)


def test_key_serialization(key_128):
    pk, sk = key_128
    pk2 = paillier.public_key_from_json(paillier.public_key_to_json(pk))
    sk2 = paillier.private_key_from_json(paillier.private_key_to_json(sk))
    assert pk2 == pk and sk2 == sk
    obj = json.loads(paillier.public_key_to_json(pk))
    assert obj == {"n": str(pk.n), "g": str(pk.g)}
    assert paillier.ciphertext_wire_bits(pk) == 2 * pk.n.bit_length()

"""Paillier cryptosystem with the additive homomorphic operations.

Public key is (n, g) with g fixed to n+1, which makes g^m = 1 + m*n
(mod n^2) and keeps encryption to a single big exponentiation.  The
private key is (lambda, alpha) where lambda = lcm(p-1, q-1) and alpha
inverts L(g^lambda mod n^2) modulo n, L(x) = (x-1)/n.

All functions are pure given their explicit randomness source, so values
are safe to share across threads.  Randomness comes from a caller-owned
random.Random so that key generation and encryption are reproducible
under a fixed seed; this is a simulator, not a hardened implementation.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from random import Random

from privloc import backend

MILLER_RABIN_ROUNDS = 64

_SMALL_PRIMES = [3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113]


class KeyMismatchError(ValueError):
    """Operation mixed ciphertexts or keys from different keypairs."""


class CiphertextError(ValueError):
    """Ciphertext is not a valid residue under the given key."""


def _key_id(n: int, g: int) -> str:
    h = hashlib.sha256()
    h.update(str(n).encode())
    h.update(b"/")
    h.update(str(g).encode())
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class PaillierPublicKey:
    n: int
    g: int
    n_sq: int
    key_id: str

    @property
    def bit_length(self) -> int:
        return self.n.bit_length()


@dataclass(frozen=True)
class PaillierPrivateKey:
    lam: int
    alpha: int
    n: int
    key_id: str


@dataclass(frozen=True)
class Ciphertext:
    value: int
    key_id: str


def is_probable_prime(n: int, rng: Random, rounds: int = MILLER_RABIN_ROUNDS) -> bool:
    """Miller-Rabin test with rng-chosen bases."""
    if n < 2:
        return False
    for p in [2] + _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = backend.powmod(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _random_prime(bits: int, rng: Random) -> int:
    while True:
        cand = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if is_probable_prime(cand, rng):
            return cand


def keypair_from_primes(p: int, q: int) -> tuple[PaillierPublicKey, PaillierPrivateKey]:
    """Assemble a keypair from given primes (used for small test vectors)."""
    if p == q:
        raise ValueError("primes must be distinct")
    n = p * q
    if math.gcd(n, (p - 1) * (q - 1)) != 1:
        raise ValueError("primes violate gcd(pq, (p-1)(q-1)) = 1")
    g = n + 1
    n_sq = n * n
    lam = math.lcm(p - 1, q - 1)
    # alpha = L(g^lambda mod n^2)^-1 mod n; with g = n+1 this is lambda^-1
    u = backend.powmod(g, lam, n_sq) - 1
    if u % n:
        raise ValueError("invalid generator")
    alpha = pow(u // n, -1, n)
    kid = _key_id(n, g)
    return (PaillierPublicKey(n, g, n_sq, kid),
            PaillierPrivateKey(lam, alpha, n, kid))


def keygen(bit_length: int, rng: Random) -> tuple[PaillierPublicKey, PaillierPrivateKey]:
    """Generate a keypair with an n of roughly bit_length bits.

    bit_length >= 16; small sizes are allowed for tests but offer no
    security.
    """
    if bit_length < 16:
        raise ValueError("bit_length must be >= 16")
    half = bit_length // 2
    while True:
        p = _random_prime(half, rng)
        q = _random_prime(half, rng)
        if p == q:
            continue
        if math.gcd(p * q, (p - 1) * (q - 1)) == 1:
            return keypair_from_primes(p, q)


def _draw_unit(rng: Random, n: int) -> int:
    while True:
        r = rng.randrange(1, n)
        if math.gcd(r, n) == 1:
            return r


def encrypt(pk: PaillierPublicKey, m: int, rng: Random, r: int | None = None) -> Ciphertext:
    """Encrypt a residue 0 <= m < n with fresh randomness r from Z_n^*."""
    if not 0 <= m < pk.n:
        raise ValueError(f"plaintext {m} outside [0, n)")
    if r is None:
        r = _draw_unit(rng, pk.n)
    if pk.g == pk.n + 1:
        c = backend.encrypt_raw(m, r, pk.n, pk.n_sq)
    else:
        c = backend.powmod(pk.g, m, pk.n_sq) * backend.powmod(r, pk.n, pk.n_sq) % pk.n_sq
    return Ciphertext(c, pk.key_id)


def decrypt(sk: PaillierPrivateKey, ct: Ciphertext) -> int:
    if ct.key_id != sk.key_id:
        raise KeyMismatchError("ciphertext was made under a different key")
    try:
        return backend.decrypt_raw(ct.value, sk.lam, sk.alpha, sk.n, sk.n * sk.n)
    except ValueError as exc:
        raise CiphertextError(str(exc)) from None


def hom_add(pk: PaillierPublicKey, c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    """Ciphertext of m1 + m2 (mod n): the product c1*c2 mod n^2."""
    if c1.key_id != c2.key_id or c1.key_id != pk.key_id:
        raise KeyMismatchError("cannot add ciphertexts under different keys")
    return Ciphertext(c1.value * c2.value % pk.n_sq, pk.key_id)


def hom_scalar_mul(pk: PaillierPublicKey, k: int, ct: Ciphertext) -> Ciphertext:
    """Ciphertext of k*m (mod n): c^k mod n^2, for a residue 0 <= k < n."""
    if ct.key_id != pk.key_id:
        raise KeyMismatchError("ciphertext was made under a different key")
    if not 0 <= k < pk.n:
        raise ValueError("scalar must be a residue in [0, n); encode signed values first")
    return Ciphertext(backend.powmod(ct.value, k, pk.n_sq), pk.key_id)


def ct_vec_matmul(pk: PaillierPublicKey, matrix, vector: list[Ciphertext]) -> list[Ciphertext]:
    """Plaintext matrix times ciphertext vector.

    Entry j of the result decrypts to sum_k matrix[j][k] * m_k (mod n).
    Matrix entries must already be residues in [0, n).
    """
    if any(len(row) != len(vector) for row in matrix):
        raise ValueError("matrix and vector dimensions do not conform")
    out = []
    for row in matrix:
        acc = None
        for k, ct in zip(row, vector):
            term = hom_scalar_mul(pk, k, ct)
            acc = term if acc is None else hom_add(pk, acc, term)
        out.append(acc)
    return out


def ciphertext_wire_bits(pk: PaillierPublicKey) -> int:
    """Wire size of one ciphertext: 2x the modulus width."""
    return 2 * pk.bit_length


def public_key_to_json(pk: PaillierPublicKey) -> str:
    return json.dumps({"n": str(pk.n), "g": str(pk.g)})


def public_key_from_json(data: str) -> PaillierPublicKey:
    obj = json.loads(data)
    n, g = int(obj["n"]), int(obj["g"])
    return PaillierPublicKey(n, g, n * n, _key_id(n, g))


def private_key_to_json(sk: PaillierPrivateKey) -> str:
    return json.dumps({"n": str(sk.n), "lambda": str(sk.lam), "alpha": str(sk.alpha)})


def private_key_from_json(data: str) -> PaillierPrivateKey:
    obj = json.loads(data)
    n = int(obj["n"])
    return PaillierPrivateKey(int(obj["lambda"]), int(obj["alpha"]), n,
                              _key_id(n, n + 1))

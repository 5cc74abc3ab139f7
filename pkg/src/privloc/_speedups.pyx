# cython: language_level=3
"""GMP-backed big-integer kernels for the Paillier hot path.

Mirrors the pure-Python functions in privloc.backend; selected at import
time when available.  Only nonnegative operands are supported (all
protocol values are ring residues).
"""

from cpython.bytearray cimport PyByteArray_AsString

cdef extern from "gmp.h":
    ctypedef struct __mpz_struct:
        pass
    ctypedef __mpz_struct mpz_t[1]
    void mpz_init(mpz_t)
    void mpz_clear(mpz_t)
    void mpz_import(mpz_t, size_t, int, size_t, int, size_t, const void *)
    void *mpz_export(void *, size_t *, int, size_t, int, size_t, const mpz_t)
    void mpz_powm(mpz_t, const mpz_t, const mpz_t, const mpz_t)
    void mpz_mul(mpz_t, const mpz_t, const mpz_t)
    void mpz_mod(mpz_t, const mpz_t, const mpz_t)
    void mpz_add_ui(mpz_t, const mpz_t, unsigned long)
    void mpz_sub_ui(mpz_t, const mpz_t, unsigned long)
    int mpz_divisible_p(const mpz_t, const mpz_t)
    void mpz_divexact(mpz_t, const mpz_t, const mpz_t)
    size_t mpz_sizeinbase(const mpz_t, int)
    int mpz_sgn(const mpz_t)

BACKEND_NAME = "compiled"


cdef int _load(mpz_t z, object v) except -1:
    if v < 0:
        raise ValueError("negative operand")
    cdef bytes b = v.to_bytes((v.bit_length() + 7) // 8 or 1, "little")
    mpz_import(z, len(b), -1, 1, 0, 0, <const char *>b)
    return 0


cdef object _store(mpz_t z):
    if mpz_sgn(z) == 0:
        return 0
    cdef size_t nbytes = (mpz_sizeinbase(z, 2) + 7) // 8
    buf = bytearray(nbytes)
    cdef size_t written = 0
    mpz_export(PyByteArray_AsString(buf), &written, -1, 1, 0, 0, z)
    return int.from_bytes(buf, "little")


def powmod(object base, object exp, object mod):
    """base**exp % mod for nonnegative big integers."""
    cdef mpz_t b, e, m, r
    mpz_init(b); mpz_init(e); mpz_init(m); mpz_init(r)
    try:
        _load(b, base); _load(e, exp); _load(m, mod)
        if mpz_sgn(m) == 0:
            raise ValueError("zero modulus")
        mpz_powm(r, b, e, m)
        return _store(r)
    finally:
        mpz_clear(b); mpz_clear(e); mpz_clear(m); mpz_clear(r)


def encrypt_raw(object m, object r, object n, object n_sq):
    """Paillier ciphertext (1 + m*n) * r**n  mod n**2, for generator n+1."""
    cdef mpz_t zm, zr, zn, zn2, acc, t
    mpz_init(zm); mpz_init(zr); mpz_init(zn); mpz_init(zn2)
    mpz_init(acc); mpz_init(t)
    try:
        _load(zm, m); _load(zr, r); _load(zn, n); _load(zn2, n_sq)
        mpz_mul(t, zm, zn)
        mpz_add_ui(t, t, 1)
        mpz_mod(t, t, zn2)           # g^m = 1 + m n  (mod n^2)
        mpz_powm(acc, zr, zn, zn2)   # r^n mod n^2
        mpz_mul(acc, acc, t)
        mpz_mod(acc, acc, zn2)
        return _store(acc)
    finally:
        mpz_clear(zm); mpz_clear(zr); mpz_clear(zn); mpz_clear(zn2)
        mpz_clear(acc); mpz_clear(t)


def decrypt_raw(object c, object lam, object alpha, object n, object n_sq):
    """Paillier plaintext L(c**lam mod n**2) * alpha mod n.

    Raises ValueError when the L argument is not an exact multiple of n,
    i.e. the ciphertext is not a valid residue under this key.
    """
    cdef mpz_t zc, zl, za, zn, zn2, t
    mpz_init(zc); mpz_init(zl); mpz_init(za); mpz_init(zn); mpz_init(zn2)
    mpz_init(t)
    try:
        _load(zc, c); _load(zl, lam); _load(za, alpha)
        _load(zn, n); _load(zn2, n_sq)
        mpz_powm(t, zc, zl, zn2)
        mpz_sub_ui(t, t, 1)
        if not mpz_divisible_p(t, zn):
            raise ValueError("ciphertext is not a valid residue for this key")
        mpz_divexact(t, t, zn)
        mpz_mul(t, t, za)
        mpz_mod(t, t, zn)
        return _store(t)
    finally:
        mpz_clear(zc); mpz_clear(zl); mpz_clear(za); mpz_clear(zn)
        mpz_clear(zn2); mpz_clear(t)

"""Arithmetic backend selection.

The Paillier operations reduce to a handful of big-integer kernels; at
512-bit keys they dominate the simulator's runtime.  A GMP-backed
extension (privloc._speedups) provides them ~8x faster than CPython's
built-in pow.  The pure-Python implementations below are the reference
and the fallback when the extension is absent.

Set PRIVLOC_BACKEND=python or PRIVLOC_BACKEND=compiled to force a choice;
forcing "compiled" raises if the extension is not importable.
"""

import os


def _py_powmod(base, exp, mod):
    return pow(base, exp, mod)


def _py_encrypt_raw(m, r, n, n_sq):
    # generator fixed at n+1, so g^m = 1 + m*n (mod n^2)
    return (1 + m * n) % n_sq * pow(r, n, n_sq) % n_sq


def _py_decrypt_raw(c, lam, alpha, n, n_sq):
    u = pow(c, lam, n_sq) - 1
    if u % n:
        raise ValueError("ciphertext is not a valid residue for this key")
    return (u // n) * alpha % n


_forced = os.environ.get("PRIVLOC_BACKEND", "").strip().lower()

if _forced == "python":
    _impl = None
else:
    try:
        from privloc import _speedups as _impl
    except ImportError:
        _impl = None
        if _forced == "compiled":
            raise

if _impl is not None:
    BACKEND_NAME = "compiled"
    powmod = _impl.powmod
    encrypt_raw = _impl.encrypt_raw
    decrypt_raw = _impl.decrypt_raw
else:
    BACKEND_NAME = "python"
    powmod = _py_powmod
    encrypt_raw = _py_encrypt_raw
    decrypt_raw = _py_decrypt_raw

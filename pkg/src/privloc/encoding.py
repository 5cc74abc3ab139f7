"""Signed fixed-point encoding between real protocol quantities and Z_n.

Values are quantized to the grid 2^-frac_bits and stored as centered
residues: residues above n/2 decode as negatives.  Products of encoded
values accumulate scale, so every decoded quantity carries an explicit
power: scale^1 for raw coordinates/ranges, scale^2 for Gram and
range-squared terms, scale^3 for the assembled right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SignedFixedCodec:
    frac_bits: int
    modulus: int

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    def quantize(self, x: float) -> int:
        """Nearest grid integer round(x * 2^frac_bits), range-checked."""
        q = round(x * self.scale)
        if 2 * abs(q) >= self.modulus:
            raise ValueError(f"encoded magnitude {q} exceeds modulus/2")
        return q

    def to_residue(self, v: int) -> int:
        """Signed integer -> centered residue."""
        if 2 * abs(v) >= self.modulus:
            raise ValueError(f"encoded magnitude {v} exceeds modulus/2")
        return v % self.modulus

    def from_residue(self, m: int) -> int:
        """Centered residue -> signed integer."""
        if not 0 <= m < self.modulus:
            raise ValueError("not a residue")
        return m - self.modulus if 2 * m >= self.modulus else m

    def encode(self, x: float, power: int = 1) -> int:
        """Real value -> residue at scale^power."""
        q = round(x * (1 << (self.frac_bits * power)))
        return self.to_residue(q)

    def decode(self, m: int, power: int = 1) -> float:
        """Residue at scale^power -> real value."""
        return self.from_residue(m) / (1 << (self.frac_bits * power))

"""Arithmetic in the prime field F_p: Legendre table, primitive root, characters."""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
    for q in small:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in small:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def prime_factors(n: int) -> list[int]:
    out, q = [], 2
    while q * q <= n:
        if n % q == 0:
            out.append(q)
            while n % q == 0:
                n //= q
        q += 1
    if n > 1:
        out.append(n)
    return out


def primes_1mod4(p_min: int, p_max: int) -> list[int]:
    """Primes p = 1 (mod 4) with p_min <= p <= p_max, via a sieve."""
    if p_max < 5 or p_max < p_min:
        return []
    sieve = np.ones(p_max + 1, dtype=bool)
    sieve[:2] = False
    for q in range(2, int(p_max**0.5) + 1):
        if sieve[q]:
            sieve[q * q :: q] = False
    return [int(q) for q in np.flatnonzero(sieve) if q >= p_min and q % 4 == 1]


@dataclass(frozen=True, eq=False)
class PrimeContext:
    p: int
    legendre_table: np.ndarray = field(repr=False)
    generator: int
    unity_table: np.ndarray = field(repr=False)
    dlog: np.ndarray = field(repr=False)  # dlog[h^k] = k, dlog[0] = -1

    @property
    def paley(self) -> bool:
        return self.p % 4 == 1

    @property
    def chi_index(self) -> int:
        return (self.p - 1) // 2

    def require_paley(self) -> None:
        if not self.paley:
            raise ValueError(f"p={self.p} is not 1 mod 4; Paley structure undefined")

    def inv(self, a: int) -> int:
        a %= self.p
        if a == 0:
            raise ZeroDivisionError("0 has no inverse in F_p")
        return pow(a, self.p - 2, self.p)

    def character_table(self, j: int) -> np.ndarray:
        """Values phi_j(a) for a = 0..p-1, with phi_j(0) = 0."""
        return _character_table(self, j)


def make_context(p: int) -> PrimeContext:
    p = int(p)
    if p < 3 or not is_prime(p):
        raise ValueError(f"{p} is not an odd prime")
    half = (p - 1) // 2
    table = np.zeros(p, dtype=np.int64)
    for a in range(1, p):
        table[a] = 1 if pow(a, half, p) == 1 else -1
    factors = prime_factors(p - 1)
    h = next(g for g in range(2, p) if all(pow(g, (p - 1) // q, p) != 1 for q in factors))
    dlog = np.full(p, -1, dtype=np.int64)
    x = 1
    for k in range(p - 1):
        dlog[x] = k
        x = x * h % p
    unity = np.exp(2j * np.pi * np.arange(p) / p)
    for arr in (table, dlog, unity):
        arr.setflags(write=False)
    return PrimeContext(p, table, h, unity, dlog)


def legendre(ctx: PrimeContext, a: int) -> int:
    return int(ctx.legendre_table[a % ctx.p])


def additive_character(ctx: PrimeContext, x: int) -> complex:
    return complex(ctx.unity_table[x % ctx.p])


def mult_character(ctx: PrimeContext, j: int, a: int) -> complex:
    if not 0 <= j <= ctx.p - 2:
        raise IndexError(f"character index {j} outside 0..{ctx.p - 2}")
    a %= ctx.p
    if a == 0:
        return 0j
    return cmath.exp(2j * cmath.pi * j * int(ctx.dlog[a]) / (ctx.p - 1))


@lru_cache(maxsize=256)
def _character_table(ctx: PrimeContext, j: int) -> np.ndarray:
    if not 0 <= j <= ctx.p - 2:
        raise IndexError(f"character index {j} outside 0..{ctx.p - 2}")
    k = ctx.dlog[1:]
    vals = np.zeros(ctx.p, dtype=complex)
    vals[1:] = np.exp(2j * np.pi * ((j * k) % (ctx.p - 1)) / (ctx.p - 1))
    vals.setflags(write=False)
    return vals

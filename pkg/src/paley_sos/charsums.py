"""Gauss, Kloosterman and mixed character sums over F_p, plus a Weil-bound checker."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .field import PrimeContext


@dataclass(frozen=True)
class KloostermanTable:
    p: int
    k: int
    values: np.ndarray  # values[a] = K_k(a) for a = 1..p-1; values[0] unused (nan)

    def __getitem__(self, a: int) -> complex:
        a %= self.p
        if a == 0:
            raise ValueError("Kloosterman sums are indexed by nonzero residues")
        return complex(self.values[a])


@dataclass(frozen=True)
class WeilReport:
    sum: float
    degree: int
    is_square_form: bool
    bound_holds: bool | None  # None when the bound does not apply


def _inverses(p: int) -> np.ndarray:
    inv = np.zeros(p, dtype=np.int64)
    inv[1:] = [pow(x, p - 2, p) for x in range(1, p)]
    return inv


def gauss_sum(ctx: PrimeContext, j: int) -> complex:
    return complex(np.sum(ctx.character_table(j) * ctx.unity_table))


def kloosterman_direct(ctx: PrimeContext, k: int, a: int) -> complex:
    """K_2 in O(p) and K_3 in O(p^2) straight from the definition."""
    p = ctx.p
    a %= p
    if a == 0:
        raise ValueError("a must be nonzero")
    x = np.arange(1, p)
    inv = _inverses(p)
    if k == 2:
        return complex(ctx.unity_table[(x + a * inv[x]) % p].sum())
    if k == 3:
        xy = np.outer(x, x) % p
        arg = (x[:, None] + x[None, :] + a * inv[xy]) % p
        return complex(ctx.unity_table[arg].sum())
    raise ValueError("direct evaluation only for k in {2, 3}")


@lru_cache(maxsize=64)
def _kloosterman_values(ctx: PrimeContext, k: int) -> np.ndarray:
    p = ctx.p
    inv = _inverses(p)
    x = np.arange(1, p)
    # idx[a-1, x-1] = a * x^{-1}
    idx = (np.outer(x, inv[1:])) % p
    f = np.zeros(p, dtype=complex)
    f[1:] = ctx.unity_table[1:]
    for _ in range(k - 1):
        g = np.zeros(p, dtype=complex)
        g[1:] = (f[1:][None, :] * ctx.unity_table[idx]).sum(axis=1)
        f = g
    f[0] = np.nan
    f.setflags(write=False)
    return f


def kloosterman_table(ctx: PrimeContext, k: int) -> KloostermanTable:
    if k < 2:
        raise ValueError("order k must be at least 2")
    return KloostermanTable(ctx.p, k, _kloosterman_values(ctx, k))


def kloosterman(ctx: PrimeContext, k: int, a: int) -> complex:
    if a % ctx.p == 0:
        raise ValueError("a must be nonzero")
    if k in (2, 3):
        return kloosterman_direct(ctx, k, a)
    return kloosterman_table(ctx, k)[a]


def kloosterman_rewrite(ctx: PrimeContext, a: int) -> complex:
    """Sum_x chi(x^2 - 1) e_p(2ax), which should equal K(a^2)."""
    p = ctx.p
    x = np.arange(p)
    chi = ctx.legendre_table[(x * x - 1) % p]
    return complex(np.sum(chi * ctx.unity_table[(2 * a * x) % p]))


def _nontrivial(ctx: PrimeContext, j: int) -> None:
    if not 0 <= j <= ctx.p - 2:
        raise IndexError(f"character index {j} outside 0..{ctx.p - 2}")
    if j == 0:
        raise ValueError("trivial character not allowed here")


def twisted_moment(ctx: PrimeContext, j: int) -> complex:
    """Sum_a phi_j(a) K(a^2)^2."""
    _nontrivial(ctx, j)
    p = ctx.p
    K = kloosterman_table(ctx, 2).values
    a = np.arange(1, p)
    return complex(np.sum(ctx.character_table(j)[a] * K[a * a % p] ** 2))


def twisted_moment_general(ctx: PrimeContext, j: int, k: int, s: int, t: int) -> complex:
    """Sum_a phi_j(a) K_k(a)^s conj(K_k(a))^t."""
    _nontrivial(ctx, j)
    if k < 2 or s < 0 or t < 0 or s + t == 0:
        raise ValueError("need k >= 2, s, t >= 0 and s + t >= 1")
    K = kloosterman_table(ctx, k).values[1:]
    phi = ctx.character_table(j)[1:]
    return complex(np.sum(phi * K**s * np.conj(K) ** t))


def moment_scale(p: int, k: int, s: int, t: int) -> float:
    """The normalisation p^{((k-1)(s+t)+1)/2} used for twisted moments."""
    return p ** (((k - 1) * (s + t) + 1) / 2)


def charsum_pair(ctx: PrimeContext, j: int) -> complex:
    """Sum_{x,y} chi(x(x+1)y(y+1)) phi_j(x-y); the trivial character is taken as 1 everywhere."""
    p = ctx.p
    x = np.arange(p)
    w = ctx.legendre_table[x * (x + 1) % p].astype(float)
    if j == 0:
        return complex(w.sum() ** 2)
    phi = ctx.character_table(j)
    diff = (x[:, None] - x[None, :]) % p
    return complex(w @ phi[diff] @ w)


def charsum_pair_via_kloosterman(ctx: PrimeContext, j: int) -> complex:
    """The same sum rewritten as conj(phi(4)) G(phi)/p * Sum_a conj(phi(a)) K(a^2)^2."""
    _nontrivial(ctx, j)
    p = ctx.p
    phi = ctx.character_table(j)
    K = kloosterman_table(ctx, 2).values
    a = np.arange(1, p)
    moment = np.sum(np.conj(phi[a]) * K[a * a % p] ** 2)
    return complex(np.conj(phi[4 % p]) * gauss_sum(ctx, j) / p * moment)


def kloosterman_correlation(ctx: PrimeContext, shifts: Sequence[int]) -> complex:
    """Sum_x prod_i K(a_i x) over x in F_p^x."""
    p = ctx.p
    K = kloosterman_table(ctx, 2).values
    x = np.arange(1, p)
    prod = np.ones(p - 1, dtype=complex)
    for a in shifts:
        prod *= K[(a * x) % p]
    return complex(prod.sum())


# polynomials over F_p, coefficient lists low degree first


def _trim(f: list[int]) -> list[int]:
    f = list(f)
    while f and f[-1] == 0:
        f.pop()
    return f


def _monic(f: list[int], p: int) -> list[int]:
    inv = pow(f[-1], p - 2, p)
    return [c * inv % p for c in f]


def _divmod(f: list[int], g: list[int], p: int) -> tuple[list[int], list[int]]:
    f = _trim([c % p for c in f])
    g = _trim([c % p for c in g])
    inv = pow(g[-1], p - 2, p)
    q = [0] * max(len(f) - len(g) + 1, 0)
    while len(f) >= len(g) and f:
        shift = len(f) - len(g)
        c = f[-1] * inv % p
        q[shift] = c
        for i, gc in enumerate(g):
            f[i + shift] = (f[i + shift] - c * gc) % p
        f = _trim(f)
    return q, f


def _gcd(f: list[int], g: list[int], p: int) -> list[int]:
    f, g = _trim(f), _trim(g)
    while g:
        f, g = g, _divmod(f, g, p)[1]
    return _monic(f, p)


def _derivative(f: list[int], p: int) -> list[int]:
    return _trim([i * c % p for i, c in enumerate(f)][1:])


def squarefree_factorization(f: Sequence[int], p: int) -> list[tuple[list[int], int]]:
    """Pairs (g, m) with monic squarefree g of positive degree such that f = lc * prod g^m."""
    f = _trim([c % p for c in f])
    if not f:
        raise ValueError("zero polynomial")
    f = _monic(f, p)
    if len(f) == 1:
        return []
    out: list[tuple[list[int], int]] = []
    df = _derivative(f, p)
    if df:
        c = _gcd(f, df, p)
        w = _divmod(f, c, p)[0]
        i = 1
        while len(w) > 1:
            y = _gcd(w, c, p)
            fac = _divmod(w, y, p)[0]
            if len(fac) > 1:
                out.append((_monic(fac, p), i))
            i += 1
            w = y
            c = _divmod(c, y, p)[0]
        if len(c) > 1:
            root = c[::p]  # coefficients sit at multiples of p; a^p = a in F_p
            out += [(g, m * p) for g, m in squarefree_factorization(root, p)]
    else:
        out += [(g, m * p) for g, m in squarefree_factorization(f[::p], p)]
    return out


def is_square_form(f: Sequence[int], p: int) -> bool:
    """True iff f = r * g^2 for a constant r and a polynomial g over F_p."""
    return all(m % 2 == 0 for _, m in squarefree_factorization(f, p))


def poly_eval(f: Sequence[int], x: np.ndarray, p: int) -> np.ndarray:
    acc = np.zeros_like(x)
    for c in reversed(list(f)):
        acc = (acc * x + c) % p
    return acc


def weil_check(ctx: PrimeContext, f: Sequence[int]) -> WeilReport:
    """Character sum Sum_x chi(f(x)) against the bound deg(f) sqrt(p)."""
    p = ctx.p
    coeffs = _trim([int(c) % p for c in f])
    if not coeffs:
        raise ValueError("zero polynomial")
    d = len(coeffs) - 1
    if d < 1:
        raise ValueError("polynomial must have positive degree")
    x = np.arange(p, dtype=np.int64)
    s = float(ctx.legendre_table[poly_eval(coeffs, x, p)].sum())
    square = is_square_form(coeffs, p)
    holds = None if square else abs(s) <= d * math.sqrt(p) + 1e-9
    return WeilReport(s, d, square, holds)

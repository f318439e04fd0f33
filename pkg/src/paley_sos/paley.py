"""Paley graphs: construction, spectra, strong regularity and exact clique numbers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import PrimeContext, make_context


@dataclass(frozen=True, eq=False)
class PaleyGraph:
    ctx: PrimeContext
    adjacency: np.ndarray
    seidel: np.ndarray

    @property
    def p(self) -> int:
        return self.ctx.p

    def adjacent(self, a: int, b: int) -> bool:
        return bool(self.adjacency[a % self.p, b % self.p])


def build_paley(ctx: PrimeContext | int) -> PaleyGraph:
    if isinstance(ctx, int):
        ctx = make_context(ctx)
    ctx.require_paley()
    p = ctx.p
    x = np.arange(p)
    S = ctx.legendre_table[(x[:, None] - x[None, :]) % p].astype(np.int64)
    A = (S == 1).astype(np.int64)
    S.setflags(write=False)
    A.setflags(write=False)
    return PaleyGraph(ctx, A, S)


def strong_regularity(g: PaleyGraph) -> tuple[int, int, bool]:
    p = g.p
    A = g.adjacency
    common = A @ A
    off = ~np.eye(p, dtype=bool)
    lam_vals = np.unique(common[(A == 1) & off])
    mu_vals = np.unique(common[(A == 0) & off])
    lam, mu = (p - 5) // 4, (p - 1) // 4
    holds = (
        lam_vals.tolist() == [lam]
        and mu_vals.tolist() == [mu]
        and bool(np.all(A.sum(axis=1) == (p - 1) // 2))
    )
    return int(lam_vals[0]), int(mu_vals[0]), holds


def spectra(g: PaleyGraph) -> dict[str, np.ndarray]:
    return {
        "adjacency_eigs": np.linalg.eigvalsh(g.adjacency.astype(float)),
        "seidel_eigs": np.linalg.eigvalsh(g.seidel.astype(float)),
    }


def expected_spectra(p: int) -> dict[str, np.ndarray]:
    m = (p - 1) // 2
    r = math.sqrt(p)
    adj = np.sort(np.r_[[(p - 1) / 2], np.full(m, (-1 + r) / 2), np.full(m, (-1 - r) / 2)])
    sei = np.sort(np.r_[[0.0], np.full(m, r), np.full(m, -r)])
    return {"adjacency_eigs": adj, "seidel_eigs": sei}


def classical_bounds(p: int) -> dict[str, float]:
    return {"hoffman": math.sqrt(p), "hansen_podolskii": math.sqrt(2 * p - 1) / 2 + 1}


def max_clique(adjacency: np.ndarray) -> list[int]:
    """Exact maximum clique by branch and bound with greedy-colouring bounds on bitsets."""
    n = adjacency.shape[0]
    nbr = [0] * n
    for v in range(n):
        for w in np.flatnonzero(adjacency[v]):
            if w != v:
                nbr[v] |= 1 << int(w)
    degree = adjacency.sum(axis=1) - np.diag(adjacency)
    order = sorted(range(n), key=lambda v: (-int(degree[v]), v))
    best: list[int] = []

    def colour_sort(cand: int) -> list[tuple[int, int]]:
        # greedy sequential colouring in the fixed vertex order; returns (vertex, colour)
        out, colour, rest = [], 0, cand
        while rest:
            colour += 1
            q = rest
            while q:
                v = next(u for u in order if q >> u & 1)
                q &= ~(1 << v) & ~nbr[v]
                rest &= ~(1 << v)
                out.append((v, colour))
        return out

    def expand(clique: list[int], cand: int) -> None:
        nonlocal best
        for v, colour in reversed(colour_sort(cand)):
            if len(clique) + colour <= len(best):
                return
            clique.append(v)
            sub = cand & nbr[v]
            if sub:
                expand(clique, sub)
            elif len(clique) > len(best):
                best = list(clique)
            clique.pop()
            cand &= ~(1 << v)

    expand([], (1 << n) - 1)
    return sorted(best)


def clique_number(g: PaleyGraph, limit: int = 1000) -> int:
    if g.p > limit:
        raise ValueError(f"p={g.p} exceeds the exact-search limit {limit}")
    return len(max_clique(g.adjacency))


def affine_image(g: PaleyGraph, a: int, b: int) -> np.ndarray:
    """Adjacency matrix relabelled by x -> a x + b."""
    p = g.p
    perm = (a * np.arange(p) + b) % p
    out = np.empty_like(g.adjacency)
    out[np.ix_(perm, perm)] = g.adjacency
    return out

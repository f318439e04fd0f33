"""Feige-Krauthgamer pseudomoments on Paley graphs: assembly, PSD checks and the FK4 optimum."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .charsums import kloosterman_table
from .graphmx import build_graph_matrix, pair_indexing, projection_01
from .moments import MomentIndex, entry_profile, moment_index, union_profile
from .paley import PaleyGraph


@dataclass(frozen=True)
class FkParams:
    a1: float
    a2: float
    a3: float
    a4: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.a3, self.a4])

    def level(self, k: int) -> float:
        return (1.0, self.a1, self.a2, self.a3, self.a4)[k]


@dataclass(frozen=True, eq=False)
class PseudomomentMatrix:
    p: int
    data: np.ndarray = field(repr=False)
    index: MomentIndex = field(repr=False)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def block_index(self) -> tuple[int, int, int]:
        return self.index.block_index

    @property
    def objective(self) -> float:
        return float(self.data[0, 1 : 1 + self.p].sum())


def theorem_alphas(c: float, p: int) -> FkParams:
    if c <= 0:
        raise ValueError("c must be positive")
    a1 = c * p ** (-2 / 3)
    return FkParams(a1, 4 * a1**2, 8 * a1**3, 512 * a1**4)


def _psd_tol(norm: float) -> float:
    return 1e-8 * max(1.0, norm)


# dense assembly


def fk_basis(g: PaleyGraph, index: MomentIndex | None = None) -> tuple[MomentIndex, np.ndarray]:
    """0/1 matrices E_k (k = 0..4) with M(alpha) = E_0 + sum_k alpha_k E_k."""
    index = index or moment_index(g.adjacency)
    _, size, clique = entry_profile(g.adjacency, index)
    E = np.stack([((size == k) & clique).astype(float) for k in range(5)])
    return index, E


def assemble_M(g: PaleyGraph, alpha: FkParams) -> PseudomomentMatrix:
    index, E = fk_basis(g)
    data = E[0] + sum(alpha.level(k) * E[k] for k in range(1, 5))
    return PseudomomentMatrix(g.p, data, index)


def min_eigenvalue(m: np.ndarray, dense_limit: int = 2500) -> float:
    m = np.asarray(m, dtype=float)
    if m.shape[0] <= dense_limit:
        return float(np.linalg.eigvalsh(m)[0])
    try:
        return float(eigsh(m, k=1, which="SA", tol=1e-10, return_eigenvectors=False)[0])
    except ArpackNoConvergence as err:
        warnings.warn("Lanczos did not converge; returning best estimate")
        return float(np.min(err.eigenvalues)) if len(err.eigenvalues) else float("nan")


def assemble_H(g: PaleyGraph, alpha: FkParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """H blocks from the bipartite adjacency indicators."""
    p = g.p
    A = g.adjacency.astype(bool)
    a1, a2, a3, a4 = alpha.a1, alpha.a2, alpha.a3, alpha.a4
    idx = pair_indexing(p)
    b, c = idx.pairs.T

    H11 = np.where(np.eye(p, dtype=bool), a1 - a1**2, a2 * A - a1**2)

    v = np.arange(p)[:, None]
    inside = (v == b[None, :]) | (v == c[None, :])
    cross = A[v, b[None, :]] & A[v, c[None, :]]
    H12 = np.where(inside, a2 - a1 * a2, a3 * cross - a1 * a2)

    n = idx.size
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    w, x = b[i], c[i]
    y, z = b[j], c[j]
    equal = i == j
    disjoint = (w != y) & (w != z) & (x != y) & (x != z)
    # for pairs meeting in one vertex the lone cross pair is (row other, column other)
    s = np.where((w == y) | (w == z), w, x)
    r = np.where(s == w, x, w)
    q = np.where(y == s, z, y)
    one_ind = A[r, q]
    four_ind = A[w, y] & A[w, z] & A[x, y] & A[x, z]
    H22 = np.where(
        equal, a2 - a2**2,
        np.where(disjoint, a4 * four_ind - a2**2, a3 * one_ind - a2**2),
    )
    return H11, H12, H22


def schur_complement_N(g: PaleyGraph, alpha: FkParams) -> tuple[np.ndarray, MomentIndex]:
    M = assemble_M(g, alpha)
    m = M.data[0, 1:]
    return M.data[1:, 1:] - np.outer(m, m), M.index


def h_restriction_residual(g: PaleyGraph, alpha: FkParams) -> float:
    """max |N - H restricted to singletons and edges|."""
    N, index = schur_complement_N(g, alpha)
    H11, H12, H22 = assemble_H(g, alpha)
    H = np.block([[H11, H12], [H12.T, H22]])
    idx = pair_indexing(g.p)
    rows = index.rows[1:]
    pos = np.where(rows[:, 1] < 0, rows[:, 0], g.p + idx.lookup[rows[:, 0], np.maximum(rows[:, 1], 0)])
    return float(np.abs(H[np.ix_(pos, pos)] - N).max())


def h11_expected_eigenvalues(p: int, alpha: FkParams) -> np.ndarray:
    a1, a2 = alpha.a1, alpha.a2
    r = math.sqrt(p)
    m = (p - 1) // 2
    return np.sort(np.r_[[a1 + (p - 1) * a2 / 2 - p * a1**2],
                         np.full(m, a1 + (-1 + r) * a2 / 2), np.full(m, a1 + (-1 - r) * a2 / 2)])


def schur_chain(g: PaleyGraph, alpha: FkParams) -> dict[str, float]:
    """Minimum eigenvalues along the chain H11, H22 - H21 H11^{-1} H12, and M."""
    H11, H12, H22 = assemble_H(g, alpha)
    h11_min = float(np.linalg.eigvalsh(H11)[0])
    out = {"h11_min": h11_min, "schur_min": float("nan")}
    if h11_min > 0:
        out["schur_min"] = float(np.linalg.eigvalsh(H22 - H12.T @ np.linalg.solve(H11, H12))[0])
    out["m_min"] = min_eigenvalue(assemble_M(g, alpha).data)
    return out


def main_proposition_margin(g: PaleyGraph, alpha: FkParams, eps: float = 0.5) -> float:
    """Min eigenvalue of H22 minus the epsilon-relaxed bound on H21 H11^{-1} H12."""
    p = g.p
    a1, a2 = alpha.a1, alpha.a2
    _, H12, H22 = assemble_H(g, alpha)
    K = H12.T @ H12
    n = K.shape[0]
    P0 = np.full((n, n), 2.0 / (p * (p - 1)))
    Q = np.eye(n) - P0
    top = a1 + (p - 1) / 2 * a2 - p * a1**2
    rhs = P0 @ K @ P0 / top + Q @ K @ Q / ((1 - eps) * a1)
    return float(np.linalg.eigvalsh(H22 - rhs)[0])


# translation-reduced FK oracle


@dataclass(frozen=True, eq=False)
class FkBlocks:
    """M(alpha) split by the Fourier transform along translation orbits.

    block0 has the empty set as coordinate 0; blocks[t - 1] covers frequency t >= 1.
    Each has a leading axis over the basis index k = 0..4.
    """

    p: int
    block0: np.ndarray  # (5, m + 1, m + 1)
    blocks: np.ndarray  # (5, p - 1, m, m)

    def assemble(self, alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w = np.r_[1.0, alpha]
        return np.tensordot(w, self.block0, axes=1), np.tensordot(w, self.blocks, axes=1)

    def min_eig(self, alpha: np.ndarray) -> tuple[float, list[np.ndarray]]:
        """Smallest eigenvalue and one cut row (q_0..q_4) per block with a negative eigenvalue."""
        B0, Bt = self.assemble(alpha)
        ev0, vec0 = np.linalg.eigh(B0)
        evt, vect = np.linalg.eigh(Bt)
        lam = min(ev0[0], evt[:, 0].min())
        cuts = []
        if ev0[0] < 0:
            v = vec0[:, 0]
            cuts.append(np.real(np.einsum("i,kij,j->k", v.conj(), self.block0, v)))
        for t in np.flatnonzero(evt[:, 0] < 0):
            v = vect[t, :, 0]
            cuts.append(np.real(np.einsum("i,kij,j->k", v.conj(), self.blocks[:, t], v)))
        return float(lam), cuts

    def norm_bound(self, alpha: np.ndarray) -> float:
        B0, Bt = self.assemble(alpha)
        return float(max(np.abs(np.linalg.eigvalsh(B0)).max(), np.abs(np.linalg.eigvalsh(Bt)).max()))


def fk_blocks(g: PaleyGraph) -> FkBlocks:
    p = g.p
    A = g.adjacency
    dists = [d for d in range(1, (p - 1) // 2 + 1) if A[0, d]]
    reps = np.array([(0, -1)] + [(0, d) for d in dists], dtype=np.int64)
    m = len(reps)
    z = np.arange(p)
    shifted = np.empty((m, p, 2), dtype=np.int64)
    shifted[0, :, 0] = z
    shifted[0, :, 1] = -1
    for r, d in enumerate(dists, start=1):
        lo, hi = z, (z + d) % p
        shifted[r, :, 0] = np.minimum(lo, hi)
        shifted[r, :, 1] = np.maximum(lo, hi)
    left = np.broadcast_to(reps[:, None, None, :], (m, m, p, 2))
    right = np.broadcast_to(shifted[None, :, :, :], (m, m, p, 2))
    _, size, clique = union_profile(A, left, right)
    E = np.stack([((size == k) & clique).astype(float) for k in range(5)])  # (5, m, m, p)
    F = np.fft.ifft(E, axis=3) * p  # sum_z E(z) e_p(t z)
    blocks = np.ascontiguousarray(np.transpose(F, (0, 3, 1, 2)))  # (5, p, m, m)
    block0 = np.zeros((5, m + 1, m + 1), dtype=complex)
    block0[:, 1:, 1:] = blocks[:, 0]
    block0[0, 0, 0] = 1.0
    rep_size = (reps >= 0).sum(axis=1)
    for s in range(m):
        block0[rep_size[s], 0, 1 + s] = math.sqrt(p)
        block0[rep_size[s], 1 + s, 0] = math.sqrt(p)
    return FkBlocks(p, block0, blocks[:, 1:])


@dataclass(frozen=True)
class Fk4Result:
    lo: float
    hi: float
    alpha: FkParams
    iterations: int
    converged: bool

    @property
    def value(self) -> float:
        return self.lo


def _chebyshev_center(G: np.ndarray, h: np.ndarray):
    norms = np.linalg.norm(G, axis=1)
    n = G.shape[1]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=np.c_[G, norms], b_ub=h,
                  bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status != 0:
        return None, 0.0
    return res.x[:n], float(res.x[-1])


def _max_alpha1(G: np.ndarray, h: np.ndarray) -> float:
    res = linprog([-1.0, 0, 0, 0], A_ub=G, b_ub=h, bounds=[(None, None)] * 4, method="highs")
    return float(-res.fun) if res.status == 0 else 0.0


def fk4_value(
    g: PaleyGraph, tol: float = 1e-4, max_iter: int | None = None, oracle: str = "blocks",
    method: str = "barrier",
) -> Fk4Result:
    """Maximise p * alpha1 over alpha in [0, 1]^4 subject to M(alpha) PSD.

    method "barrier" follows the log-det central path (fk4_barrier); "cutting" runs
    eigenvector cutting planes with the given oracle (fk4_cutting_planes).
    """
    if method == "barrier":
        return fk4_barrier(g, tol=tol, max_iter=max_iter or 200)
    if method == "cutting":
        return fk4_cutting_planes(g, tol=tol, max_iter=max_iter or 5000, oracle=oracle)
    raise ValueError(f"unknown method {method!r}")


class _HalfBlocks:
    """block0 plus frequencies 1..(p - 1) / 2 of an FkBlocks; block p - t is the conjugate of
    block t, so every trace over the dropped half equals the one kept and is counted twice."""

    def __init__(self, fb: FkBlocks):
        h = (fb.p - 1) // 2
        self.p = fb.p
        self.E0 = fb.block0  # (5, m + 1, m + 1)
        self.Et = np.ascontiguousarray(fb.blocks[:, :h])  # (5, h, m, m)

    def assemble(self, alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w = np.r_[1.0, alpha]
        return np.tensordot(w, self.E0, axes=1), np.tensordot(w, self.Et, axes=1)

    def logdet(self, alpha: np.ndarray) -> float | None:
        """log det M(alpha), or None if M(alpha) is not positive definite."""
        B0, Bt = self.assemble(alpha)
        try:
            d0 = np.diagonal(np.linalg.cholesky(B0))
            dt = np.diagonal(np.linalg.cholesky(Bt), axis1=1, axis2=2)
        except np.linalg.LinAlgError:
            return None
        return 2 * float(np.log(np.real(d0)).sum() + 2 * np.log(np.real(dt)).sum())

    def derivatives(self, alpha: np.ndarray):
        """Gradient and Hessian of log det M(alpha), and the block inverses."""
        B0, Bt = self.assemble(alpha)
        inv0, invt = np.linalg.inv(B0), np.linalg.inv(Bt)
        A0 = np.einsum("ij,kjl->kil", inv0, self.E0[1:])  # M^{-1} E_k, k = 1..4
        At = np.einsum("tij,ktjl->ktil", invt, self.Et[1:])
        grad = np.real(np.einsum("kii->k", A0) + 2 * np.einsum("ktii->k", At))
        hess = -np.real(np.einsum("kij,lji->kl", A0, A0) + 2 * np.einsum("ktij,ltji->kl", At, At))
        return grad, hess, inv0, invt

    def traces(self, z0: np.ndarray, zt: np.ndarray) -> np.ndarray:
        """<Z, E_k> for k = 0..4 with Z given blockwise."""
        return np.real(np.einsum("ij,kji->k", z0, self.E0) + 2 * np.einsum("tij,ktji->k", zt, self.Et))

    def cuts(self, alpha: np.ndarray, k: int) -> np.ndarray:
        """Rows (q_0..q_4) of v^* M v >= 0 for the k lowest eigenvectors v of every block."""
        B0, Bt = self.assemble(alpha)
        _, vec0 = np.linalg.eigh(B0)
        _, vect = np.linalg.eigh(Bt)
        k = min(k, vect.shape[-1])
        v0 = vec0[:, :k]
        vt = vect[:, :, :k]
        q0 = np.real(np.einsum("ia,kij,ja->ak", v0.conj(), self.E0, v0))
        qt = np.real(np.einsum("tia,ktij,tja->tak", vt.conj(), self.Et, vt)).reshape(-1, 5)
        return np.vstack([q0, qt])


def _line_search(hb: _HalfBlocks, f, alpha: np.ndarray, step: np.ndarray, f0: float, decrement: float):
    """Backtrack from the full Newton step until Armijo holds; if the full step is accepted,
    keep doubling while f still increases (far from the centre full steps are short)."""

    def value(s):
        cand = alpha + s * step
        if not np.all((cand > 0) & (cand < 1)):
            return None
        ld = hb.logdet(cand)
        return None if ld is None else f(cand, ld)

    s = 1.0
    while s > 1e-14:
        fs = value(s)
        if fs is not None and fs >= f0 + 0.25 * s * decrement:
            break
        s /= 2
    else:
        return 0.0
    if s == 1.0:
        while True:
            fn = value(2 * s)
            if fn is None or fn <= fs:
                break
            s, fs = 2 * s, fn
    return s


def fk4_barrier(g: PaleyGraph, tol: float = 1e-4, max_iter: int = 200, cuts_per_block: int = 3) -> Fk4Result:
    """FK4 by a log-barrier method on the translation-reduced blocks.

    Maximises t p alpha1 + log det M(alpha) + sum_k log(alpha_k (1 - alpha_k)) by damped
    Newton steps for increasing t. lo is p alpha1 at a point with M(alpha) positive definite.
    hi is the smaller of two weak-duality bounds over the box [0, 1]^4: one from
    Z = M(alpha)^{-1} / t, one from the LP cut by v^* M(alpha) v >= 0 for the lowest
    eigenvectors v of every block at every centre visited. max_iter caps the centring rounds.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    p = g.p
    hb = _HalfBlocks(fk_blocks(g))
    c = np.array([p, 0.0, 0.0, 0.0])
    alpha = None
    for start in (0.05, 0.01, 0.001):
        cand = theorem_alphas(start, p).as_array()
        if np.all((cand > 0) & (cand < 1)) and hb.logdet(cand) is not None:
            alpha = cand
            break
    if alpha is None:
        raise RuntimeError("no strictly feasible starting point")
    G = np.vstack([np.eye(4), -np.eye(4)])
    h = np.r_[np.ones(4), np.zeros(4)]
    t = 1e-3
    lo, hi = p * float(alpha[0]), float(p)
    rounds = 0
    converged = False

    def f(a, logdet):
        return t * (c @ a) + logdet + np.sum(np.log(a) + np.log1p(-a))

    for rounds in range(1, max_iter + 1):
        for _ in range(500):  # damped Newton centring
            grad, hess, _, _ = hb.derivatives(alpha)
            grad = t * c + grad + 1 / alpha - 1 / (1 - alpha)
            hess = hess - np.diag(1 / alpha**2 + 1 / (1 - alpha) ** 2)
            step = np.linalg.solve(hess, -grad)
            decrement = float(grad @ step)
            f0 = f(alpha, hb.logdet(alpha))
            if not decrement > max(1e-10, 1e-13 * abs(f0)):  # centred to working precision
                break
            s = _line_search(hb, f, alpha, step, f0, decrement)
            if s == 0.0:
                break
            alpha = alpha + s * step
        lo = max(lo, p * float(alpha[0]))
        _, _, inv0, invt = hb.derivatives(alpha)
        traces = hb.traces(inv0 / t, invt / t)
        hi = min(hi, float(traces[0] + np.clip(c + traces[1:], 0.0, None).sum()))
        cuts = hb.cuts(alpha, cuts_per_block)
        G = np.vstack([G, -cuts[:, 1:]])
        h = np.r_[h, cuts[:, 0]]
        hi = min(hi, p * _max_alpha1(G, h))
        if hi - lo < tol:
            converged = True
            break
        if t > 1e14:
            break
        t *= 4
    return Fk4Result(lo, max(hi, lo), FkParams(*alpha), rounds, converged)


def fk4_cutting_planes(g: PaleyGraph, tol: float = 1e-4, max_iter: int = 5000, oracle: str = "blocks") -> Fk4Result:
    """Maximise p * alpha1 subject to M(alpha) PSD by eigenvector cutting planes.

    The polytope starts as the box [0, 1]^4; each infeasible query point adds the cut
    v^T M(alpha) v >= 0 for its most negative eigenvector, each feasible one raises the
    objective floor. lo is attained by a PSD point, hi bounds the polytope.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    p = g.p
    if oracle == "blocks":
        fb = fk_blocks(g)

        def query(alpha):
            lam, cuts = fb.min_eig(alpha)
            return lam, cuts, fb.norm_bound(alpha)
    elif oracle == "dense":
        _, E = fk_basis(g)

        def query(alpha):
            Mx = E[0] + np.tensordot(alpha, E[1:], axes=1)
            ev, vec = np.linalg.eigh(Mx)
            cuts = []
            if ev[0] < 0:
                v = vec[:, 0]
                cuts.append(np.einsum("i,kij,j->k", v, E, v))
            return float(ev[0]), cuts, float(np.abs(ev).max())
    else:
        raise ValueError(f"unknown oracle {oracle!r}")

    G = np.vstack([np.eye(4), -np.eye(4)])
    h = np.r_[np.ones(4), np.zeros(4)]
    best = np.zeros(4)
    lo, hi = 0.0, p * _max_alpha1(G, h)
    it = 0
    for it in range(1, max_iter + 1):
        # search only where the objective beats the incumbent
        Gq = np.vstack([G, [-1.0, 0, 0, 0]])
        hq = np.r_[h, -lo / p]
        center, radius = _chebyshev_center(Gq, hq)
        if center is None or radius <= 1e-15:
            hi = max(lo, min(hi, p * _max_alpha1(G, h)))
            break
        lam, cuts, norm = query(center)
        if lam >= -_psd_tol(norm):
            if p * center[0] > lo:
                lo, best = p * center[0], center.copy()
        for q in cuts:
            # q0 + sum_k alpha_k q_k >= 0
            G = np.vstack([G, -q[1:]])
            h = np.r_[h, q[0]]
        hi = p * _max_alpha1(G, h)
        if hi - lo < tol:
            break
    converged = hi - lo < tol
    hi = max(hi, lo)
    return Fk4Result(lo, hi, FkParams(*best), it, converged)


def verify_main_construction(c: float, p_range, grid_max: int = 100) -> list[dict]:
    """Min eigenvalue of M(theorem_alphas(c, p)) and the largest feasible grid c per p."""
    report = []
    for p in p_range:
        from .paley import build_paley

        g = build_paley(p)
        fb = fk_blocks(g)

        def psd(cc):
            a = theorem_alphas(cc, p).as_array()
            lam, _ = fb.min_eig(a)
            return lam >= -_psd_tol(fb.norm_bound(a)), lam

        ok, lam = psd(c)
        frontier = 0.0
        for k in range(1, grid_max + 1):
            if psd(0.01 * k)[0]:
                frontier = 0.01 * k
        report.append({"p": p, "c": c, "min_eig": lam, "psd": ok, "c_frontier": frontier})
    return report


# sum identities and u-vector forms


def pseudomoment(g: PaleyGraph, alpha: FkParams, vertices) -> float:
    s = sorted(set(int(v) % g.p for v in vertices))
    for a_i, b_i in ((a, b) for i, a in enumerate(s) for b in s[i + 1 :]):
        if not g.adjacency[a_i, b_i]:
            return 0.0
    return alpha.level(len(s)) if len(s) <= 4 else 0.0


def pseudomoment_sum_checks(g: PaleyGraph, alpha: FkParams) -> dict[str, dict]:
    p = g.p
    E = lambda *vs: pseudomoment(g, alpha, vs)  # noqa: E731
    rng = range(p)
    s1 = sum(E(0, 1, i) for i in rng if i not in (0, 1))
    s2 = sum(E(0, i) for i in rng)
    s3 = sum(E(0, i, j) for i in rng for j in rng)
    s4 = sum(E(0, 1, i, j) for i in rng for j in rng if i not in (0, 1) and j not in (0, 1))
    a1, a2, a3, a4 = alpha.a1, alpha.a2, alpha.a3, alpha.a4
    approx4 = (p - 2) * (p - 3) / 32 * a4 + (p - 5) / 4 * a3
    return {
        "triangles_through_edge": {"value": s1, "expected": (p - 5) / 4 * a3},
        "degree_sum": {"value": s2, "expected": a1 + (p - 1) / 2 * a2},
        "pair_sum": {"value": s3, "expected": a1 + 3 * (p - 1) / 2 * a2 + (p - 1) * (p - 5) / 8 * a3},
        "edge_pair_sum": {"value": s4, "expected": approx4,
                          "deviation": (s4 - approx4) / (p**1.5 * a4)},
    }


def u_vector(g: PaleyGraph) -> np.ndarray:
    p = g.p
    chi = g.ctx.legendre_table
    a, b = pair_indexing(p).pairs.T
    return (chi[a * b % p] * (chi[(a - b) % p] + 1)).astype(float)


def closed_form_coefficients(g: PaleyGraph, constant: float | None = None) -> np.ndarray:
    """v_i with (P0 + P1) u = v_i + v_j; `constant` defaults to the stated p / (2p - 2)."""
    p = g.p
    chi = g.ctx.legendre_table.astype(float)
    const = p / (2 * p - 2) if constant is None else constant
    return (chi * (-1 - chi) + const) / (p - 2)


def kloosterman_S1(g: PaleyGraph) -> float:
    p = g.p
    K3 = kloosterman_table(g.ctx, 3).values[1:]
    chi = g.ctx.legendre_table[1:]
    return float((p - 1) * p**-1.5 * np.sum(chi * np.abs(K3) ** 2))


def direct_S1(g: PaleyGraph) -> int:
    p = g.p
    chi = g.ctx.legendre_table
    x = np.arange(p)
    X, Y = np.meshgrid(x, x, indexing="ij")
    total = 0
    for z in range(p):
        total += int(np.sum(chi[X * Y * z % p] * chi[(X - Y) % p] * chi[(Y - z) % p] * chi[(z - X) % p]))
    return total


def direct_S2(g: PaleyGraph) -> int:
    p = g.p
    chi = g.ctx.legendre_table
    x = np.arange(p - 1)  # excludes -1 = p - 1
    X, Y = np.meshgrid(x, x, indexing="ij")
    return 3 * int(np.sum(chi[X * Y % p] * chi[(X - Y) % p] * chi[(Y + 1) % p] * chi[(X + 1) % p]))


def ordered_sign_sum(g: PaleyGraph) -> int:
    """Sum over a, b, c, d in F_p^x of chi(abcd) times chi of all six differences."""
    p = g.p
    chi = g.ctx.legendre_table
    x = np.arange(1, p)
    A_, B_ = np.meshgrid(x, x, indexing="ij")
    ab = chi[A_ * B_ % p] * chi[(A_ - B_) % p]
    total = 0
    for c in x:
        for d in x:
            f = chi[c * d % p] * chi[(c - d) % p]
            if f == 0:
                continue
            total += f * int(np.sum(ab * chi[(A_ - c) % p] * chi[(A_ - d) % p]
                                    * chi[(B_ - c) % p] * chi[(B_ - d) % p]))
    return total


def u_quadratic_forms(g: PaleyGraph) -> dict:
    p = g.p
    u = u_vector(g)
    proj = projection_01(u, p)
    a, b = pair_indexing(p).pairs.T
    v_stated = closed_form_coefficients(g)
    v_half = closed_form_coefficients(g, 0.5)
    forms = {}
    for shape, scale in (("T301", p**2), ("T401", p**2), ("T421", p**2.5), ("T422", p**2.5), ("T411", p**2.5)):
        val = float(u @ build_graph_matrix(g, shape).matvec(u))
        forms[shape] = {"value": val, "ratio": abs(val) / scale}
    T441 = build_graph_matrix(g, "T441")
    lhs = float(u @ T441.matvec(u))
    S1k, S1d, S2 = kloosterman_S1(g), direct_S1(g), direct_S2(g)
    rhs = (p - 1) * (S1k - S2)
    return {
        "u_norm_sq": float(u @ u),
        "proj01_norm_sq": float(proj @ proj),
        "closed_form_residual": float(np.abs(proj - (v_stated[a] + v_stated[b])).max()),
        "closed_form_residual_half": float(np.abs(proj - (v_half[a] + v_half[b])).max()),
        "forms": forms,
        "t441_form": lhs,
        "t441_ratio": abs(lhs) / p**3,
        "S1_kloosterman": S1k,
        "S1_direct": S1d,
        "S2": S2,
        "identity_rhs": rhs,
        "ordered_sign_sum": ordered_sign_sum(g) if p <= 61 else None,
    }

"""SOS4 on Paley graphs over translation-invariant moment matrices.

Translations x -> x + 1 preserve the graph, the entry-equality classes and the objective, so
averaging an optimal moment matrix over them gives an optimal invariant one: restricting to
invariant matrices does not change the value. An invariant matrix is stored by orbits:

    e = M[{}, {}],  w[s] = M[{}, rep_s],  V[r, s, z] = M[rep_r, rep_s + z],

where rep_0 = {0} and rep_k = {0, d_k} for the edge differences d_k <= (p - 1) / 2. A Fourier
transform in z splits the matrix into p Hermitian blocks of size m = 1 + (p - 1) / 4 (m + 1 at
frequency 0), so the cone projection costs p small eigendecompositions instead of one of size
1 + p + p(p - 1) / 4. All inner products are weighted so they equal Frobenius products of the
full matrices, hence residuals, values and bounds mean the same as for the dense solver.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .moments import moment_index, union_profile
from .paley import PaleyGraph
from .sdp import SdpSolution

POLISH_STEPS = 20  # alternating projections used to tighten the dual certificate


@dataclass(frozen=True, eq=False)
class InvariantSos4:
    p: int
    reps: np.ndarray = field(repr=False)  # (m, 2) orbit representatives, padded with -1
    labels: np.ndarray = field(repr=False)  # class of every stored coordinate, layout [e, w, V]
    fixed: np.ndarray = field(repr=False)  # per-class fixed value, nan for free classes
    weights: np.ndarray = field(repr=False)  # how many full-matrix entries each coordinate stands for
    sizes: np.ndarray = field(repr=False)  # union size of every coordinate (-1 for non-cliques)
    entry_bound: float = 1.0

    @property
    def m(self) -> int:
        return len(self.reps)

    @property
    def dim(self) -> int:
        """Side of the full moment matrix."""
        return 1 + self.p * self.m

    @property
    def class_count(self) -> int:
        return len(self.fixed)

    # layout helpers

    def split(self, x: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        m, p = self.m, self.p
        return x[0], x[1 : 1 + m], x[1 + m :].reshape(m, m, p)

    def join(self, e: float, w: np.ndarray, V: np.ndarray) -> np.ndarray:
        return np.concatenate([[e], w, V.ravel()])

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.sum(self.weights * a * b))

    def norm(self, a: np.ndarray) -> float:
        return math.sqrt(max(0.0, self.inner(a, a)))

    def objective(self) -> np.ndarray:
        c = np.zeros(1 + self.m + self.m * self.m * self.p)
        c[1] = 0.5  # C[{}, {i}] = 1/2, so <C, M> = p * w[0]
        return c

    def value(self, x: np.ndarray) -> float:
        return self.p * float(x[1])

    def project_affine(self, x: np.ndarray) -> np.ndarray:
        sums = np.bincount(self.labels, weights=self.weights * x, minlength=self.class_count)
        counts = np.bincount(self.labels, weights=self.weights, minlength=self.class_count)
        means = np.where(np.isnan(self.fixed), sums / counts, self.fixed)
        return means[self.labels]

    def class_sums(self, x: np.ndarray) -> np.ndarray:
        return np.bincount(self.labels, weights=self.weights * x, minlength=self.class_count)

    # Fourier blocks

    def to_blocks(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """block0 (m + 1, m + 1) and blocks for frequencies 1..(p - 1) / 2."""
        e, w, V = self.split(x)
        F = np.fft.ifft(V, axis=2) * self.p  # F_t = sum_z V(z) exp(2 pi i t z / p)
        F = np.moveaxis(F, 2, 0)
        m = self.m
        B0 = np.empty((m + 1, m + 1), dtype=complex)
        B0[0, 0] = e
        B0[0, 1:] = B0[1:, 0] = math.sqrt(self.p) * w
        B0[1:, 1:] = F[0]
        return B0, F[1 : (self.p - 1) // 2 + 1]

    def from_blocks(self, B0: np.ndarray, B: np.ndarray) -> np.ndarray:
        p, m = self.p, self.m
        F = np.empty((p, m, m), dtype=complex)
        F[0] = B0[1:, 1:]
        h = (p - 1) // 2
        F[1 : h + 1] = B
        F[h + 1 :] = np.conj(B[::-1])  # F_{p - t} = conj(F_t) for real V
        V = np.real(np.fft.fft(F, axis=0) / p)
        V = np.moveaxis(V, 0, 2)
        w = np.real(B0[0, 1:] + B0[1:, 0]) / (2 * math.sqrt(p))
        return self.join(float(np.real(B0[0, 0])), w, V)

    def project_psd(self, x: np.ndarray) -> np.ndarray:
        B0, B = self.to_blocks(x)
        B0 = _clip(B0[None])[0]
        return self.from_blocks(B0, _clip(B))

    def min_eig(self, x: np.ndarray) -> float:
        B0, B = self.to_blocks(x)
        lam = float(np.linalg.eigvalsh(_herm(B0))[0])
        if len(B):
            lam = min(lam, float(np.linalg.eigvalsh(_herm(B))[:, 0].min()))
        return lam

    def upper_bound(self, s: np.ndarray, polish: int = 0) -> float:
        """Dual bound from any invariant S (clipped to PSD first), as in SdpProblem.upper_bound.

        With polish > 0, S is improved by alternating projections onto {free class sums of
        C + S vanish} and the PSD cone; every intermediate PSD S is a valid certificate, so
        the smallest bound seen is returned.
        """
        c = self.objective()
        free = np.isnan(self.fixed)
        counts = np.bincount(self.labels, weights=self.weights, minlength=self.class_count)
        S = self.project_psd(s)
        best = float("inf")
        for step in range(polish + 1):
            if step:
                sums = self.class_sums(c + S)
                S = self.project_psd(S - np.where(free, sums / counts, 0.0)[self.labels])
            sums = self.class_sums(c + S)
            bound = float(np.sum(sums[~free] * self.fixed[~free])) + \
                self.entry_bound * float(np.abs(sums[free]).sum())
            best = min(best, bound)
        return best

    def interior(self) -> np.ndarray:
        """Moment matrix of the uniform distribution over the rows (empty set, vertices, edges)."""
        d = self.dim
        by_size = np.array([1.0, (1 + (self.p - 1) / 2) / d, 1 / d, 0.0, 0.0])
        return np.where(self.sizes >= 0, by_size[np.maximum(self.sizes, 0)], 0.0)

    def assemble(self, x: np.ndarray) -> np.ndarray:
        """Full moment matrix in the row order of moments.moment_index."""
        p = self.p
        e, w, V = self.split(x)
        index = moment_index(_adjacency(p))
        rows = index.rows
        orbit = np.full(len(rows), -1)
        shift = np.zeros(len(rows), dtype=np.int64)
        single = (rows[:, 0] >= 0) & (rows[:, 1] < 0)
        orbit[single] = 0
        shift[single] = rows[single, 0]
        pos = {int(d): k for k, d in enumerate(self.reps[:, 1]) if d > 0}
        for i in np.flatnonzero(rows[:, 1] >= 0):
            a, b = int(rows[i, 0]), int(rows[i, 1])
            delta = b - a
            if delta <= (p - 1) // 2:
                orbit[i], shift[i] = pos[delta], a
            else:
                orbit[i], shift[i] = pos[p - delta], b
        M = np.empty((len(rows), len(rows)))
        M[0, 0] = e
        M[0, 1:] = M[1:, 0] = w[orbit[1:]]
        r, s = orbit[1:], shift[1:]
        M[1:, 1:] = V[r[:, None], r[None, :], (s[None, :] - s[:, None]) % p]
        return M


def _herm(B: np.ndarray) -> np.ndarray:
    return (B + np.conj(np.swapaxes(B, -1, -2))) / 2


def _clip(B: np.ndarray) -> np.ndarray:
    lam, Q = np.linalg.eigh(_herm(B))
    lam = np.clip(lam, 0.0, None)
    return (Q * lam[..., None, :]) @ np.conj(np.swapaxes(Q, -1, -2))


def _adjacency(p: int) -> np.ndarray:
    from .paley import build_paley

    return build_paley(p).adjacency


def _canonical_keys(u: np.ndarray, p: int) -> np.ndarray:
    """Integer key of the translation class of each padded set (rows of width 4)."""
    valid = u >= 0
    base = p + 1
    best = np.full(u.shape[:-1], np.iinfo(np.int64).max, dtype=np.int64)
    for k in range(u.shape[-1]):
        anchor = u[..., k : k + 1]
        t = np.where(valid, (u - anchor) % p, -1)
        t = np.sort(t, axis=-1)
        key = np.zeros(u.shape[:-1], dtype=np.int64)
        for i in range(u.shape[-1]):
            key = key * base + (t[..., i] + 1)
        best = np.where(anchor[..., 0] >= 0, np.minimum(best, key), best)
    return best


def build_sos4_invariant(g: PaleyGraph | int) -> InvariantSos4:
    """Translation-invariant SOS4 problem; classes are union sets up to translation."""
    if not isinstance(g, PaleyGraph):
        from .paley import build_paley

        g = build_paley(int(g))
    p = g.p
    A = g.adjacency
    dists = [d for d in range(1, (p - 1) // 2 + 1) if A[0, d]]
    reps = np.array([(0, -1)] + [(0, d) for d in dists], dtype=np.int64)
    m = len(reps)
    z = np.arange(p)
    shifted = np.empty((m, p, 2), dtype=np.int64)
    shifted[0, :, 0], shifted[0, :, 1] = z, -1
    for k, d in enumerate(dists, start=1):
        lo, hi = z, (z + d) % p
        shifted[k, :, 0], shifted[k, :, 1] = np.minimum(lo, hi), np.maximum(lo, hi)
    left = np.broadcast_to(reps[:, None, None, :], (m, m, p, 2))
    right = np.broadcast_to(shifted[None, :, :, :], (m, m, p, 2))
    u, size, clique = union_profile(A, left, right)

    pad = np.full((m, 2), -1, dtype=np.int64)
    w_sets = np.concatenate([reps, pad], axis=1)
    keys = np.concatenate([
        [-1],  # empty set, fixed to 1
        _canonical_keys(w_sets, p),
        np.where(clique, _canonical_keys(u, p), -2).ravel(),  # -2: not a clique, fixed to 0
    ])
    sizes = np.concatenate([[0], (reps >= 0).sum(axis=1), np.where(clique, size, -1).ravel()])
    uniq, labels = np.unique(keys, return_inverse=True)
    fixed = np.full(len(uniq), np.nan)
    fixed[uniq == -1] = 1.0
    fixed[uniq == -2] = 0.0
    weights = np.concatenate([[1.0], np.full(m, 2.0 * p), np.full(m * m * p, float(p))])
    return InvariantSos4(p, reps, labels.ravel(), fixed, weights, sizes)


def solve_invariant(
    prob: InvariantSos4,
    tol: float = 1e-4,
    max_iter: int = 50000,
    rho: float | None = None,
    check_every: int = 10,
    trace: bool = False,
    psd_tol: float = 1e-6,
) -> SdpSolution:
    """The ADMM of sdp.solve run on orbit coordinates; X in the result stays None.

    `reduced` in the result holds the affine iterate in orbit coordinates.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    start = time.perf_counter()
    c = prob.objective()
    Z = prob.interior()
    U = np.zeros_like(Z)
    rho = rho if rho is not None else max(1e-3, prob.norm(c) / math.sqrt(prob.dim))
    rows: list[dict] = []
    status = "max_iter"
    it = 0
    r_prim = r_dual = float("inf")
    for it in range(1, max_iter + 1):
        X = prob.project_affine(Z - U + c / rho)
        Z_old = Z
        Z = prob.project_psd(X + U)
        U += X - Z
        scale = max(1.0, prob.norm(X), prob.norm(Z))
        r_prim = prob.norm(X - Z) / scale
        r_dual = rho * prob.norm(Z - Z_old) / max(1.0, rho * prob.norm(U))
        if it % check_every and it != max_iter:
            continue
        XA = prob.project_affine(Z)
        value = prob.value(XA)
        upper = prob.upper_bound(-rho * U)
        if max(r_prim, r_dual) < tol and upper - value >= tol * (1 + abs(value)) and \
                it % (10 * check_every) == 0:
            upper = prob.upper_bound(-rho * U, polish=POLISH_STEPS)
        gap = (upper - value) / (1 + abs(value))
        if trace:
            rows.append(dict(iteration=it, primal_residual=r_prim, dual_residual=r_dual,
                             objective=value, upper=upper, rho=rho))
        if max(r_prim, r_dual, gap) < tol and prob.min_eig(XA) >= -psd_tol * prob.norm(XA):
            status = "optimal"
            break
        if r_prim > 10 * r_dual:
            rho *= 2
            U /= 2
        elif r_dual > 10 * r_prim:
            rho /= 2
            U *= 2
    X = prob.project_affine(Z)
    value = prob.value(X)
    upper = prob.upper_bound(-rho * U, polish=POLISH_STEPS)
    lower = _certified_lower(prob, X)
    return SdpSolution(
        value=value, X=None, status=status, primal_residual=r_prim, dual_residual=r_dual,
        gap=(upper - value) / (1 + abs(value)), upper=upper, lower=lower, iterations=it,
        runtime=time.perf_counter() - start, trace=rows, reduced=X,
    )


def _certified_lower(prob: InvariantSos4, X: np.ndarray) -> float:
    lam_x = prob.min_eig(X)
    if lam_x >= 0:
        return prob.value(X)
    inner = prob.interior()
    delta = prob.min_eig(inner)
    t = min(1.0, -lam_x / (delta - lam_x) * (1 + 1e-9) + 1e-14)
    return prob.value((1 - t) * X + t * inner)

"""Pair-indexed graph matrices built from a Seidel matrix, the V0/V1/V2 projectors, and norms.

Rows and columns are 2-subsets of F_p. Every shape here commutes with the translations
x -> x + 1, so besides the dense form each matrix has an exact block form: the pairs
{x, x + d} with d in 1..(p-1)/2 form (p-1)/2 translation orbits of size p, and a discrete
Fourier transform along each orbit splits the matrix into p blocks of side (p-1)/2.
That block form drives the matrix-free matvec used for large p.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .paley import PaleyGraph

T_SHAPES = ("T311", "T301", "T441", "T431", "T421", "T422", "T423", "T411", "T401")
U_SHAPES = (
    "U321", "U311",
    "U431", "U421", "U422", "U423", "U411", "U412", "U413",
    "U541", "U531", "U532", "U521", "U522", "U523", "U511", "U512",
)
PAIR_SHAPES = T_SHAPES + U_SHAPES
SHAPES = PAIR_SHAPES + ("DIAMOND",)

# which intersection pattern carries the nonzero entries
PATTERN = {s: "one" for s in ("T311", "T301", "U431", "U421", "U422", "U423", "U411", "U412", "U413")}
PATTERN.update({s: "equal" for s in ("U321", "U311")})
PATTERN.update({s: "disjoint" for s in PAIR_SHAPES if s not in PATTERN})

SYMMETRIC = {s for s in PAIR_SHAPES if s not in (
    "T421", "T422", "U412", "U413", "U421", "U422", "U511", "U512", "U521", "U522", "U531", "U532",
)}

DENSE_MAX_P = 61
_CHUNK = 1 << 18


@dataclass(frozen=True, eq=False)
class PairIndexing:
    p: int
    pairs: np.ndarray = field(repr=False)  # (n, 2), lexicographic, a < b
    lookup: np.ndarray = field(repr=False)  # (p, p) -> row index, -1 on the diagonal

    @property
    def size(self) -> int:
        return len(self.pairs)


def pair_indexing(p: int) -> PairIndexing:
    a, b = np.triu_indices(p, k=1)
    pairs = np.stack([a, b], axis=1)
    lookup = np.full((p, p), -1, dtype=np.int64)
    idx = np.arange(len(pairs))
    lookup[a, b] = idx
    lookup[b, a] = idx
    pairs.setflags(write=False)
    lookup.setflags(write=False)
    return PairIndexing(p, pairs, lookup)


# entry evaluation


def _full_sum(S: np.ndarray, factors: list[np.ndarray]) -> np.ndarray:
    """Sum over all i in F_p of prod_x S[x, i], one value per entry."""
    n = len(factors[0])
    if len(factors) == 1:
        return S.sum(axis=1)[factors[0]]
    if len(factors) == 2:
        return (S @ S)[factors[0], factors[1]]
    S8 = S.astype(np.int8)
    out = np.empty(n, dtype=np.int64)
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        acc = S8[factors[0][lo:hi]].astype(np.int32)
        for f in factors[1:]:
            acc *= S8[f[lo:hi]]
        out[lo:hi] = acc.sum(axis=1)
    return out


def _vertex_sum(S: np.ndarray, factors: list[np.ndarray], exclude: list[np.ndarray]) -> np.ndarray:
    """Sum over i outside `exclude` of prod_x S[x, i]."""
    total = _full_sum(S, factors)
    for e in exclude:
        term = np.ones(len(e), dtype=np.int64)
        for f in factors:
            term *= S[f, e]
        total = total - term
    return total


def _pattern_split(a, b, c, d):
    equal = ((a == c) & (b == d)) | ((a == d) & (b == c))
    disjoint = (a != c) & (a != d) & (b != c) & (b != d)
    one = ~equal & ~disjoint
    return equal, one, disjoint


def _shared(a, b, c, d):
    """For pairs meeting in one vertex: (shared, row-other, column-other)."""
    s = np.where((a == c) | (a == d), a, b)
    r = np.where(s == a, b, a)
    q = np.where(c == s, d, c)
    return s, r, q


def shape_entries(S: np.ndarray, shape: str, a, b, c, d) -> np.ndarray:
    """Entries of a pair-indexed shape at rows {a,b} and columns {c,d} (index arrays)."""
    if shape not in PAIR_SHAPES:
        raise KeyError(f"unknown shape {shape!r}")
    a, b, c, d = (np.asarray(v, dtype=np.int64).ravel() for v in (a, b, c, d))
    out = np.zeros(len(a), dtype=np.int64)
    equal, one, disjoint = _pattern_split(a, b, c, d)
    pattern = PATTERN[shape]

    if pattern == "equal":
        m = equal
        x, y = a[m], b[m]
        ex = [x, y]
        if shape == "U321":
            out[m] = _vertex_sum(S, [x, y], ex)
        else:
            out[m] = _vertex_sum(S, [x], ex) + _vertex_sum(S, [y], ex)
        return out

    if pattern == "one":
        m = one
        s, r, q = _shared(a[m], b[m], c[m], d[m])
        ex = [s, r, q]
        if shape == "T301":
            out[m] = 1
        elif shape == "T311":
            out[m] = S[r, q]
        else:
            factors = {
                "U431": [s, r, q], "U421": [s, r], "U422": [s, q],
                "U423": [r, q], "U411": [s], "U412": [r], "U413": [q],
            }[shape]
            out[m] = _vertex_sum(S, factors, ex)
        return out

    m = disjoint
    w, x, y, z = a[m], b[m], c[m], d[m]
    ac, ad, bc, bd = S[w, y], S[w, z], S[x, y], S[x, z]
    ex = [w, x, y, z]
    if shape == "T441":
        v = ac * ad * bc * bd
    elif shape == "T431":
        v = ac * ad * bc + ac * ad * bd + ac * bc * bd + ad * bc * bd
    elif shape == "T421":
        v = ac * ad + bc * bd
    elif shape == "T422":
        v = ac * bc + ad * bd
    elif shape == "T423":
        v = ac * bd + ad * bc
    elif shape == "T411":
        v = ac + ad + bc + bd
    elif shape == "T401":
        v = np.ones(len(w), dtype=np.int64)
    else:
        groups = {
            "U541": [[w, x, y, z]],
            "U531": [[w, x, y], [w, x, z]],
            "U532": [[w, y, z], [x, y, z]],
            "U521": [[w, x]],
            "U522": [[y, z]],
            "U523": [[w, y], [w, z], [x, y], [x, z]],
            "U511": [[w], [x]],
            "U512": [[y], [z]],
        }[shape]
        v = sum(_vertex_sum(S, f, ex) for f in groups)
    out[m] = v
    return out


def dense_shape(S: np.ndarray, shape: str, idx: PairIndexing | None = None) -> np.ndarray:
    p = S.shape[0]
    idx = idx or pair_indexing(p)
    n = idx.size
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    a, b = idx.pairs[i.ravel()].T
    c, d = idx.pairs[j.ravel()].T
    return shape_entries(S, shape, a, b, c, d).reshape(n, n).astype(float)


# translation blocks


@dataclass(frozen=True, eq=False)
class TranslationBlocks:
    """Block form of a translation-invariant pair-indexed matrix.

    blocks[t] acts on orbit coordinates r, where orbit r holds the pairs {x, x + r + 1}.
    Vectors v(r, x) = e_p(t x) w_r are mapped to e_p(t x) (blocks[t] w)_r.
    """

    p: int
    blocks: np.ndarray  # (p, R, R) complex

    @property
    def orbit_count(self) -> int:
        return (self.p - 1) // 2

    def orbit_order(self, idx: PairIndexing) -> np.ndarray:
        """Pair index of orbit coordinate (r, x), shape (R, p)."""
        p = self.p
        x = np.arange(p)
        dist = np.arange(1, self.orbit_count + 1)
        return idx.lookup[x[None, :], (x[None, :] + dist[:, None]) % p]

    def apply(self, v: np.ndarray, idx: PairIndexing, adjoint: bool = False) -> np.ndarray:
        order = self.orbit_order(idx)
        V = v[order]  # (R, p)
        coeff = np.fft.fft(V, axis=1) / self.p  # coeff[:, t] multiplies e_p(t x)
        B = np.conj(np.transpose(self.blocks, (0, 2, 1))) if adjoint else self.blocks
        out_coeff = np.einsum("trs,st->rt", B, coeff)
        W = np.fft.ifft(out_coeff, axis=1) * self.p
        out = np.empty(len(v), dtype=complex)
        out[order.ravel()] = W.ravel()
        return out.real if np.isrealobj(v) else out

    def singular_values(self) -> np.ndarray:
        return np.concatenate([np.linalg.svd(B, compute_uv=False) for B in self.blocks])

    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([np.linalg.eigvalsh(B) for B in self.blocks])


def translation_blocks(S: np.ndarray, shape: str) -> TranslationBlocks:
    p = S.shape[0]
    R = (p - 1) // 2
    dist = np.arange(1, R + 1)
    r, s, z = np.meshgrid(np.arange(R), np.arange(R), np.arange(p), indexing="ij")
    a = np.zeros(r.size, dtype=np.int64)
    b = dist[r.ravel()]
    c = z.ravel()
    d = (z.ravel() + dist[s.ravel()]) % p
    m = shape_entries(S, shape, a, b, c, d).reshape(R, R, p).astype(float)
    blocks = np.fft.ifft(m, axis=2) * p  # sum_z m(z) e_p(t z)
    return TranslationBlocks(p, np.ascontiguousarray(np.transpose(blocks, (2, 0, 1))))


def projector_blocks(p: int) -> np.ndarray:
    """P0, P1, P2 in translation-block form, shape (3, p, R, R)."""
    R = (p - 1) // 2
    dist = np.arange(1, R + 1)
    out = np.zeros((3, p, R, R), dtype=complex)
    ones = np.full(R, 1 / np.sqrt(R))
    out[0, 0] = np.outer(ones, ones)
    out[2, 0] = np.eye(R) - out[0, 0]
    for t in range(1, p):
        w = 1 + np.exp(2j * np.pi * t * dist / p)
        w /= np.linalg.norm(w)
        out[1, t] = np.outer(w, np.conj(w))
        out[2, t] = np.eye(R) - out[1, t]
    return out


# graph matrices


@dataclass(eq=False)
class GraphMatrix:
    shape_id: str
    p: int
    seidel: np.ndarray = field(repr=False)
    data: np.ndarray | None = field(default=None, repr=False)

    @property
    def symmetric(self) -> bool:
        return self.shape_id in SYMMETRIC or self.shape_id == "DIAMOND"

    @cached_property
    def indexing(self) -> PairIndexing:
        return pair_indexing(self.p)

    @cached_property
    def blocks(self) -> TranslationBlocks:
        if self.shape_id == "DIAMOND":
            raise ValueError("DIAMOND is vertex-indexed; no pair blocks")
        return translation_blocks(self.seidel, self.shape_id)

    @property
    def size(self) -> int:
        return self.p if self.shape_id == "DIAMOND" else self.indexing.size

    def matvec(self, v: np.ndarray) -> np.ndarray:
        if self.data is not None:
            return self.data @ v
        return self.blocks.apply(v, self.indexing)

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        if self.data is not None:
            return self.data.T @ v
        return self.blocks.apply(v, self.indexing, adjoint=True)


def build_graph_matrix(g: PaleyGraph, shape_id: str, dense: bool | None = None) -> GraphMatrix:
    if shape_id == "DIAMOND":
        return diamond_matrix(g)
    if shape_id not in PAIR_SHAPES:
        raise KeyError(f"unknown shape {shape_id!r}")
    if dense is None:
        dense = g.p <= DENSE_MAX_P
    m = GraphMatrix(shape_id, g.p, g.seidel)
    if dense:
        m.data = dense_shape(g.seidel, shape_id, m.indexing)
    return m


def diamond_from_seidel(S: np.ndarray) -> np.ndarray:
    p = S.shape[0]
    S2 = S.astype(np.int64) @ S.astype(np.int64)
    M = (S2**2 - (p - 2)).astype(float)
    np.fill_diagonal(M, 0.0)
    return M


def diamond_matrix(g: PaleyGraph) -> GraphMatrix:
    return GraphMatrix("DIAMOND", g.p, g.seidel, diamond_from_seidel(g.seidel))


# projections


@dataclass(frozen=True, eq=False)
class SubspaceProjections:
    P0: np.ndarray = field(repr=False)
    P1: np.ndarray = field(repr=False)
    P2: np.ndarray = field(repr=False)

    def __getitem__(self, i: int) -> np.ndarray:
        return (self.P0, self.P1, self.P2)[i]


def incidence(p: int, idx: PairIndexing | None = None) -> np.ndarray:
    """B[{i,j}, k] = 1 iff k in {i, j}, so (B u)_{ij} = u_i + u_j."""
    idx = idx or pair_indexing(p)
    B = np.zeros((idx.size, p))
    rows = np.arange(idx.size)
    B[rows, idx.pairs[:, 0]] = 1
    B[rows, idx.pairs[:, 1]] = 1
    return B


def _gram_schmidt(V: np.ndarray) -> np.ndarray:
    Q = np.array(V, dtype=float)
    for k in range(Q.shape[1]):
        for j in range(k):
            Q[:, k] -= (Q[:, j] @ Q[:, k]) * Q[:, j]
        Q[:, k] /= np.linalg.norm(Q[:, k])
    return Q


def build_projections(p: int) -> SubspaceProjections:
    n = p * (p - 1) // 2
    P0 = np.full((n, n), 2.0 / (p * (p - 1)))
    B = incidence(p)
    basis = np.eye(p)[:, : p - 1] - np.eye(p)[:, [p - 1]]  # mean-zero vectors e_k - e_{p-1}
    Q = _gram_schmidt(B @ basis)
    P1 = Q @ Q.T
    P2 = np.eye(n) - P0 - P1
    return SubspaceProjections(P0, P1, P2)


def projection_01(v: np.ndarray, p: int) -> np.ndarray:
    """(P0 + P1) v via least squares on the incidence map: B (B^T B)^{-1} B^T v."""
    B = incidence(p)
    gram = (p - 2) * np.eye(p) + np.ones((p, p))
    return B @ np.linalg.solve(gram, B.T @ v)


def exact_decomposition_check(g: PaleyGraph, shape_id: str, proj: SubspaceProjections | None = None) -> float:
    p = g.p
    proj = proj or build_projections(p)
    T = build_graph_matrix(g, shape_id, dense=True).data
    if shape_id == "T301":
        rhs = 2 * (p - 2) * proj.P0 + (p - 4) * proj.P1 - 2 * proj.P2
    elif shape_id == "T401":
        rhs = (p - 2) * (p - 3) / 2 * proj.P0 - (p - 3) * proj.P1 + proj.P2
    else:
        raise ValueError("only T301 and T401 have a closed projector form")
    return float(np.abs(T - rhs).max())


# norms


@dataclass(frozen=True)
class NormEstimate:
    value: float
    iterations: int
    converged: bool


def _seed() -> int:
    return int(os.environ.get("PALEY_SOS_SEED", "42"))


def power_iteration(matvec, rmatvec, n: int, tol: float = 1e-6, max_iter: int = 2000,
                    seed: int | None = None) -> NormEstimate:
    """Largest singular value by power iteration on M^T M."""
    rng = np.random.default_rng(_seed() if seed is None else seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    sigma, reseeded = 0.0, False
    for it in range(1, max_iter + 1):
        y = matvec(x)
        new = float(np.linalg.norm(y))
        if new == 0.0:
            if reseeded:
                return NormEstimate(0.0, it, True)
            x = rng.standard_normal(n)
            x /= np.linalg.norm(x)
            reseeded = True
            continue
        z = rmatvec(y)
        nz = float(np.linalg.norm(z))
        if nz == 0.0:
            return NormEstimate(new, it, True)
        x = z / nz
        if abs(new - sigma) <= tol * new:
            return NormEstimate(new, it, True)
        sigma = new
    return NormEstimate(sigma, max_iter, False)


def _dense_norm(M: np.ndarray, symmetric: bool) -> float:
    if symmetric:
        ev = np.linalg.eigvalsh(M)
        return float(max(abs(ev[0]), abs(ev[-1])))
    return float(np.linalg.norm(M, 2))


def spectral_norm(m: GraphMatrix, tol: float = 1e-6, method: str = "auto") -> float:
    """Operator norm: full eigensolve when dense and small, power iteration otherwise.

    method: "auto", "dense", "power" or "blocks" (exact per-block SVD).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method == "auto":
        method = "dense" if m.data is not None and m.size <= 2000 else "power"
    if method == "dense":
        data = m.data if m.data is not None else dense_shape(m.seidel, m.shape_id)
        return _dense_norm(data, m.symmetric)
    if method == "blocks":
        return float(m.blocks.singular_values().max())
    if method == "power":
        est = power_iteration(m.matvec, m.rmatvec, m.size, tol=tol)
        if not est.converged:
            warnings.warn(f"power iteration for {m.shape_id} at p={m.p} hit the iteration cap")
        return est.value
    raise ValueError(f"unknown method {method!r}")


def restricted_norm(m: GraphMatrix, proj: SubspaceProjections | None, i: int | None, j: int | None,
                    method: str = "auto") -> float:
    """||P_i M P_j||; None on either side means no projection there.

    Dense when matrices are materialised, per translation block otherwise.
    """
    if m.shape_id == "DIAMOND":
        raise ValueError("projections act on pair-indexed matrices")
    if method == "auto":
        method = "dense" if m.data is not None and proj is not None else "blocks"
    if method == "dense":
        A = m.data if m.data is not None else dense_shape(m.seidel, m.shape_id, m.indexing)
        if i is not None:
            A = proj[i] @ A
        if j is not None:
            A = A @ proj[j]
        return float(np.linalg.norm(A, 2))
    if method == "blocks":
        P = projector_blocks(m.p)
        vals = []
        for t, B in enumerate(m.blocks.blocks):
            if i is not None:
                B = P[i, t] @ B
            if j is not None:
                B = B @ P[j, t]
            vals.append(np.linalg.norm(B, 2))
        return float(max(vals))
    raise ValueError(f"unknown method {method!r}")


# Schur-complement bookkeeping


def h22_from_graph_matrices(mats: dict[str, np.ndarray], alpha) -> np.ndarray:
    a2, a3, a4 = alpha.a2, alpha.a3, alpha.a4
    n = mats["T301"].shape[0]
    out = (a2 - a2**2) * np.eye(n)
    out += (a3 / 2 - a2**2) * mats["T301"] + (a3 / 2) * mats["T311"]
    out += (a4 / 16 - a2**2) * mats["T401"]
    out += (a4 / 16) * sum(mats[s] for s in ("T411", "T421", "T422", "T423", "T431", "T441"))
    return out


def h21h12_from_graph_matrices(mats: dict[str, np.ndarray], alpha, p: int) -> np.ndarray:
    a1, a2, a3 = alpha.a1, alpha.a2, alpha.a3
    x = a2 - a1 * a2
    y = a1 * a2
    n = mats["T301"].shape[0]
    out = (2 * x**2 + (p - 2) * (y**2 + a3**2 / 4 - y * a3 / 2)) * np.eye(n)
    out += (a3**2 / 4 - y * a3 / 2) * (mats["U311"] + mats["U321"])
    out += (x * (a2 - 3 * y + a3) + (p - 3) * (y**2 - y * a3 / 2 + a3**2 / 8)) * mats["T301"]
    out += x * a3 * mats["T311"]
    out += (a3**2 / 8 - y * a3 / 2) * mats["U411"]
    out += (a3**2 / 8 - y * a3 / 4) * (mats["U412"] + mats["U413"] + mats["U421"] + mats["U422"])
    out += (a3**2 / 8) * (mats["U423"] + mats["U431"])
    out += (2 * x * (a3 - 2 * y) + (p - 4) * (y - a3 / 4) ** 2) * mats["T401"]
    out += (x * a3 / 2) * mats["T411"]
    out += (a3**2 / 16 - y * a3 / 4) * (mats["U511"] + mats["U512"] + mats["U521"] + mats["U522"])
    out += (a3**2 / 16) * (mats["U523"] + mats["U531"] + mats["U532"] + mats["U541"])
    return out


def h21h12_derived(mats: dict[str, np.ndarray], alpha, p: int) -> np.ndarray:
    """Expansion of H21 H12 recomputed term by term.

    Differs from the stated one on disjoint pairs (extra T421 + T422 term, different T401
    weight). Exact on rows and columns indexed by edges; pairs meeting in one vertex pick
    up within-pair Seidel entries once non-edges are included.
    """
    a1, a2, a3 = alpha.a1, alpha.a2, alpha.a3
    x, y = a2 - a1 * a2, a1 * a2
    out = h21h12_from_graph_matrices(mats, alpha, p)
    out += (x * (a3 - 4 * y) - 2 * x * (a3 - 2 * y)) * mats["T401"]
    out += (x * a3 / 4) * (mats["T421"] + mats["T422"])
    return out


def edge_mask(g: PaleyGraph, idx: PairIndexing | None = None) -> np.ndarray:
    idx = idx or pair_indexing(g.p)
    return g.adjacency[idx.pairs[:, 0], idx.pairs[:, 1]] == 1


def schur_decomposition_residual(g: PaleyGraph, alpha) -> dict[str, float]:
    """Max entrywise gaps between direct assembly of H22, H21 H12 and their graph-matrix sums.

    Keys: "h22" and "h21h12" for the stated expansions over all pairs, "h21h12_derived_edges"
    for the recomputed expansion on the edge-indexed block.
    """
    from .pseudomoments import assemble_H

    idx = pair_indexing(g.p)
    mats = {s: dense_shape(g.seidel, s, idx) for s in PAIR_SHAPES}
    _, H12, H22 = assemble_H(g, alpha)
    K = H12.T @ H12
    e = edge_mask(g, idx)
    block = np.ix_(e, e)
    return {
        "h22": float(np.abs(H22 - h22_from_graph_matrices(mats, alpha)).max()),
        "h21h12": float(np.abs(K - h21h12_from_graph_matrices(mats, alpha, g.p)).max()),
        "h21h12_derived_edges": float(np.abs(K - h21h12_derived(mats, alpha, g.p))[block].max()),
    }

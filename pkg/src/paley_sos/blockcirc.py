"""Block-circulant form of the ordered-pair version of T441 and its spectral slices.

Ordered pairs (x, y), x != y, are listed as (h^i a, h^i (a + 1)) for i in 0..p-2 and
a in F_p. Since chi(h^{4i}) = 1, the entry between rows (i, a) and (k, b) only depends on
k - i, so the matrix is block circulant with p x p blocks B^(m).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .field import PrimeContext, make_context
from .graphmx import pair_indexing, shape_entries
from .paley import PaleyGraph


@dataclass(frozen=True, eq=False)
class BlockCirculantForm:
    p: int
    generator: int
    blocks: np.ndarray = field(repr=False)  # (p - 1, p, p), block m sits at (r, r + m)
    index_map: np.ndarray = field(repr=False)  # (p - 1, p, 2): ordered pair of row a in block-row i

    @property
    def size(self) -> int:
        return (self.p - 1) * self.p

    def assemble(self) -> np.ndarray:
        d, p = self.p - 1, self.p
        out = np.empty((d * p, d * p))
        for r in range(d):
            for c in range(d):
                out[r * p : (r + 1) * p, c * p : (c + 1) * p] = self.blocks[(c - r) % d]
        return out


@dataclass(frozen=True, eq=False)
class SpectralSlice:
    psi_index: int
    matrix: np.ndarray = field(repr=False)


def _ctx(source) -> PrimeContext:
    if isinstance(source, PaleyGraph):
        return source.ctx
    if isinstance(source, PrimeContext):
        return source
    return make_context(int(source))


def _quartic_blocks(ctx: PrimeContext, powers: np.ndarray) -> np.ndarray:
    """chi((a - s b)(a + 1 - s b)(a - s(b + 1))(a + 1 - s(b + 1))) for each multiplier s."""
    p = ctx.p
    chi = ctx.legendre_table.astype(np.int8)
    a = np.arange(p)[:, None]
    b = np.arange(p)[None, :]
    out = np.empty((len(powers), p, p))
    for k, s in enumerate(powers):
        sb, sb1 = (s * b) % p, (s * (b + 1)) % p
        out[k] = chi[(a - sb) % p] * chi[(a + 1 - sb) % p] * chi[(a - sb1) % p] * chi[(a + 1 - sb1) % p]
    return out


def reorder_t441(g: PaleyGraph | PrimeContext | int) -> BlockCirculantForm:
    ctx = _ctx(g)
    ctx.require_paley()
    p, h = ctx.p, ctx.generator
    powers = np.array([pow(h, m, p) for m in range(p - 1)])
    blocks = _quartic_blocks(ctx, powers)
    a = np.arange(p)
    index_map = np.stack(
        [(powers[:, None] * a[None, :]) % p, (powers[:, None] * (a[None, :] + 1)) % p], axis=-1
    )
    return BlockCirculantForm(p, h, blocks, index_map)


def ordered_t441(g: PaleyGraph) -> np.ndarray:
    """T441 on ordered pairs, rows in the order of the block-circulant index map."""
    form = reorder_t441(g)
    pairs = form.index_map.reshape(-1, 2)
    n = len(pairs)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    a, b = pairs[i.ravel()].T
    c, d = pairs[j.ravel()].T
    return shape_entries(g.seidel, "T441", a, b, c, d).reshape(n, n).astype(float)


def unordered_to_ordered(g: PaleyGraph) -> np.ndarray:
    """0/1 map from unordered pairs to ordered pairs (block-circulant order); E^T E = 2I."""
    form = reorder_t441(g)
    pairs = form.index_map.reshape(-1, 2)
    idx = pair_indexing(g.p)
    E = np.zeros((len(pairs), idx.size))
    E[np.arange(len(pairs)), idx.lookup[pairs[:, 0], pairs[:, 1]]] = 1.0
    return E


def slice_matrices(form: BlockCirculantForm) -> np.ndarray:
    """S^(j) = sum_m exp(2 pi i j m / (p - 1)) B^(m), stacked over j."""
    d = form.p - 1
    return np.fft.ifft(form.blocks, axis=0) * d


def spectral_slices(form: BlockCirculantForm) -> list[SpectralSlice]:
    return [SpectralSlice(j, s) for j, s in enumerate(slice_matrices(form))]


def slice_spectra(form: BlockCirculantForm) -> np.ndarray:
    """Sorted eigenvalues of every slice, shape (p - 1, p)."""
    return np.linalg.eigvalsh(slice_matrices(form))


def ones_eigenvalues(form: BlockCirculantForm) -> np.ndarray:
    """Rayleigh quotient of the all-ones vector in each slice."""
    return np.real(slice_matrices(form).sum(axis=(1, 2))) / form.p


def shared_spectra(form: BlockCirculantForm) -> np.ndarray:
    """Slice spectra with the all-ones eigenvalue removed, shape (p - 1, p - 1)."""
    S = slice_matrices(form)
    p = form.p
    # restrict to the orthogonal complement of the ones vector
    Q, _ = np.linalg.qr(np.c_[np.ones(p), np.eye(p)[:, : p - 1]])
    basis = Q[:, 1:]
    R = np.einsum("ai,jab,bk->jik", basis, S, basis)
    return np.linalg.eigvalsh(R)


def t441_norm(g: PaleyGraph | PrimeContext | int) -> float:
    """||T441|| on unordered pairs as half the largest slice eigenvalue modulus."""
    spec = slice_spectra(reorder_t441(g))
    return float(np.abs(spec).max() / 2)


def charsum1_matrix(ctx: PrimeContext | int) -> np.ndarray:
    """T_ij = sum_x chi((ix - j)(ix - j - 1)((i + 1)x - j)((i + 1)x - j - 1))."""
    ctx = _ctx(ctx)
    p = ctx.p
    chi = ctx.legendre_table.astype(np.int64)
    x = np.arange(p)
    out = np.empty((p, p))
    for i in range(p):
        u, w = (i * x) % p, ((i + 1) * x) % p
        j = np.arange(p)[:, None]
        prod = chi[(u - j) % p] * chi[(u - j - 1) % p] * chi[(w - j) % p] * chi[(w - j - 1) % p]
        out[i] = prod.sum(axis=1)
    return out

"""Invariant suites run by `paley-sos verify`.

Each check yields a Check; passed is True/False for hard assertions and None for soft checks
that only record a measured value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SUITES = ("field", "charsums", "graph", "graphmx", "blockcirc", "fk", "sdp")


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    p: int
    passed: bool | None
    measured: float | None = None
    detail: str = ""

    def line(self) -> str:
        tag = {True: "PASS", False: "FAIL", None: "INFO"}[self.passed]
        m = "" if self.measured is None else f" measured={self.measured:.6g}"
        d = f" {self.detail}" if self.detail else ""
        return f"{tag} p={self.p} {self.suite}.{self.name}{m}{d}"


def _hard(suite, name, p, ok, measured=None, detail=""):
    return Check(suite, name, p, bool(ok), None if measured is None else float(measured), detail)


def _soft(suite, name, p, measured, detail=""):
    return Check(suite, name, p, None, float(measured), detail)


def suite_field(p: int):
    from .field import make_context

    ctx = make_context(p)
    chi = ctx.legendre_table
    squares = {x * x % p for x in range(1, p)}
    yield _hard("field", "legendre_matches_squares", p,
                all((chi[a] == 1) == (a in squares) for a in range(1, p)) and chi[0] == 0)
    yield _hard("field", "chi_minus_one", p, chi[p - 1] == 1)
    h = ctx.generator
    yield _hard("field", "generator_order", p, len({pow(h, k, p) for k in range(p - 1)}) == p - 1)
    yield _hard("field", "dlog_inverts_powers", p,
                all(ctx.dlog[pow(h, k, p)] == k for k in range(p - 1)))
    a = np.arange(1, p)
    mult = chi[(a[:, None] * a[None, :]) % p] == chi[a][:, None] * chi[a][None, :]
    yield _hard("field", "chi_multiplicative", p, mult.all())
    tab = np.array([ctx.character_table(j)[1:] for j in range(p - 1)])
    gram = tab @ tab.conj().T
    err = np.abs(gram - (p - 1) * np.eye(p - 1)).max()
    yield _hard("field", "character_orthogonality", p, err < 1e-8, err)


def suite_charsums(p: int):
    from .charsums import (
        charsum_pair, charsum_pair_via_kloosterman, gauss_sum, kloosterman_direct,
        kloosterman_rewrite, kloosterman_table, twisted_moment, weil_check,
    )
    from .field import make_context

    ctx = make_context(p)
    G = gauss_sum(ctx, (p - 1) // 2)
    yield _hard("charsums", "gauss_chi_sqrt_p", p, abs(G - math.sqrt(p)) < 1e-8, abs(G - math.sqrt(p)))
    mods = [abs(abs(gauss_sum(ctx, j)) - math.sqrt(p)) for j in range(1, p - 1)]
    yield _hard("charsums", "gauss_modulus", p, max(mods) < 1e-8 * math.sqrt(p), max(mods))
    K = kloosterman_table(ctx, 2).values
    err = max(abs(kloosterman_rewrite(ctx, a) - K[a * a % p]) for a in range(1, p))
    yield _hard("charsums", "kloosterman_rewrite", p, err < 1e-9, err)
    err = max(abs(kloosterman_direct(ctx, 2, a) - K[a]) for a in range(1, p))
    yield _hard("charsums", "kloosterman_direct_vs_table", p, err < 1e-9, err)
    yield _hard("charsums", "k2_real", p, np.abs(K[1:].imag).max() < 1e-9)
    worst = max(abs(twisted_moment(ctx, j)) for j in range(1, p - 1))
    yield _hard("charsums", "twisted_moment_bound", p, worst <= 2 * p**1.5, worst / p**1.5)
    pair = [abs(charsum_pair(ctx, j)) for j in range(1, p - 1)]
    yield _hard("charsums", "charsum_pair_bound", p, max(pair) <= 2 * p + 1e-9, max(pair) / p)
    yield _hard("charsums", "charsum_pair_trivial", p, abs(charsum_pair(ctx, 0) - 1) < 1e-9)
    err = max(abs(charsum_pair(ctx, j) - charsum_pair_via_kloosterman(ctx, j)) for j in range(1, p - 1))
    yield _hard("charsums", "charsum_pair_two_routes", p, err < 1e-6, err)
    rng = np.random.default_rng(p)
    bad = 0
    for _ in range(200):
        f = [int(v) for v in rng.integers(0, p, size=int(rng.integers(1, 7)))] + [int(rng.integers(1, p))]
        rep = weil_check(ctx, f)
        if rep.bound_holds is False:
            bad += 1
    yield _hard("charsums", "weil_random_polynomials", p, bad == 0, bad)


def suite_graph(p: int):
    from .paley import (
        affine_image, build_paley, classical_bounds, clique_number, expected_spectra, spectra,
        strong_regularity,
    )

    g = build_paley(p)
    S = g.seidel.astype(np.int64)
    yield _hard("graph", "seidel_square", p,
                np.array_equal(S @ S, p * np.eye(p, dtype=np.int64) - np.ones((p, p), dtype=np.int64)))
    lam, mu, holds = strong_regularity(g)
    yield _hard("graph", "strongly_regular", p, holds and lam == (p - 5) // 4 and mu == (p - 1) // 4)
    got, want = spectra(g), expected_spectra(p)
    err = max(np.abs(got[k] - want[k]).max() / max(1.0, np.abs(want[k]).max()) for k in want)
    yield _hard("graph", "spectra", p, err < 1e-8, err)
    nr = next(a for a in range(2, p) if g.ctx.legendre_table[a] == -1)
    comp = 1 - g.adjacency - np.eye(p, dtype=g.adjacency.dtype)
    yield _hard("graph", "self_complementary", p, np.array_equal(affine_image(g, nr, 0), comp))
    rng = np.random.default_rng(p)
    qr = [a for a in range(1, p) if g.ctx.legendre_table[a] == 1]
    ok = all(np.array_equal(affine_image(g, int(rng.choice(qr)), int(rng.integers(p))), g.adjacency)
             for _ in range(20))
    yield _hard("graph", "affine_automorphisms", p, ok)
    w = clique_number(g)
    b = classical_bounds(p)
    yield _hard("graph", "omega_sandwich", p, 0.5 * math.log2(p) <= w <= b["hansen_podolskii"], w)
    yield _soft("graph", "omega_over_sqrt_p", p, w / math.sqrt(p))


def suite_graphmx(p: int):
    from .graphmx import (
        PAIR_SHAPES, PATTERN, SYMMETRIC, build_graph_matrix, build_projections, dense_shape,
        diamond_matrix, exact_decomposition_check, pair_indexing, schur_decomposition_residual,
        spectral_norm,
    )
    from .paley import build_paley
    from .pseudomoments import FkParams

    g = build_paley(p)
    idx = pair_indexing(p)
    a, b = idx.pairs.T
    share = (a[:, None] == a[None, :]).astype(int) + (a[:, None] == b[None, :]) \
        + (b[:, None] == a[None, :]) + (b[:, None] == b[None, :])
    equal = np.eye(idx.size, dtype=bool)
    masks = {"equal": equal, "one": (share == 1) & ~equal, "disjoint": share == 0}
    mats = {}
    bad_zero, bad_sym = [], []
    for s in PAIR_SHAPES:
        M = dense_shape(g.seidel, s, idx)
        mats[s] = M
        if np.any(M[~masks[PATTERN[s]]] != 0):
            bad_zero.append(s)
        if s in SYMMETRIC and not np.array_equal(M, M.T):
            bad_sym.append(s)
    yield _hard("graphmx", "zero_pattern", p, not bad_zero, detail=",".join(bad_zero))
    yield _hard("graphmx", "symmetric_shapes", p, not bad_sym, detail=",".join(bad_sym))
    n = idx.size
    yield _hard("graphmx", "identity_partition", p,
                np.array_equal(np.eye(n) + mats["T301"] + mats["T401"], np.ones((n, n))))
    proj = build_projections(p)
    for s in ("T301", "T401"):
        r = exact_decomposition_check(g, s, proj)
        yield _hard("graphmx", f"{s}_projector_form", p, r < 1e-8, r)
    dn = spectral_norm(diamond_matrix(g), method="dense")
    yield _hard("graphmx", "diamond_norm", p, abs(dn - (p - 1) * (p - 3)) < 1e-6, dn)
    worst = 0.0
    for s in ("T441", "T421", "U541", "U412"):
        m = build_graph_matrix(g, s, dense=True)
        d, bl = spectral_norm(m, method="dense"), spectral_norm(m, method="blocks")
        worst = max(worst, abs(d - bl) / max(1.0, d))
    yield _hard("graphmx", "block_norm_matches_dense", p, worst < 1e-8, worst)
    rng = np.random.default_rng(p)
    res = schur_decomposition_residual(g, FkParams(*rng.uniform(0, 1, 4)))
    yield _hard("graphmx", "h22_expansion", p, res["h22"] < 1e-8, res["h22"])
    yield _hard("graphmx", "h21h12_derived_expansion_edges", p,
                res["h21h12_derived_edges"] < 1e-8, res["h21h12_derived_edges"])
    yield _soft("graphmx", "h21h12_stated_expansion_residual", p, res["h21h12"])


def suite_blockcirc(p: int):
    from .blockcirc import (
        charsum1_matrix, ones_eigenvalues, ordered_t441, reorder_t441, shared_spectra,
        slice_matrices, slice_spectra, t441_norm,
    )
    from .graphmx import build_graph_matrix, spectral_norm
    from .paley import build_paley

    g = build_paley(p)
    form = reorder_t441(g)
    d = p - 1
    yield _hard("blockcirc", "transpose_blocks", p,
                all(np.array_equal(form.blocks[(-m) % d], form.blocks[m].T) for m in range(d)))
    S = slice_matrices(form)
    yield _hard("blockcirc", "slices_hermitian", p, np.abs(S - S.conj().transpose(0, 2, 1)).max() < 1e-10)
    spec = slice_spectra(form)
    if p <= 29:
        T = ordered_t441(g)
        yield _hard("blockcirc", "reassembly", p, np.array_equal(T, form.assemble()))
        ev = np.linalg.eigvalsh(T)
        err = np.abs(np.sort(ev) - np.sort(spec.ravel())).max()
        yield _hard("blockcirc", "spectrum_union", p, err < 1e-6 * max(1.0, np.abs(ev).max()), err)
    sh = shared_spectra(form)
    err = np.abs(sh - sh[0]).max()
    yield _hard("blockcirc", "shared_spectra", p, err < 1e-6, err)
    ones = ones_eigenvalues(form)
    yield _hard("blockcirc", "ones_eigenvalue_bound", p, np.abs(ones).max() <= 2 * p, np.abs(ones).max() / p)
    nt = t441_norm(g)
    if p <= 61:
        direct = spectral_norm(build_graph_matrix(g, "T441"), method="blocks")
        yield _hard("blockcirc", "norm_relation", p, abs(nt - direct) <= 1e-6 * direct, abs(nt - direct))
    yield _soft("blockcirc", "t441_norm_over_p", p, nt / p)
    C = charsum1_matrix(g.ctx)
    ind = np.ones(p)
    ind[[0, p - 1]] = 0
    err = np.abs(C - (S[0].real + ind[None, :])).max()
    yield _hard("blockcirc", "charsum1_vs_trivial_slice", p, err < 1e-9, err)
    yield _soft("blockcirc", "charsum1_asymmetry", p, np.abs(C - C.T).max())


def suite_fk(p: int):
    from .paley import build_paley, clique_number
    from .pseudomoments import (
        FkParams, assemble_M, fk4_value, fk_blocks, min_eigenvalue, pseudomoment_sum_checks,
        schur_chain, u_quadratic_forms,
    )

    g = build_paley(p)
    rng = np.random.default_rng(p)
    alpha = FkParams(*rng.uniform(0, 0.3, 4))
    if p <= DENSE_FK_MAX_P:
        lam_b, _ = fk_blocks(g).min_eig(alpha.as_array())
        lam_d = min_eigenvalue(assemble_M(g, alpha).data)
        yield _hard("fk", "block_oracle_matches_dense", p, abs(lam_b - lam_d) < 1e-8, abs(lam_b - lam_d))
    res = fk4_value(g)
    w = clique_number(g)
    yield _hard("fk", "fk4_converged", p, res.converged, res.hi - res.lo)
    yield _hard("fk", "fk4_sandwich", p, w - 1e-3 <= res.lo <= math.sqrt(p) + 1e-3, res.lo)
    a = res.alpha
    for name, v in (("a2_sqrtp_over_a1", a.a2 * math.sqrt(p) / a.a1),
                    ("a3_sqrtp_over_a2", a.a3 * math.sqrt(p) / a.a2),
                    ("a4_sqrtp_over_a3", a.a4 * math.sqrt(p) / a.a3)):
        yield _soft("fk", name, p, v)
    sums = pseudomoment_sum_checks(g, alpha)
    for k in ("triangles_through_edge", "degree_sum", "pair_sum"):
        err = abs(sums[k]["value"] - sums[k]["expected"])
        yield _hard("fk", k, p, err < 1e-9, err)
    yield _soft("fk", "edge_pair_sum_deviation", p, sums["edge_pair_sum"]["deviation"])
    chain = schur_chain(g, alpha) if p <= DENSE_FK_MAX_P else {"h11_min": -1.0}
    if chain["h11_min"] > 0 and chain["schur_min"] >= -1e-8:
        yield _hard("fk", "schur_chain_sound", p, chain["m_min"] >= -1e-7, chain["m_min"])
    u = u_quadratic_forms(g)
    yield _hard("fk", "proj01_norm_sq_below_5", p, u["proj01_norm_sq"] < 5, u["proj01_norm_sq"])
    yield _hard("fk", "closed_form_projection_half", p, u["closed_form_residual_half"] < 1e-8,
                u["closed_form_residual_half"])
    yield _soft("fk", "closed_form_projection_stated", p, u["closed_form_residual"])
    err = abs(u["S1_kloosterman"] - u["S1_direct"])
    yield _hard("fk", "S1_two_routes", p, err < 1e-6 * max(1.0, abs(u["S1_direct"])), err)
    if u["ordered_sign_sum"] is not None:
        err = abs(u["ordered_sign_sum"] - u["identity_rhs"])
        yield _hard("fk", "ordered_sum_identity", p, err < 1e-6 * max(1.0, abs(u["identity_rhs"])), err)
    rel = abs(u["t441_form"] - u["identity_rhs"]) / max(1.0, abs(u["t441_form"]))
    yield _soft("fk", "t441_form_vs_identity_rel_gap", p, rel)


def suite_sdp(p: int):
    from .paley import build_paley, clique_number
    from .invariant import build_sos4_invariant, solve_invariant
    from .sdp import SOS4_MAX_P, build_sos2, build_sos4, correlation_example, solve

    if p == min(_SUITE_PRIMES.get("sdp", [p])):
        s = solve(correlation_example(), tol=1e-7)
        yield _hard("sdp", "correlation_example", p, abs(s.value - 1) < 1e-5, s.value)
    g = build_paley(p)
    s2 = solve(build_sos2(g), tol=1e-5)
    yield _hard("sdp", "sos2_sqrt_p", p, abs(s2.value - math.sqrt(p)) < 1e-3, s2.value - math.sqrt(p))
    yield _hard("sdp", "sos2_certified_bracket", p, s2.lower <= math.sqrt(p) + 1e-9 <= s2.upper + 2e-9)
    w = clique_number(g)
    inv = solve_invariant(build_sos4_invariant(g), tol=1e-4)
    yield _hard("sdp", "sos4_hierarchy", p, w - 2e-3 <= inv.value <= s2.value + 2e-3, inv.value)
    yield _soft("sdp", "sos4_certified_gap", p, inv.upper - inv.value)
    if p <= SOS4_MAX_P:
        prob = build_sos4(g)
        s4 = solve(prob, tol=1e-4)
        yield _hard("sdp", "sos4_dense_matches_invariant", p, abs(s4.value - inv.value) < 2e-3,
                    s4.value - inv.value)
        yield _hard("sdp", "sos4_feasible_point", p,
                    np.linalg.eigvalsh(s4.X)[0] >= -1e-6 * np.linalg.norm(s4.X)
                    and prob.constraint_residual(s4.X) < 1e-5)


DENSE_FK_MAX_P = 29
_SUITE_PRIMES: dict[str, list[int]] = {}
SUITE_FUNCS = {
    "field": suite_field, "charsums": suite_charsums, "graph": suite_graph,
    "graphmx": suite_graphmx, "blockcirc": suite_blockcirc, "fk": suite_fk, "sdp": suite_sdp,
}
# dense pair-indexed checks materialise C(p,2)^2 entries
SUITE_MAX_P = {"graphmx": 29, "fk": 149}


def run_verify(suite: str, primes: list[int], emit=print) -> list[Check]:
    names = SUITES if suite == "all" else (suite,)
    checks = []
    for name in names:
        _SUITE_PRIMES[name] = list(primes)
        for p in primes:
            if p > SUITE_MAX_P.get(name, 10**9):
                emit(f"SKIP p={p} {name} (above {SUITE_MAX_P[name]})")
                continue
            for c in SUITE_FUNCS[name](p):
                checks.append(c)
                emit(c.line())
    return checks

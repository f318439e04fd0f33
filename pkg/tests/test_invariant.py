import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paley_sos.invariant import build_sos4_invariant, solve_invariant
from paley_sos.moments import entry_profile
from paley_sos.paley import clique_number
from paley_sos.sdp import build_sos4, project_psd, solve


@pytest.fixture(scope="module")
def pair13(paley):
    g = paley(13)
    return build_sos4_invariant(g), build_sos4(g)


def _random(prob, seed):
    return np.random.default_rng(seed).standard_normal(len(prob.labels))


def test_dimensions(paley):
    for p in (13, 17, 29):
        inv = build_sos4_invariant(paley(p))
        assert inv.m == 1 + (p - 1) // 4
        assert inv.dim == build_sos4(paley(p)).dim


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_assembled_matrix_is_feasible_for_dense(pair13, seed):
    inv, dense = pair13
    M = inv.assemble(inv.project_affine(_random(inv, seed)))
    assert np.array_equal(M, M.T)
    assert dense.constraint_residual(M) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_weighted_geometry_matches_full_matrix(pair13, seed):
    inv, dense = pair13
    x = _random(inv, seed)
    assert math.isclose(inv.norm(x), np.linalg.norm(inv.assemble(x)), rel_tol=1e-12)
    xa = inv.project_affine(x)
    M = inv.assemble(xa)
    assert np.abs(inv.assemble(inv.project_psd(xa)) - project_psd(M)).max() < 1e-10
    assert math.isclose(inv.min_eig(xa), np.linalg.eigvalsh(M)[0], rel_tol=1e-9, abs_tol=1e-12)
    assert math.isclose(inv.value(xa), np.sum(dense.objective * M), rel_tol=1e-12)


def test_interior_matches_dense(paley):
    for p in (13, 17):
        inv, dense = build_sos4_invariant(paley(p)), build_sos4(paley(p))
        assert np.abs(inv.assemble(inv.interior()) - dense.interior).max() < 1e-14


def _orbit_count(adjacency, index, p):
    union, _, clique = entry_profile(adjacency, index)
    orbits = set()
    for u in union[clique]:
        s = [int(v) for v in u if v >= 0]
        if s:
            orbits.add(min(tuple(sorted((v - a) % p for v in s)) for a in s))
    return len(orbits)


def test_classes_are_translation_orbits(paley):
    for p in (13, 17):
        inv, dense = build_sos4_invariant(paley(p)), build_sos4(paley(p))
        free = int(np.isnan(inv.fixed).sum())
        assert free == _orbit_count(paley(p).adjacency, dense.index, p)


def test_values_match_dense_solver(paley):
    for p in (13, 17, 29):
        inv = solve_invariant(build_sos4_invariant(paley(p)))
        den = solve(build_sos4(paley(p)))
        assert inv.status == den.status == "optimal"
        assert abs(inv.value - den.value) < 2e-3


def test_certified_bracket(paley):
    for p in (13, 17, 29, 41):
        sol = solve_invariant(build_sos4_invariant(paley(p)))
        assert sol.status == "optimal"
        assert sol.lower <= sol.value + 1e-9
        assert sol.value <= sol.upper + 1e-4 * (1 + sol.value)
        assert clique_number(paley(p)) <= sol.upper + 1e-9


def test_polished_bound_is_never_looser(pair13):
    inv, _ = pair13
    s = _random(inv, 3)
    assert inv.upper_bound(s, polish=5) <= inv.upper_bound(s)


def test_iteration_cap_reported(pair13):
    inv, _ = pair13
    sol = solve_invariant(inv, tol=1e-9, max_iter=20)
    assert sol.status == "max_iter" and sol.iterations == 20
    with pytest.raises(ValueError):
        solve_invariant(inv, tol=0)


def test_trace_rows(pair13):
    inv, _ = pair13
    sol = solve_invariant(inv, trace=True)
    assert sol.trace and {"iteration", "primal_residual", "upper"} <= set(sol.trace[0])

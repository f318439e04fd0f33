"""Dense SDP solver by operator splitting and the SOS2 / SOS4 clique relaxations.

Problems have the form: maximize <C, X> over symmetric X >= 0 whose entries are grouped into
equality classes, each class either free (all entries equal) or fixed to a value. The affine
projection is per-class averaging, the cone projection is eigenvalue clipping.

The reported X is the affine projection of the cone iterate. Every solve also reports
certified bounds. The lower bound is the objective of an exactly PSD feasible point: the
affine iterate mixed with a strictly feasible interior point until it is PSD. The upper
bound comes from the dual: for S >= 0 and D = C + S, any feasible X satisfies
<C, X> <= <D, X_fixed> + sum_c |<D, E_c>| * bound, where E_c is the indicator of class c
and bound caps |X_ij| on feasible points.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .moments import MomentIndex, entry_profile, moment_index
from .paley import PaleyGraph

SOS4_MAX_P = 61


@dataclass(frozen=True, eq=False)
class SdpProblem:
    dim: int
    objective: np.ndarray = field(repr=False)  # symmetric C
    labels: np.ndarray = field(repr=False)  # (dim, dim) class id of each entry, symmetric
    fixed: np.ndarray = field(repr=False)  # per-class fixed value, nan for free classes
    interior: np.ndarray | None = field(default=None, repr=False)  # strictly feasible point
    entry_bound: float = 1.0  # |X_ij| <= entry_bound on every feasible X
    name: str = ""
    index: MomentIndex | None = field(default=None, repr=False)

    @property
    def class_count(self) -> int:
        return len(self.fixed)

    @property
    def free_classes(self) -> np.ndarray:
        return np.flatnonzero(np.isnan(self.fixed))

    def constraints(self):
        """Yield (rows, cols, coefficients, rhs) triples, one per scalar equality.

        Free classes give X_e0 - X_ek = 0 for each further entry (upper triangle), fixed
        classes give X_e = value for each entry.
        """
        iu, ju = np.triu_indices(self.dim)
        lab = self.labels[iu, ju]
        order = np.argsort(lab, kind="stable")
        bounds = np.searchsorted(lab[order], np.arange(self.class_count + 1))
        for c in range(self.class_count):
            members = order[bounds[c] : bounds[c + 1]]
            if np.isnan(self.fixed[c]):
                for k in members[1:]:
                    yield (iu[[members[0], k]], ju[[members[0], k]], np.array([1.0, -1.0]), 0.0)
            else:
                for k in members:
                    yield (iu[[k]], ju[[k]], np.array([1.0]), float(self.fixed[c]))

    def fixed_matrix(self) -> np.ndarray:
        vals = np.nan_to_num(self.fixed, nan=0.0)
        return vals[self.labels]

    def project_affine(self, V: np.ndarray) -> np.ndarray:
        lab = self.labels.ravel()
        counts = np.bincount(lab, minlength=self.class_count)
        means = np.bincount(lab, weights=V.ravel(), minlength=self.class_count) / counts
        means = np.where(np.isnan(self.fixed), means, self.fixed)
        return means[self.labels]

    def class_sums(self, D: np.ndarray) -> np.ndarray:
        return np.bincount(self.labels.ravel(), weights=D.ravel(), minlength=self.class_count)

    def constraint_residual(self, X: np.ndarray) -> float:
        """Distance to the affine set relative to max(1, ||X||_F)."""
        return float(np.linalg.norm(X - self.project_affine(X)) / max(1.0, np.linalg.norm(X)))

    def upper_bound(self, S: np.ndarray) -> float:
        """Dual bound from any PSD S (clipped here to be safe)."""
        D = self.objective + project_psd(S)
        sums = self.class_sums(D)
        free = np.isnan(self.fixed)
        fixed_part = float(np.sum(sums[~free] * self.fixed[~free]))
        return fixed_part + self.entry_bound * float(np.abs(sums[free]).sum())


@dataclass
class SdpSolution:
    value: float  # objective of X
    X: np.ndarray | None = field(repr=False)  # affine-feasible, PSD up to the solver tolerance
    status: str  # "optimal" or "max_iter"
    primal_residual: float
    dual_residual: float
    gap: float  # (upper - value) / (1 + |value|)
    upper: float  # certified upper bound on the optimum
    lower: float  # certified lower bound: objective of an exactly PSD feasible point
    iterations: int
    runtime: float
    trace: list[dict] = field(default_factory=list, repr=False)
    reduced: np.ndarray | None = field(default=None, repr=False)  # orbit coordinates, if any


def project_psd(V: np.ndarray) -> np.ndarray:
    V = (V + V.T) / 2
    w, Q = np.linalg.eigh(V)
    w = np.clip(w, 0.0, None)
    return (Q * w) @ Q.T


def _repair(prob: SdpProblem, X: np.ndarray) -> tuple[np.ndarray, float]:
    """Mix an affine-feasible X with the interior point until it is PSD."""
    lam_x = float(np.linalg.eigvalsh(X)[0])
    if lam_x >= 0 or prob.interior is None:
        return X, lam_x
    delta = float(np.linalg.eigvalsh(prob.interior)[0])
    t = -lam_x / (delta - lam_x)
    t = min(1.0, t * (1 + 1e-9) + 1e-14)
    Y = (1 - t) * X + t * prob.interior
    return Y, float(np.linalg.eigvalsh(Y)[0])


def solve(
    prob: SdpProblem,
    tol: float = 1e-4,
    max_iter: int = 20000,
    rho: float | None = None,
    check_every: int = 10,
    trace: bool = False,
    psd_tol: float = 1e-6,
) -> SdpSolution:
    """ADMM on X in the affine set, Z in the PSD cone, X = Z (scaled dual U).

    Stops once residuals and the certified relative gap are below tol and the affine iterate
    has min eigenvalue >= -psd_tol * ||X||_F.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    start = time.perf_counter()
    C = prob.objective
    n = prob.dim
    Z = prob.interior.copy() if prob.interior is not None else np.eye(n) * (1.0 / n)
    U = np.zeros_like(Z)
    rho = rho if rho is not None else max(1e-3, np.linalg.norm(C) / math.sqrt(n))
    rows: list[dict] = []
    status = "max_iter"
    it = 0
    r_prim = r_dual = float("inf")
    for it in range(1, max_iter + 1):
        X = prob.project_affine(Z - U + C / rho)
        Z_old = Z
        Z = project_psd(X + U)
        U += X - Z
        scale = max(1.0, np.linalg.norm(X), np.linalg.norm(Z))
        r_prim = float(np.linalg.norm(X - Z) / scale)
        r_dual = float(rho * np.linalg.norm(Z - Z_old) / max(1.0, np.linalg.norm(rho * U)))
        if it % check_every and it != max_iter:
            continue
        XA = prob.project_affine(Z)
        value = float(np.sum(C * XA))
        upper = prob.upper_bound(-rho * U)
        gap = (upper - value) / (1 + abs(value))
        if trace:
            rows.append(dict(iteration=it, primal_residual=r_prim, dual_residual=r_dual,
                             objective=value, upper=upper, rho=rho))
        if max(r_prim, r_dual, gap) < tol and \
                np.linalg.eigvalsh(XA)[0] >= -psd_tol * np.linalg.norm(XA):
            status = "optimal"
            break
        # residual balancing; U is scaled so rescale it with rho
        if r_prim > 10 * r_dual:
            rho *= 2
            U /= 2
        elif r_dual > 10 * r_prim:
            rho /= 2
            U *= 2
    X = prob.project_affine(Z)
    value = float(np.sum(C * X))
    upper = prob.upper_bound(-rho * U)
    Xr, _ = _repair(prob, X)
    lower = float(np.sum(C * Xr))
    return SdpSolution(
        value=value, X=X, status=status, primal_residual=r_prim, dual_residual=r_dual,
        gap=(upper - value) / (1 + abs(value)), upper=upper, lower=lower, iterations=it,
        runtime=time.perf_counter() - start, trace=rows,
    )


# builders


def _clique_distribution_moments(adjacency: np.ndarray, index: MomentIndex) -> np.ndarray:
    """Moment matrix of the uniform distribution over the index rows (all cliques).

    Entry (S, T) is the probability that S u T lies inside the sampled clique, so the matrix
    is sum_K v_K v_K^T / count with unitriangular v_K, hence positive definite.
    """
    rows = index.rows
    d = index.dim
    S = rows[:, None, :, None]
    K = rows[None, :, None, :]
    # inside[S, K] = 1 if every element of S appears in K
    inside = ((S < 0) | (S == K).any(axis=3, keepdims=True)).all(axis=(2, 3)).astype(float)
    return inside @ inside.T / d


def _moment_problem(adjacency: np.ndarray, degree: int, key: str, name: str) -> SdpProblem:
    index = moment_index(adjacency, degree=degree)
    union, size, clique = entry_profile(adjacency, index)
    d = index.dim
    if key == "union":
        keys = np.where(clique[..., None], union, -2).reshape(-1, 4)
    else:  # FK: one class per clique size
        keys = np.where(clique, size, -1).reshape(-1, 1)
    uniq, labels = np.unique(keys, axis=0, return_inverse=True)
    labels = labels.reshape(d, d)
    fixed = np.full(len(uniq), np.nan)
    if key == "union":
        fixed[(uniq == -2).all(axis=1)] = 0.0
        fixed[(uniq == -1).all(axis=1)] = 1.0
    else:
        fixed[uniq[:, 0] == -1] = 0.0
        fixed[uniq[:, 0] == 0] = 1.0
    n = adjacency.shape[0]
    C = np.zeros((d, d))
    C[0, 1 : 1 + n] = 0.5
    C[1 : 1 + n, 0] = 0.5
    interior = _clique_distribution_moments(adjacency, index)
    return SdpProblem(d, C, labels, fixed, interior, 1.0, name, index)


def build_sos2(g: PaleyGraph | np.ndarray) -> SdpProblem:
    """Degree-2 relaxation: rows are the empty set and singletons."""
    adjacency = g.adjacency if isinstance(g, PaleyGraph) else np.asarray(g)
    return _moment_problem(adjacency, 1, "union", "sos2")


def build_sos4(g: PaleyGraph | np.ndarray, max_p: int = SOS4_MAX_P) -> SdpProblem:
    """Degree-4 relaxation: rows are the empty set, singletons and edges; classes by union."""
    adjacency = g.adjacency if isinstance(g, PaleyGraph) else np.asarray(g)
    n = adjacency.shape[0]
    if n > max_p:
        raise ValueError(f"SOS4 is limited to {max_p} vertices here (got {n})")
    return _moment_problem(adjacency, 2, "union", "sos4")


def build_fk4(g: PaleyGraph | np.ndarray, max_p: int = SOS4_MAX_P) -> SdpProblem:
    """Same rows as SOS4 but one class per clique size, i.e. the FK family."""
    adjacency = g.adjacency if isinstance(g, PaleyGraph) else np.asarray(g)
    if adjacency.shape[0] > max_p:
        raise ValueError(f"FK4 as a dense SDP is limited to {max_p} vertices here")
    return _moment_problem(adjacency, 2, "size", "fk4")


def correlation_example() -> SdpProblem:
    """max X_12 subject to X_11 = X_22 = 1, X >= 0."""
    labels = np.array([[0, 1], [1, 2]])
    C = np.array([[0.0, 0.5], [0.5, 0.0]])
    return SdpProblem(2, C, labels, np.array([1.0, np.nan, 1.0]), np.eye(2), 1.0, "corr")


def residual_trend_ok(trace: list[dict], factor: int = 10) -> bool:
    """max residual at iteration factor*k is at most its value at k, for all logged k."""
    res = {r["iteration"]: max(r["primal_residual"], r["dual_residual"]) for r in trace}
    return all(res[factor * k] <= res[k] for k in res if factor * k in res)

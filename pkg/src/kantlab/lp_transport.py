"""Linear-program substrate: generic LP with duals, classical transport,
Kantorovich-Rubinshtein norm and the segment-distance cost, plus strong
monotonicity verification of dual potentials."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .errors import BalanceError, ContractError, DomainError
from .measures import DiscreteMeasure, Measure, GridDensity1D, mixture, sample_grid

FEAS_TOL = 1e-9
DUAL_TOL = 1e-8
SUPPORT_TOL = 1e-10

# 1e-10 is the tightest tolerance HiGHS accepts
_HIGHS_OPTS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


@dataclass(frozen=True)
class LinearProgram:
    """min c.x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lb <= x <= ub."""

    c: np.ndarray
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    bounds: object = (0, None)


@dataclass(frozen=True)
class LPSolution:
    x: Optional[np.ndarray]
    duals_eq: Optional[np.ndarray]
    duals_ub: Optional[np.ndarray]
    value: Optional[float]
    status: str  # optimal | infeasible | unbounded


def lp_solve(lp: LinearProgram) -> LPSolution:
    """Solve with the HiGHS simplex; deterministic for identical input."""
    res = linprog(
        lp.c,
        A_eq=lp.A_eq,
        b_eq=lp.b_eq,
        A_ub=lp.A_ub,
        b_ub=lp.b_ub,
        bounds=lp.bounds,
        method="highs",
        options=_HIGHS_OPTS,
    )
    if res.status == 0:
        duals_eq = res.eqlin.marginals if lp.A_eq is not None else None
        duals_ub = res.ineqlin.marginals if lp.A_ub is not None else None
        return LPSolution(res.x, duals_eq, duals_ub, float(res.fun), "optimal")
    if res.status == 2:
        return LPSolution(None, None, None, None, "infeasible")
    if res.status == 3:
        return LPSolution(None, None, None, None, "unbounded")
    raise DomainError(f"LP solver failed: {res.message}")


@dataclass(frozen=True)
class TransportPlan:
    """Joint weights over two atom sets, with optional dual potentials."""

    mu: DiscreteMeasure
    nu: DiscreteMeasure
    weights: np.ndarray
    phi: Optional[np.ndarray] = None
    psi: Optional[np.ndarray] = None
    value: Optional[float] = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.mu.n_atoms, self.nu.n_atoms):
            raise DomainError("plan shape does not match marginals")
        if np.any(w < -1e-12):
            raise DomainError("plan weight below -1e-12")
        w = np.maximum(w, 0.0)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def marginal_defect(self) -> float:
        row = np.abs(self.weights.sum(axis=1) - self.mu.weights).max()
        col = np.abs(self.weights.sum(axis=0) - self.nu.weights).max()
        return float(max(row, col))

    def row_conditional(self, i: int) -> DiscreteMeasure:
        w = self.weights[i]
        total = w.sum()
        if total <= 1e-12:
            raise ContractError("conditional of a null row is undefined")
        return DiscreteMeasure(self.nu.atoms, w / total)

    def to_json(self) -> str:
        obj = {
            "weights": [[float(v) for v in row] for row in self.weights],
            "phi": None if self.phi is None else [float(v) for v in self.phi],
            "psi": None if self.psi is None else [float(v) for v in self.psi],
            "value": None if self.value is None else float(self.value),
        }
        return json.dumps(obj)


def load_cost_csv(path) -> np.ndarray:
    """Row-major, header-free CSV cost matrix."""
    c = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    if not np.all(np.isfinite(c)):
        raise DomainError("cost matrix has non-finite entries")
    return c


def solve_transport(c: np.ndarray, mu: DiscreteMeasure, nu: DiscreteMeasure) -> TransportPlan:
    """Classical optimal transport with dual potentials."""
    c = np.asarray(c, dtype=float)
    n, m = mu.n_atoms, nu.n_atoms
    if c.shape != (n, m):
        raise DomainError(f"cost shape {c.shape} does not match {(n, m)}")
    if abs(mu.total_mass - nu.total_mass) > FEAS_TOL:
        raise BalanceError(
            f"marginal masses differ: {mu.total_mass!r} vs {nu.total_mass!r}"
        )
    A = np.zeros((n + m, n * m))
    for i in range(n):
        A[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        A[n + j, j::m] = 1.0
    b = np.concatenate([mu.weights, nu.weights])
    sol = lp_solve(LinearProgram(c.ravel(), A_eq=A, b_eq=b))
    if sol.status != "optimal":
        raise BalanceError(f"transport LP status {sol.status}")
    w = sol.x.reshape(n, m)
    return TransportPlan(mu, nu, w, phi=sol.duals_eq[:n], psi=sol.duals_eq[n:], value=sol.value)


def _union_signed(measures):
    """Common (canonical) atom set and each measure's weights on it."""
    all_atoms = np.vstack([m.atoms for m in measures])
    base = DiscreteMeasure(all_atoms, np.ones(all_atoms.shape[0]))
    atoms = base.atoms
    cols = []
    for m in measures:
        w = np.zeros(atoms.shape[0])
        for a, wt in zip(m.atoms, m.weights):
            d = np.max(np.abs(atoms - a), axis=1)
            w[int(np.argmin(d))] += wt
        cols.append(w)
    return atoms, cols


def _lipschitz_constraints(atoms: np.ndarray):
    """Inequality rows encoding |f(a)-f(b)| <= d(a,b).

    In dimension 1 (sorted atoms) the adjacent pairs suffice; otherwise all
    pairs are used.  Desk-scale supports only.
    """
    n = atoms.shape[0]
    rows, rhs = [], []
    if atoms.shape[1] == 1:
        order = np.argsort(atoms[:, 0])
        for a, b in zip(order[:-1], order[1:]):
            gap = abs(atoms[b, 0] - atoms[a, 0])
            r = np.zeros(n)
            r[a], r[b] = 1.0, -1.0
            rows.append(r.copy())
            rhs.append(gap)
            r[a], r[b] = -1.0, 1.0
            rows.append(r)
            rhs.append(gap)
    else:
        for a in range(n):
            for b in range(a + 1, n):
                gap = float(np.linalg.norm(atoms[a] - atoms[b]))
                r = np.zeros(n)
                r[a], r[b] = 1.0, -1.0
                rows.append(r.copy())
                rhs.append(gap)
                r[a], r[b] = -1.0, 1.0
                rows.append(r)
                rhs.append(gap)
    return np.asarray(rows), np.asarray(rhs)


def kr_norm(p: DiscreteMeasure, q: DiscreteMeasure) -> float:
    """Kantorovich-Rubinshtein norm of p - q.

    sup of the integral of f against p - q over 1-Lipschitz f with |f| <= 1,
    solved as an LP with one variable per atom of the union support.
    """
    if p.n_atoms == 0 or q.n_atoms == 0:
        raise DomainError("empty support")
    if p.dim != q.dim:
        raise DomainError("dimension mismatch")
    atoms, (pw, qw) = _union_signed([p, q])
    c = pw - qw
    # canonical sign: kr(p, q) and kr(q, p) solve the identical LP, making
    # symmetry exact at the bit level (the feasible set is sign-symmetric)
    nz = np.nonzero(c)[0]
    if nz.size and c[nz[0]] < 0:
        c = -c
    A_ub, b_ub = _lipschitz_constraints(atoms)
    sol = lp_solve(LinearProgram(-c, A_ub=A_ub, b_ub=b_ub, bounds=(-1, 1)))
    if sol.status != "optimal":
        raise DomainError(f"KR LP status {sol.status}")
    return float(np.clip(-sol.value, 0.0, 2.0))


def kr_to_segment(p: DiscreteMeasure, e0: DiscreteMeasure, e1: DiscreteMeasure):
    """min over t in [0,1] of kr_norm(p, t*e0 + (1-t)*e1), as one joint LP.

    Uses the flow (dual) form of the KR norm so that t enters the equality
    constraints affinely.  Returns (value, t_star).
    """
    atoms, (pw, e0w, e1w) = _union_signed([p, e0, e1])
    n = atoms.shape[0]
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    dist = np.array([np.linalg.norm(atoms[a] - atoms[b]) for a, b in pairs])
    # variables: gamma (len pairs), alpha (n), beta (n), t (1)
    nv = len(pairs) + 2 * n + 1
    c = np.concatenate([dist, np.ones(2 * n), [0.0]])
    A = np.zeros((n, nv))
    for k, (a, b) in enumerate(pairs):
        A[a, k] += 1.0
        A[b, k] -= 1.0
    A[:, len(pairs):len(pairs) + n] = np.eye(n)
    A[:, len(pairs) + n:len(pairs) + 2 * n] = -np.eye(n)
    A[:, -1] = e0w - e1w
    b = pw - e1w
    bounds = [(0, None)] * (len(pairs) + 2 * n) + [(0, 1)]
    sol = lp_solve(LinearProgram(c, A_eq=A, b_eq=b, bounds=bounds))
    if sol.status != "optimal":
        raise DomainError(f"segment-KR LP status {sol.status}")
    return float(max(sol.value, 0.0)), float(sol.x[-1])


def segment_kr_min_1d(positions: np.ndarray, pw: np.ndarray,
                      e0w: np.ndarray, e1w: np.ndarray):
    """Fast exact min over t of the KR distance to a segment, on a common
    sorted 1-dimensional support of diameter <= 2.

    On such supports the |f| <= 1 bound never binds, so the KR norm equals
    the order-1 Wasserstein distance, giving a piecewise-linear convex
    function of t minimized at a weighted median of breakpoints.
    Returns (value, t_star).  Cross-checked against kr_to_segment in tests.
    """
    if positions[-1] - positions[0] > 2.0 + 1e-12:
        raise DomainError("fast segment distance requires support diameter <= 2")
    gaps = np.diff(positions)
    A = np.cumsum(pw - e1w)[:-1]
    B = np.cumsum(e0w - e1w)[:-1]

    def value_at(t):
        return float(np.sum(gaps * np.abs(A - t * B)))

    nz = np.abs(B) > 0
    if not np.any(nz):
        return value_at(0.0), 0.0
    bp = np.clip(A[nz] / B[nz], 0.0, 1.0)
    wts = gaps[nz] * np.abs(B[nz])
    order = np.argsort(bp)
    bp, wts = bp[order], wts[order]
    csum = np.cumsum(wts)
    half = 0.5 * csum[-1]
    t_star = float(bp[np.searchsorted(csum, half)])
    candidates = {0.0, 1.0, t_star}
    best_t = min(candidates, key=value_at)
    return value_at(best_t), best_t


def segment_kr_min_grid(p: GridDensity1D, e0: GridDensity1D, e1: GridDensity1D):
    """segment_kr_min_1d applied to aligned grid densities via midpoint atoms."""
    if not (p.same_grid(e0) and p.same_grid(e1)):
        raise DomainError("grids must be aligned")
    pos = p.midpoints()
    w = p.cell_width
    return segment_kr_min_1d(pos, p.values * w, e0.values * w, e1.values * w)


def wasserstein1(p: DiscreteMeasure, q: DiscreteMeasure) -> float:
    """W1 under Euclidean ground distance, via solve_transport."""
    atoms_p, atoms_q = p.atoms, q.atoms
    c = np.linalg.norm(atoms_p[:, None, :] - atoms_q[None, :, :], axis=2)
    return float(solve_transport(c, p, q).value)


def total_variation(p: DiscreteMeasure, q: DiscreteMeasure) -> float:
    """Sum of |p_i - q_i| over the common atom set."""
    _, (pw, qw) = _union_signed([p, q])
    return float(np.sum(np.abs(pw - qw)))


def verify_strong_monotonicity(plan: TransportPlan, c: np.ndarray,
                               tol: float = DUAL_TOL) -> bool:
    """True iff the duals certify strong monotonicity of the plan's support:
    phi_i + psi_j <= c_ij everywhere, with equality where the plan charges."""
    if plan.phi is None or plan.psi is None:
        raise ContractError("plan carries no dual potentials")
    c = np.asarray(c, dtype=float)
    gap = plan.phi[:, None] + plan.psi[None, :] - c
    if gap.max() > tol:
        return False
    charged = plan.weights > SUPPORT_TOL
    if charged.any() and np.abs(gap[charged]).max() > tol:
        return False
    return True

"""Nonlinear Kantorovich functionals over conditional kernels, the
fixed-barycenter LP over finite dictionaries, its collapse to a kernel,
both directions of the plan/map equivalence, and a Monge solver under
convex dominance."""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .convex_order import (
    ConvexOrderCertificate,
    PotentialFunction1D,
    check_convex_order_lp,
    quick_dominated_1d,
)
from .errors import ContractError, DomainError, InfeasibleError, RepresentationError
from .lp_transport import LinearProgram, TransportPlan, kr_norm, lp_solve
from .martingale import MartingaleCoupling, MongeMap, build_martingale_coupling, glue
from .measures import (
    ConditionalKernel,
    DiscreteMeasure,
    GridDensity1D,
    Measure,
    MomentMap,
    g_eval,
    mix,
    mixture,
    pushforward,
    sample_grid,
)

KINDS = ("xy", "xp", "xyp", "xu")
ROW_TOL = 1e-9


@dataclass(frozen=True)
class CostSpec:
    """Cost evaluator in one of four shapes.

    Evaluator signatures by kind:
      xy:  fn(x, y) -> float
      xp:  fn(x, p) -> float                       (p a probability measure)
      xyp: fn(x, ys, p) -> array over the rows ys  (vectorized in y)
      xu:  fn(x, u) -> float                       (u a point in R^d)
    """

    kind: str
    fn: Callable
    convex_in_p: bool = False
    convex_in_u: bool = False
    name: str = "custom"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown cost kind {self.kind!r}")

    def require(self, kind: str):
        if self.kind != kind:
            raise ContractError(f"cost kind is {self.kind!r}, operation needs {kind!r}")

    @staticmethod
    def composed(psi: Callable, f: Callable, g: Callable,
                 psi_increasing: Optional[bool] = None,
                 convex_in_p: bool = False, name: str = "composed") -> "CostSpec":
        """h(x, p) = psi(g(p) - f(x)) with vector-valued f and g.

        Composed costs with strictly convex psi admit minimizers only when
        the level or sublevel sets of g are convex and, in the sublevel
        case, psi is increasing; a non-increasing psi is accepted but
        flagged with a warning since existence may fail.
        """
        if psi_increasing is False:
            warnings.warn(
                "composed cost with non-increasing outer function: "
                "minimizers may fail to exist",
                stacklevel=2,
            )

        def fn(x, p):
            return float(psi(np.atleast_1d(g(p)) - np.atleast_1d(f(x))))

        return CostSpec("xp", fn, convex_in_p=convex_in_p, name=name)


def _atomize(p: Measure) -> DiscreteMeasure:
    return sample_grid(p) if isinstance(p, GridDensity1D) else p


def eval_J_xp(k: ConditionalKernel, h: CostSpec) -> float:
    """sum_i mu_i h(x_i, sigma^{x_i})."""
    h.require("xp")
    return float(sum(
        w * h.fn(x, p) for x, w, p in zip(k.x_atoms, k.x_weights, k.conditionals)
    ))


def eval_J_xyp(k: ConditionalKernel, h: CostSpec) -> float:
    """sum_i mu_i * integral over y of h(x_i, y, sigma^{x_i}) d sigma^{x_i}."""
    h.require("xyp")
    total = 0.0
    atomized = {}  # conditionals are often shared between x-atoms
    for x, w, p in zip(k.x_atoms, k.x_weights, k.conditionals):
        pd = atomized.get(id(p))
        if pd is None:
            pd = atomized[id(p)] = _atomize(p)
        vals = np.asarray(h.fn(x, pd.atoms, p), dtype=float).ravel()
        if vals.shape[0] != pd.n_atoms:
            raise ContractError("xyp evaluator must return one value per y atom")
        total += w * float(pd.weights @ vals)
    return total


def eval_J_gp(k: ConditionalKernel, h: CostSpec, F: MomentMap) -> float:
    """sum_i mu_i h(x_i, g(sigma^{x_i})) for the moment map's g."""
    h.require("xu")
    return float(sum(
        w * h.fn(x, g_eval(p, F)) for x, w, p in zip(k.x_atoms, k.x_weights, k.conditionals)
    ))


@dataclass(frozen=True)
class Dictionary:
    """Finite family of candidate conditional probability measures."""

    entries: tuple

    def __post_init__(self):
        for p in self.entries:
            if not p.is_probability():
                raise DomainError("dictionary entry is not a probability measure")
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self):
        return len(self.entries)


def _representation_matrix(entries, beta):
    """Columns = entries expressed on a common coordinate system shared
    with beta; rows are atoms (discrete case) or cells (grid case)."""
    measures = list(entries) + [beta]
    if all(isinstance(m, GridDensity1D) for m in measures):
        first = measures[0]
        for m in measures[1:]:
            if not first.same_grid(m):
                raise RepresentationError("dictionary grids are not aligned")
        M = np.column_stack([m.values for m in entries])
        return M, beta.values
    if all(isinstance(m, DiscreteMeasure) for m in measures):
        union = DiscreteMeasure(
            np.vstack([m.atoms for m in measures]),
            np.ones(sum(m.n_atoms for m in measures)),
        )
        atoms = union.atoms

        def onto(m):
            w = np.zeros(atoms.shape[0])
            for a, wt in zip(m.atoms, m.weights):
                d = np.max(np.abs(atoms - a), axis=1)
                w[int(np.argmin(d))] += wt
            return w

        M = np.column_stack([onto(m) for m in entries])
        return M, onto(beta)
    raise RepresentationError("dictionary mixes representations")


@dataclass(frozen=True)
class FixedBarycenterPlan:
    """Minimizer of the lifted linear problem with first marginal mu and
    prescribed mixture barycenter."""

    mu: DiscreteMeasure
    dictionary: Dictionary
    weights: np.ndarray  # (n_x, n_entries)
    phi: np.ndarray
    psi: np.ndarray
    value: float
    cost_matrix: np.ndarray

    def row_defect(self) -> float:
        return float(np.abs(self.weights.sum(axis=1) - self.mu.weights).max())

    def as_transport_plan(self) -> TransportPlan:
        """Plan between mu and the dictionary-index marginal, carrying the
        duals for strong-monotonicity verification."""
        col = self.weights.sum(axis=0)
        nu = DiscreteMeasure(np.arange(len(self.dictionary), dtype=float)[:, None], col)
        return TransportPlan(self.mu, nu, self.weights,
                             phi=self.phi, psi=self.psi, value=self.value)


def solve_fixed_barycenter(mu: DiscreteMeasure, dictionary: Dictionary,
                           h: CostSpec, beta: Measure) -> FixedBarycenterPlan:
    """min sum_ij P_ij h(x_i, p_j) over P >= 0 with row sums mu_i and
    mixture barycenter beta."""
    h.require("xp")
    n, J = mu.n_atoms, len(dictionary)
    c = np.array([[h.fn(x, p) for p in dictionary.entries] for x in mu.atoms])
    M, b_bary = _representation_matrix(dictionary.entries, beta)
    K = M.shape[0]
    A = np.zeros((n + K, n * J))
    for i in range(n):
        A[i, i * J:(i + 1) * J] = 1.0
    for i in range(n):
        A[n:, i * J:(i + 1) * J] = M
    b = np.concatenate([mu.weights, b_bary])
    sol = lp_solve(LinearProgram(c.ravel(), A_eq=A, b_eq=b))
    if sol.status != "optimal":
        # elastic re-solve to name the worst barycenter constraint
        ncon = n + K
        Ae = np.hstack([A, np.eye(ncon), -np.eye(ncon)])
        ce = np.concatenate([np.zeros(n * J), np.ones(2 * ncon)])
        es = lp_solve(LinearProgram(ce, A_eq=Ae, b_eq=b))
        resid = np.abs(A @ es.x[:n * J] - b)[n:]
        worst = int(np.argmax(resid))
        raise InfeasibleError(
            f"barycenter not representable by the dictionary; "
            f"most violated barycenter constraint: index {worst} "
            f"(residual {resid[worst]:.3e})"
        )
    lam = sol.duals_eq[n:]
    psi = M.T @ lam
    return FixedBarycenterPlan(
        mu, dictionary, sol.x.reshape(n, J),
        phi=sol.duals_eq[:n], psi=psi, value=sol.value, cost_matrix=c,
    )


def collapse_to_kernel(P: FixedBarycenterPlan) -> ConditionalKernel:
    """sigma^{x_i} = sum_j (P_ij / mu_i) p_j; rows with mu_i = 0 dropped."""
    keep = P.mu.weights > 1e-12
    conds = []
    for i in np.nonzero(keep)[0]:
        coeffs = P.weights[i] / P.mu.weights[i]
        conds.append(mixture(P.dictionary.entries, coeffs))
    return ConditionalKernel(P.mu.atoms[keep], P.mu.weights[keep], tuple(conds))


def plan_to_map(k: ConditionalKernel, F: MomentMap):
    """T(x_i) = g(sigma^{x_i}); the pushforward of mu under T is always
    convexly dominated by the moment-map image of the second marginal
    (Jensen direction), returned as a positive certificate."""
    T_vals = np.vstack([g_eval(p, F) for p in k.conditionals])
    zeta = DiscreteMeasure(T_vals, k.x_weights)
    nu = _atomize(mix(k))
    nuF = pushforward(nu, F)
    cert = check_convex_order_lp(zeta, nuF)
    if not cert.dominated:
        raise AssertionError(
            "plan_to_map produced a non-dominated pushforward; internal invariant violated"
        )
    return MongeMap(T_vals), cert


def map_to_plan(T: MongeMap, mu: DiscreteMeasure, nu: DiscreteMeasure,
                F: MomentMap) -> ConditionalKernel:
    """Kernel realizing the map T through a martingale coupling, so that
    g(sigma^x) = T(x) and the kernel couples mu with nu."""
    if T.values.shape[0] != mu.n_atoms:
        raise DomainError("map length does not match mu")
    zeta = DiscreteMeasure(T.values, mu.weights)
    coupling = build_martingale_coupling(zeta, nu, F)
    return glue(T, coupling, mu)


@dataclass(frozen=True)
class MongeCDOptions:
    max_iters: int = 120
    tol: float = 1e-8
    enumeration_limit: int = 200_000
    multistart: int = 8
    seed: int = 0


@dataclass(frozen=True)
class MongeCDResult:
    T: MongeMap
    value: float
    status: str  # converged | max_iters
    iterations: int
    seed: int = 0


def _subgradient(h: CostSpec, x, u: float, eps: float = 1e-7) -> float:
    return (h.fn(x, np.array([u + eps])) - h.fn(x, np.array([u - eps]))) / (2 * eps)


def _solve_monge_cd_1d(mu, target, h, opts) -> MongeCDResult:
    """Kelley cutting-plane scheme for convex h and 1-dimensional targets.

    Outer-approximates both the separable convex objective (epigraph cuts)
    and the convex-order constraints (potential cuts at kinks), solving an
    LP per iteration; constraint cuts are exact supporting hyperplanes of
    u -> sum_i mu_i |u_i - k|.
    """
    keep = mu.weights > 1e-12
    xs = mu.atoms[keep]
    w = mu.weights[keep]
    w = w / w.sum()
    n = xs.shape[0]
    u_pot = PotentialFunction1D(target)
    t_atoms = target.atoms[:, 0]
    mean_t = float(target.mean()[0])
    lo, hi = float(t_atoms.min()), float(t_atoms.max())

    obj_cuts = []   # (i, slope, intercept): t_i >= slope*u_i + intercept
    con_cuts = []   # (signs, k): sum w_i signs_i (u_i - k) <= u_pot(k)
    kink_pool = list(t_atoms)

    u_hat = np.full(n, mean_t)
    best = None
    for it in range(1, opts.max_iters + 1):
        for i in range(n):
            s = _subgradient(h, xs[i], u_hat[i])
            val = h.fn(xs[i], np.array([u_hat[i]]))
            obj_cuts.append((i, s, val - s * u_hat[i]))
        kinks = np.unique(np.concatenate([kink_pool, u_hat]))
        emp = np.abs(u_hat[None, :] - kinks[:, None]) @ w
        violated = kinks[emp > u_pot(kinks) + 0.0]
        for kv in violated:
            con_cuts.append((np.sign(u_hat - kv), float(kv)))

        # LP variables: u (n), t (n)
        nvar = 2 * n
        c = np.concatenate([np.zeros(n), w])
        A_eq = np.zeros((1, nvar))
        A_eq[0, :n] = w
        b_eq = np.array([mean_t])
        rows, rhs = [], []
        for i, s, b0 in obj_cuts:
            r = np.zeros(nvar)
            r[i] = s
            r[n + i] = -1.0
            rows.append(r)
            rhs.append(-b0)
        for signs, kv in con_cuts:
            r = np.zeros(nvar)
            r[:n] = w * signs
            rows.append(r)
            rhs.append(float(u_pot(np.array([kv]))[0]) + float(np.sum(w * signs * kv)))
        bounds = [(lo, hi)] * n + [(None, None)] * n
        sol = lp_solve(LinearProgram(c, A_eq=A_eq, b_eq=b_eq,
                                     A_ub=np.asarray(rows), b_ub=np.asarray(rhs),
                                     bounds=bounds))
        if sol.status != "optimal":
            raise InfeasibleError(f"cutting-plane LP status {sol.status}")
        u_hat = sol.x[:n]
        true_val = float(sum(w[i] * h.fn(xs[i], np.array([u_hat[i]])) for i in range(n)))
        kinks = np.unique(np.concatenate([kink_pool, u_hat]))
        viol = float(np.max(np.abs(u_hat[None, :] - kinks[:, None]) @ w - u_pot(kinks)))
        gap = true_val - float(sol.value)
        if best is None or (viol <= opts.tol and true_val < best[0]):
            best = (true_val, u_hat.copy())
        if viol <= opts.tol and gap <= opts.tol:
            return MongeCDResult(_expand_map(mu, keep, u_hat, mean_t), true_val,
                                 "converged", it, opts.seed)
    val, u_best = best if best is not None else (true_val, u_hat)
    return MongeCDResult(_expand_map(mu, keep, u_best, mean_t), val,
                         "max_iters", opts.max_iters, opts.seed)


def _expand_map(mu, keep, u_vals, filler) -> MongeMap:
    full = np.full(mu.n_atoms, filler)
    full[keep] = u_vals
    return MongeMap(full[:, None])


def _solve_monge_cd_generic(mu, target, h, opts) -> MongeCDResult:
    """Enumeration plus multi-start local search over target-atom values.

    Used for nonconvex costs or d > 1; the feasibility oracle is the
    convex-order checker.  Small instances only.
    """
    keep = mu.weights > 1e-12
    xs = mu.atoms[keep]
    w = mu.weights[keep]
    w = w / w.sum()
    n = xs.shape[0]
    candidates = target.atoms
    ncand = candidates.shape[0]
    d = target.dim

    def feasible(assign):
        emp = DiscreteMeasure(candidates[list(assign)], w)
        if d == 1:
            return quick_dominated_1d(emp, target)
        return check_convex_order_lp(emp, target).dominated

    def cost(assign):
        return float(sum(w[i] * h.fn(xs[i], candidates[a]) for i, a in enumerate(assign)))

    best = None
    if ncand ** n <= opts.enumeration_limit:
        for assign in itertools.product(range(ncand), repeat=n):
            val = cost(assign)
            if (best is None or val < best[0]) and feasible(assign):
                best = (val, assign)
        status = "converged"
        iters = ncand ** n
    else:
        rng = np.random.default_rng(opts.seed)
        iters = 0
        for _ in range(opts.multistart):
            assign = list(rng.integers(0, ncand, size=n))
            improved = True
            while improved and iters < opts.max_iters * n:
                improved = False
                for i in range(n):
                    for a in range(ncand):
                        iters += 1
                        if a == assign[i]:
                            continue
                        trial = assign.copy()
                        trial[i] = a
                        val = cost(trial)
                        if (best is None or val < best[0]) and feasible(trial):
                            assign = trial
                            best = (val, tuple(assign))
                            improved = True
            if best is None and feasible(assign):
                best = (cost(assign), tuple(assign))
        status = "max_iters" if best is None else "converged"
    if best is None:
        raise InfeasibleError("no feasible assignment found in the candidate grid")
    vals = candidates[list(best[1])]
    full = np.tile(target.mean(), (mu.n_atoms, 1))
    full[keep] = vals
    return MongeCDResult(MongeMap(full), best[0], status, iters, opts.seed)


def solve_monge_cd(mu: DiscreteMeasure, nu: DiscreteMeasure, F: MomentMap,
                   h: CostSpec, opts: Optional[MongeCDOptions] = None) -> MongeCDResult:
    """Minimize sum_i mu_i h(x_i, u_i) over maps whose empirical pushforward
    is convexly dominated by the moment-map image of nu."""
    h.require("xu")
    opts = opts or MongeCDOptions()
    target = pushforward(nu, F)
    if F.dim == 1 and h.convex_in_u:
        return _solve_monge_cd_1d(mu, target, h, opts)
    return _solve_monge_cd_generic(mu, target, h, opts)


# --- named cost families for file-based interfaces ---

def cost_from_json(text: str) -> CostSpec:
    """Built-in cost families selected by name and parameters."""
    obj = json.loads(text)
    kind = obj.get("kind")
    name = obj.get("name")
    if kind == "xu" and name == "squared_diff":
        return CostSpec("xu", lambda x, u: float(np.sum((np.atleast_1d(x) - np.atleast_1d(u)) ** 2)),
                        convex_in_u=True, name=name)
    if kind == "xu" and name == "abs_diff":
        return CostSpec("xu", lambda x, u: float(np.sum(np.abs(np.atleast_1d(x) - np.atleast_1d(u)))),
                        convex_in_u=True, name=name)
    if kind == "xu" and name == "biquadratic":
        return CostSpec("xu", lambda x, u: float((np.atleast_1d(x)[0] ** 2 - np.atleast_1d(u)[0] ** 2) ** 2),
                        convex_in_u=False, name=name)
    if kind == "xu" and name == "segment_line":
        def fn(x, u):
            u = np.atleast_1d(u)
            return float((np.atleast_1d(x)[0] - u[0]) ** 2 + 1.0 - u[1] ** 2)
        return CostSpec("xu", fn, convex_in_u=False, name=name)
    if kind == "xp" and name == "kr_to_ref":
        from .measures import measure_from_json
        ref = _atomize(measure_from_json(json.dumps(obj["ref"])))

        def fn(x, p):
            return kr_norm(_atomize(p), ref)

        return CostSpec("xp", fn, convex_in_p=True, name=name)
    if kind == "xyp" and name == "kr_to_ref":
        from .measures import measure_from_json
        ref = _atomize(measure_from_json(json.dumps(obj["ref"])))

        def fn(x, ys, p):
            v = kr_norm(_atomize(p), ref)
            return np.full(np.asarray(ys).shape[0], v)

        return CostSpec("xyp", fn, convex_in_p=True, name=name)
    raise ContractError(f"unknown cost family kind={kind!r} name={name!r}")

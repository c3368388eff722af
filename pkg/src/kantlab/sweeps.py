"""Non-attainment fixtures with explicit minimizing sequences, plus sweep
runners that record per-level costs against their theoretical decay rates.

Three constructions are provided:
  * an interval-to-interval kernel problem whose cost mixes a
    segment-distance term with a product-of-moments term (levels indexed
    by a dyadic parameter n, cost decaying like 2^-n);
  * two map problems under convex dominance with piecewise-affine
    minimizing maps (rates 2^-n and 16 * 4^-n).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .convex_order import check_convex_order_1d, check_convex_order_lp
from .errors import AlignmentError, DomainError
from .lp_transport import segment_kr_min_grid
from .martingale import MongeMap
from .measures import (
    ConditionalKernel,
    DiscreteMeasure,
    GridDensity1D,
    MomentMap,
    g_eval,
    mix,
    pushforward,
    sample_grid,
)
from .nonlinear import CostSpec, eval_J_gp, eval_J_xyp, map_to_plan

SWEEP_CSV_HEADER = "n,measured,bound,marginal_defect,seconds"


# --- hat test functions: peak 4, support width 1/4, unit-half integral ---

HAT1_CENTER = 0.125
HAT2_CENTER = 0.625
HAT_SLOPE = 32.0


def hat1(y):
    """Triangular bump supported on [0, 1/4] with integral 1/2."""
    y = np.asarray(y, dtype=float)
    return np.maximum(0.0, 4.0 - HAT_SLOPE * np.abs(y - HAT1_CENTER))


def hat2(y):
    """Triangular bump supported on [1/2, 3/4] with integral 1/2."""
    y = np.asarray(y, dtype=float)
    return np.maximum(0.0, 4.0 - HAT_SLOPE * np.abs(y - HAT2_CENTER))


def split_family_density(x: float, m: int, member: int) -> GridDensity1D:
    """The two-member family of densities on [0, 1] indexed by x.

    member 1: density 2 on [0, (1+x)/4] union [(3+x)/4, 1];
    member 2: density 2 on the middle band [(1+x)/4, (3+x)/4].
    The two members sum to twice Lebesgue measure cellwise.
    """
    mids = (np.arange(m) + 0.5) / m
    a = (1.0 + x) / 4.0
    b = (3.0 + x) / 4.0
    outer = (mids < a) | (mids > b)
    values = np.where(outer if member == 1 else ~outer, 2.0, 0.0)
    return GridDensity1D(0.0, 1.0, values)


def moment_against_grid(fn: Callable, gd: GridDensity1D) -> float:
    """Midpoint-rule integral of fn against a grid density (exact for
    piecewise-linear fn whose kinks are cell boundaries)."""
    return float(np.sum(fn(gd.midpoints()) * gd.values) * gd.cell_width)


@dataclass(frozen=True)
class SweepRow:
    n: int
    measured: float
    bound: float
    marginal_defect: float
    seconds: float
    extras: dict = field(default_factory=dict)

    def csv_line(self) -> str:
        return "%d,%.17g,%.17g,%.17g,%.17g" % (
            self.n, self.measured, self.bound, self.marginal_defect, self.seconds
        )


def rows_to_csv(rows) -> str:
    return "\n".join([SWEEP_CSV_HEADER] + [r.csv_line() for r in rows]) + "\n"


def rows_to_json(rows, meta: Optional[dict] = None) -> str:
    obj = {
        "meta": meta or {},
        "rows": [
            {
                "n": r.n,
                "measured": r.measured,
                "bound": r.bound,
                "marginal_defect": r.marginal_defect,
                "seconds": r.seconds,
                **r.extras,
            }
            for r in rows
        ],
    }
    return json.dumps(obj, indent=2)


@dataclass(frozen=True)
class DyadicKernelFixture:
    """Dyadic-level kernel fixture: minimizing kernel plus its cost."""

    n: int
    m: int
    kernel: ConditionalKernel
    cost: CostSpec
    refine_factor: int = 8

    def nu1(self, x: float) -> GridDensity1D:
        return split_family_density(x, self.m, 1)

    def nu2(self, x: float) -> GridDensity1D:
        return split_family_density(x, self.m, 2)

    def g1(self, p: GridDensity1D) -> float:
        return moment_against_grid(hat1, p)

    def g2(self, p: GridDensity1D) -> float:
        return moment_against_grid(hat2, p)

    def h1(self, x: float, p: GridDensity1D) -> float:
        """Distance of p to the segment spanned by the two family members
        at x, in the Kantorovich-Rubinshtein norm.

        The family endpoints at generic cell-midpoint x live on a grid
        refined by `refine_factor`, which keeps the piecewise-constant
        densities exactly representable.
        """
        mf = self.m * self.refine_factor
        e0 = split_family_density(x, mf, 1)
        e1 = split_family_density(x, mf, 2)
        value, _ = segment_kr_min_grid(p.refine(self.refine_factor), e0, e1)
        return value

    def h2_part(self) -> float:
        """sum_i mu_i g1(sigma^{x_i}) g2(sigma^{x_i})."""
        k = self.kernel
        vals = {}
        total = 0.0
        for w, p in zip(k.x_weights, k.conditionals):
            gg = vals.get(id(p))
            if gg is None:
                gg = vals[id(p)] = self.g1(p) * self.g2(p)
            total += w * gg
        return float(total)


def build_dyadic_kernel(n: int, m: int) -> DyadicKernelFixture:
    """Minimizing kernel at dyadic level n on an m-cell grid.

    The conditional at x is the first family member anchored at the dyadic
    midpoint (2k+1)/2^n when x falls in the even dyadic subinterval and the
    second member when x falls in the odd one; the mixture over x is then
    Lebesgue measure exactly, cellwise.
    """
    if n < 1:
        raise DomainError("level n must be >= 1")
    if m % (2 ** (n + 2)) != 0:
        raise AlignmentError(f"m = {m} must be divisible by 2^(n+2) = {2 ** (n + 2)}")
    x_mids = (np.arange(m) + 0.5) / m
    # one density object per dyadic subinterval, shared across its x-cells
    cache = {}
    conditionals = []
    for x in x_mids:
        ell = int(np.floor(x * 2 ** n))
        k = ell // 2
        member = 1 if ell % 2 == 0 else 2
        key = (k, member)
        if key not in cache:
            anchor = (2 * k + 1) / 2 ** n
            cache[key] = split_family_density(anchor, m, member)
        conditionals.append(cache[key])
    kernel = ConditionalKernel(x_mids[:, None], np.full(m, 1.0 / m), tuple(conditionals))

    fixture_holder = {}

    def cost_fn(x, ys, p):
        fx = fixture_holder["fixture"]
        base = fx.h1(float(x[0]), p)
        return base + hat2(np.asarray(ys)[:, 0]) * fx.g1(p)

    cost = CostSpec("xyp", cost_fn, convex_in_p=True, name="segment_plus_moment_product")
    fixture = DyadicKernelFixture(n=n, m=m, kernel=kernel, cost=cost)
    fixture_holder["fixture"] = fixture
    return fixture


def run_kernel_sweep(n_max: int, m_rule: Optional[Callable[[int], int]] = None,
                 tol: float = 1e-6):
    """Sweep levels n = 1..n_max; raises if a row violates its decay bound
    or the exactness requirements of the construction."""
    if n_max > 12:
        raise DomainError("n_max must be <= 12")
    m_rule = m_rule or (lambda n: 2 ** (n + 4))
    rows = []
    for n in range(1, n_max + 1):
        t0 = time.perf_counter()
        fx = build_dyadic_kernel(n, m_rule(n))
        measured = eval_J_xyp(fx.kernel, fx.cost)
        h2 = fx.h2_part()
        mixed = mix(fx.kernel)
        defect = float(np.max(np.abs(mixed.values - 1.0)))
        seconds = time.perf_counter() - t0
        bound = 2.0 ** (-n)
        row = SweepRow(n, measured, bound, defect, seconds,
                       extras={"h2_part": h2, "m": fx.m})
        if measured > bound + tol:
            raise RuntimeError(f"level {n}: measured {measured} exceeds bound {bound}")
        if abs(h2) > 1e-12:
            raise RuntimeError(f"level {n}: product term {h2} not exactly zero")
        if defect > 1e-12:
            raise RuntimeError(f"level {n}: second-marginal defect {defect}")
        rows.append(row)
    return rows


# --- map problems under convex dominance ---


def _dyadic_map_1d(x: np.ndarray, n: int, fold_sign: bool) -> np.ndarray:
    """Piecewise-affine slope-2 map on dyadic halves.

    On even dyadic subintervals the map stretches forward; on odd ones it
    stretches backward, either keeping the value positive (fold_sign False)
    or negating it (fold_sign True).
    """
    ell = np.floor(x * 2 ** n).astype(int)
    k = ell // 2
    even = ell % 2 == 0
    fwd = 2 * x - 2 * k / 2 ** n
    bwd = 2 * x - (2 * k + 2) / 2 ** n
    if fold_sign:
        return np.where(even, fwd, -bwd)
    return np.where(even, fwd, bwd)


def build_segment_map_fixture(n: int, grid: int):
    """Line-to-two-segments fixture: mu uniform on [0,1], nu the half-sum
    of uniform measures on [0,1] x {-1} and [0,1] x {1}, cost
    (x - u1)^2 + 1 - u2^2, and the level-n piecewise-affine map."""
    if grid % (2 ** n) != 0 or grid % 2 != 0:
        raise AlignmentError(f"grid {grid} must be an even multiple of 2^{n}")
    x = (np.arange(grid) + 0.5) / grid
    mu = DiscreteMeasure(x[:, None], np.full(grid, 1.0 / grid))
    ys = (2 * np.arange(grid // 2) + 1) / grid
    atoms = np.vstack([
        np.column_stack([ys, np.ones(grid // 2)]),
        np.column_stack([ys, -np.ones(grid // 2)]),
    ])
    nu = DiscreteMeasure(atoms, np.full(grid, 1.0 / grid))
    F = MomentMap.identity(2)

    def h_fn(xp, u):
        u = np.atleast_1d(u)
        return float((np.atleast_1d(xp)[0] - u[0]) ** 2 + 1.0 - u[1] ** 2)

    h = CostSpec("xu", h_fn, name="segment_line")
    first = _dyadic_map_1d(x, n, fold_sign=False)
    ell = np.floor(x * 2 ** n).astype(int)
    second = np.where(ell % 2 == 0, 1.0, -1.0)
    T = MongeMap(np.column_stack([first, second]))
    return mu, nu, F, h, T


def build_folding_map_fixture(n: int, grid: int):
    """Folding fixture: mu uniform on [0,1], nu normalized uniform on
    [-1,1], cost (x^2 - u^2)^2, and the sign-folding level-n map."""
    if grid % (2 ** n) != 0 or grid % 2 != 0:
        raise AlignmentError(f"grid {grid} must be an even multiple of 2^{n}")
    x = (np.arange(grid) + 0.5) / grid
    mu = DiscreteMeasure(x[:, None], np.full(grid, 1.0 / grid))
    ys = (2 * np.arange(grid) + 1) / grid - 1.0
    nu = DiscreteMeasure(ys[:, None], np.full(grid, 1.0 / grid))
    F = MomentMap.identity(1)

    def h_fn(xp, u):
        return float((np.atleast_1d(xp)[0] ** 2 - np.atleast_1d(u)[0] ** 2) ** 2)

    h = CostSpec("xu", h_fn, name="biquadratic")
    T = MongeMap(_dyadic_map_1d(x, n, fold_sign=True)[:, None])
    return mu, nu, F, h, T


def map_cost(mu: DiscreteMeasure, T: MongeMap, h: CostSpec) -> float:
    h.require("xu")
    return float(sum(w * h.fn(x, u) for x, w, u in zip(mu.atoms, mu.weights, T.values)))


def run_map_sweep(which: int, n_max: int,
                grid_rule: Optional[Callable[[int], int]] = None):
    """Sweep the map fixtures; each row records the map cost, checks the
    pushforward identity exactly, verifies dominance, and reproduces the
    cost through the kernel reconstruction."""
    if which not in (1, 2):
        raise DomainError("which must be 1 or 2")
    if n_max > 12:
        raise DomainError("n_max must be <= 12")
    grid_rule = grid_rule or (lambda n: 2 ** (n + 1))
    build = build_segment_map_fixture if which == 1 else build_folding_map_fixture
    rows = []
    for n in range(1, n_max + 1):
        t0 = time.perf_counter()
        mu, nu, F, h, T = build(n, grid_rule(n))
        zeta = DiscreteMeasure(T.values, mu.weights)
        nuF = pushforward(nu, F)
        pf_exact = zeta.close_to(nuF, tol=0.0)
        defect = (0.0 if pf_exact else
                  float(np.max(np.abs(zeta.weights - nuF.weights)))
                  if zeta.same_support(nuF) else np.inf)
        cert = (check_convex_order_lp(zeta, nuF) if which == 1
                else check_convex_order_1d(zeta, nuF))
        cost_map = map_cost(mu, T, h)
        kernel = map_to_plan(T, mu, nu, F)
        cost_kernel = eval_J_gp(kernel, h, F)
        seconds = time.perf_counter() - t0
        bound = 2.0 ** (-n) if which == 1 else 16.0 * 4.0 ** (-n)
        extras = {
            "grid": grid_rule(n),
            "dominated": cert.dominated,
            "kernel_cost": cost_kernel,
            "pushforward_exact": bool(pf_exact),
        }
        if which == 2 and n == 1:
            ident = check_convex_order_1d(mu, nuF)
            extras["identity_map_rejected"] = not ident.dominated
        row = SweepRow(n, cost_map, bound, defect, seconds, extras=extras)
        if not pf_exact:
            raise RuntimeError(f"level {n}: pushforward under the map is not exactly nu")
        if not cert.dominated:
            raise RuntimeError(f"level {n}: dominance verdict negative")
        if cost_map > bound + 1e-12:
            raise RuntimeError(f"level {n}: cost {cost_map} exceeds bound {bound}")
        if abs(cost_map - cost_kernel) > 1e-9:
            raise RuntimeError(f"level {n}: kernel cost differs from map cost")
        rows.append(row)
    return rows

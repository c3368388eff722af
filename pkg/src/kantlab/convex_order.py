"""Convex dominance checking with positive (martingale coupling) or
negative (separating convex piecewise-linear function) certificates.

The d-dimensional check is the discrete Strassen criterion: feasibility of
the coupling LP with per-row barycenter constraints.  The same feasibility
core backs martingale-coupling construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError
from .lp_transport import LinearProgram, TransportPlan, lp_solve
from .measures import DiscreteMeasure, MomentMap, pushforward

MEAN_TOL = 1e-9
ORDER_TOL = 1e-9


@dataclass(frozen=True)
class PotentialFunction1D:
    """u_mu(k) = integral of |x - k| d mu; convex, piecewise linear."""

    measure: DiscreteMeasure

    def __call__(self, k):
        k = np.atleast_1d(np.asarray(k, dtype=float))
        x = self.measure.atoms[:, 0]
        w = self.measure.weights
        return np.abs(x[None, :] - k[:, None]) @ w

    @property
    def kinks(self) -> np.ndarray:
        return self.measure.atoms[:, 0]


@dataclass(frozen=True)
class ConvexOrderCertificate:
    """Verdict plus a witness.

    dominated: `coupling` is a martingale coupling of (mu, nu).
    not_dominated: `witness_pieces` is a (k, d+1) array of affine pieces
    [intercept, slope...]; w(v) = max over pieces is convex piecewise
    linear with integral against mu exceeding integral against nu.
    """

    verdict: str  # dominated | not_dominated
    coupling: Optional[TransportPlan] = None
    witness_pieces: Optional[np.ndarray] = None

    @property
    def dominated(self) -> bool:
        return self.verdict == "dominated"

    def witness_eval(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        pieces = self.witness_pieces
        return np.max(pieces[:, 0][None, :] + pts @ pieces[:, 1:].T, axis=1)

    def witness_violation(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
        """integral of the witness against mu minus against nu (> 0 when valid)."""
        return float(
            mu.weights @ self.witness_eval(mu.atoms)
            - nu.weights @ self.witness_eval(nu.atoms)
        )

    def to_json(self) -> str:
        obj = {"verdict": self.verdict}
        if self.coupling is not None:
            obj["witness_kind"] = "martingale_coupling"
            obj["witness"] = json.loads(self.coupling.to_json())
        elif self.witness_pieces is not None:
            obj["witness_kind"] = "convex_function"
            obj["witness"] = {"pieces": [[float(v) for v in row] for row in self.witness_pieces]}
        return json.dumps(obj)


def martingale_feasibility(zeta: DiscreteMeasure, nu: DiscreteMeasure,
                           F_vals: np.ndarray, tol: float = ORDER_TOL):
    """Discrete Strassen feasibility core.

    Searches for pi in Pi(zeta, nu) whose rows have F-barycenter equal to
    the row atom, via an elastic (minimum total constraint violation) LP.
    Returns (pi weights, None) when feasible and (None, pieces) when not,
    where pieces define the separating convex function max_i(phi_i + lam_i.v)
    recovered from the elastic duals.
    """
    n, m = zeta.n_atoms, nu.n_atoms
    d = zeta.dim
    F_vals = np.asarray(F_vals, dtype=float)
    if F_vals.shape != (m, d):
        raise DomainError(f"F values shape {F_vals.shape}, expected {(m, d)}")
    n_con = n + m + n * d
    n_pi = n * m
    A = np.zeros((n_con, n_pi + 2 * n_con))
    for i in range(n):
        A[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        A[n + j, j:n_pi:m] = 1.0
    for i in range(n):
        for k in range(d):
            A[n + m + i * d + k, i * m:(i + 1) * m] = F_vals[:, k]
    A[:, n_pi:n_pi + n_con] = np.eye(n_con)
    A[:, n_pi + n_con:] = -np.eye(n_con)
    b = np.concatenate([
        zeta.weights,
        nu.weights,
        (zeta.weights[:, None] * zeta.atoms).ravel(),
    ])
    c = np.concatenate([np.zeros(n_pi), np.ones(2 * n_con)])
    sol = lp_solve(LinearProgram(c, A_eq=A, b_eq=b))
    if sol.status != "optimal":
        raise DomainError(f"feasibility LP status {sol.status}")
    if sol.value <= tol:
        return sol.x[:n_pi].reshape(n, m), None
    y = sol.duals_eq
    phi = y[:n]
    lam = y[n + m:].reshape(n, d)
    pieces = np.column_stack([phi, lam])
    scale = np.abs(lam).max()
    if scale > 1e-15:
        pieces = pieces / scale
    return None, pieces


def _coupling_plan(mu: DiscreteMeasure, nu: DiscreteMeasure, pi: np.ndarray) -> TransportPlan:
    return TransportPlan(mu, nu, pi)


def check_convex_order_lp(mu: DiscreteMeasure, nu: DiscreteMeasure) -> ConvexOrderCertificate:
    """Convex dominance mu <=_c nu via martingale-coupling feasibility."""
    if mu.dim != nu.dim:
        raise DomainError("dimension mismatch")
    if mu.close_to(nu, tol=1e-12):
        # reflexive fast path: identity coupling
        return ConvexOrderCertificate("dominated",
                                      coupling=_coupling_plan(mu, nu, np.diag(mu.weights)))
    pi, pieces = martingale_feasibility(mu, nu, nu.atoms)
    if pi is not None:
        return ConvexOrderCertificate("dominated", coupling=_coupling_plan(mu, nu, pi))
    return ConvexOrderCertificate("not_dominated", witness_pieces=pieces)


def check_convex_order_1d(mu: DiscreteMeasure, nu: DiscreteMeasure) -> ConvexOrderCertificate:
    """1-dimensional convex dominance via potential functions.

    mu <=_c nu iff the means agree and u_mu <= u_nu at every atom of either
    measure (sufficient because u_mu - u_nu is piecewise linear with kinks
    only at atoms).
    """
    if mu.dim != 1 or nu.dim != 1:
        raise DomainError("check_convex_order_1d requires 1-dimensional atoms")
    if mu.close_to(nu, tol=1e-12):
        # reflexive fast path: identity coupling
        return ConvexOrderCertificate("dominated",
                                      coupling=_coupling_plan(mu, nu, np.diag(mu.weights)))
    dmean = float(mu.mean()[0] - nu.mean()[0])
    if abs(dmean) > MEAN_TOL:
        # linear witness v -> sign * v
        s = 1.0 if dmean > 0 else -1.0
        return ConvexOrderCertificate("not_dominated",
                                      witness_pieces=np.array([[0.0, s]]))
    u_mu = PotentialFunction1D(mu)
    u_nu = PotentialFunction1D(nu)
    kinks = np.concatenate([u_mu.kinks, u_nu.kinks])
    gap = u_mu(kinks) - u_nu(kinks)
    worst = int(np.argmax(gap))
    if gap[worst] > ORDER_TOL:
        k = float(kinks[worst])
        pieces = np.array([[-k, 1.0], [k, -1.0]])  # |v - k|
        return ConvexOrderCertificate("not_dominated", witness_pieces=pieces)
    pi, pieces = martingale_feasibility(mu, nu, nu.atoms)
    if pi is None:
        # potentials said dominated; the LP is the authority on borderline input
        return ConvexOrderCertificate("not_dominated", witness_pieces=pieces)
    return ConvexOrderCertificate("dominated", coupling=_coupling_plan(mu, nu, pi))


def quick_dominated_1d(mu: DiscreteMeasure, nu: DiscreteMeasure,
                       tol: float = ORDER_TOL) -> bool:
    """Potential-only 1D verdict without constructing a coupling witness."""
    if mu.dim != 1 or nu.dim != 1:
        raise DomainError("quick_dominated_1d requires 1-dimensional atoms")
    if abs(float(mu.mean()[0] - nu.mean()[0])) > MEAN_TOL:
        return False
    kinks = np.concatenate([mu.atoms[:, 0], nu.atoms[:, 0]])
    return bool(np.max(PotentialFunction1D(mu)(kinks) - PotentialFunction1D(nu)(kinks)) <= tol)


@dataclass(frozen=True)
class LevelFunctional:
    """g(p) = transform(sum_i base_values_i * w_i) on a fixed atom support."""

    base_values: np.ndarray
    transform: Optional[callable] = None
    name: str = "level functional"

    def __call__(self, weights: np.ndarray) -> float:
        v = float(np.dot(self.base_values, weights))
        return v if self.transform is None else float(self.transform(v))


@dataclass(frozen=True)
class LevelSetProbeReport:
    trials: int
    pairs_tested: int
    max_deviation: float
    mode: str


def level_set_convexity_probe(g: LevelFunctional, n_atoms: int, trials: int,
                              seed: int, mode: str = "level") -> LevelSetProbeReport:
    """Randomized convexity probe of level sets {g = c} or sublevel sets
    {g <= c} over the weight simplex of a fixed support.

    For `level` mode, pairs (p, q) with equal base level are constructed by
    moving q along the segment toward p; the report records the largest
    |g(midpoint) - g(p)| observed.  For `sublevel`, the deviation is
    max(0, g(midpoint) - max(g(p), g(q))).
    """
    if mode not in ("level", "sublevel"):
        raise DomainError(f"unknown probe mode {mode!r}")
    rng = np.random.default_rng(seed)
    base = np.asarray(g.base_values, dtype=float)
    tested = 0
    worst = 0.0
    for _ in range(trials):
        p = rng.dirichlet(np.ones(n_atoms))
        q = rng.dirichlet(np.ones(n_atoms))
        if mode == "level":
            # slide q along a segment to another simplex point until its
            # base level matches that of p
            q2 = rng.dirichlet(np.ones(n_atoms))
            target = float(base @ p)
            l1, l2 = float(base @ q), float(base @ q2)
            if abs(l2 - l1) < 1e-15:
                continue
            s = (target - l1) / (l2 - l1)
            if not (0.0 <= s <= 1.0):
                continue
            q = q + s * (q2 - q)
        mid = 0.5 * (p + q)
        tested += 1
        if mode == "level":
            worst = max(worst, abs(g(mid) - g(p)))
        else:
            worst = max(worst, g(mid) - max(g(p), g(q)))
    return LevelSetProbeReport(trials, tested, max(worst, 0.0), mode)


def mean_preserving_split(m: DiscreteMeasure, atom_index: int, spread,
                          fraction: float = 0.5) -> DiscreteMeasure:
    """Split one atom into two keeping the mean: a dilation of m.

    The split measure dominates m in the convex order by construction.
    """
    spread = np.atleast_1d(np.asarray(spread, dtype=float))
    atoms = m.atoms.copy()
    w = m.weights.copy()
    x = atoms[atom_index]
    wx = w[atom_index]
    lo = x - (1 - fraction) * spread
    hi = x + fraction * spread
    new_atoms = np.vstack([np.delete(atoms, atom_index, axis=0), lo, hi])
    new_w = np.concatenate([np.delete(w, atom_index), [wx * fraction, wx * (1 - fraction)]])
    return DiscreteMeasure(new_atoms, new_w)


def pushforward_under(m: DiscreteMeasure, F: MomentMap) -> DiscreteMeasure:
    """nu o F^{-1} for a discrete nu: convenience re-export."""
    return pushforward(m, F)

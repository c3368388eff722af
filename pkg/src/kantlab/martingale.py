"""Martingale couplings: joint measures whose conditionals have prescribed
moment-map barycenters, and the glue step turning a map plus a coupling
into a conditional kernel."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .convex_order import check_convex_order_lp, martingale_feasibility, ConvexOrderCertificate
from .errors import AlignmentError, DomainError, OrderViolationError
from .lp_transport import TransportPlan
from .measures import ConditionalKernel, DiscreteMeasure, MomentMap, pushforward

BARYCENTER_TOL = 1e-9
SNAP_TOL = 1e-9
NULL_ROW_TOL = 1e-12


@dataclass(frozen=True)
class MongeMap:
    """Per-x-atom target point T(x_i) in R^d, aligned with a mu atom order."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if not np.all(np.isfinite(v)):
            raise DomainError("Monge map has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class MartingaleCoupling:
    """Coupling of zeta (on R^d) and nu whose rows have F-barycenter u."""

    plan: TransportPlan
    F: MomentMap

    @property
    def zeta(self) -> DiscreteMeasure:
        return self.plan.mu

    @property
    def nu(self) -> DiscreteMeasure:
        return self.plan.nu

    def conditional(self, i: int) -> DiscreteMeasure:
        return self.plan.row_conditional(i)

    def barycenter_residual(self) -> float:
        """max over charged rows of |sum_j (pi_ij / zeta_i) F(y_j) - u_i|."""
        F_vals = self.F.apply(self.nu.atoms)
        worst = 0.0
        for i, zi in enumerate(self.zeta.weights):
            if zi <= NULL_ROW_TOL:
                continue
            bary = self.plan.weights[i] @ F_vals / zi
            worst = max(worst, float(np.max(np.abs(bary - self.zeta.atoms[i]))))
        return worst

    def to_json(self) -> str:
        obj = json.loads(self.plan.to_json())
        obj["F"] = [[float(v) for v in row] for row in self.F.apply(self.nu.atoms)]
        return json.dumps(obj)


def build_martingale_coupling(zeta: DiscreteMeasure, nu: DiscreteMeasure,
                              F: MomentMap, tol: float = 1e-9) -> MartingaleCoupling:
    """Coupling of zeta and nu with conditional F-barycenters equal to the
    row atoms; exists iff zeta is convexly dominated by nu o F^{-1}.

    When zeta equals nu o F^{-1} atom for atom, the deterministic fibering
    supported on {(F(y), y)} is returned directly; otherwise the coupling
    comes from the Strassen feasibility LP.
    """
    if zeta.dim != F.dim:
        raise DomainError("zeta dimension does not match the moment map")
    F_vals = F.apply(nu.atoms)
    nuF = pushforward(nu, F)
    if zeta.close_to(nuF, tol=1e-12):
        pi = np.zeros((zeta.n_atoms, nu.n_atoms))
        for j in range(nu.n_atoms):
            d = np.max(np.abs(zeta.atoms - F_vals[j]), axis=1)
            i = int(np.argmin(d))
            if d[i] > SNAP_TOL:
                raise AlignmentError("fibering alignment failed")
            pi[i, j] = nu.weights[j]
        return MartingaleCoupling(TransportPlan(zeta, nu, pi), F)
    pi, pieces = martingale_feasibility(zeta, nu, F_vals, tol=tol)
    if pi is None:
        cert = ConvexOrderCertificate("not_dominated", witness_pieces=pieces)
        raise OrderViolationError(
            "zeta is not convexly dominated by the moment-map image of nu",
            certificate=cert,
        )
    return MartingaleCoupling(TransportPlan(zeta, nu, pi), F)


def glue(T: MongeMap, coupling: MartingaleCoupling, mu: DiscreteMeasure) -> ConditionalKernel:
    """Kernel with x-marginal mu and conditional at x_i equal to the
    coupling's conditional at the row atom matching T(x_i)."""
    if T.values.shape[0] != mu.n_atoms:
        raise DomainError("map length does not match mu")
    zeta = coupling.zeta
    conditionals = []
    for i in range(mu.n_atoms):
        d = np.max(np.abs(zeta.atoms - T.values[i]), axis=1)
        j = int(np.argmin(d))
        if d[j] > SNAP_TOL:
            raise AlignmentError(
                f"T(x_{i}) = {T.values[i]} matches no atom of the coupling's first marginal"
            )
        conditionals.append(coupling.conditional(j))
    return ConditionalKernel(mu.atoms, mu.weights, tuple(conditionals))

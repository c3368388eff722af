"""Discrete measures, 1D grid densities, conditional kernels and moment maps.

Atoms are rows of a float64 array of shape (n, d).  All objects are
immutable after construction; every operation returns a new object.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import DomainError, RepresentationError

MERGE_TOL = 1e-12
MASS_TOL = 1e-12


def _as_atoms(atoms) -> np.ndarray:
    a = np.asarray(atoms, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DomainError(f"atoms must be a (n, d) array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("atoms contain non-finite coordinates")
    return a


def _canonicalize(atoms: np.ndarray, weights: np.ndarray):
    """Sort atoms lexicographically and merge near-duplicates.

    Atoms closer than MERGE_TOL in sup-norm are merged by weight addition.
    """
    if atoms.shape[0] == 0:
        return atoms, weights
    order = np.lexsort(atoms.T[::-1])
    atoms = atoms[order]
    weights = weights[order]
    gaps = np.max(np.abs(np.diff(atoms, axis=0)), axis=1) > MERGE_TOL
    starts = np.concatenate([[0], np.nonzero(gaps)[0] + 1])
    merged_w = np.add.reduceat(weights, starts)
    return atoms[starts], merged_w


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported nonnegative measure: atoms with weights."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = _as_atoms(self.atoms)
        weights = np.asarray(self.weights, dtype=float).ravel()
        if atoms.shape[0] != weights.shape[0]:
            raise DomainError("atoms and weights length mismatch")
        if not np.all(np.isfinite(weights)):
            raise DomainError("non-finite weights")
        if np.any(weights < -1e-12):
            raise DomainError("negative weight")
        weights = np.maximum(weights, 0.0)
        atoms, weights = _canonicalize(atoms.copy(), weights.copy())
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def is_probability(self, tol: float = MASS_TOL) -> bool:
        return abs(self.total_mass - 1.0) <= tol

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms

    @staticmethod
    def dirac(point) -> "DiscreteMeasure":
        return DiscreteMeasure(np.atleast_1d(np.asarray(point, dtype=float))[None, :], [1.0])

    @staticmethod
    def from_points(points, weights=None) -> "DiscreteMeasure":
        a = _as_atoms(points)
        if weights is None:
            weights = np.full(a.shape[0], 1.0 / a.shape[0])
        return DiscreteMeasure(a, weights)

    def same_support(self, other: "DiscreteMeasure", tol: float = MERGE_TOL) -> bool:
        return (
            self.n_atoms == other.n_atoms
            and self.dim == other.dim
            and np.max(np.abs(self.atoms - other.atoms)) <= tol
        )

    def close_to(self, other: "DiscreteMeasure", tol: float = 1e-9) -> bool:
        return self.same_support(other) and np.max(np.abs(self.weights - other.weights)) <= tol

    def to_json(self) -> str:
        return json.dumps(
            {"atoms": [[float(v) for v in row] for row in self.atoms],
             "weights": [float(w) for w in self.weights]}
        )

    @staticmethod
    def from_json(text: str) -> "DiscreteMeasure":
        obj = json.loads(text)
        return DiscreteMeasure(np.asarray(obj["atoms"], dtype=float), obj["weights"])


@dataclass(frozen=True)
class GridDensity1D:
    """Piecewise-constant density on [lo, hi] with m equal cells."""

    lo: float
    hi: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size == 0 or not np.all(np.isfinite(values)):
            raise DomainError("grid density needs a finite nonempty value array")
        if np.any(values < -1e-12):
            raise DomainError("negative density value")
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.hi > self.lo):
            raise DomainError("invalid interval")
        values = np.maximum(values, 0.0)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def cells(self) -> int:
        return self.values.size

    @property
    def cell_width(self) -> float:
        return (self.hi - self.lo) / self.cells

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.values) * self.cell_width)

    def is_probability(self, tol: float = MASS_TOL) -> bool:
        return abs(self.total_mass - 1.0) <= tol

    def midpoints(self) -> np.ndarray:
        m = self.cells
        return self.lo + (np.arange(m) + 0.5) * (self.hi - self.lo) / m

    def boundaries(self) -> np.ndarray:
        return self.lo + np.arange(self.cells + 1) * (self.hi - self.lo) / self.cells

    def same_grid(self, other: "GridDensity1D") -> bool:
        return (
            self.cells == other.cells
            and abs(self.lo - other.lo) <= MERGE_TOL
            and abs(self.hi - other.hi) <= MERGE_TOL
        )

    def refine(self, factor: int) -> "GridDensity1D":
        """Split every cell into `factor` equal cells (same density)."""
        return GridDensity1D(self.lo, self.hi, np.repeat(self.values, factor))

    def to_json(self) -> str:
        return json.dumps(
            {"lo": float(self.lo), "hi": float(self.hi),
             "values": [float(v) for v in self.values]}
        )

    @staticmethod
    def from_json(text: str) -> "GridDensity1D":
        obj = json.loads(text)
        return GridDensity1D(float(obj["lo"]), float(obj["hi"]), obj["values"])


Measure = Union[DiscreteMeasure, GridDensity1D]


def measure_from_json(text: str) -> Measure:
    obj = json.loads(text)
    if "atoms" in obj:
        return DiscreteMeasure(np.asarray(obj["atoms"], dtype=float), obj["weights"])
    if "values" in obj and "lo" in obj:
        return GridDensity1D(float(obj["lo"]), float(obj["hi"]), obj["values"])
    raise RepresentationError("unrecognized measure JSON")


def measure_to_obj(m: Measure):
    return json.loads(m.to_json())


@dataclass(frozen=True)
class MomentMap:
    """Vector-valued map F on atoms; g(p) = integral of F against p."""

    dim: int
    fn: Callable[[np.ndarray], np.ndarray]

    def apply(self, atoms: np.ndarray) -> np.ndarray:
        atoms = _as_atoms(atoms)
        out = np.asarray(self.fn(atoms), dtype=float)
        if out.ndim == 1:
            out = out[:, None]
        if out.shape != (atoms.shape[0], self.dim):
            raise DomainError(
                f"moment map returned shape {out.shape}, expected {(atoms.shape[0], self.dim)}"
            )
        if not np.all(np.isfinite(out)):
            raise DomainError("moment map produced non-finite values")
        return out

    @staticmethod
    def identity(dim: int) -> "MomentMap":
        return MomentMap(dim, lambda a: a)

    @staticmethod
    def from_scalar(fn: Callable[[np.ndarray], np.ndarray]) -> "MomentMap":
        """Scalar map applied to 1-dimensional atoms."""
        return MomentMap(1, lambda a: np.asarray(fn(a[:, 0]), dtype=float)[:, None])

    @staticmethod
    def from_table(atoms, values) -> "MomentMap":
        """Lookup table on a fixed atom set (nearest within 1e-9)."""
        table_atoms = _as_atoms(atoms)
        table_values = np.asarray(values, dtype=float)
        if table_values.ndim == 1:
            table_values = table_values[:, None]

        def fn(a):
            out = np.empty((a.shape[0], table_values.shape[1]))
            for i, row in enumerate(a):
                d = np.max(np.abs(table_atoms - row), axis=1)
                j = int(np.argmin(d))
                if d[j] > 1e-9:
                    raise DomainError(f"moment-map table has no entry for atom {row}")
                out[i] = table_values[j]
            return out

        return MomentMap(table_values.shape[1], fn)


@dataclass(frozen=True)
class ConditionalKernel:
    """x-indexed family of conditional measures with its first marginal."""

    x_atoms: np.ndarray
    x_weights: np.ndarray
    conditionals: tuple

    def __post_init__(self):
        x_atoms = _as_atoms(self.x_atoms)
        x_weights = np.asarray(self.x_weights, dtype=float).ravel()
        if x_atoms.shape[0] != x_weights.shape[0] or x_atoms.shape[0] != len(self.conditionals):
            raise DomainError("kernel component lengths mismatch")
        if abs(np.sum(x_weights) - 1.0) > MASS_TOL:
            raise DomainError("x-weights must sum to 1")
        if np.any(x_weights < 0):
            raise DomainError("negative x-weight")
        for c in self.conditionals:
            if not c.is_probability():
                raise DomainError("conditional is not a probability measure")
        conditionals = tuple(self.conditionals)
        # canonical x order, so marginal_x() rows align with the kernel rows
        order = np.lexsort(x_atoms.T[::-1])
        if not np.array_equal(order, np.arange(order.size)):
            x_atoms = x_atoms[order]
            x_weights = x_weights[order]
            conditionals = tuple(conditionals[i] for i in order)
        x_atoms = np.ascontiguousarray(x_atoms)
        x_atoms.setflags(write=False)
        x_weights.setflags(write=False)
        object.__setattr__(self, "x_atoms", x_atoms)
        object.__setattr__(self, "x_weights", x_weights)
        object.__setattr__(self, "conditionals", conditionals)

    @property
    def n_x(self) -> int:
        return self.x_atoms.shape[0]

    def marginal_x(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.x_atoms, self.x_weights)

    def to_json(self) -> str:
        return json.dumps(
            {"x_atoms": [[float(v) for v in row] for row in self.x_atoms],
             "x_weights": [float(w) for w in self.x_weights],
             "conditionals": [measure_to_obj(c) for c in self.conditionals]}
        )

    @staticmethod
    def from_json(text: str) -> "ConditionalKernel":
        obj = json.loads(text)
        conds = [measure_from_json(json.dumps(c)) for c in obj["conditionals"]]
        return ConditionalKernel(
            np.asarray(obj["x_atoms"], dtype=float), obj["x_weights"], tuple(conds)
        )


def pushforward(m: DiscreteMeasure, F: MomentMap) -> DiscreteMeasure:
    """Image measure of m under F; duplicate images merged by weight."""
    return DiscreteMeasure(F.apply(m.atoms), m.weights)


def sample_grid(gd: GridDensity1D) -> DiscreteMeasure:
    """Midpoint atomization: one atom per cell, weight = density * width.

    Zero-weight cells are kept so the atom set mirrors the grid exactly.
    """
    return DiscreteMeasure(gd.midpoints()[:, None], gd.values * gd.cell_width)


def g_eval(p: Measure, F: MomentMap) -> np.ndarray:
    """Moment vector of p under F.

    Grid densities are integrated by the midpoint rule, which is exact for
    cellwise-linear integrands on aligned grids.
    """
    if isinstance(p, GridDensity1D):
        p = sample_grid(p)
    return p.weights @ F.apply(p.atoms)


def mix(k: ConditionalKernel) -> Measure:
    """Second marginal of the plan induced by k: the x-weighted mixture."""
    conds = k.conditionals
    if all(isinstance(c, DiscreteMeasure) for c in conds):
        atoms = np.vstack([c.atoms for c in conds])
        weights = np.concatenate(
            [w * c.weights for w, c in zip(k.x_weights, conds)]
        )
        return DiscreteMeasure(atoms, weights)
    if all(isinstance(c, GridDensity1D) for c in conds):
        first = conds[0]
        for c in conds[1:]:
            if not first.same_grid(c):
                raise RepresentationError("grid conditionals live on different grids")
        values = np.zeros(first.cells)
        for w, c in zip(k.x_weights, conds):
            values += w * c.values
        return GridDensity1D(first.lo, first.hi, values)
    raise RepresentationError("conditionals mix discrete and grid representations")


def mixture(measures: Sequence[Measure], coeffs) -> Measure:
    """Convex combination of measures sharing a representation."""
    coeffs = np.asarray(coeffs, dtype=float)
    kernel = ConditionalKernel(
        np.arange(len(measures), dtype=float)[:, None], coeffs / coeffs.sum(), tuple(measures)
    )
    return mix(kernel)

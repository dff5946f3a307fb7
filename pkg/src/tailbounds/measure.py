"""Discrete probability measures, reproducible samplers, and grid quantization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ShapeError
from .space import (
    PNormSpace,
    ROLE_PRIMAL,
    ROLES,
    exponent_from_json,
    exponent_to_json,
    p_norm_rows,
)

WEIGHT_SUM_TOL = 1e-12

GAUSSIAN = "gaussian"
UNIFORM_BALL = "uniform-ball"
SYMMETRIC_ATOMS = "symmetric-atoms"
FAMILIES = (GAUSSIAN, UNIFORM_BALL, SYMMETRIC_ATOMS)

_UINT64_MASK = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported probability measure on a p-norm space.

    Atoms are rows of `atoms`; weights are nonnegative and must sum to one
    within WEIGHT_SUM_TOL (no silent renormalization).  A dual-role measure
    lives on the same coordinates but its atoms are functionals, so norms
    are taken in the conjugate exponent.
    """

    space: PNormSpace
    atoms: np.ndarray
    weights: np.ndarray
    role: str = ROLE_PRIMAL

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if atoms.ndim != 2 or atoms.shape[1] != self.space.dim:
            raise ShapeError(
                f"atoms must be (n, {self.space.dim}), got shape {atoms.shape}"
            )
        if atoms.shape[0] < 1:
            raise ValueError("a measure needs at least one atom")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atom coordinates must be finite")
        if weights.shape != (atoms.shape[0],):
            raise ShapeError(
                f"weights must be ({atoms.shape[0]},), got shape {weights.shape}"
            )
        if np.any(weights < 0.0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and nonnegative")
        total = float(weights.sum())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(
                f"weights must sum to 1 within {WEIGHT_SUM_TOL}, got {total!r}"
            )
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def exponent(self) -> float:
        return self.space.p if self.role == ROLE_PRIMAL else self.space.q

    def atom_norms(self) -> np.ndarray:
        return p_norm_rows(self.atoms, self.exponent)

    def to_dict(self) -> dict:
        return {
            "dim": self.space.dim,
            "p": exponent_to_json(self.space.p),
            "role": self.role,
            "atoms": self.atoms.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteMeasure":
        missing = {"dim", "p", "role", "atoms", "weights"} - set(data)
        if missing:
            raise ValueError(f"measure object is missing fields: {sorted(missing)}")
        space = PNormSpace(data["dim"], exponent_from_json(data["p"]))
        return cls(space, data["atoms"], data["weights"], data["role"])


def save_measure(measure: DiscreteMeasure, path) -> None:
    with open(path, "w") as fh:
        json.dump(measure.to_dict(), fh, indent=2)
        fh.write("\n")


def load_measure(path) -> DiscreteMeasure:
    with open(path) as fh:
        return DiscreteMeasure.from_dict(json.load(fh))


def second_moment(measure: DiscreteMeasure) -> float:
    """Weighted mean of the squared atom norms (role-appropriate exponent)."""
    return float(np.dot(measure.weights, measure.atom_norms() ** 2))


def mean(measure: DiscreteMeasure) -> np.ndarray:
    return measure.weights @ measure.atoms


def center(measure: DiscreteMeasure) -> DiscreteMeasure:
    """Translate atoms so the mean is zero.  Exactly-centered input is returned as is."""
    m = mean(measure)
    if not m.any():
        return measure
    return replace(measure, atoms=measure.atoms - m)


def empirical(space: PNormSpace, points, role: str = ROLE_PRIMAL) -> DiscreteMeasure:
    """Uniform measure on the given points (kept distinct even if equal)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ShapeError(f"expected a 2-d array of points, got shape {pts.shape}")
    n = pts.shape[0]
    counts = np.ones(n)
    return DiscreteMeasure(space, pts, counts / n, role)


def pushforward(measure: DiscreteMeasure, matrix, role: str | None = None) -> DiscreteMeasure:
    """Image measure under x -> matrix @ x, merging exactly equal images."""
    a = np.asarray(matrix, dtype=float)
    d = measure.space.dim
    if a.shape != (d, d):
        raise ShapeError(f"transport matrix must be ({d}, {d}), got {a.shape}")
    images = measure.atoms @ a.T
    unique, inverse = np.unique(images, axis=0, return_inverse=True)
    weights = np.zeros(unique.shape[0])
    np.add.at(weights, inverse, measure.weights)
    return DiscreteMeasure(measure.space, unique, weights, role or measure.role)


@dataclass(frozen=True, eq=False)
class Sampler:
    """Counter-based sampler: draw(i) depends only on (seed, i), never on order.

    Families:
      * gaussian:        mean + cov_factor @ z, z standard normal,
      * uniform-ball:    uniform on the radius-r p-ball (exact construction
                         from Gamma(1/p) magnitudes and an Exp(1) pad; p = inf
                         is coordinatewise uniform),
      * symmetric-atoms: uniform over {+-a_1, ..., +-a_k}.
    """

    space: PNormSpace
    family: str
    seed: int = 0
    mean: np.ndarray | None = None
    cov_factor: np.ndarray | None = None
    radius: float = 1.0
    atoms: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        d = self.space.dim
        if self.family == GAUSSIAN:
            m = np.zeros(d) if self.mean is None else np.asarray(self.mean, dtype=float)
            if m.shape != (d,):
                raise ShapeError(f"mean must be ({d},), got {m.shape}")
            f = np.eye(d) if self.cov_factor is None else np.asarray(self.cov_factor, dtype=float)
            if f.ndim != 2 or f.shape[0] != d:
                raise ShapeError(f"cov_factor must have {d} rows, got {f.shape}")
            object.__setattr__(self, "mean", m)
            object.__setattr__(self, "cov_factor", f)
        elif self.family == UNIFORM_BALL:
            if not (self.radius > 0.0 and math.isfinite(self.radius)):
                raise ValueError(f"radius must be positive, got {self.radius}")
        else:
            if self.atoms is None:
                raise ValueError("symmetric-atoms sampler needs atoms")
            a = np.asarray(self.atoms, dtype=float)
            if a.ndim != 2 or a.shape[1] != d or a.shape[0] < 1:
                raise ShapeError(f"atoms must be (k, {d}) with k >= 1, got {a.shape}")
            object.__setattr__(self, "atoms", a)

    def _generator(self, index: int) -> np.random.Generator:
        key = np.array([self.seed & _UINT64_MASK, index & _UINT64_MASK], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def draw(self, index: int) -> np.ndarray:
        if index < 0:
            raise ValueError(f"draw index must be nonnegative, got {index}")
        gen = self._generator(index)
        d = self.space.dim
        if self.family == GAUSSIAN:
            return self.mean + self.cov_factor @ gen.standard_normal(self.cov_factor.shape[1])
        if self.family == UNIFORM_BALL:
            p = self.space.p
            if p == math.inf:
                return self.radius * gen.uniform(-1.0, 1.0, d)
            # |g_i|^p ~ Gamma(1/p); (g, pad) normalized lands uniformly in the ball
            magnitudes = gen.gamma(1.0 / p, 1.0, d)
            signs = 2.0 * gen.integers(0, 2, d) - 1.0
            pad = gen.standard_exponential()
            scale = (magnitudes.sum() + pad) ** (1.0 / p)
            return self.radius * signs * magnitudes ** (1.0 / p) / scale
        k = self.atoms.shape[0]
        pick = int(gen.integers(0, 2 * k))
        sign = 1.0 if pick < k else -1.0
        return sign * self.atoms[pick % k]

    def draw_block(self, start: int, count: int) -> np.ndarray:
        if count < 1:
            raise ValueError(f"count must be positive, got {count}")
        return np.stack([self.draw(i) for i in range(start, start + count)])

    def to_dict(self) -> dict:
        out = {
            "dim": self.space.dim,
            "p": exponent_to_json(self.space.p),
            "family": self.family,
            "seed": self.seed,
        }
        if self.family == GAUSSIAN:
            out["mean"] = self.mean.tolist()
            out["cov_factor"] = self.cov_factor.tolist()
        elif self.family == UNIFORM_BALL:
            out["radius"] = self.radius
        else:
            out["atoms"] = self.atoms.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Sampler":
        missing = {"dim", "p", "family"} - set(data)
        if missing:
            raise ValueError(f"sampler object is missing fields: {sorted(missing)}")
        space = PNormSpace(data["dim"], exponent_from_json(data["p"]))
        return cls(
            space,
            data["family"],
            seed=int(data.get("seed", 0)),
            mean=data.get("mean"),
            cov_factor=data.get("cov_factor"),
            radius=float(data.get("radius", 1.0)),
            atoms=data.get("atoms"),
        )


def load_sampler(path) -> Sampler:
    with open(path) as fh:
        return Sampler.from_dict(json.load(fh))


def grid_indices(points, resolution: float) -> np.ndarray:
    """Round each coordinate toward zero to an integer grid index.

    trunc(x / delta) alone can land past x when x / delta rounds up across an
    integer (e.g. delta = 0.1, x = 1.7: 17 * 0.1 > 1.7), so indices are walked
    back toward zero until |k * delta| <= |x| holds coordinatewise.
    """
    if not (resolution > 0.0 and math.isfinite(resolution)):
        raise ValueError(f"resolution must be positive and finite, got {resolution}")
    pts = np.asarray(points, dtype=float)
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    k = np.trunc(pts / resolution)
    over = np.abs(k * resolution) > np.abs(pts)
    while np.any(over):
        k = np.where(over, k - np.sign(k), k)
        over = np.abs(k * resolution) > np.abs(pts)
    if np.any(np.abs(k) > 2.0**62):
        raise ValueError("resolution is too small relative to the data")
    return k.astype(np.int64)


def quantize_points(points, resolution: float) -> np.ndarray:
    """Snap points toward zero onto the resolution grid (coordinatewise)."""
    return grid_indices(points, resolution) * resolution


def quantize(
    sampler: Sampler, n_samples: int, resolution: float, merge: bool = True
) -> DiscreteMeasure:
    """Empirical measure of n quantized draws.

    Coincident grid cells are merged by integer index with integer count
    accounting, so weights sum to exactly one after a single final division.
    With merge=False atoms stay aligned one-to-one with draw indices, which
    is what the coupled two-resolution comparisons need.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be positive, got {n_samples}")
    samples = sampler.draw_block(0, n_samples)
    indices = grid_indices(samples, resolution)
    if merge:
        unique, counts = np.unique(indices, axis=0, return_counts=True)
        atoms = unique * resolution
        weights = counts / float(n_samples)
    else:
        atoms = indices * resolution
        weights = np.full(n_samples, 1.0 / n_samples)
    return DiscreteMeasure(sampler.space, atoms, weights, ROLE_PRIMAL)

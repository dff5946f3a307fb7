"""Finite-dimensional p-norm geometry.

Everything downstream lives in R^dim equipped with the p-norm

    ||x||_p = (sum_i |x_i|^p)^(1/p),    ||x||_inf = max_i |x_i|,

its conjugate exponent q (1/p + 1/q = 1), and the duality pairing
<f, x> = sum_i f_i x_i.  Dual vectors are plain coordinate vectors
measured in the q-norm.  p = inf is represented exactly as math.inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

ROLE_PRIMAL = "primal"
ROLE_DUAL = "dual"
ROLES = (ROLE_PRIMAL, ROLE_DUAL)


def _check_exponent(p: float) -> float:
    p = float(p)
    if math.isnan(p) or p < 1.0:
        raise ValueError(f"norm exponent must satisfy p >= 1 (or inf), got {p}")
    return p


def conjugate_exponent(p: float) -> float:
    """Return q with 1/p + 1/q = 1; q = inf when p = 1 and q = 1 when p = inf."""
    p = _check_exponent(p)
    if p == 1.0:
        return math.inf
    if p == math.inf:
        return 1.0
    return p / (p - 1.0)


def exponent_to_json(p: float):
    return "inf" if p == math.inf else float(p)


def exponent_from_json(value) -> float:
    if value == "inf":
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"exponent must be a number or the string 'inf', got {value!r}")
    return _check_exponent(float(value))


@dataclass(frozen=True)
class PNormSpace:
    """R^dim with the p-norm; `dual()` is the same coordinates under the q-norm."""

    dim: int
    p: float

    def __post_init__(self):
        if not isinstance(self.dim, int) or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        object.__setattr__(self, "p", _check_exponent(self.p))

    @property
    def q(self) -> float:
        return conjugate_exponent(self.p)

    def dual(self) -> "PNormSpace":
        return PNormSpace(self.dim, self.q)


@dataclass(frozen=True, eq=False)
class Vector:
    """A coordinate vector tagged with its space and side of the duality."""

    coords: np.ndarray
    space: PNormSpace
    role: str = ROLE_PRIMAL

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 1 or coords.shape[0] != self.space.dim:
            raise ShapeError(
                f"expected {self.space.dim} coordinates, got shape {coords.shape}"
            )
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinates must be finite")
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        object.__setattr__(self, "coords", coords)

    @property
    def exponent(self) -> float:
        # dual vectors are measured in the conjugate norm
        return self.space.p if self.role == ROLE_PRIMAL else self.space.q

    def norm(self) -> float:
        return p_norm(self.coords, self.exponent)


def _coords(x) -> np.ndarray:
    if isinstance(x, Vector):
        return x.coords
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ShapeError(f"expected a 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("coordinates must be finite")
    return v


def p_norm_rows(points, p: float) -> np.ndarray:
    """p-norm of each row of a 2-d array, scaled to avoid overflow for large p."""
    p = _check_exponent(p)
    a = np.abs(np.asarray(points, dtype=float))
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-d array of row vectors, got shape {a.shape}")
    if p == math.inf:
        return a.max(axis=1)
    if p == 1.0:
        return a.sum(axis=1)
    m = a.max(axis=1)
    # factor out the max so (a/m)**p stays in [0, 1]
    r = a / np.where(m > 0.0, m, 1.0)[:, None]
    if p == 2.0:
        s = np.sqrt((r**2).sum(axis=1))
    else:
        s = (r**p).sum(axis=1) ** (1.0 / p)
    return np.where(m > 0.0, m * s, 0.0)


def p_norm(x, p: float) -> float:
    return float(p_norm_rows(_coords(x)[None, :], p)[0])


def pair(f, x) -> float:
    """Duality pairing <f, x> = sum_i f_i x_i."""
    fc, xc = _coords(f), _coords(x)
    if fc.shape != xc.shape:
        raise ShapeError(f"pairing shape mismatch: {fc.shape} vs {xc.shape}")
    return float(np.dot(fc, xc))


def dual_norm(f, p: float) -> float:
    """Norm of a functional over the p-normed space: the conjugate q-norm."""
    return p_norm(f, conjugate_exponent(p))


def holder_extremizer(f, p: float) -> np.ndarray:
    """Unit-p-norm vector x attaining <f, x> = ||f||_q.

    For 1 < p < inf the extremizer is x_i = sign(f_i) |f_i|^(q-1) / ||f||_q^(q-1);
    for p = 1 it is a signed standard basis vector at the largest |f_i|; for
    p = inf it is the sign pattern of f.  The zero functional maps to e_1.
    """
    p = _check_exponent(p)
    v = _coords(f)
    if not v.any():
        x = np.zeros_like(v)
        x[0] = 1.0
        return x
    if p == 1.0:
        j = int(np.argmax(np.abs(v)))
        x = np.zeros_like(v)
        x[j] = math.copysign(1.0, v[j])
        return x
    if p == math.inf:
        return np.sign(v)
    q = conjugate_exponent(p)
    scale = p_norm(v, q)
    return np.sign(v) * (np.abs(v) / scale) ** (q - 1.0)


@dataclass(frozen=True, eq=False)
class NormInterval:
    """Certified bracket [lower, upper] around an operator norm.

    `exact` means the value is known in closed form and lower == upper.
    `witness` is a vector achieving (or certifying) the lower endpoint:
    lower == ||M w||_to / ||w||_from holds by construction.
    """

    lower: float
    upper: float
    exact: bool
    witness: np.ndarray | None = None

    def __post_init__(self):
        if not (0.0 <= self.lower <= self.upper):
            raise ValueError(
                f"invalid interval: lower={self.lower}, upper={self.upper}"
            )
        if self.exact and self.lower != self.upper:
            raise ValueError("exact intervals must be degenerate")


def _norm_ascent(matrix, from_exponent, to_exponent, restarts, iterations, seed):
    """Projected-ascent lower bound on the from->to operator norm.

    Runs `restarts` seeded starting points in parallel; each step moves along
    the (row-normalized) gradient of ||Mv||_to, renormalizes to the unit
    from-sphere, and keeps the move only if the objective improved, halving
    that restart's step otherwise.  Returns (best value, best point).
    """
    rng = np.random.default_rng(seed)
    d = matrix.shape[1]
    points = rng.standard_normal((restarts, d))
    norms = p_norm_rows(points, from_exponent)
    points /= np.where(norms > 0.0, norms, 1.0)[:, None]
    values = p_norm_rows(points @ matrix.T, to_exponent)
    steps = np.full(restarts, 0.5)
    for _ in range(iterations):
        images = points @ matrix.T
        if to_exponent == math.inf:
            grad_img = np.zeros_like(images)
            rows = np.arange(restarts)
            cols = np.argmax(np.abs(images), axis=1)
            grad_img[rows, cols] = np.sign(images[rows, cols])
        elif to_exponent == 1.0:
            grad_img = np.sign(images)
        else:
            grad_img = np.sign(images) * np.abs(images) ** (to_exponent - 1.0)
        grad = grad_img @ matrix
        scale = np.sqrt((grad**2).sum(axis=1))
        grad /= np.where(scale > 0.0, scale, 1.0)[:, None]
        trial = points + steps[:, None] * grad
        norms = p_norm_rows(trial, from_exponent)
        trial /= np.where(norms > 0.0, norms, 1.0)[:, None]
        trial_values = p_norm_rows(trial @ matrix.T, to_exponent)
        improved = trial_values > values
        points[improved] = trial[improved]
        values[improved] = trial_values[improved]
        steps[~improved] *= 0.5
    best = int(np.argmax(values))
    return float(values[best]), points[best]


def _sign_pattern_candidates(matrix, from_exponent, to_exponent):
    """Evaluate all +-1 sign patterns (first coordinate fixed +1) as candidates."""
    d = matrix.shape[1]
    patterns = np.ones((2 ** (d - 1), d))
    for j in range(1, d):
        block = 2 ** (d - 1 - j)
        patterns[:, j] = np.tile(np.repeat([1.0, -1.0], block), 2 ** (j - 1))
    patterns /= p_norm_rows(patterns, from_exponent)[:, None]
    values = p_norm_rows(patterns @ matrix.T, to_exponent)
    best = int(np.argmax(values))
    return float(values[best]), patterns[best]


def operator_norm(
    matrix,
    from_exponent: float,
    to_exponent: float,
    *,
    restarts: int = 16,
    iterations: int = 200,
    seed: int = 0,
) -> NormInterval:
    """Induced from->to operator norm of a matrix, as a NormInterval.

    Exact cases (degenerate interval):
      * from = 1:    max over columns of the to-norm,
      * to = inf:    max over rows of the conjugate(from)-norm,
      * from = to = 2: largest singular value.

    Otherwise the interval brackets the true value.  The upper endpoint is
    sigma_max scaled by standard norm-comparison factors,

        upper = sigma_max * rows^max(0, 1/to - 1/2) * cols^max(0, 1/2 - 1/from),

    and the lower endpoint is the best achieved ratio over signed basis
    vectors, +-1 sign patterns (for cols <= 12), and multi-start projected
    ascent.  The lower endpoint is always witnessed by an explicit vector.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2:
        raise ShapeError(f"expected a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    from_exponent = _check_exponent(from_exponent)
    to_exponent = _check_exponent(to_exponent)
    rows, cols = a.shape

    if from_exponent == 1.0:
        col_norms = p_norm_rows(a.T, to_exponent)
        j = int(np.argmax(col_norms))
        witness = np.zeros(cols)
        witness[j] = 1.0
        value = float(col_norms[j])
        return NormInterval(value, value, True, witness)
    if to_exponent == math.inf:
        q = conjugate_exponent(from_exponent)
        row_norms = p_norm_rows(a, q)
        i = int(np.argmax(row_norms))
        witness = holder_extremizer(a[i], from_exponent)
        value = float(row_norms[i])
        return NormInterval(value, value, True, witness)
    if from_exponent == 2.0 and to_exponent == 2.0:
        _, s, vt = np.linalg.svd(a)
        return NormInterval(float(s[0]), float(s[0]), True, vt[0])

    sigma = float(np.linalg.svd(a, compute_uv=False)[0])
    upper = (
        sigma
        * rows ** max(0.0, 1.0 / to_exponent - 0.5)
        * cols ** max(0.0, 0.5 - 1.0 / from_exponent)
    )

    candidates = []
    col_norms = p_norm_rows(a.T, to_exponent)
    j = int(np.argmax(col_norms))
    basis = np.zeros(cols)
    basis[j] = 1.0
    candidates.append((float(col_norms[j]), basis))
    if cols <= 12:
        candidates.append(_sign_pattern_candidates(a, from_exponent, to_exponent))
    candidates.append(
        _norm_ascent(a, from_exponent, to_exponent, restarts, iterations, seed)
    )
    lower, witness = max(candidates, key=lambda c: c[0])
    # the achieved ratio is a true lower bound; guard the upper endpoint
    # against last-ulp rounding in the svd scaling
    return NormInterval(lower, max(lower, upper), False, witness)

"""
N-functions and Orlicz norms over discrete measure spaces.

Every measure space in this project is produced by quadrature, so a function
is a finite list of atoms (value, weight).  Three norms are provided:

* ``luxemburg_norm``  inf{κ > 0 : Σ Ψ(|f|/κ) w ≤ 1}, by bisection in log κ;
* ``orlicz_norm``     the dual-ball supremum, via the Amemiya form
                      inf_k (1 + Σ Ψ(k|f|) w) / k;
* ``average_orlicz_norm``  the same supremum with the dual constraint at
                      level μ(Ω), i.e. inf_k (μ(Ω) + Σ Ψ(k|f|) w) / k.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
from scipy import optimize

from config import CONFIG
from errors import DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class NKind(Enum):
    EXP_MINUS = 'A'   # e^t - 1 - t
    LLOGL = 'B'       # (1 + t) ln(1 + t) - t


_PARTNER = {NKind.EXP_MINUS: NKind.LLOGL, NKind.LLOGL: NKind.EXP_MINUS}


@dataclass(frozen=True)
class NFunction:
    """One member of the complementary pair (A, B)."""
    kind: NKind

    @property
    def complement(self) -> 'NFunction':
        return NFunction(_PARTNER[self.kind])

    def __call__(self, t: ArrayLike) -> ArrayLike:
        return eval_nfunction(self, t)

    def derivative(self, t: ArrayLike) -> ArrayLike:
        t = np.asarray(t, dtype=float)
        if self.kind is NKind.EXP_MINUS:
            with np.errstate(over='ignore'):
                return np.expm1(t)
        return np.log1p(t)

    def young_gap(self, t: ArrayLike) -> np.ndarray:
        """t·Ψ'(t) − Ψ(t), which equals Φ(Ψ'(t)) for the complement Φ."""
        slope = np.asarray(self.derivative(t), dtype=float)
        out = np.full(slope.shape, np.inf)
        finite = np.isfinite(slope)
        out[finite] = _evaluate(self.complement.kind, slope[finite])
        return out

    def inverse(self, y: float) -> float:
        """Ψ⁻¹(y) for y ≥ 0."""
        if y < 0 or not math.isfinite(y):
            raise DomainError(f"N-function inverse needs finite y >= 0, got {y}")
        if y == 0:
            return 0.0
        hi = 1.0
        while eval_nfunction(self, hi) < y:
            hi *= 2.0
        return optimize.brentq(lambda t: eval_nfunction(self, t) - y, 0.0, hi, xtol=1e-300, rtol=1e-14)


A_FUNCTION = NFunction(NKind.EXP_MINUS)
B_FUNCTION = NFunction(NKind.LLOGL)


def _evaluate(kind: NKind, t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    small = t < CONFIG.SERIES_CUTOFF
    ts, tl = t[small], t[~small]
    if kind is NKind.EXP_MINUS:
        out[small] = ts * ts * (0.5 + ts * (1 / 6 + ts * (1 / 24 + ts / 120)))
        with np.errstate(over='ignore'):
            out[~small] = np.expm1(tl) - tl
    else:
        out[small] = ts * ts * (0.5 - ts * (1 / 6 - ts * (1 / 12 - ts / 20)))
        out[~small] = (1.0 + tl) * np.log1p(tl) - tl
    return out


def eval_nfunction(psi: NFunction, t: ArrayLike) -> ArrayLike:
    """A(t) = eᵗ − 1 − t or B(t) = (1+t)ln(1+t) − t, saturating to +inf."""
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"N-function argument must be finite, got {t}")
    if np.any(arr < 0):
        raise DomainError(f"N-function argument must be >= 0, got {t}")
    out = _evaluate(psi.kind, np.atleast_1d(arr))
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


@dataclass(frozen=True)
class MeasuredFunction:
    """A function on a finite measure space: atoms (value, weight)."""
    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        weights = np.asarray(self.weights, dtype=float).ravel()
        if values.shape != weights.shape:
            raise DomainError(f"values/weights length mismatch: {values.size} vs {weights.size}")
        if not np.all(np.isfinite(values)):
            raise DomainError("function values must be finite")
        if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
            raise DomainError("atom weights must be finite and strictly positive")
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'weights', weights)

    @classmethod
    def constant(cls, c: float, measure: float, atoms: int = 1) -> 'MeasuredFunction':
        return cls(np.full(atoms, c), np.full(atoms, measure / atoms))

    @property
    def total_measure(self) -> float:
        return math.fsum(self.weights)

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def scaled(self, t: float) -> 'MeasuredFunction':
        return MeasuredFunction(self.values * t, self.weights)

    def integral_against(self, other: 'MeasuredFunction') -> float:
        """Σ f·g·w for two functions on the same atoms."""
        return float(np.sum(self.values * other.values * self.weights))


def modular(f: MeasuredFunction, psi: NFunction, kappa: float) -> float:
    """Σ Ψ(|f|/κ)·w; +inf once Ψ overflows."""
    if not (kappa > 0) or not math.isfinite(kappa):
        raise DomainError(f"modular needs finite kappa > 0, got {kappa}")
    if f.values.size == 0:
        return 0.0
    terms = _evaluate(psi.kind, np.abs(f.values) / kappa)
    return float(np.sum(terms * f.weights))


def _require_atoms(f: MeasuredFunction):
    if f.values.size == 0:
        raise DomainError("norm needs at least one atom")


def luxemburg_norm(f: MeasuredFunction, psi: NFunction) -> float:
    """Luxemburg norm by bisection on the monotone map κ ↦ modular(f, Ψ, κ)."""
    _require_atoms(f)
    m = f.sup_norm
    if m == 0:
        return 0.0
    mu = f.total_measure

    lo = m / psi.inverse(1.0 / mu + 1.0)
    hi = m * mu + 1.0
    for _ in range(200):
        if modular(f, psi, hi) <= 1.0:
            break
        hi *= 2.0
    for _ in range(200):
        if modular(f, psi, lo) > 1.0:
            break
        lo /= 2.0
    if modular(f, psi, hi) == 1.0:
        return hi

    def excess(s: float) -> float:
        return modular(f, psi, math.exp(s)) - 1.0

    s = optimize.bisect(excess, math.log(lo), math.log(hi),
                        xtol=CONFIG.LUXEMBURG_RTOL, rtol=4 * np.finfo(float).eps, maxiter=500)
    return math.exp(s)


def _amemiya(f: MeasuredFunction, psi: NFunction, level: float) -> float:
    """inf_{k>0} (level + Σ Ψ(k|f|) w) / k."""
    values = np.abs(f.values)
    m = float(values.max())
    if m == 0:
        return 0.0
    weights = f.weights

    # stationarity: Σ Φ(Ψ'(k|f|)) w = level, left side increasing in k
    def gap(k: float) -> float:
        return float(np.sum(psi.young_gap(k * values) * weights)) - level

    k_lo = k_hi = 1.0 / m
    for _ in range(400):
        if gap(k_lo) < 0:
            break
        k_lo /= 4.0
    for _ in range(400):
        if gap(k_hi) > 0:
            break
        k_hi *= 4.0

    def objective(s: float) -> float:
        k = math.exp(s)
        return (level + float(np.sum(_evaluate(psi.kind, k * values) * weights))) / k

    res = optimize.minimize_scalar(objective, bounds=(math.log(k_lo), math.log(k_hi)),
                                   method='bounded', options={'xatol': CONFIG.AMEMIYA_TOL})
    return float(min(res.fun, objective(math.log(k_lo)), objective(math.log(k_hi))))


def orlicz_norm(f: MeasuredFunction, psi: NFunction) -> float:
    """Dual-ball (Orlicz) norm, computed through the Amemiya representation."""
    _require_atoms(f)
    return _amemiya(f, psi, 1.0)


def average_orlicz_norm(f: MeasuredFunction, psi: NFunction) -> float:
    """Dual-ball norm with the constraint level μ(Ω) instead of 1."""
    mu = f.total_measure
    if not (mu > 0) or not math.isfinite(mu):
        raise DomainError(f"averaged norm needs 0 < μ(Ω) < ∞, got {mu}")
    return _amemiya(f, psi, mu)


def midpoint_rule(lo: float, hi: float, panels: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite midpoint nodes and weights on [lo, hi]."""
    h = (hi - lo) / panels
    return lo + h * (np.arange(panels) + 0.5), np.full(panels, h)


@dataclass(frozen=True)
class Quadrature:
    """Panel counts for the inner (x₂) and outer (x₁) midpoint rules."""
    inner_panels: int = field(default_factory=lambda: CONFIG.INNER_PANELS)
    outer_panels_per_unit: int = field(default_factory=lambda: CONFIG.OUTER_PANELS_PER_UNIT)
    max_outer_panels: int = field(default_factory=lambda: CONFIG.MAX_OUTER_PANELS)

    def inner(self, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray]:
        return midpoint_rule(lo, hi, self.inner_panels)

    def outer(self, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray]:
        panels = int(math.ceil(self.outer_panels_per_unit * (hi - lo)))
        return midpoint_rule(lo, hi, min(max(panels, 1), self.max_outer_panels))


NORMS = {
    'orlicz': orlicz_norm,
    'luxemburg': luxemburg_norm,
    'average': average_orlicz_norm,
}


def mixed_norm_L1_LB(V, I1: Tuple[float, float], I2: Tuple[float, float],
                     quad: Optional[Quadrature] = None, inner: str = 'orlicz') -> float:
    """∫_{I1} ‖V(x₁, ·)‖_{B, I2} dx₁ by outer quadrature of inner norms.

    ``V`` is a ``potentials.PotentialSpec``.  Signed potentials (the mean-zero
    remainder) are normed through |V|; unsigned ones must be nonnegative.
    """
    quad = quad or Quadrature()
    lo1, hi1 = I1
    lo2, hi2 = I2
    if not (hi1 > lo1 and hi2 > lo2):
        raise DomainError(f"mixed norm needs nonempty intervals, got {I1}, {I2}")
    norm = NORMS[inner]

    support = V.x1_support()
    if support is not None:
        lo1, hi1 = max(lo1, support[0]), min(hi1, support[1])
        if hi1 <= lo1:
            return 0.0

    x1, w1 = quad.outer(lo1, hi1)
    x2, w2 = quad.inner(lo2, hi2)

    factors = V.separable_factors()
    if factors is not None:
        g, h = factors
        gv, hv = np.asarray(g(x1), dtype=float), np.asarray(h(x2), dtype=float)
        if not V.signed and (np.any(gv < 0) or np.any(hv < 0)):
            raise DomainError(f"negative potential sample in mixed norm of {V.name}")
        scale = float(np.sum(np.abs(gv) * w1))
        if scale == 0 or not np.any(hv):
            return 0.0
        return scale * norm(MeasuredFunction(hv, w2), B_FUNCTION)

    samples = np.asarray(V(x1[:, None], x2[None, :]), dtype=float)
    if not V.signed and np.any(samples < 0):
        raise DomainError(f"negative potential sample in mixed norm of {V.name}")
    total = 0.0
    for row, weight in zip(samples, w1):
        if not np.any(row):
            continue
        total += weight * norm(MeasuredFunction(row, w2), B_FUNCTION)
    return total

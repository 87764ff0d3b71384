"""
Dyadic decomposition of the x₁ axis and the per-cell quantities entering the
upper estimates: weighted masses G_n on the dyadic cells I_n, mixed L¹(L_B)
norms D_n and L^p norms b_n on the unit windows J_n = (n, n+1), the weak-ℓ¹
quasinorm, and the evaluators for the right-hand sides of the estimates.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from config import CONFIG
from errors import DomainError
from orlicz import Quadrature, mixed_norm_L1_LB
from potentials import FunctionPotential, PotentialSpec, ZeroPotential

logger = logging.getLogger(__name__)

TRUNCATION_SHARE = 1e-6
SLOT_NAMES = tuple(f'C{i}' for i in range(1, 13))


def _default_range() -> Tuple[int, int]:
    return CONFIG.N_RANGE


@dataclass(frozen=True)
class DyadicIndex:
    n: int
    interval: Tuple[float, float]


def dyadic_interval(n: int) -> Tuple[float, float]:
    """I_0 = [−1, 1], I_n = [2^(n−1), 2^n] for n > 0, mirrored for n < 0."""
    n = int(n)
    if n == 0:
        return -1.0, 1.0
    if n > 0:
        return math.ldexp(1.0, n - 1), math.ldexp(1.0, n)
    return -math.ldexp(1.0, -n), -math.ldexp(1.0, -n - 1)


def dyadic_index_of(x: float) -> int:
    """The cell holding the point x (shared endpoints go to the cell nearer 0)."""
    ax = abs(x)
    if ax <= 1.0:
        return 0
    n = int(math.ceil(math.log2(ax)))
    if math.ldexp(1.0, n - 1) >= ax:
        n -= 1
    if math.ldexp(1.0, n) < ax:
        n += 1
    return n if x > 0 else -n


def range_covers(n_range: Tuple[int, int], lo: float, hi: float) -> bool:
    """Whether the cells I_n, n_range[0] ≤ n ≤ n_range[1], cover [lo, hi]."""
    return n_range[0] <= dyadic_index_of(lo) and dyadic_index_of(hi) <= n_range[1]


def dyadic_cells(n_range: Tuple[int, int]) -> List[DyadicIndex]:
    lo, hi = n_range
    return [DyadicIndex(n, dyadic_interval(n)) for n in range(lo, hi + 1)]


def _clip(interval: Tuple[float, float], support: Optional[Tuple[float, float]]) -> Optional[Tuple[float, float]]:
    lo, hi = interval
    if support is not None:
        lo, hi = max(lo, support[0]), min(hi, support[1])
    return (lo, hi) if hi > lo else None


def _check_sign(V: PotentialSpec, samples: np.ndarray):
    if not V.signed and np.any(samples < 0):
        raise DomainError(f"potential {V.name} takes negative values")


def g_n(V: PotentialSpec, n: int, quad: Optional[Quadrature] = None) -> float:
    """G_n = ∫_{I_n}∫_0^a |x₁| V dx (n ≠ 0), G_0 = ∫_{I_0}∫_0^a V dx."""
    quad = quad or Quadrature()
    window = _clip(dyadic_interval(n), V.x1_support())
    if window is None:
        return 0.0
    x1, w1 = quad.outer(*window)
    x2, w2 = quad.inner(0.0, V.a)
    weight = np.abs(x1) if n != 0 else np.ones_like(x1)
    factors = V.separable_factors()
    if factors is not None:
        g, h = factors
        gv, hv = np.asarray(g(x1), dtype=float), np.asarray(h(x2), dtype=float)
        _check_sign(V, gv)
        _check_sign(V, hv)
        return float(np.sum(weight * gv * w1) * np.sum(hv * w2))
    samples = np.asarray(V(x1[:, None], x2[None, :]), dtype=float)
    _check_sign(V, samples)
    return float(np.sum((weight * w1)[:, None] * samples * w2[None, :]))


def g_sequence(V: PotentialSpec, n_range: Optional[Tuple[int, int]] = None,
               quad: Optional[Quadrature] = None) -> Dict[int, float]:
    n_range = n_range or _default_range()
    return {cell.n: g_n(V, cell.n, quad) for cell in dyadic_cells(n_range)}


def unit_windows(V: PotentialSpec) -> List[int]:
    """Integers n whose window J_n = (n, n+1) meets the support of V."""
    lo, hi = V.integration_window()
    if hi <= lo:
        return []
    return list(range(int(math.floor(lo)), int(math.ceil(hi))))


def d_n(V: PotentialSpec, n: int, quad: Optional[Quadrature] = None, inner: str = 'orlicz') -> float:
    """D_n = ‖V‖_{L¹(J_n, L_B(0, a))}."""
    return mixed_norm_L1_LB(V, (float(n), float(n) + 1.0), (0.0, V.a), quad, inner)


def d_sequence(V: PotentialSpec, quad: Optional[Quadrature] = None, inner: str = 'orlicz') -> Dict[int, float]:
    windows = unit_windows(V)
    with ThreadPoolExecutor(max_workers=CONFIG.MAX_WORKERS) as pool:
        values = list(pool.map(lambda n: d_n(V, n, quad, inner), windows))
    return dict(zip(windows, values))


def b_n_lp(V: PotentialSpec, n: int, p: float, quad: Optional[Quadrature] = None) -> float:
    """b_n = (∫_{S_n} |V|^p dx)^(1/p) on S_n = (n, n+1) × (0, a)."""
    if not p > 1:
        raise DomainError(f"L^p cell norm needs p > 1, got {p}")
    quad = quad or Quadrature()
    window = _clip((float(n), float(n) + 1.0), V.x1_support())
    if window is None:
        return 0.0
    x1, w1 = quad.outer(*window)
    x2, w2 = quad.inner(0.0, V.a)
    samples = np.asarray(V(x1[:, None], x2[None, :]), dtype=float)
    _check_sign(V, samples)
    return float(np.sum(w1[:, None] * np.abs(samples) ** p * w2[None, :]) ** (1.0 / p))


def window_nodes(V: PotentialSpec, quad: Quadrature):
    """Outer midpoint nodes window by window over the support of V."""
    for n in unit_windows(V):
        window = _clip((float(n), float(n) + 1.0), V.x1_support())
        if window is not None:
            yield quad.outer(*window)


def lp_mixed_norm(V: PotentialSpec, p: float, quad: Optional[Quadrature] = None) -> float:
    """∫_ℝ (∫_0^a |V|^p dx₂)^(1/p) dx₁."""
    if not p > 1:
        raise DomainError(f"L^p mixed norm needs p > 1, got {p}")
    quad = quad or Quadrature()
    x2, w2 = quad.inner(0.0, V.a)
    total = 0.0
    for x1, w1 in window_nodes(V, quad):
        samples = np.abs(np.asarray(V(x1[:, None], x2[None, :]), dtype=float))
        total += float(np.sum(w1 * np.sum(samples ** p * w2[None, :], axis=1) ** (1.0 / p)))
    return total


def weak_l1_quasinorm(seq: Union[Sequence[float], Mapping[int, float]]) -> float:
    """sup_s s·card{n : |a_n| > s} = max_k k·|a|_(k) for a finite sequence."""
    values = np.asarray(list(seq.values()) if isinstance(seq, Mapping) else list(seq), dtype=float)
    if values.size == 0:
        return 0.0
    ordered = np.sort(np.abs(values))[::-1]
    return float(np.max(ordered * np.arange(1, ordered.size + 1)))


def threshold_inequality(G: Mapping[int, float], c: float) -> Tuple[float, float]:
    """(Σ_{G_n > c} √G_n, (2/√c)·‖G‖_{1,w}); the first never exceeds the second."""
    lhs = math.fsum(math.sqrt(v) for v in G.values() if v > c)
    return lhs, 2.0 / math.sqrt(c) * weak_l1_quasinorm(G)


@dataclass(frozen=True)
class BoundConstants:
    """Thresholds and prefactors of the upper estimates (existence-only in theory)."""
    c: float = field(default_factory=lambda: CONFIG.DEFAULT_THRESHOLD)
    C: float = field(default_factory=lambda: CONFIG.DEFAULT_PREFACTOR)
    c1: float = field(default_factory=lambda: CONFIG.DEFAULT_THRESHOLD)
    c2: float = field(default_factory=lambda: CONFIG.DEFAULT_THRESHOLD)
    curve_sqrt_const: float = field(default_factory=lambda: CONFIG.DEFAULT_PREFACTOR)
    curve_cell_const: float = field(default_factory=lambda: CONFIG.DEFAULT_PREFACTOR)
    slots: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in ('c', 'C', 'c1', 'c2', 'curve_sqrt_const', 'curve_cell_const'):
            value = getattr(self, name)
            if not (value > 0) or not math.isfinite(value):
                raise DomainError(f"constant {name} must be positive, got {value}")
        for name, value in self.slots.items():
            if name not in SLOT_NAMES:
                raise DomainError(f"unknown constant slot '{name}', expected one of C1..C12")
            if not (value > 0):
                raise DomainError(f"constant {name} must be positive, got {value}")

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class BoundBreakdown:
    """Value of an upper estimate together with the terms that produced it."""
    value: float
    sqrt_terms: Dict[int, float] = field(default_factory=dict)
    cell_terms: Dict[int, float] = field(default_factory=dict)
    truncated: bool = False
    constants: Dict[str, float] = field(default_factory=dict)
    atoms: int = 0


def _boundary_share(values: Mapping[int, float]) -> float:
    if not values:
        return 0.0
    total = math.fsum(values.values())
    if total == 0:
        return 0.0
    edges = {min(values), max(values)}
    return math.fsum(values[n] for n in edges) / total


def _truncation_check(label: str, values: Mapping[int, float]) -> bool:
    share = _boundary_share(values)
    if share > TRUNCATION_SHARE:
        logger.warning(f"⚠️ {label}: boundary cells carry {share:.3e} of the sum, range may be too short")
        return True
    return False


def bound_gest2(V: PotentialSpec, consts: Optional[BoundConstants] = None,
                n_range: Optional[Tuple[int, int]] = None, quad: Optional[Quadrature] = None,
                G: Optional[Mapping[int, float]] = None,
                D: Optional[Mapping[int, float]] = None) -> BoundBreakdown:
    """1 + C(Σ_{G_n>c} √G_n + Σ_{D_n>c} D_n)."""
    consts = consts or BoundConstants()
    G = G if G is not None else g_sequence(V, n_range, quad)
    D = D if D is not None else d_sequence(V, quad)
    sqrt_terms = {n: v for n, v in G.items() if v > consts.c}
    cell_terms = {n: v for n, v in D.items() if v > consts.c}
    truncated = _truncation_check('G_n', G)
    if V.x1_support() is None:
        truncated = _truncation_check('D_n', D) or truncated
    value = 1.0 + consts.C * (math.fsum(math.sqrt(v) for v in sqrt_terms.values())
                              + math.fsum(cell_terms.values()))
    logger.info(f"🎯 strip bound = {value:.6g} ({len(sqrt_terms)} sqrt terms, {len(cell_terms)} cell terms)")
    return BoundBreakdown(value, sqrt_terms, cell_terms, truncated, {'c': consts.c, 'C': consts.C})


class ReducedPotential:
    """Ṽ(x₁) = (1/a)∫_0^a V dx₂, optionally scaled."""

    def __init__(self, V: PotentialSpec, quad: Optional[Quadrature] = None, scale: float = 1.0):
        self.V = V
        self.quad = quad or Quadrature()
        self.scale = float(scale)
        self._nodes, self._weights = self.quad.inner(0.0, V.a)

    def __call__(self, x1) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        factors = self.V.separable_factors()
        if factors is not None:
            g, h = factors
            mean = float(np.sum(np.asarray(h(self._nodes), dtype=float) * self._weights)) / self.V.a
            return self.scale * mean * np.asarray(g(x1), dtype=float)
        samples = np.asarray(self.V(x1[..., None], self._nodes), dtype=float)
        return self.scale * np.sum(samples * self._weights, axis=-1) / self.V.a

    def x1_support(self):
        return self.V.x1_support()

    def integration_window(self):
        return self.V.integration_window()

    def scaled(self, t: float) -> 'ReducedPotential':
        return ReducedPotential(self.V, self.quad, self.scale * t)


def reduced_potential(V: PotentialSpec, quad: Optional[Quadrature] = None) -> Tuple[ReducedPotential, PotentialSpec]:
    """(Ṽ, V_*) with V_* = V − Ṽ, whose x₂-mean vanishes for every x₁."""
    reduced = ReducedPotential(V, quad)
    if V.x2_independent:
        return reduced, ZeroPotential(V.a)
    factors = V.separable_factors()
    if factors is not None:
        g, h = factors
        x2, w2 = reduced._nodes, reduced._weights
        mean = float(np.sum(np.asarray(h(x2), dtype=float) * w2)) / V.a
        centred = (lambda x: np.asarray(h(x), dtype=float) - mean)
        return reduced, FunctionPotential(
            V.a, lambda x1, x2: np.asarray(g(x1), dtype=float) * centred(x2),
            support=V.x1_support(), feature=V.feature_length(), signed=True, factors=(g, centred))
    remainder = FunctionPotential(
        V.a, lambda x1, x2: np.asarray(V(x1, x2), dtype=float) - reduced(x1),
        support=V.x1_support(), feature=V.feature_length(), signed=True)
    return reduced, remainder


def g_n_1d(W: Callable, n: int, quad: Optional[Quadrature] = None) -> float:
    """G_n of a one-dimensional density W: ∫_{I_n} |x₁| W dx₁ (n ≠ 0), ∫_{I_0} W."""
    quad = quad or Quadrature()
    window = _clip(dyadic_interval(n), W.x1_support())
    if window is None:
        return 0.0
    x1, w1 = quad.outer(*window)
    values = np.asarray(W(x1), dtype=float)
    if np.any(values < 0):
        raise DomainError("one-dimensional potential takes negative values")
    weight = np.abs(x1) if n != 0 else np.ones_like(x1)
    return float(np.sum(weight * values * w1))


def bound_est1_1d(W: Union[ReducedPotential, Mapping[int, float]],
                  n_range: Optional[Tuple[int, int]] = None,
                  constant: float = 7.61, threshold: float = 0.046,
                  quad: Optional[Quadrature] = None) -> BoundBreakdown:
    """1 + constant·Σ_{G_n > threshold} √G_n for a density W on the line (or precomputed G_n)."""
    n_range = n_range or _default_range()
    if isinstance(W, Mapping):
        G = dict(W)
    else:
        G = {cell.n: g_n_1d(W, cell.n, quad) for cell in dyadic_cells(n_range)}
    terms = {n: v for n, v in G.items() if v > threshold}
    truncated = _truncation_check('1D G_n', G)
    value = 1.0 + constant * math.fsum(math.sqrt(v) for v in terms.values())
    return BoundBreakdown(value, terms, {}, truncated, {'threshold': threshold, 'constant': constant})


@dataclass
class BoundVariants:
    """Bracketed right-hand sides of the weak-ℓ¹ / L^p reformulations."""
    quasinorm: float
    l1_lb: float
    l1_lb_star: float
    lp: float
    lp_star: float
    rhs_Est2: float
    rhs_Est3: float
    rhs_Est4: float
    rhs_Est5: float
    thresholded_d: float
    chain_holds: bool
    lp_gap: float
    lp_gap_bound: float
    lp_gap_holds: bool


def bound_variants(V: PotentialSpec, p: float = 2.0, n_range: Optional[Tuple[int, int]] = None,
                   consts: Optional[BoundConstants] = None, quad: Optional[Quadrature] = None,
                   G: Optional[Mapping[int, float]] = None,
                   D: Optional[Mapping[int, float]] = None) -> BoundVariants:
    if not p > 1:
        raise DomainError(f"bound variants need p > 1, got {p}")
    consts = consts or BoundConstants()
    quad = quad or Quadrature()
    G = G if G is not None else g_sequence(V, n_range, quad)
    D = D if D is not None else d_sequence(V, quad)
    reduced, remainder = reduced_potential(V, quad)

    quasinorm = weak_l1_quasinorm(G)
    l1_lb = math.fsum(D.values())
    thresholded = math.fsum(v for v in D.values() if v > consts.c)
    l1_lb_star = math.fsum(d_sequence(remainder, quad).values()) if not isinstance(remainder, ZeroPotential) else 0.0
    lp = lp_mixed_norm(V, p, quad)
    lp_star = lp_mixed_norm(remainder, p, quad) if not isinstance(remainder, ZeroPotential) else 0.0

    mass = math.fsum(float(np.sum(reduced(x1) * w1)) for x1, w1 in window_nodes(V, quad))
    gap, gap_bound = abs(lp - lp_star), V.a ** (1.0 / p) * mass
    tol = 1e-9 * max(1.0, lp, l1_lb)

    return BoundVariants(
        quasinorm=quasinorm, l1_lb=l1_lb, l1_lb_star=l1_lb_star, lp=lp, lp_star=lp_star,
        rhs_Est2=quasinorm + l1_lb, rhs_Est3=quasinorm + lp,
        rhs_Est4=quasinorm + lp_star, rhs_Est5=quasinorm + l1_lb_star,
        thresholded_d=thresholded, chain_holds=thresholded <= l1_lb + tol,
        lp_gap=gap, lp_gap_bound=gap_bound, lp_gap_holds=gap <= gap_bound + tol)

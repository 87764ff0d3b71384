"""
Potentials carried by a polyline ℓ inside the strip.

The density V lives on ℓ with arc-length measure and is linear along every
segment.  Vertical segments of positive length make up the set Σ: each one
turns into a point interaction of mass c_k = ∫_{γ_k} V dx₂ in the reduced
one-dimensional problem, while the remaining (diffuse) part of the induced
measure ν enters through the weighted masses F_n.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from config import CONFIG
from dyadic import (BoundBreakdown, BoundConstants, bound_est1_1d, dyadic_cells, dyadic_interval,
                    range_covers)
from errors import DomainError
from inertia import count_negative_matrix
from orlicz import B_FUNCTION, MeasuredFunction, Quadrature, average_orlicz_norm
from strip_solver import StripGrid, StripProblem, stiffness_1d, stiffness_matrix

logger = logging.getLogger(__name__)

VERTICAL_TOL = 1e-12
QUADRATURE_STEPS = 4


@dataclass(frozen=True)
class Segment:
    start: Tuple[float, float]
    end: Tuple[float, float]
    v0: float
    v1: float
    vertical: bool

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])

    @property
    def mass(self) -> float:
        return self.length * 0.5 * (self.v0 + self.v1)

    def point(self, s):
        s = np.asarray(s, dtype=float)
        return (self.start[0] + s * (self.end[0] - self.start[0]),
                self.start[1] + s * (self.end[1] - self.start[1]))

    def density(self, s):
        return self.v0 + np.asarray(s, dtype=float) * (self.v1 - self.v0)

    def s_range(self, lo: float, hi: float) -> Optional[Tuple[float, float]]:
        """Parameter range whose x₁ lies in [lo, hi]; None for vertical or missing overlap."""
        x0, x1 = self.start[0], self.end[0]
        if self.vertical:
            return None
        s_a, s_b = (lo - x0) / (x1 - x0), (hi - x0) / (x1 - x0)
        s_lo, s_hi = max(0.0, min(s_a, s_b)), min(1.0, max(s_a, s_b))
        return (s_lo, s_hi) if s_hi > s_lo else None


def _orientation(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _on_segment(p, q, r) -> bool:
    return min(p[0], r[0]) <= q[0] <= max(p[0], r[0]) and min(p[1], r[1]) <= q[1] <= max(p[1], r[1])


def _segments_meet(p1, p2, q1, q2) -> bool:
    d1, d2 = _orientation(q1, q2, p1), _orientation(q1, q2, p2)
    d3, d4 = _orientation(p1, p2, q1), _orientation(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and 0 not in (d1, d2, d3, d4):
        return True
    return ((d1 == 0 and _on_segment(q1, p1, q2)) or (d2 == 0 and _on_segment(q1, p2, q2))
            or (d3 == 0 and _on_segment(p1, q1, p2)) or (d4 == 0 and _on_segment(p1, q2, p2)))


class CurveSpec:
    """Polyline in ℝ×[0, a] with a nonnegative density given at the vertices."""
    name = 'curve'

    def __init__(self, vertices: Sequence[Sequence[float]], density: Union[float, Sequence[float]], a: float):
        if not (a > 0) or not math.isfinite(a):
            raise DomainError(f"strip width must be positive, got {a}")
        self.a = float(a)
        points = np.asarray(vertices, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2 or len(points) < 2:
            raise DomainError("curve needs at least two (x1, x2) vertices")
        if not np.all(np.isfinite(points)):
            raise DomainError("curve vertices must be finite")
        if np.any(points[:, 1] < 0) or np.any(points[:, 1] > a):
            raise DomainError(f"curve vertices must satisfy 0 <= x2 <= {a:g}")
        values = np.broadcast_to(np.asarray(density, dtype=float), (len(points),)).copy()
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise DomainError("curve density must be finite and >= 0")
        self.vertices, self.values = points, values
        self.scale = max(1.0, float(np.max(np.abs(points))))
        self.segments = self._build_segments()
        self._check_simple()

    def _build_segments(self) -> List[Segment]:
        segments = []
        for k in range(len(self.vertices) - 1):
            p, q = self.vertices[k], self.vertices[k + 1]
            if np.allclose(p, q, rtol=0.0, atol=VERTICAL_TOL * self.scale):
                raise DomainError(f"consecutive curve vertices {k} and {k + 1} coincide")
            vertical = abs(q[0] - p[0]) <= VERTICAL_TOL * self.scale
            end = (float(p[0]), float(q[1])) if vertical else (float(q[0]), float(q[1]))
            segments.append(Segment((float(p[0]), float(p[1])), end,
                                    float(self.values[k]), float(self.values[k + 1]), vertical))
        return segments

    def _check_simple(self):
        segs = self.segments
        for i, first in enumerate(segs):
            if i + 1 < len(segs):
                nxt = segs[i + 1]
                d = np.subtract(first.end, first.start)
                e = np.subtract(nxt.end, nxt.start)
                if abs(d[0] * e[1] - d[1] * e[0]) <= 1e-14 * self.scale ** 2 and float(d @ e) < 0:
                    raise DomainError(f"curve doubles back on itself at vertex {i + 1}")
            for j in range(i + 2, len(segs)):
                if _segments_meet(first.start, first.end, segs[j].start, segs[j].end):
                    raise DomainError(f"curve is self-intersecting (segments {i} and {j})")

    @classmethod
    def from_dict(cls, spec: Dict, a: float) -> 'CurveSpec':
        if 'vertices' not in spec:
            raise DomainError("curve entry has no 'vertices'")
        return cls(spec['vertices'], spec.get('density', 1.0), a)

    def to_dict(self) -> Dict:
        return {'vertices': self.vertices.tolist(), 'density': self.values.tolist(), 'a': self.a}

    def scaled(self, t: float) -> 'CurveSpec':
        return CurveSpec(self.vertices, self.values * t, self.a)

    @property
    def x1_extent(self) -> Tuple[float, float]:
        return float(self.vertices[:, 0].min()), float(self.vertices[:, 0].max())

    def support_radius(self) -> float:
        lo, hi = self.x1_extent
        return max(abs(lo), abs(hi), 1.0)

    def feature_length(self) -> float:
        return min([1.0] + [seg.length for seg in self.segments])

    @property
    def diffuse(self) -> List[Segment]:
        return [s for s in self.segments if not s.vertical]

    @property
    def verticals(self) -> List[Segment]:
        return [s for s in self.segments if s.vertical]


@dataclass
class SigmaPoint:
    x1: float
    mass: float
    length: float


@dataclass
class CurveMeasureReport:
    sigma_points: List[SigmaPoint] = field(default_factory=list)
    F: Dict[int, float] = field(default_factory=dict)
    C: Dict[int, float] = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.sigma_points)


def detect_sigma(curve: CurveSpec) -> CurveMeasureReport:
    """Abscissae of the vertical pieces of ℓ with their masses c_k."""
    groups: Dict[float, SigmaPoint] = {}
    tol = VERTICAL_TOL * curve.scale
    for seg in curve.verticals:
        key = next((x for x in groups if abs(x - seg.start[0]) <= tol), seg.start[0])
        point = groups.setdefault(key, SigmaPoint(key, 0.0, 0.0))
        point.mass += seg.mass
        point.length += seg.length
    sigma = sorted((p for p in groups.values() if p.length > 0), key=lambda p: p.x1)
    if sigma:
        logger.info(f"✅ Σ has {len(sigma)} points: " + ", ".join(f"{p.x1:g} (c={p.mass:.4g})" for p in sigma))
    return CurveMeasureReport(sigma_points=sigma)


def _simpson(f, lo: float, hi: float) -> float:
    return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(0.5 * (lo + hi)) + f(hi))


def diffuse_measure(curve: CurveSpec, I: Tuple[float, float], weighted: bool = False) -> float:
    """∫ over the non-vertical part of ℓ with x₁ ∈ I of V ds (times |x₁| when weighted); exact."""
    lo, hi = I
    total = 0.0
    for seg in curve.diffuse:
        window = seg.s_range(lo, hi)
        if window is None:
            continue
        if weighted:
            integrand = (lambda s, seg=seg: abs(float(seg.point(s)[0])) * float(seg.density(s)) * seg.length)
            # |x₁| is linear on the piece unless it crosses 0
            cut = -seg.start[0] / (seg.end[0] - seg.start[0])
            pieces = [(window[0], cut), (cut, window[1])] if window[0] < cut < window[1] else [window]
            total += math.fsum(_simpson(integrand, a, b) for a, b in pieces)
        else:
            s_lo, s_hi = window
            total += seg.length * (s_hi - s_lo) * float(seg.density(0.5 * (s_lo + s_hi)))
    return total


def arc_measure_nu(curve: CurveSpec, I: Tuple[float, float]) -> float:
    """ν(I) for I = [lo, hi); vertical pieces at x₁ ∈ [lo, hi) count with their full mass."""
    lo, hi = I
    if not hi > lo:
        raise DomainError(f"interval must be nonempty, got {I}")
    atoms = math.fsum(p.mass for p in detect_sigma(curve).sigma_points if lo <= p.x1 < hi)
    return diffuse_measure(curve, I) + atoms


def f_n(curve: CurveSpec, n: int) -> float:
    """F_n = ∫_{I_n} |x₁| dν_diffuse (n ≠ 0), F_0 = ν_diffuse(I_0)."""
    return diffuse_measure(curve, dyadic_interval(n), weighted=(n != 0))


def _window_atoms(curve: CurveSpec, n: int, quad: Quadrature) -> Tuple[np.ndarray, np.ndarray]:
    """Arc-length midpoint atoms (V, ds) of ℓ_n = ℓ ∩ S_n; verticals at x₁ ∈ [n, n+1)."""
    values, weights = [], []
    for seg in curve.segments:
        if seg.vertical:
            if not (n <= seg.start[0] < n + 1):
                continue
            window = (0.0, 1.0)
        else:
            window = seg.s_range(float(n), float(n) + 1.0)
            if window is None:
                continue
        s_lo, s_hi = window
        piece = seg.length * (s_hi - s_lo)
        nodes, ds = quad.outer(0.0, piece)
        values.append(seg.density(s_lo + nodes / seg.length))
        weights.append(ds)
    if not values:
        return np.empty(0), np.empty(0)
    return np.concatenate(values), np.concatenate(weights)


def c_n(curve: CurveSpec, n: int, quad: Optional[Quadrature] = None) -> float:
    """C_n = averaged ℬ-norm of V over ℓ_n with arc-length measure."""
    quad = quad or Quadrature()
    values, weights = _window_atoms(curve, n, quad)
    if values.size == 0:
        touching = [v for (x, _), v in zip(curve.vertices, curve.values) if n <= x <= n + 1 and v > 0]
        if touching:
            logger.warning(f"⚠️ curve meets S_{n} in a set of zero length with nonzero density, C_{n} = 0")
        return 0.0
    if not np.any(values):
        return 0.0
    return average_orlicz_norm(MeasuredFunction(values, weights), B_FUNCTION)


def curve_windows(curve: CurveSpec) -> List[int]:
    """Unit windows [n, n+1) holding some arc length of ℓ."""
    lo, hi = curve.x1_extent
    windows = set(range(int(math.floor(lo)), int(math.ceil(hi))))
    windows.update(int(math.floor(seg.start[0])) for seg in curve.verticals)
    return sorted(windows)


def curve_measures(curve: CurveSpec, n_range: Optional[Tuple[int, int]] = None,
                   quad: Optional[Quadrature] = None) -> CurveMeasureReport:
    """Σ together with every F_n on the dyadic range and every nonzero-window C_n."""
    n_range = n_range or CONFIG.N_RANGE
    report = detect_sigma(curve)
    report.F = {cell.n: f_n(curve, cell.n) for cell in dyadic_cells(n_range)}
    report.C = {n: c_n(curve, n, quad) for n in curve_windows(curve)}
    return report


def measure_bound(F: Dict[int, float], constant: Optional[float] = None,
                  threshold: Optional[float] = None) -> BoundBreakdown:
    """1 + constant·Σ_{F_n > threshold} √F_n for a measure on the line."""
    constant = CONFIG.DEFAULT_PREFACTOR if constant is None else constant
    threshold = CONFIG.DEFAULT_THRESHOLD if threshold is None else threshold
    return bound_est1_1d(F, constant=constant, threshold=threshold)


def bound_gest3(curve: CurveSpec, consts: Optional[BoundConstants] = None,
                n_range: Optional[Tuple[int, int]] = None, quad: Optional[Quadrature] = None,
                measures: Optional[CurveMeasureReport] = None) -> BoundBreakdown:
    """1 + N + C′Σ_{F_n>c₁}√F_n + C″Σ_{C_n>c₂}C_n."""
    consts = consts or BoundConstants()
    n_range = n_range or CONFIG.N_RANGE
    measures = measures or curve_measures(curve, n_range, quad)
    sqrt_terms = {n: v for n, v in measures.F.items() if v > consts.c1}
    cell_terms = {n: v for n, v in measures.C.items() if v > consts.c2}

    lo, hi = curve.x1_extent
    truncated = not range_covers(n_range, lo, hi)
    if truncated:
        logger.warning(f"⚠️ curve spans [{lo:g}, {hi:g}] beyond the cells {n_range}, F_n range truncated")

    value = (1.0 + measures.N
             + consts.curve_sqrt_const * math.fsum(math.sqrt(v) for v in sqrt_terms.values())
             + consts.curve_cell_const * math.fsum(cell_terms.values()))
    logger.info(f"🎯 curve bound = {value:.6g} (N = {measures.N}, {len(sqrt_terms)} sqrt terms, "
                f"{len(cell_terms)} cell terms)")
    return BoundBreakdown(value, sqrt_terms, cell_terms, truncated,
                          {'c1': consts.c1, 'c2': consts.c2, 'curve_sqrt_const': consts.curve_sqrt_const,
                           'curve_cell_const': consts.curve_cell_const}, atoms=measures.N)


# discretized trace form

def trace_points(curve: CurveSpec, step: float, part: str = 'all') -> Iterator[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Midpoint quadrature (x₁, x₂, V·ds) along the segments, at most `step` apart."""
    if part not in ('all', 'diffuse', 'vertical'):
        raise ValueError(f"unknown curve part '{part}'")
    for seg in curve.segments:
        if (part == 'diffuse' and seg.vertical) or (part == 'vertical' and not seg.vertical):
            continue
        m = max(1, int(math.ceil(seg.length / step)))
        s = (np.arange(m) + 0.5) / m
        x1, x2 = seg.point(s)
        yield np.broadcast_to(x1, s.shape), x2, seg.density(s) * seg.length / m


def _check_window(curve: CurveSpec, grid: StripGrid):
    lo, hi = curve.x1_extent
    if lo < -grid.L or hi > grid.L:
        raise DomainError(f"curve x1-range [{lo:g}, {hi:g}] leaves the window [−{grid.L:g}, {grid.L:g}]")
    if abs(curve.a - grid.a) > 1e-12 * grid.a:
        raise DomainError(f"curve strip width {curve.a:g} differs from grid width {grid.a:g}")


def _locate(coord: np.ndarray, origin: float, h: float, cells: int) -> Tuple[np.ndarray, np.ndarray]:
    t = (coord - origin) / h
    idx = np.clip(np.floor(t).astype(int), 0, cells - 1)
    return idx, t - idx


def curve_mass_matrix(curve: CurveSpec, grid: StripGrid, part: str = 'all') -> sp.csr_matrix:
    """∫_ℓ V|u|² ds for bilinear u: each quadrature point adds w·φφᵀ on its 4 cell nodes."""
    _check_window(curve, grid)
    step = min(grid.h1, grid.h2) / QUADRATURE_STEPS
    rows, cols, vals = [], [], []
    for x1, x2, w in trace_points(curve, step, part):
        i, s = _locate(x1, -grid.L, grid.h1, grid.nx)
        j, t = _locate(x2, 0.0, grid.h2, grid.ny)
        base = i * grid.block + j
        idx = np.stack([base, base + 1, base + grid.block, base + grid.block + 1])
        phi = np.stack([(1 - s) * (1 - t), (1 - s) * t, s * (1 - t), s * t])
        rows.append(np.broadcast_to(idx[:, None, :], (4, 4, idx.shape[1])).ravel())
        cols.append(np.broadcast_to(idx[None, :, :], (4, 4, idx.shape[1])).ravel())
        vals.append((w * phi[:, None, :] * phi[None, :, :]).ravel())
    if not vals:
        return sp.csr_matrix((grid.size, grid.size))
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(grid.size, grid.size)).tocsr()


def assemble_curve_form(curve: CurveSpec, grid: StripGrid, scale: float = 1.0) -> StripProblem:
    """Strip stiffness minus scale·(curve trace mass)."""
    if not math.isfinite(scale) or scale < 0:
        raise DomainError(f"curve scale must be finite and >= 0, got {scale}")
    matrix = (stiffness_matrix(grid) - scale * curve_mass_matrix(curve, grid)).tocsr()
    return StripProblem(grid, matrix, scale, 'curve')


def line_mass_matrix(curve: CurveSpec, grid: StripGrid, part: str = 'all') -> sp.csr_matrix:
    """The trace mass seen by x₂-constant functions: hat functions in x₁ only."""
    _check_window(curve, grid)
    step = min(grid.h1, grid.h2) / QUADRATURE_STEPS
    size = grid.nx + 1
    rows, cols, vals = [], [], []
    for x1, _, w in trace_points(curve, step, part):
        i, s = _locate(x1, -grid.L, grid.h1, grid.nx)
        idx = np.stack([i, i + 1])
        phi = np.stack([1 - s, s])
        rows.append(np.broadcast_to(idx[:, None, :], (2, 2, idx.shape[1])).ravel())
        cols.append(np.broadcast_to(idx[None, :, :], (2, 2, idx.shape[1])).ravel())
        vals.append((w * phi[:, None, :] * phi[None, :, :]).ravel())
    if not vals:
        return sp.csr_matrix((size, size))
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(size, size)).tocsr()


@dataclass
class ReducedSplit:
    """Counts of the x₂-constant problem and of its diffuse / point-interaction parts."""
    reduced: int
    diffuse: int
    delta: int
    N: int
    F_effective: Dict[int, float]

    @property
    def split_holds(self) -> bool:
        return self.reduced <= self.diffuse + self.delta

    @property
    def delta_bound_holds(self) -> bool:
        return self.delta <= self.N


def reduced_split_counts(curve: CurveSpec, grid: StripGrid,
                         n_range: Optional[Tuple[int, int]] = None) -> ReducedSplit:
    """N₋ of a∫|w′|² − 2∫|w|²dν split into its diffuse and vertical parts.

    Splitting a sum of two potentials doubles each part, so the diffuse and
    point-interaction forms carry 4ν and 4c_k (2ν and c′_k per unit of the
    doubled form).  The point-interaction part has rank ≤ N.
    """
    n_range = n_range or CONFIG.N_RANGE
    K = grid.a * stiffness_1d(grid.nx, grid.h1)
    reduced = count_negative_matrix(K - 2.0 * line_mass_matrix(curve, grid, 'all'), block=1)
    diffuse = count_negative_matrix(K - 4.0 * line_mass_matrix(curve, grid, 'diffuse'), block=1)
    delta = count_negative_matrix(K - 4.0 * line_mass_matrix(curve, grid, 'vertical'), block=1)
    N = detect_sigma(curve).N
    # dividing the diffuse form by a gives −d²/dx₁² − (4/a)ν
    F_effective = {cell.n: 4.0 / grid.a * f_n(curve, cell.n) for cell in dyadic_cells(n_range)}
    split = ReducedSplit(reduced, diffuse, delta, N, F_effective)
    if not (split.split_holds and split.delta_bound_holds):
        logger.error(f"❌ reduced curve split violated: {split}")
    return split

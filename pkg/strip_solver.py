"""
Discretized quadratic form q_{V,S}[u] = ∫|∇u|² − ∫V|u|² on the strip truncated to
[−L, L] × [0, a], Neumann on all four sides.

The form is assembled with piecewise-linear stiffness and trapezoid-lumped mass
(identical to the 5-point stencil with reflection at the boundary, scaled by the
cell measure).  Nodes are ordered x₁-major, node (i, j) ↦ i·(ny+1) + j, so the
matrix is block tridiagonal with blocks of size ny+1.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from config import CONFIG
from dyadic import (ReducedPotential, b_n_lp, d_sequence, g_sequence, range_covers,
                    unit_windows, weak_l1_quasinorm)
from errors import DomainError
from inertia import (count_negative_blocks, count_negative_matrix, negative_count_ldl,
                     negative_count_tridiagonal, split_blocks)
from orlicz import Quadrature
from potentials import PotentialSpec, nodal_samples

logger = logging.getLogger(__name__)


def trapezoid_weights(panels: int, h: float) -> np.ndarray:
    w = np.full(panels + 1, h)
    w[0] = w[-1] = h / 2
    return w


def stiffness_1d(panels: int, h: float) -> sp.csr_matrix:
    """∫|w′|² for piecewise-linear w on a uniform mesh, free (Neumann) ends."""
    main = np.full(panels + 1, 2.0 / h)
    main[0] = main[-1] = 1.0 / h
    off = np.full(panels, -1.0 / h)
    return sp.diags([off, main, off], [-1, 0, 1], format='csr')


@dataclass(frozen=True)
class StripGrid:
    """Tensor grid on [−L, L] × [0, a] with nx × ny panels.

    🎯 `aligned` grids (integer L, integer panels per unit) line up with the unit
    windows S_n, which the per-cell counts need.  `coarsened` halves both panel
    counts for the refinement check; `widened` keeps the mesh and multiplies L.
    """
    a: float
    L: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise DomainError(f"strip width must be positive, got {self.a}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise DomainError(f"truncation half-length must be positive, got {self.L}")
        if self.nx < 4:
            raise DomainError(f"grid too coarse: nx = {self.nx} < 4")
        if self.ny < 2:
            raise DomainError(f"grid too coarse: ny = {self.ny} < 2")

    @property
    def h1(self) -> float:
        return 2.0 * self.L / self.nx

    @property
    def h2(self) -> float:
        return self.a / self.ny

    @property
    def x1(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.nx + 1)

    @property
    def x2(self) -> np.ndarray:
        return np.linspace(0.0, self.a, self.ny + 1)

    @property
    def w1(self) -> np.ndarray:
        return trapezoid_weights(self.nx, self.h1)

    @property
    def w2(self) -> np.ndarray:
        return trapezoid_weights(self.ny, self.h2)

    @property
    def block(self) -> int:
        return self.ny + 1

    @property
    def size(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def per_unit(self) -> float:
        return self.nx / (2.0 * self.L)

    @property
    def aligned(self) -> bool:
        """Integer L and an integer number of panels per unit length."""
        return float(self.L).is_integer() and float(self.per_unit).is_integer()

    @property
    def can_coarsen(self) -> bool:
        return self.nx // 2 >= 4 and self.ny // 2 >= 2

    def coarsened(self) -> 'StripGrid':
        """Half the panels in each direction, rounded down (odd counts give non-nested meshes)."""
        if not self.can_coarsen:
            raise DomainError(f"cannot coarsen grid {self.nx}x{self.ny}")
        return StripGrid(self.a, self.L, self.nx // 2, self.ny // 2)

    def widened(self, factor: int) -> 'StripGrid':
        """Same mesh on [−factor·L, factor·L]."""
        return StripGrid(self.a, self.L * factor, self.nx * factor, self.ny)

    @classmethod
    def for_potential(cls, V: PotentialSpec, ny: Optional[int] = None,
                      L: Optional[float] = None) -> 'StripGrid':
        """Aligned default grid: L = TRUNCATION_FACTOR × support radius, h₁ = 2⁻ᵏ ≤ feature/RESOLUTION_DIVISOR."""
        ny = ny or CONFIG.DEFAULT_NY
        if L is None:
            L = max(1, int(math.ceil(CONFIG.TRUNCATION_FACTOR * V.support_radius())))
        k = max(0, int(math.ceil(math.log2(CONFIG.RESOLUTION_DIVISOR / V.feature_length()))))
        while k > 0 and 2 * L * 2 ** k > CONFIG.MAX_NX:
            k -= 1
        nx = int(2 * L * 2 ** k)
        if 2.0 ** -k > V.feature_length() / CONFIG.RESOLUTION_DIVISOR:
            logger.warning(f"⚠️ {V.name}: mesh h1 = 2^-{k} is coarser than feature/{CONFIG.RESOLUTION_DIVISOR} "
                           f"(capped at nx = {nx})")
        return cls(V.a, float(L), nx, ny)

    def to_dict(self) -> Dict:
        return {'a': self.a, 'L': self.L, 'nx': self.nx, 'ny': self.ny}


def stiffness_matrix(grid: StripGrid) -> sp.csr_matrix:
    Kx, Ky = stiffness_1d(grid.nx, grid.h1), stiffness_1d(grid.ny, grid.h2)
    Mx, My = sp.diags(grid.w1), sp.diags(grid.w2)
    return (sp.kron(Kx, My) + sp.kron(Mx, Ky)).tocsr()


@dataclass(frozen=True, eq=False)
class StripProblem:
    """Assembled symmetric matrix of q_{scale·V,S} on a grid; read-only after assembly."""
    grid: StripGrid
    matrix: sp.csr_matrix
    scale: float = 1.0
    label: str = ''

    @property
    def block_size(self) -> int:
        return self.grid.block

    @property
    def symmetry_defect(self) -> float:
        """‖A − Aᵀ‖_max / ‖A‖_max."""
        top = abs(self.matrix).max()
        if top == 0:
            return 0.0
        diff = self.matrix - self.matrix.T
        return float(abs(diff).max() / top) if diff.nnz else 0.0


def potential_mass(V: PotentialSpec, grid: StripGrid) -> np.ndarray:
    """Trapezoid-lumped ∫V|u|² weights at the nodes, x₁-major."""
    samples = nodal_samples(V, grid.x1, grid.x2)
    return (samples * np.outer(grid.w1, grid.w2)).ravel()


def _check_scale(scale: float) -> float:
    if not math.isfinite(scale) or scale < 0:
        raise DomainError(f"potential scale must be finite and >= 0, got {scale}")
    return float(scale)


def assemble_form(V: PotentialSpec, grid: StripGrid, scale: float = 1.0) -> StripProblem:
    """Stiffness minus diag(scale·V·cell measure)."""
    scale = _check_scale(scale)
    mass = potential_mass(V, grid)
    matrix = (stiffness_matrix(grid) - sp.diags(scale * mass)).tocsr()
    return StripProblem(grid, matrix, scale, V.name)


def count_negative(problem: StripProblem) -> int:
    count = count_negative_matrix(problem.matrix, block=problem.block_size)
    logger.debug(f"N- = {count} for {problem.label} x{problem.scale:g} on {problem.grid.nx}x{problem.grid.ny}")
    return count


def cosine_modes(ny: int) -> np.ndarray:
    """cos(πkj/ny), k = 1..ny: trapezoid-mean-zero eigenvectors of the Neumann x₂ stiffness."""
    j = np.arange(ny + 1)[:, None]
    k = np.arange(1, ny + 1)[None, :]
    return np.cos(np.pi * k * j / ny)


def split_counts(problem: StripProblem) -> Tuple[int, int]:
    """(N₁, N₂): counts on x₂-constant functions and on x₂-mean-zero functions.

    The problem should already carry the doubled potential.  Both restrictions
    are congruences QᵀAQ of the block tridiagonal matrix, so they stay block
    tridiagonal (scalar tridiagonal for N₁).
    """
    diag_blocks, off_blocks = split_blocks(problem.matrix, problem.block_size)
    ones = np.ones((problem.block_size, 1))
    Q = cosine_modes(problem.grid.ny)
    n1 = count_negative_blocks(ones.T @ diag_blocks @ ones, ones.T @ off_blocks @ ones)
    n2 = count_negative_blocks(Q.T @ diag_blocks @ Q, Q.T @ off_blocks @ Q)
    return n1, n2


def subspace_counts(V: PotentialSpec, grid: StripGrid) -> Tuple[int, int]:
    """(N₁, N₂) of the 2V form; N₋(q_V) ≤ N₁ + N₂."""
    n1, n2 = split_counts(assemble_form(V, grid, 2.0))
    logger.info(f"🎯 {V.name}: N1 = {n1}, N2 = {n2}")
    return n1, n2


def line_count(h: float, nodal_mass: np.ndarray) -> int:
    """N₋ of ∫|w′|² − Σ m_i|w(x_i)|² on a uniform 1-D mesh with free ends."""
    panels = nodal_mass.size - 1
    K = stiffness_1d(panels, h)
    return negative_count_tridiagonal(K.diagonal() - nodal_mass, K.diagonal(1))


def reduced_count(V: PotentialSpec, grid: StripGrid) -> int:
    """N₋ of −d²/dx₁² − 2Ṽ on [−L, L], with Ṽ the trapezoid x₂-mean on the grid."""
    samples = nodal_samples(V, grid.x1, grid.x2)
    reduced = samples @ grid.w2 / grid.a
    return line_count(grid.h1, 2.0 * reduced * grid.w1)


def grid_converged(V: PotentialSpec, grid: StripGrid, scale: float = 1.0) -> Optional[bool]:
    """Whether the count on the grid equals the count on the grid with half the panels.

    None when the grid is already too coarse to halve.
    """
    if not grid.can_coarsen:
        logger.warning(f"⚠️ {V.name}: grid {grid.nx}x{grid.ny} too coarse to halve, convergence not checked")
        return None
    fine = count_negative(assemble_form(V, grid, scale))
    coarse = count_negative(assemble_form(V, grid.coarsened(), scale))
    if fine != coarse:
        logger.warning(f"⚠️ {V.name}: count {coarse} -> {fine} under refinement, not converged")
    return fine == coarse


def truncation_counts(V: PotentialSpec, grid: StripGrid, factors: Sequence[int] = (1, 2),
                      scale: float = 1.0) -> Optional[List[int]]:
    """Counts on [−kL, kL] for each k in `factors`, mesh width kept.

    Cutting the strip at ±L with Neumann ends only adds negative directions, so
    once V vanishes at the cut the counts are nonincreasing in k.  None when the
    support of V reaches the window edge.
    """
    support = V.x1_support()
    if support is None or support[0] <= -grid.L or support[1] >= grid.L:
        logger.warning(f"⚠️ {V.name}: support reaches ±{grid.L:g}, truncation check skipped")
        return None
    counts = [count_negative(assemble_form(V, grid.widened(k), scale)) for k in factors]
    logger.info(f"📊 {V.name}: counts " + ", ".join(f"L={k * grid.L:g}->{c}" for k, c in zip(factors, counts)))
    return counts


# lower-bound certifier

@dataclass
class CertifierReport:
    """Trial windows above the 5a threshold, their form values and the disjoint packing."""
    threshold: float
    candidates: Dict[int, float] = field(default_factory=dict)
    q_values: Dict[int, float] = field(default_factory=dict)
    supports: Dict[int, Tuple[float, float]] = field(default_factory=dict)
    packing: List[int] = field(default_factory=list)
    truncated: bool = False

    @property
    def indices(self) -> List[int]:
        return sorted(self.q_values)

    @property
    def lower_bound(self) -> int:
        return len(self.packing)

    @property
    def ceil_third(self) -> int:
        return -(-len(self.q_values) // 3)


def trial_profile(n: int) -> Tuple[List[float], List[float]]:
    """Breakpoints and values of the piecewise-linear trial function for cell n.

    The plateau sits on I_n at height 2^|n| (1 for n = 0), ramps with slope 4
    towards the origin and slope 1 away from it, so ∫|w′|² = 5·2^|n| (2 for n = 0).
    """
    if n == 0:
        return [-2.0, -1.0, 1.0, 2.0], [0.0, 1.0, 1.0, 0.0]
    m = abs(n)
    top = math.ldexp(1.0, m)
    xs = [math.ldexp(1.0, m - 2), math.ldexp(1.0, m - 1), top, 2 * top]
    ys = [0.0, top, top, 0.0]
    if n < 0:
        xs, ys = [-x for x in reversed(xs)], list(reversed(ys))
    return xs, ys


def trial_energy(xs: Sequence[float], ys: Sequence[float]) -> float:
    return math.fsum((y1 - y0) ** 2 / (x1 - x0) for x0, x1, y0, y1 in zip(xs, xs[1:], ys, ys[1:]))


def trial_form_value(V: PotentialSpec, n: int, quad: Optional[Quadrature] = None) -> float:
    """q_{V,S}[w_n ⊗ 1] = a∫|w_n′|² − ∫w_n²(∫V dx₂)dx₁ by quadrature."""
    quad = quad or Quadrature()
    xs, ys = trial_profile(n)
    energy = V.a * trial_energy(xs, ys)
    transverse = ReducedPotential(V, quad)
    support = V.x1_support()
    potential = 0.0
    for x0, x1, y0, y1 in zip(xs, xs[1:], ys, ys[1:]):
        lo, hi = x0, x1
        if support is not None:
            lo, hi = max(lo, support[0]), min(hi, support[1])
        if hi <= lo:
            continue
        nodes, weights = quad.outer(lo, hi)
        w = y0 + (y1 - y0) * (nodes - x0) / (x1 - x0)
        potential += float(np.sum(w * w * transverse(nodes) * weights)) * V.a
    return energy - potential


def _disjoint_packing(supports: Dict[int, Tuple[float, float]]) -> List[int]:
    """Largest family of pairwise non-overlapping supports (earliest right end first)."""
    chosen, edge = [], -math.inf
    for n, (lo, hi) in sorted(supports.items(), key=lambda item: item[1][1]):
        if lo >= edge:
            chosen.append(n)
            edge = hi
    return sorted(chosen)


def certify_lower_bound(V: PotentialSpec, quad: Optional[Quadrature] = None,
                        n_range: Optional[Tuple[int, int]] = None,
                        G: Optional[Dict[int, float]] = None) -> CertifierReport:
    """Trial functions on every cell with G_n > 5a; disjointly supported negatives give N₋ ≥ packing size."""
    quad = quad or Quadrature()
    n_range = n_range or CONFIG.N_RANGE
    G = G if G is not None else g_sequence(V, n_range, quad)
    report = CertifierReport(threshold=5.0 * V.a)

    lo, hi = V.integration_window()
    if hi > lo and not range_covers(n_range, lo, hi):
        logger.warning(f"⚠️ {V.name}: support [{lo:g}, {hi:g}] leaves the cells {n_range}, certifier truncated")
        report.truncated = True

    for n, value in sorted(G.items()):
        if value <= report.threshold:
            continue
        report.candidates[n] = value
        q = trial_form_value(V, n, quad)
        if q < 0:
            xs, _ = trial_profile(n)
            report.q_values[n] = q
            report.supports[n] = (xs[0], xs[-1])
        else:
            logger.warning(f"⚠️ {V.name}: G_{n} = {value:.4g} > 5a but q[u_{n}] = {q:.4g} is not negative")
    report.packing = _disjoint_packing(report.supports)
    logger.info(f"✅ certifier: {len(report.q_values)} negative trial functions, lower bound {report.lower_bound}")
    return report


# semiclassical scan

@dataclass
class ScanRow:
    alpha: float
    count: int
    count_per_alpha: float
    weak_quasinorm: float


def check_couplings(alphas: Sequence[float]) -> List[float]:
    alphas = [float(alpha) for alpha in alphas]
    if not alphas:
        raise DomainError("α-scan needs at least one coupling")
    if any(alpha < 0 for alpha in alphas) or any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise DomainError(f"α-scan couplings must be >= 0 and strictly increasing, got {alphas}")
    return alphas


def semiclassical_scan(V: PotentialSpec, grid: StripGrid, alphas: Sequence[float],
                       quad: Optional[Quadrature] = None,
                       n_range: Optional[Tuple[int, int]] = None) -> List[ScanRow]:
    """N₋(αV) for increasing α together with ‖G(αV)‖_{1,w} = α‖G(V)‖_{1,w}."""
    alphas = check_couplings(alphas)
    stiffness = stiffness_matrix(grid)
    mass = sp.diags(potential_mass(V, grid))
    quasinorm = weak_l1_quasinorm(g_sequence(V, n_range, quad))

    def count_at(alpha: float) -> int:
        problem = StripProblem(grid, (stiffness - alpha * mass).tocsr(), alpha, V.name)
        return count_negative(problem)

    with ThreadPoolExecutor(max_workers=CONFIG.MAX_WORKERS) as pool:
        counts = list(pool.map(count_at, alphas))
    rows = [ScanRow(alpha, count, count / alpha if alpha > 0 else 0.0, alpha * quasinorm)
            for alpha, count in zip(alphas, counts)]
    logger.info(f"🎯 {V.name} α-scan: " + ", ".join(f"{r.alpha:g}->{r.count}" for r in rows))
    return rows


# per-window mean-zero counts

def cell_mean_zero_counts(V: PotentialSpec, grid: StripGrid, scale: float = 2.0) -> Dict[int, int]:
    """N₋ of the scale·V form on each unit window, Neumann all round, restricted to zero window mean.

    On an aligned grid the windows partition [−L, L] along grid lines, so the
    mean-zero count of the whole strip is at most the sum of these.
    """
    if not grid.aligned:
        logger.warning(f"⚠️ grid {grid.to_dict()} is not aligned with unit windows, skipping cell counts")
        return {}
    per = int(grid.per_unit)
    h = grid.h1
    w_loc = trapezoid_weights(per, h)
    local = (sp.kron(stiffness_1d(per, h), sp.diags(grid.w2))
             + sp.kron(sp.diags(w_loc), stiffness_1d(grid.ny, grid.h2))).toarray()
    measure = np.outer(w_loc, grid.w2)
    basis = scipy.linalg.null_space(measure.ravel()[None, :])
    samples = nodal_samples(V, grid.x1, grid.x2)

    windows = []
    for n in unit_windows(V):
        if n < -grid.L or n + 1 > grid.L:
            logger.warning(f"⚠️ window ({n}, {n + 1}) lies outside [−{grid.L:g}, {grid.L:g}], skipped")
            continue
        windows.append(n)

    def count_window(n: int) -> int:
        start = int(round((n + grid.L) * per))
        values = samples[start:start + per + 1]
        if not np.any(values):
            return 0
        A = local - np.diag(scale * (values * measure).ravel())
        return negative_count_ldl(basis.T @ A @ basis)

    with ThreadPoolExecutor(max_workers=CONFIG.MAX_WORKERS) as pool:
        counts = list(pool.map(count_window, windows))
    return dict(zip(windows, counts))


@dataclass
class CellConstants:
    counts: Dict[int, int]
    c1_ratio: float
    c2_ratio: float
    p: float


def empirical_cell_constants(V: PotentialSpec, grid: StripGrid, p: float = 2.0,
                             quad: Optional[Quadrature] = None) -> CellConstants:
    """Largest observed N₋(q_{2,2V,S_n})/D_n and N₋(q_{2,2V,S_n})/b_n over the windows."""
    counts = cell_mean_zero_counts(V, grid)
    D = d_sequence(V, quad)
    c1 = max((counts[n] / D[n] for n in counts if D.get(n, 0) > 0), default=0.0)
    c2 = 0.0
    for n, count in counts.items():
        if count:
            b = b_n_lp(V, n, p, quad)
            if b > 0:
                c2 = max(c2, count / b)
    logger.info(f"🎯 {V.name}: empirical cell constants c1 ~ {c1:.4g}, c2 ~ {c2:.4g} (p = {p:g})")
    return CellConstants(counts, c1, c2, p)

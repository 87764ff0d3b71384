"""
One-dimensional Schrödinger operator with attractive point interactions,
q[w] = ∫|w′|² − Σ_k α_k |w(x_k)|² on [−L, L] with free ends, and the spacing
construction that places one bound state per point.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy import integrate
from scipy.sparse.linalg import eigsh

from config import CONFIG
from errors import DomainError
from inertia import count_negative_matrix
from strip_solver import stiffness_1d, trapezoid_weights

logger = logging.getLogger(__name__)

EDGE_MARGIN = 10


@dataclass(frozen=True)
class DeltaConfig:
    """Point interactions α_k δ(x − x_k) on [−L, L], discretized with mesh h.

    α_k > 0 is attractive.  Points are snapped to mesh nodes; two points on one
    node are rejected instead of merged.
    """
    points: Sequence[float]
    intensities: Sequence[float]
    L: float
    h: float

    def __post_init__(self):
        points = tuple(float(x) for x in self.points)
        intensities = tuple(float(a) for a in self.intensities)
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'intensities', intensities)
        if len(points) != len(intensities):
            raise DomainError(f"{len(points)} points but {len(intensities)} intensities")
        if not (self.h > 0 and self.L > 0):
            raise DomainError(f"need L > 0 and h > 0, got L = {self.L}, h = {self.h}")
        if any(b <= a for a, b in zip(points, points[1:])):
            raise DomainError("interaction points must be strictly increasing")
        if any(not (a > 0) or not math.isfinite(a) for a in intensities):
            raise DomainError("intensities must be finite and positive (attractive)")
        edge = self.L - EDGE_MARGIN * self.h
        if points and (points[0] <= -edge or points[-1] >= edge):
            raise DomainError(f"points must stay {EDGE_MARGIN}h inside (−{self.L:g}, {self.L:g})")

    @property
    def panels(self) -> int:
        return int(round(2.0 * self.L / self.h))

    @property
    def mesh(self) -> float:
        return 2.0 * self.L / self.panels

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.panels + 1)

    def snapped(self) -> List[int]:
        """Node index of every point; two points on one node is an error."""
        mesh = self.mesh
        indices = []
        for x in self.points:
            i = int(round((x + self.L) / mesh))
            gap = abs(-self.L + i * mesh - x)
            if gap > 0.5 * mesh * (1 + 1e-9):
                logger.warning(f"⚠️ point {x:g} snapped by {gap:.3g} > h/2")
            indices.append(i)
        if len(set(indices)) != len(indices):
            raise DomainError(f"mesh h = {mesh:g} too coarse: two interaction points share a node")
        return indices


def assemble_delta_form(config: DeltaConfig) -> sp.csr_matrix:
    """Free 1-D stiffness minus α_k on the diagonal entry of each snapped point."""
    A = stiffness_1d(config.panels, config.mesh).tolil()
    for i, alpha in zip(config.snapped(), config.intensities):
        A[i, i] -= alpha
    return A.tocsr()


def count_negative_delta(config: DeltaConfig) -> int:
    return count_negative_matrix(assemble_delta_form(config), block=1)


def lowest_eigenvalue(config: DeltaConfig) -> float:
    """Lowest eigenvalue of A v = λ M v (lumped mass) by shift-invert below −(Σα)²/4."""
    A = assemble_delta_form(config).tocsc()
    M = sp.diags(trapezoid_weights(config.panels, config.mesh), format='csc')
    sigma = -(math.fsum(config.intensities) ** 2) / 4.0 - 1.0
    values = eigsh(A, k=1, M=M, sigma=sigma, which='LM', return_eigenvectors=False)
    return float(values[0])


def finite_sigma_count_check(config: DeltaConfig) -> bool:
    """N₋ never exceeds the number of points."""
    count = count_negative_delta(config)
    ok = count <= len(config.points)
    if not ok:
        logger.error(f"❌ {count} bound states for {len(config.points)} points")
    return ok


def _step(u):
    """Smooth transition 1 → 0 on [0, 1], flat to all orders at both ends."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    with np.errstate(divide='ignore', over='ignore'):
        f_left = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
        f_right = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
    return f_left / (f_left + f_right)


def _step_slope(u: float) -> float:
    if u <= 0.0 or u >= 1.0:
        return 0.0
    f0, f1 = math.exp(-1.0 / (1.0 - u)), math.exp(-1.0 / u)
    d0, d1 = f0 / (1.0 - u) ** 2, f1 / u ** 2
    return -(d0 * f1 + f0 * d1) / (f0 + f1) ** 2


@lru_cache(maxsize=None)
def _bump_energy() -> float:
    # ψ′(t) = 2·S′(2|t| − 1) on 1/2 < |t| < 1
    half, _ = integrate.quad(lambda t: (2.0 * _step_slope(2.0 * t - 1.0)) ** 2, 0.5, 1.0,
                             epsabs=1e-13, epsrel=1e-12, limit=200)
    return 2.0 * half


@dataclass(frozen=True)
class BumpFunction:
    """ψ = 1 on |t| ≤ 1/2, 0 on |t| ≥ 1, C∞ in between."""

    def __call__(self, t):
        return _step(2.0 * np.abs(np.asarray(t, dtype=float)) - 1.0)

    @property
    def dirichlet_energy(self) -> float:
        return _bump_energy()


@dataclass
class SpacingConstruction:
    config: DeltaConfig
    spacings: List[float]
    certificates: List[float]
    discrete_certificates: List[float] = field(default_factory=list)

    @property
    def all_negative(self) -> bool:
        return all(q < 0 for q in self.certificates + self.discrete_certificates)


def lemma41_spacing(intensities: Sequence[float], psi: Optional[BumpFunction] = None,
                    margin: float = 2.0, h: Optional[float] = None) -> SpacingConstruction:
    """Points x_k with x_k − x_{k−1} = margin·2E/α_k (x_0 = 0, spacings forced nondecreasing).

    Each bump φ_k(x) = ψ(2(x − x_k)/d_k) then has q[φ_k] = 2E/d_k − α_k < 0 and the
    bumps have pairwise disjoint supports.
    """
    if not margin > 1:
        raise DomainError(f"spacing margin must exceed 1, got {margin}")
    intensities = [float(a) for a in intensities]
    if not intensities:
        raise DomainError("spacing construction needs at least one intensity")
    if any(not a > 0 for a in intensities):
        raise DomainError("intensities must be positive")
    psi = psi or BumpFunction()
    energy = psi.dirichlet_energy

    spacings, points, x = [], [], 0.0
    for alpha in intensities:
        d = margin * 2.0 * energy / alpha
        if spacings and d < spacings[-1]:
            d = spacings[-1]
        spacings.append(d)
        x += d
        points.append(x)
    h = h or min(spacings) / 64.0
    L = points[-1] + spacings[-1] + EDGE_MARGIN * h
    config = DeltaConfig(points, intensities, L, h)

    certificates = [2.0 * energy / d - alpha for d, alpha in zip(spacings, intensities)]
    A = assemble_delta_form(config)
    nodes = config.nodes
    discrete = []
    for xk, d in zip(points, spacings):
        phi = psi(2.0 * (nodes - xk) / d)
        discrete.append(float(phi @ (A @ phi)))
    construction = SpacingConstruction(config, spacings, certificates, discrete)
    if not construction.all_negative:
        logger.warning(f"⚠️ spacing construction with margin {margin:g}: some certificates are not negative")
    return construction


@dataclass
class ScanPoint:
    K: int
    count: int
    certified: bool


def unbounded_count_scan(intensities: Union[Callable[[int], float], Sequence[float]],
                         K_values: Sequence[int], psi: Optional[BumpFunction] = None,
                         margin: float = 2.0, points_per_bump: int = 32) -> List[ScanPoint]:
    """Counts of ever longer truncations of the spacing construction; they grow like K."""
    if callable(intensities):
        alpha = intensities
    else:
        values = list(intensities)
        alpha = (lambda k: values[k - 1])

    def run(K: int) -> ScanPoint:
        series = [alpha(k) for k in range(1, K + 1)]
        energy = (psi or BumpFunction()).dirichlet_energy
        h = margin * 2.0 * energy / max(series) / points_per_bump
        construction = lemma41_spacing(series, psi, margin, h)
        return ScanPoint(K, count_negative_delta(construction.config), construction.all_negative)

    with ThreadPoolExecutor(max_workers=CONFIG.MAX_WORKERS) as pool:
        rows = list(pool.map(run, K_values))
    logger.info("🎯 point-interaction scan: " + ", ".join(f"K={r.K}->{r.count}" for r in rows))
    return rows

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import RegularGridInterpolator

from config import CONFIG
from errors import DomainError

logger = logging.getLogger(__name__)

Profile = Callable[[np.ndarray, float], np.ndarray]

# x₂-profiles on (0, a)
PROFILES: Dict[str, Profile] = {
    'constant': lambda x2, a: np.ones_like(np.asarray(x2, dtype=float)),
    'cos2': lambda x2, a: np.cos(np.pi * np.asarray(x2, dtype=float) / a) ** 2,
    'cos_offset': lambda x2, a: 1.0 + np.cos(np.pi * np.asarray(x2, dtype=float) / a),
}


class PotentialSpec:
    """A potential V(x₁, x₂) on the strip ℝ×(0, a)."""
    name = 'potential'
    signed = False

    def __init__(self, a: float):
        if not (a > 0) or not math.isfinite(a):
            raise DomainError(f"strip width must be positive, got {a}")
        self.a = float(a)

    def __call__(self, x1, x2) -> np.ndarray:
        raise NotImplementedError

    def x1_support(self) -> Optional[Tuple[float, float]]:
        """Closed x₁-interval outside of which V vanishes; None if unbounded."""
        return None

    def feature_length(self) -> float:
        """Smallest x₁ length scale the grid has to resolve."""
        return 1.0

    def separable_factors(self) -> Optional[Tuple[Callable, Callable]]:
        """(g, h) with V = g(x₁)·h(x₂) when V factorizes, else None."""
        return None

    @property
    def x2_independent(self) -> bool:
        return False

    def support_radius(self) -> float:
        support = self.x1_support()
        if support is None:
            return CONFIG.TAIL_CUTOFF
        return max(abs(support[0]), abs(support[1]), 1.0)

    def integration_window(self) -> Tuple[float, float]:
        support = self.x1_support()
        if support is None:
            return -CONFIG.TAIL_CUTOFF, CONFIG.TAIL_CUTOFF
        return support

    def scaled(self, t: float) -> 'PotentialSpec':
        return ScaledPotential(self, t)

    def to_dict(self) -> Dict:
        return {'catalog': self.name, 'a': self.a}

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


class ZeroPotential(PotentialSpec):
    name = 'zero'

    def __call__(self, x1, x2):
        return np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2)).shape)

    def x1_support(self):
        return 0.0, 0.0

    def separable_factors(self):
        return (lambda x1: np.zeros_like(np.asarray(x1, dtype=float)),
                lambda x2: np.zeros_like(np.asarray(x2, dtype=float)))

    @property
    def x2_independent(self):
        return True


class _ProfiledPotential(PotentialSpec):
    """Base for catalog entries of the form g(x₁)·profile(x₂)."""

    def __init__(self, a: float, profile: str = 'constant'):
        super().__init__(a)
        if profile not in PROFILES:
            raise DomainError(f"unknown x2 profile '{profile}', expected one of {sorted(PROFILES)}")
        self.profile = profile

    def longitudinal(self, x1) -> np.ndarray:
        raise NotImplementedError

    def transverse(self, x2) -> np.ndarray:
        return PROFILES[self.profile](x2, self.a)

    def __call__(self, x1, x2):
        return self.longitudinal(np.asarray(x1, dtype=float)) * self.transverse(x2)

    def separable_factors(self):
        return self.longitudinal, self.transverse

    @property
    def x2_independent(self):
        return self.profile == 'constant'

    def to_dict(self):
        return {**super().to_dict(), 'profile': self.profile}


def _check_strength(lam: float) -> float:
    if not math.isfinite(lam) or lam < 0:
        raise DomainError(f"potential strength must be finite and >= 0, got {lam}")
    return float(lam)


class BoxPotential(_ProfiledPotential):
    """λ·1_{[p,q]}(x₁)·profile(x₂)."""
    name = 'box'

    def __init__(self, a: float, lam: float, x1: Sequence[float], profile: str = 'constant'):
        super().__init__(a, profile)
        self.lam = _check_strength(lam)
        self.p, self.q = float(x1[0]), float(x1[1])
        if not self.q > self.p:
            raise DomainError(f"box needs p < q, got [{self.p}, {self.q}]")

    def longitudinal(self, x1):
        x1 = np.asarray(x1, dtype=float)
        return np.where((x1 >= self.p) & (x1 <= self.q), self.lam, 0.0)

    def x1_support(self):
        return self.p, self.q

    def feature_length(self):
        return self.q - self.p

    def to_dict(self):
        return {**super().to_dict(), 'lambda': self.lam, 'x1': [self.p, self.q]}


class GaussianPotential(_ProfiledPotential):
    """λ·exp(−((x₁−m)/σ)²)·profile(x₂), cut where the factor drops below 1e-12."""
    name = 'gaussian'
    CUT = 5.3

    def __init__(self, a: float, lam: float, center: float = 0.0, width: float = 1.0,
                 profile: str = 'constant'):
        super().__init__(a, profile)
        self.lam = _check_strength(lam)
        if not width > 0:
            raise DomainError(f"gaussian width must be positive, got {width}")
        self.center, self.width = float(center), float(width)

    def longitudinal(self, x1):
        x1 = np.asarray(x1, dtype=float)
        z = (x1 - self.center) / self.width
        return np.where(np.abs(z) <= self.CUT, self.lam * np.exp(-z * z), 0.0)

    def x1_support(self):
        return self.center - self.CUT * self.width, self.center + self.CUT * self.width

    def feature_length(self):
        return self.width

    def to_dict(self):
        return {**super().to_dict(), 'lambda': self.lam, 'center': self.center, 'width': self.width}


class MultiBumpPotential(_ProfiledPotential):
    """Sum of translated boxes sharing one x₂-profile."""
    name = 'multibump'

    def __init__(self, a: float, boxes: Sequence[Dict], profile: str = 'constant'):
        super().__init__(a, profile)
        if not boxes:
            raise DomainError("multibump needs at least one box")
        self.boxes = [BoxPotential(a, _box_strength(b), b['x1']) for b in boxes]

    def longitudinal(self, x1):
        return sum(box.longitudinal(x1) for box in self.boxes)

    def x1_support(self):
        return min(b.p for b in self.boxes), max(b.q for b in self.boxes)

    def feature_length(self):
        return min(b.feature_length() for b in self.boxes)

    def to_dict(self):
        return {**super().to_dict(), 'boxes': [{'lambda': b.lam, 'x1': [b.p, b.q]} for b in self.boxes]}


def _box_strength(spec: Dict) -> float:
    for key in ('lambda', 'λ'):
        if key in spec:
            return spec[key]
    raise DomainError(f"box entry {spec} has no 'lambda'")


class PowerTailPotential(_ProfiledPotential):
    """λ(1+|x₁|)^(−β)·profile(x₂); unbounded support, integrated up to TAIL_CUTOFF."""
    name = 'power_tail'

    def __init__(self, a: float, lam: float, beta: float, profile: str = 'constant'):
        super().__init__(a, profile)
        self.lam = _check_strength(lam)
        if not beta > 0:
            raise DomainError(f"power tail needs beta > 0, got {beta}")
        self.beta = float(beta)

    def longitudinal(self, x1):
        return self.lam * (1.0 + np.abs(np.asarray(x1, dtype=float))) ** (-self.beta)

    def to_dict(self):
        return {**super().to_dict(), 'lambda': self.lam, 'beta': self.beta}


class ScaledPotential(PotentialSpec):
    """t·V for a base potential V."""

    def __init__(self, base: PotentialSpec, t: float):
        super().__init__(base.a)
        if not math.isfinite(t) or t < 0:
            raise DomainError(f"potential scale must be finite and >= 0, got {t}")
        self.base, self.t = base, float(t)
        self.name = base.name
        self.signed = base.signed

    def __call__(self, x1, x2):
        return self.t * self.base(x1, x2)

    def x1_support(self):
        return self.base.x1_support()

    def feature_length(self):
        return self.base.feature_length()

    def separable_factors(self):
        factors = self.base.separable_factors()
        if factors is None:
            return None
        g, h = factors
        return (lambda x1: self.t * g(x1)), h

    @property
    def x2_independent(self):
        return self.base.x2_independent

    def to_dict(self):
        return {**self.base.to_dict(), 'scale': self.t}


class FunctionPotential(PotentialSpec):
    """A potential given by an arbitrary vectorized callable."""
    name = 'function'

    def __init__(self, a: float, func: Callable, support: Optional[Tuple[float, float]] = None,
                 feature: float = 1.0, x2_independent: bool = False, signed: bool = False,
                 factors: Optional[Tuple[Callable, Callable]] = None):
        super().__init__(a)
        self.func = func
        self.support = support
        self.feature = feature
        self._x2_independent = x2_independent
        self.signed = signed
        self.factors = factors

    def __call__(self, x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        return np.asarray(self.func(x1, x2), dtype=float)

    def x1_support(self):
        return self.support

    def feature_length(self):
        return self.feature

    def separable_factors(self):
        return self.factors

    @property
    def x2_independent(self):
        return self._x2_independent


class GridPotential(PotentialSpec):
    """Sampled potential from a CSV lattice "x1,x2,V", bilinear between nodes, 0 outside."""
    name = 'grid'

    def __init__(self, a: float, frame: pd.DataFrame, source: str = '<memory>'):
        super().__init__(a)
        missing = {'x1', 'x2', 'V'} - set(frame.columns)
        if missing:
            raise DomainError(f"grid potential {source} lacks columns {sorted(missing)}")
        frame = frame.sort_values(['x1', 'x2'])
        x1 = np.unique(frame['x1'].to_numpy(dtype=float))
        x2 = np.unique(frame['x2'].to_numpy(dtype=float))
        if len(frame) != x1.size * x2.size or x1.size < 2 or x2.size < 2:
            raise DomainError(f"grid potential {source} is not a rectangular lattice")
        values = frame['V'].to_numpy(dtype=float).reshape(x1.size, x2.size)
        if not np.all(np.isfinite(values)):
            raise DomainError(f"grid potential {source} has non-finite samples")
        if np.any(values < 0):
            raise DomainError(f"grid potential {source} has negative samples")
        if x2[0] > 0 or x2[-1] < a:
            logger.warning(f"⚠️ grid potential {source} covers x2 in [{x2[0]}, {x2[-1]}], strip is (0, {a})")
        self.source = source
        self.nodes1, self.nodes2, self.values = x1, x2, values
        self._interp = RegularGridInterpolator((x1, x2), values, method='linear',
                                               bounds_error=False, fill_value=0.0)
        logger.info(f"✅ loaded grid potential {source}: {x1.size}x{x2.size} nodes")

    @classmethod
    def from_csv(cls, path: str, a: float) -> 'GridPotential':
        return cls(a, pd.read_csv(path), source=str(path))

    def __call__(self, x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        points = np.stack([x1.ravel(), x2.ravel()], axis=-1)
        return self._interp(points).reshape(x1.shape)

    def x1_support(self):
        return float(self.nodes1[0]), float(self.nodes1[-1])

    def feature_length(self):
        return float(np.min(np.diff(self.nodes1))) * 4

    def to_dict(self):
        return {'grid_file': self.source, 'a': self.a}


CATALOG = {
    'zero': ZeroPotential,
    'box': BoxPotential,
    'gaussian': GaussianPotential,
    'multibump': MultiBumpPotential,
    'power_tail': PowerTailPotential,
}


def potential_from_dict(spec: Dict, a: float) -> PotentialSpec:
    """Build a catalog potential from its case-file entry."""
    spec = dict(spec)
    name = spec.pop('catalog', None)
    if name not in CATALOG:
        raise DomainError(f"unknown potential catalog '{name}', expected one of {sorted(CATALOG)}")
    if 'λ' in spec:
        spec['lam'] = spec.pop('λ')
    if 'lambda' in spec:
        spec['lam'] = spec.pop('lambda')
    spec.pop('a', None)
    scale = spec.pop('scale', None)
    try:
        potential = CATALOG[name](a, **spec)
    except TypeError as e:
        raise DomainError(f"bad parameters for '{name}': {e}") from e
    return potential.scaled(scale) if scale is not None else potential


def nodal_samples(V: PotentialSpec, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """V on the tensor grid x1 × x2 (shape len(x1) × len(x2))."""
    samples = np.asarray(V(x1[:, None], x2[None, :]), dtype=float)
    if not np.all(np.isfinite(samples)):
        raise DomainError(f"potential {V.name} is not finite at every grid node")
    if not V.signed and np.any(samples < 0):
        raise DomainError(f"potential {V.name} is negative at a grid node")
    return samples


def random_catalog(a: float, rng: np.random.Generator, count: int) -> List[PotentialSpec]:
    """A reproducible mix of catalog potentials for the property batteries."""
    out: List[PotentialSpec] = []
    profiles = sorted(PROFILES)
    for i in range(count):
        kind = i % 4
        profile = profiles[int(rng.integers(len(profiles)))]
        if kind == 0:
            p = float(rng.uniform(-3, 2))
            out.append(BoxPotential(a, float(rng.uniform(0.5, 20)), [p, p + float(rng.uniform(0.25, 2))], profile))
        elif kind == 1:
            out.append(GaussianPotential(a, float(rng.uniform(0.5, 20)), float(rng.uniform(-2, 2)),
                                         float(rng.uniform(0.3, 1.5)), profile))
        elif kind == 2:
            starts = np.sort(rng.uniform(-4, 4, size=3))
            boxes = [{'lambda': float(rng.uniform(1, 10)), 'x1': [float(s), float(s) + 0.5]} for s in starts]
            out.append(MultiBumpPotential(a, boxes, profile))
        else:
            out.append(PowerTailPotential(a, float(rng.uniform(0.5, 5)), float(rng.uniform(2.2, 4)), profile))
    return out

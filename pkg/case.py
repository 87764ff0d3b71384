"""Case files: JSON documents naming a strip, one potential source, grids and constants."""
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

from config import CONFIG
from curves import CurveSpec
from dyadic import BoundConstants
from errors import CaseError, DomainError
from orlicz import Quadrature
from potentials import GridPotential, PotentialSpec, potential_from_dict
from strip_solver import StripGrid

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = {'schema_version', 'name', 'a', 'L', 'grid', 'potential', 'grid_file', 'curve',
                  'constants', 'n_range', 'alphas', 'p', 'quadrature', 'output', 'check_convergence'}
SOURCE_KEYS = ('catalog', 'grid_file', 'curve')
CONSTANT_KEYS = {'c', 'C', 'c1', 'c2', 'curve_sqrt_const', 'curve_cell_const', 'slots'}
QUADRATURE_KEYS = {'inner_panels', 'outer_panels_per_unit', 'max_outer_panels'}
FORMATS = ('json', 'csv')


@dataclass
class CaseConfig:
    """A validated case: exactly one of `potential` / `curve` is set.

    Grid, quadrature and constants are fully resolved, so the runner never
    consults CONFIG for them again.  `output_dir` is already joined with the
    directory of the case file.
    """
    name: str
    a: float
    grid: StripGrid
    potential: Optional[PotentialSpec] = None
    curve: Optional[CurveSpec] = None
    constants: BoundConstants = field(default_factory=BoundConstants)
    n_range: Tuple[int, int] = field(default_factory=lambda: CONFIG.N_RANGE)
    alphas: List[float] = field(default_factory=list)
    p: float = 2.0
    quadrature: Quadrature = field(default_factory=Quadrature)
    output_dir: str = '.'
    output_format: str = 'json'
    check_convergence: bool = True
    schema_version: int = field(default_factory=lambda: CONFIG.SCHEMA_VERSION)

    def __post_init__(self):
        if (self.potential is None) == (self.curve is None):
            raise CaseError(f"{self.name}: exactly one of potential / curve must be set")

    @property
    def kind(self) -> str:
        return 'curve' if self.curve is not None else 'volume'

    def source_dict(self) -> Dict[str, Any]:
        return self.curve.to_dict() if self.curve is not None else self.potential.to_dict()


def _positive(raw: Dict, key: str, default: Optional[float] = None) -> Optional[float]:
    value = raw.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CaseError(f"'{key}' must be a number, got {value!r}")
    if not (value > 0) or not math.isfinite(value):
        raise CaseError(f"'{key}' must be positive, got {value!r}")
    return float(value)


def _reject_unknown(section: str, raw: Dict, allowed) -> None:
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise CaseError(f"unknown key '{unknown[0]}' in {section}")


def _sources(raw: Dict) -> List[Tuple[str, Any]]:
    found = []
    potential = raw.get('potential')
    if potential is not None:
        if not isinstance(potential, dict):
            raise CaseError("'potential' must be an object")
        found += [(key, potential) for key in SOURCE_KEYS if key in potential]
    found += [(key, raw[key]) for key in ('grid_file', 'curve') if key in raw]
    return found


def _build_source(kind: str, spec: Any, a: float, base_dir: str) -> Union[PotentialSpec, CurveSpec]:
    if kind == 'catalog':
        return potential_from_dict(spec, a)
    if kind == 'grid_file':
        path = spec['grid_file'] if isinstance(spec, dict) else spec
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        if not os.path.exists(path):
            raise CaseError(f"'grid_file' not found: {path}")
        return GridPotential.from_csv(path, a)
    curve = spec['curve'] if isinstance(spec, dict) and 'curve' in spec else spec
    if not isinstance(curve, dict):
        raise CaseError("'curve' must be an object with 'vertices' and 'density'")
    _reject_unknown('curve', curve, {'vertices', 'density'})
    return CurveSpec.from_dict(curve, a)


def _constants(raw: Dict) -> BoundConstants:
    spec = raw.get('constants', {})
    if not isinstance(spec, dict):
        raise CaseError("'constants' must be an object")
    _reject_unknown('constants', spec, CONSTANT_KEYS)
    values = {key: _positive(spec, key) for key in spec if key != 'slots'}
    slots = spec.get('slots', {})
    if not isinstance(slots, dict):
        raise CaseError("'constants.slots' must be an object")
    values['slots'] = {key: _positive(slots, key) for key in slots}
    try:
        return BoundConstants(**values)
    except DomainError as e:
        raise CaseError(f"'constants': {e}") from e


def _n_range(raw: Dict) -> Tuple[int, int]:
    value = raw.get('n_range', list(CONFIG.N_RANGE))
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in value) or value[0] > value[1]):
        raise CaseError(f"'n_range' must be [lo, hi] integers with lo <= hi, got {value!r}")
    return int(value[0]), int(value[1])


def _alphas(raw: Dict) -> List[float]:
    value = raw.get('alphas', [])
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise CaseError(f"'alphas' must be a list of numbers, got {value!r}")
    return [float(v) for v in value]


def _quadrature(raw: Dict) -> Quadrature:
    spec = raw.get('quadrature', {})
    if not isinstance(spec, dict):
        raise CaseError("'quadrature' must be an object")
    _reject_unknown('quadrature', spec, QUADRATURE_KEYS)
    for key, value in spec.items():
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise CaseError(f"'quadrature.{key}' must be a positive integer, got {value!r}")
    return Quadrature(**spec)


def _grid(raw: Dict, source, a: float) -> StripGrid:
    spec = raw.get('grid', {})
    if not isinstance(spec, dict):
        raise CaseError("'grid' must be an object")
    _reject_unknown('grid', spec, {'nx', 'ny'})
    for key, value in spec.items():
        if isinstance(value, bool) or not isinstance(value, int):
            raise CaseError(f"'grid.{key}' must be an integer, got {value!r}")
    L = _positive(raw, 'L')
    try:
        default = StripGrid.for_potential(source, ny=spec.get('ny'), L=L)
        return StripGrid(a, default.L, spec.get('nx', default.nx), spec.get('ny', default.ny))
    except DomainError as e:
        raise CaseError(f"'grid': {e}") from e


def case_from_dict(raw: Dict, base_dir: str = '.', name: str = 'case') -> CaseConfig:
    """Validate a parsed case document and apply the defaults."""
    if not isinstance(raw, dict):
        raise CaseError("case document must be a JSON object")
    _reject_unknown('case', raw, TOP_LEVEL_KEYS)
    version = raw.get('schema_version', CONFIG.SCHEMA_VERSION)
    if version != CONFIG.SCHEMA_VERSION:
        raise CaseError(f"'schema_version' {version!r} is not supported (expected {CONFIG.SCHEMA_VERSION})")
    name = str(raw.get('name', name))
    a = _positive(raw, 'a')
    if a is None:
        raise CaseError("missing required key 'a'")

    sources = _sources(raw)
    if len(sources) != 1:
        keys = [key for key, _ in sources] or ['none']
        raise CaseError(f"exactly one potential source required, got {', '.join(keys)}")
    kind, spec = sources[0]
    try:
        source = _build_source(kind, spec, a, base_dir)
    except (KeyError, TypeError) as e:
        raise CaseError(f"bad '{kind}' entry: {e}") from e

    output = raw.get('output', {})
    if not isinstance(output, dict):
        raise CaseError("'output' must be an object")
    _reject_unknown('output', output, {'dir', 'format'})
    fmt = output.get('format', 'json')
    if fmt not in FORMATS:
        raise CaseError(f"'output.format' must be one of {FORMATS}, got {fmt!r}")

    config = CaseConfig(
        name=name, a=a, grid=_grid(raw, source, a),
        potential=source if kind != 'curve' else None,
        curve=source if kind == 'curve' else None,
        constants=_constants(raw), n_range=_n_range(raw), alphas=_alphas(raw),
        p=_positive(raw, 'p', 2.0), quadrature=_quadrature(raw),
        output_dir=os.path.join(base_dir, output.get('dir', '.')), output_format=fmt,
        check_convergence=bool(raw.get('check_convergence', True)), schema_version=version)
    if not config.p > 1:
        raise CaseError(f"'p' must exceed 1, got {config.p}")
    logger.info(f"✅ loaded case {name}: {config.kind}, grid {config.grid.nx}x{config.grid.ny}, L = {config.grid.L:g}")
    return config


def load_case(path: str) -> CaseConfig:
    if not os.path.exists(path):
        raise CaseError(f"case file not found: {path}")
    with open(path, encoding='utf-8') as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise CaseError(f"{path}: not valid JSON: {e}") from e
    stem = os.path.splitext(os.path.basename(path))[0]
    return case_from_dict(raw, os.path.dirname(os.path.abspath(path)), stem)

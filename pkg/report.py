"""
Case orchestration: bound evaluation next to numeric counting, the inequality
rows that compare them, and JSON / CSV output.
"""
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional

import pandas as pd

from case import CaseConfig
from config import CONFIG
from curves import (assemble_curve_form, bound_gest3, curve_measures, measure_bound,
                    reduced_split_counts)
from dyadic import (b_n_lp, bound_est1_1d, bound_gest2, bound_variants, d_sequence,
                    g_sequence, reduced_potential, threshold_inequality, weak_l1_quasinorm)
from errors import CaseError, SpectralError
from strip_solver import (ScanRow, assemble_form, certify_lower_bound, check_couplings, count_negative,
                          empirical_cell_constants, grid_converged, semiclassical_scan,
                          split_counts, truncation_counts)

logger = logging.getLogger(__name__)

CSV_COLUMNS = ['n', 'G_n', 'D_n', 'b_n', 'F_n', 'C_n', 'contributes_sqrt', 'contributes_cell']
UNCONDITIONAL = 'unconditional'
EMPIRICAL = 'empirical'
SEMICLASSICAL_SPREAD = 4.0


@dataclass
class InequalityRow:
    name: str
    lhs: float
    rhs: float
    holds: bool
    kind: str
    note: str = ''


@dataclass
class TableRow:
    n: int
    G_n: float = 0.0
    D_n: float = 0.0
    b_n: float = 0.0
    F_n: float = 0.0
    C_n: float = 0.0
    contributes_sqrt: bool = False
    contributes_cell: bool = False


@dataclass
class CertifierSummary:
    threshold: float
    indices: List[int]
    q_values: List[float]
    packing: List[int]
    lower_bound: int
    ceil_third: int
    truncated: bool


@dataclass
class BoundReport:
    """📊 Everything one case produced.

    `rows` compare a numeric count with an estimate.  Rows of kind
    `unconditional` must hold for every input and decide the exit status;
    `empirical` rows carry estimates whose constants are only known to exist
    and are reported, never enforced.  `table` is the per-n breakdown written
    to CSV; the JSON form is `to_dict()` with sorted keys.
    """
    case: str
    kind: str
    a: float
    grid: Dict[str, float]
    source: Dict[str, Any]
    constants: Dict[str, Any]
    n_range: List[int]
    table: List[TableRow] = field(default_factory=list)
    quasinorm: float = 0.0
    estimates: Dict[str, float] = field(default_factory=dict)
    counts: Dict[str, int] = field(default_factory=dict)
    certifier: Optional[CertifierSummary] = None
    scan: List[ScanRow] = field(default_factory=list)
    rows: List[InequalityRow] = field(default_factory=list)
    empirical_constants: Dict[str, float] = field(default_factory=dict)
    grid_converged: Optional[bool] = None
    truncated: bool = False
    schema_version: int = field(default_factory=lambda: CONFIG.SCHEMA_VERSION)

    @property
    def unconditional_pass(self) -> bool:
        return all(row.holds for row in self.rows if row.kind == UNCONDITIONAL)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'BoundReport':
        data = dict(data)
        data['table'] = [TableRow(**row) for row in data.get('table', [])]
        data['scan'] = [ScanRow(**row) for row in data.get('scan', [])]
        data['rows'] = [InequalityRow(**row) for row in data.get('rows', [])]
        if data.get('certifier') is not None:
            data['certifier'] = CertifierSummary(**data['certifier'])
        return cls(**data)

    def summary(self) -> str:
        failed = [row.name for row in self.rows if not row.holds]
        lines = [
            f"📊 Case {self.case} ({self.kind}, a = {self.a:g}, grid {self.grid['nx']}x{self.grid['ny']})",
            "",
            "🎯 Counts:",
            *[f"• {name}: {value}" for name, value in sorted(self.counts.items())],
            "",
            "📐 Estimates:",
            *[f"• {name}: {value:.6g}" for name, value in sorted(self.estimates.items())],
            "",
            f"✅ {sum(row.holds for row in self.rows)}/{len(self.rows)} inequality rows hold",
        ]
        if failed:
            lines.append(f"❌ failing rows: {', '.join(failed)}")
        if self.truncated:
            lines.append("⚠️ some sums were truncated at the edge of the index range")
        return "\n".join(lines)


def _row(name: str, lhs: float, rhs: float, kind: str = UNCONDITIONAL, note: str = '',
         slack: float = 1e-9) -> InequalityRow:
    holds = lhs <= rhs + slack * max(1.0, abs(rhs))
    if not holds and kind == UNCONDITIONAL:
        logger.error(f"❌ {name}: {lhs:.6g} > {rhs:.6g}")
    return InequalityRow(name, float(lhs), float(rhs), bool(holds), kind, note)


def _stage(case: str, stage: str, fn: Callable, *args, **kwargs):
    """Run one pipeline stage, attaching the case and stage to any failure."""
    try:
        return fn(*args, **kwargs)
    except SpectralError as e:
        logger.error(f"❌ {case}: {stage}: {e}")
        raise type(e)(f"{case}: {stage}: {e}") from e


def _table(columns: Dict[str, Dict[int, float]], sqrt_terms, cell_terms) -> List[TableRow]:
    indices = sorted({n for values in columns.values() for n, v in values.items() if v != 0})
    return [TableRow(n, **{name: float(values.get(n, 0.0)) for name, values in columns.items()},
                     contributes_sqrt=n in sqrt_terms, contributes_cell=n in cell_terms)
            for n in indices]


def _scan_rows(report: BoundReport, scan: List[ScanRow]):
    report.scan = scan
    counts = [row.count for row in scan]
    monotone = all(b >= a for a, b in zip(counts, counts[1:]))
    report.rows.append(InequalityRow('scan_monotone', float(not monotone), 0.0, monotone, UNCONDITIONAL,
                                     'counts nondecreasing in the coupling'))
    ratios = [row.count_per_alpha for row in scan if row.alpha > 0 and row.count > 0]
    if len(ratios) > 1:
        spread = max(ratios) / min(ratios)
        report.empirical_constants['semiclassical_ratio_max'] = max(ratios)
        report.rows.append(_row('semiclassical_ratio', spread, SEMICLASSICAL_SPREAD, EMPIRICAL,
                                'max/min of N(αV)/α'))


def scan_case(config: CaseConfig, alphas: Optional[List[float]] = None,
              quasinorm: Optional[float] = None) -> List[ScanRow]:
    """Negative counts of the case's form at each coupling in `alphas` (default: the case's list)."""
    alphas = config.alphas if alphas is None else alphas
    if config.kind == 'volume':
        return semiclassical_scan(config.potential, config.grid, alphas, config.quadrature, config.n_range)
    alphas = check_couplings(alphas)
    if quasinorm is None:
        quasinorm = weak_l1_quasinorm(curve_measures(config.curve, config.n_range, config.quadrature).F)
    rows = []
    for alpha in alphas:
        count = count_negative(assemble_curve_form(config.curve, config.grid, alpha))
        rows.append(ScanRow(alpha, count, count / alpha if alpha > 0 else 0.0, alpha * quasinorm))
    logger.info(f"🎯 {config.name} α-scan: " + ", ".join(f"{r.alpha:g}->{r.count}" for r in rows))
    return rows


def _run_volume(config: CaseConfig) -> BoundReport:
    V, grid, quad, consts = config.potential, config.grid, config.quadrature, config.constants
    name, n_range = config.name, config.n_range
    report = BoundReport(name, 'volume', config.a, grid.to_dict(), config.source_dict(),
                         consts.to_dict(), list(n_range))

    G = _stage(name, 'G_n', g_sequence, V, n_range, quad)
    D = _stage(name, 'D_n', d_sequence, V, quad)
    D_lux = _stage(name, 'D_n (Luxemburg)', d_sequence, V, quad, 'luxemburg')
    b = {n: _stage(name, 'b_n', b_n_lp, V, n, config.p, quad) for n in D}
    gest2 = _stage(name, 'strip bound', bound_gest2, V, consts, n_range, quad, G, D)
    reduced, _ = reduced_potential(V, quad)
    est1 = _stage(name, '1D bound', bound_est1_1d, reduced.scaled(2.0), n_range, quad=quad)
    variants = _stage(name, 'bound variants', bound_variants, V, config.p, n_range, consts, quad, G, D)
    report.quasinorm = variants.quasinorm
    report.table = _table({'G_n': G, 'D_n': D, 'b_n': b}, gest2.sqrt_terms, gest2.cell_terms)
    report.truncated = bool(gest2.truncated or est1.truncated)
    report.estimates = {
        'strip_bound': gest2.value, 'explicit_1d_bound': est1.value,
        'rhs_Est2': variants.rhs_Est2, 'rhs_Est3': variants.rhs_Est3,
        'rhs_Est4': variants.rhs_Est4, 'rhs_Est5': variants.rhs_Est5,
        'l1_lb': variants.l1_lb, 'l1_lb_star': variants.l1_lb_star,
        'lp': variants.lp, 'lp_star': variants.lp_star,
    }

    full = _stage(name, 'full count', lambda: count_negative(assemble_form(V, grid, 1.0)))
    n1, n2 = _stage(name, 'subspace counts', lambda: split_counts(assemble_form(V, grid, 2.0)))
    cells = _stage(name, 'cell constants', empirical_cell_constants, V, grid, config.p, quad)
    certifier = _stage(name, 'certifier', certify_lower_bound, V, quad, n_range, G)
    report.counts = {'full': full, 'N1': n1, 'N2': n2}
    report.certifier = CertifierSummary(
        certifier.threshold, certifier.indices, [certifier.q_values[n] for n in certifier.indices],
        certifier.packing, certifier.lower_bound, certifier.ceil_third, certifier.truncated)

    rows = report.rows
    rows.append(_row('decomposition', full, n1 + n2, note='N(V) <= N1 + N2'))
    rows.append(_row('certifier', certifier.lower_bound, full, note='disjoint negative trial functions'))
    rows.append(_row('explicit_1d_bound', n1, est1.value, note='N(-d2 - 2V~) <= 1 + 7.61 sum sqrt G_n'))
    lhs, rhs = threshold_inequality(G, consts.c)
    rows.append(_row('threshold_inequality', lhs, rhs, note=f'c = {consts.c:g}'))
    rows.append(InequalityRow('domination_chain', float(variants.thresholded_d), float(variants.l1_lb),
                              bool(variants.chain_holds),
                              UNCONDITIONAL, 'sum_{D_n>c} D_n <= sum D_n'))
    rows.append(InequalityRow('lp_gap', float(variants.lp_gap), float(variants.lp_gap_bound),
                              bool(variants.lp_gap_holds),
                              UNCONDITIONAL, f'p = {config.p:g}'))
    worst = max((D[n] / (2.0 * D_lux[n]) for n in D if D_lux.get(n, 0) > 0), default=0.0)
    lowest = min((D[n] / D_lux[n] for n in D if D_lux.get(n, 0) > 0), default=1.0)
    rows.append(_row('luxemburg_equivalence_upper', worst, 1.0, note='max D_n / (2 D_n lux)'))
    rows.append(_row('luxemburg_equivalence_lower', 1.0, lowest, note='min D_n / D_n lux'))
    if cells.counts:
        report.counts['cells_sum'] = sum(cells.counts.values())
        rows.append(_row('cell_decomposition', n2, report.counts['cells_sum'], note='N2 <= sum_n N(S_n)'))
    widened = _stage(name, 'truncation', truncation_counts, V, grid, (2,))
    if widened is not None:
        report.counts['widened'] = widened[0]
        rows.append(_row('truncation_monotone', widened[0], full, note='N on [-2L, 2L] <= N on [-L, L]'))
    rows.append(_row('strip_bound', full, gest2.value, EMPIRICAL, f'C = {consts.C:g}, c = {consts.c:g}'))
    if cells.counts:
        report.empirical_constants.update({'c1_ratio': cells.c1_ratio, 'c2_ratio': cells.c2_ratio})
        rows.append(_row('cell_constant_orlicz', cells.c1_ratio, consts.C, EMPIRICAL, 'max N(S_n)/D_n vs C'))

    if config.alphas:
        _scan_rows(report, _stage(name, 'α-scan', scan_case, config))
    if config.check_convergence:
        converged = _stage(name, 'grid convergence', grid_converged, V, grid)
        report.grid_converged = None if converged is None else bool(converged)
    return report


def _run_curve(config: CaseConfig) -> BoundReport:
    curve, grid, quad, consts = config.curve, config.grid, config.quadrature, config.constants
    name, n_range = config.name, config.n_range
    report = BoundReport(name, 'curve', config.a, grid.to_dict(), config.source_dict(),
                         consts.to_dict(), list(n_range))

    measures = _stage(name, 'curve measures', curve_measures, curve, n_range, quad)
    gest3 = _stage(name, 'curve bound', bound_gest3, curve, consts, n_range, quad, measures)
    split = _stage(name, 'reduced split', reduced_split_counts, curve, grid, n_range)
    configured = measure_bound(split.F_effective)
    printed = measure_bound(split.F_effective, CONFIG.PRINTED_MEASURE_PREFACTOR)
    report.quasinorm = weak_l1_quasinorm(measures.F)
    report.table = _table({'F_n': measures.F, 'C_n': measures.C}, gest3.sqrt_terms, gest3.cell_terms)
    report.truncated = bool(gest3.truncated)
    report.estimates = {'curve_bound': gest3.value, 'measure_bound': configured.value,
                        'measure_bound_printed': printed.value}

    full = _stage(name, 'full count', lambda: count_negative(assemble_curve_form(curve, grid, 1.0)))
    n1, n2 = _stage(name, 'subspace counts', lambda: split_counts(assemble_curve_form(curve, grid, 2.0)))
    report.counts = {'full': full, 'N1': n1, 'N2': n2, 'reduced': split.reduced,
                     'diffuse': split.diffuse, 'delta': split.delta, 'N': split.N}

    rows = report.rows
    rows.append(_row('curve_split', full, n1 + n2, note='N(V) <= N1 + N2'))
    rows.append(_row('reduced_split', split.reduced, split.diffuse + split.delta,
                     note='reduced <= diffuse + point interactions'))
    rows.append(_row('finite_sigma_delta_bound', split.delta, split.N, note='point-interaction count <= N'))
    rows.append(_row('measure_bound', split.diffuse, configured.value,
                     note=f'constant {CONFIG.DEFAULT_PREFACTOR:g}'))
    rows.append(_row('measure_bound_printed', split.diffuse, printed.value, EMPIRICAL,
                     note=f'constant {CONFIG.PRINTED_MEASURE_PREFACTOR:g}'))
    rows.append(_row('curve_bound', full, gest3.value, EMPIRICAL,
                     note=f'{consts.curve_sqrt_const:g} / {consts.curve_cell_const:g}'))

    if config.alphas:
        _scan_rows(report, _stage(name, 'α-scan', scan_case, config, quasinorm=report.quasinorm))
    if config.check_convergence:
        if grid.can_coarsen:
            coarse = _stage(name, 'grid convergence',
                            lambda: count_negative(assemble_curve_form(curve, grid.coarsened(), 1.0)))
            report.grid_converged = coarse == full
        else:
            logger.warning(f"⚠️ {name}: grid {grid.nx}x{grid.ny} too coarse to halve, convergence not checked")
    return report


def run_case(config: CaseConfig) -> BoundReport:
    logger.info(f"🔄 running case {config.name} ({config.kind})")
    report = _run_volume(config) if config.kind == 'volume' else _run_curve(config)
    if report.unconditional_pass:
        logger.info(f"✅ {config.name}: every unconditional row holds")
    else:
        logger.error(f"❌ {config.name}: unconditional rows failed")
    return report


def report_frame(report: BoundReport) -> pd.DataFrame:
    """Per-n table with a trailing summary row (column sums, contributing counts)."""
    frame = pd.DataFrame([asdict(row) for row in report.table], columns=CSV_COLUMNS)
    summary = {column: float(frame[column].sum()) if len(frame) else 0.0 for column in CSV_COLUMNS[1:6]}
    summary.update({'n': 'summary',
                    'contributes_sqrt': int(frame['contributes_sqrt'].sum()) if len(frame) else 0,
                    'contributes_cell': int(frame['contributes_cell'].sum()) if len(frame) else 0})
    frame = frame.astype({'n': object})
    return pd.concat([frame, pd.DataFrame([summary], columns=CSV_COLUMNS)], ignore_index=True)


def emit_report(report: BoundReport, fmt: str = 'json', out_dir: str = '.') -> str:
    """Write the report as <case>.json or <case>.csv and return the path."""
    if fmt not in ('json', 'csv'):
        raise CaseError(f"unknown report format '{fmt}'")
    path = os.path.join(out_dir, f"{report.case}.{fmt}")
    try:
        os.makedirs(out_dir, exist_ok=True)
        if fmt == 'json':
            with open(path, 'w', encoding='utf-8') as fh:
                json.dump(report.to_dict(), fh, sort_keys=True, indent=2, ensure_ascii=False)
                fh.write('\n')
        else:
            report_frame(report).to_csv(path, index=False)
    except OSError as e:
        logger.error(f"❌ cannot write report to {path}: {e}")
        raise CaseError(f"cannot write report to {path}: {e}") from e
    logger.info(f"✅ report written to {path}")
    return path


def load_report(path: str) -> BoundReport:
    with open(path, encoding='utf-8') as fh:
        return BoundReport.from_dict(json.load(fh))


def load_table(path: str) -> List[TableRow]:
    """Per-n rows of a CSV report; the summary row is dropped."""
    frame = pd.read_csv(path, dtype={'n': str, 'contributes_sqrt': str, 'contributes_cell': str},
                        float_precision='round_trip')
    rows = []
    for record in frame[frame['n'] != 'summary'].to_dict('records'):
        rows.append(TableRow(int(record['n']), *(float(record[column]) for column in CSV_COLUMNS[1:6]),
                             record['contributes_sqrt'] == 'True', record['contributes_cell'] == 'True'))
    return rows

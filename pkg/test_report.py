import json

import pandas as pd
import pytest

from case import case_from_dict, load_case
from errors import CaseError, DomainError
from report import (CSV_COLUMNS, EMPIRICAL, UNCONDITIONAL, emit_report, load_report, load_table,
                    report_frame, run_case, scan_case)

QUADRATURE = {'inner_panels': 16, 'outer_panels_per_unit': 32, 'max_outer_panels': 1024}


def small_case(source, **extra):
    raw = {'a': 1.0, 'L': 3, 'grid': {'nx': 48, 'ny': 4}, 'n_range': [-4, 4], 'quadrature': QUADRATURE}
    raw.update(source)
    raw.update(extra)
    return case_from_dict(raw, name=extra.get('name', 'small'))


def zero_case():
    return small_case({'potential': {'catalog': 'zero'}}, name='empty')


def box_case(**extra):
    return small_case({'potential': {'catalog': 'box', 'lambda': 10.0, 'x1': [0.0, 1.0], 'profile': 'cos2'}},
                      alphas=[1.0, 2.0, 4.0], **extra)


def step_curve_case(**extra):
    curve = {'vertices': [[-2.0, 0.2], [0.0, 0.2], [0.0, 0.8], [2.0, 0.8]], 'density': 5.0}
    return small_case({'curve': curve}, n_range=[-3, 3], **extra)


class TestRunCase:
    def test_zero_potential(self):
        report = run_case(zero_case())
        assert report.table == []
        assert all(value == 0 for value in report.counts.values())
        assert report.estimates['strip_bound'] == 1.0
        assert report.estimates['explicit_1d_bound'] == 1.0
        assert all(row.holds for row in report.rows)
        assert report.grid_converged is True

    def test_box_unconditional_rows_pass(self):
        report = run_case(box_case())
        assert report.unconditional_pass
        names = {row.name for row in report.rows if row.kind == UNCONDITIONAL}
        assert {'decomposition', 'certifier', 'explicit_1d_bound', 'threshold_inequality',
                'domination_chain', 'lp_gap', 'luxemburg_equivalence_upper',
                'luxemburg_equivalence_lower', 'cell_decomposition', 'scan_monotone',
                'truncation_monotone'} <= names
        assert report.counts['widened'] <= report.counts['full']
        assert {row.name for row in report.rows if row.kind == EMPIRICAL} >= {'strip_bound'}
        assert report.counts['full'] >= report.certifier.lower_bound >= 1

    def test_box_estimates_and_table(self):
        report = run_case(box_case())
        for key in ('rhs_Est2', 'rhs_Est3', 'rhs_Est4', 'rhs_Est5', 'strip_bound', 'explicit_1d_bound'):
            assert key in report.estimates
        assert [row.n for row in report.table] == sorted(row.n for row in report.table)
        assert report.constants['C'] == pytest.approx(7.61)

    def test_scan_is_monotone(self):
        report = run_case(box_case())
        counts = [row.count for row in report.scan]
        assert counts == sorted(counts)
        assert [row.alpha for row in report.scan] == [1.0, 2.0, 4.0]

    def test_deterministic(self):
        first = json.dumps(run_case(box_case()).to_dict(), sort_keys=True)
        second = json.dumps(run_case(box_case()).to_dict(), sort_keys=True)
        assert first == second

    def test_curve_case(self):
        report = run_case(step_curve_case())
        assert report.kind == 'curve'
        assert report.unconditional_pass
        assert report.counts['N'] == 1
        assert report.counts['delta'] <= 1
        assert {'curve_split', 'reduced_split', 'finite_sigma_delta_bound', 'measure_bound'} <= {
            row.name for row in report.rows if row.kind == UNCONDITIONAL}
        assert 'measure_bound_printed' in report.estimates

    def test_curve_counts_split_over_the_subspaces(self):
        report = run_case(step_curve_case())
        assert report.counts['N1'] + report.counts['N2'] >= report.counts['full'] >= 1
        assert next(row for row in report.rows if row.name == 'curve_split').holds

    def test_odd_grid(self):
        config = small_case({'potential': {'catalog': 'box', 'lambda': 10.0, 'x1': [1.0, 2.0]}},
                            L=4, grid={'nx': 101, 'ny': 8}, name='odd')
        report = run_case(config)
        assert isinstance(report.grid_converged, bool)
        assert report.counts['full'] >= 1

    def test_odd_grid_curve(self):
        report = run_case(step_curve_case(grid={'nx': 49, 'ny': 4}))
        assert isinstance(report.grid_converged, bool)

    def test_grid_too_coarse_to_halve(self):
        report = run_case(small_case({'potential': {'catalog': 'zero'}}, grid={'nx': 6, 'ny': 4}))
        assert report.grid_converged is None

    def test_grid_file_potential(self, tmp_path):
        rows = [{'x1': x1, 'x2': x2, 'V': 2.0} for x1 in (-1.0, 0.0, 1.0) for x2 in (0.0, 0.5, 1.0)]
        pd.DataFrame(rows).to_csv(tmp_path / 'v.csv', index=False)
        raw = {'a': 1.0, 'grid_file': 'v.csv', 'L': 2, 'grid': {'nx': 32, 'ny': 4},
               'n_range': [-3, 3], 'quadrature': QUADRATURE}
        path = tmp_path / 'gridded.json'
        path.write_text(json.dumps(raw), encoding='utf-8')
        report = run_case(load_case(str(path)))
        assert report.source['grid_file'].endswith('v.csv')
        assert report.counts['full'] >= 1
        assert report.counts['widened'] <= report.counts['full']
        assert next(row for row in report.rows if row.name == 'decomposition').holds

    def test_errors_carry_the_case_name(self):
        config = small_case({'curve': {'vertices': [[0.0, 0.5], [5.0, 0.5]], 'density': 1.0}}, name='too_long')
        with pytest.raises(DomainError, match='too_long'):
            run_case(config)


class TestScanCase:
    def test_volume_override(self):
        rows = scan_case(box_case(), [0.5, 8.0])
        assert [row.alpha for row in rows] == [0.5, 8.0]
        assert rows[0].count <= rows[1].count

    def test_curve(self):
        rows = scan_case(step_curve_case(), [1.0, 10.0])
        assert rows[0].count <= rows[1].count
        assert rows[1].weak_quasinorm == pytest.approx(10.0 * rows[0].weak_quasinorm)

    def test_rejects_decreasing(self):
        with pytest.raises(DomainError):
            scan_case(step_curve_case(), [2.0, 1.0])


class TestEmitReport:
    def test_json_round_trip(self, tmp_path):
        report = run_case(box_case())
        path = emit_report(report, 'json', str(tmp_path))
        assert path.endswith('small.json')
        assert load_report(path) == report

    def test_json_of_empty_potential(self, tmp_path):
        path = emit_report(run_case(zero_case()), 'json', str(tmp_path))
        with open(path, encoding='utf-8') as fh:
            data = json.load(fh)
        assert data['table'] == []
        assert data['schema_version'] == 1

    def test_json_bytes_are_stable(self, tmp_path):
        report = run_case(zero_case())
        first = open(emit_report(report, 'json', str(tmp_path / 'a')), 'rb').read()
        second = open(emit_report(report, 'json', str(tmp_path / 'b')), 'rb').read()
        assert first == second

    def test_csv_columns_and_summary(self, tmp_path):
        report = run_case(box_case())
        frame = pd.read_csv(emit_report(report, 'csv', str(tmp_path)))
        assert list(frame.columns) == CSV_COLUMNS
        assert len(frame) == len(report.table) + 1
        assert frame['n'].iloc[-1] == 'summary'
        assert frame['G_n'].iloc[-1] == pytest.approx(sum(row.G_n for row in report.table))

    def test_csv_round_trip(self, tmp_path):
        report = run_case(box_case())
        assert load_table(emit_report(report, 'csv', str(tmp_path))) == report.table
        assert load_table(emit_report(run_case(zero_case()), 'csv', str(tmp_path))) == []

    def test_empty_table_frame(self):
        frame = report_frame(run_case(zero_case()))
        assert len(frame) == 1
        assert frame['n'].iloc[0] == 'summary'

    def test_unknown_format(self, tmp_path):
        with pytest.raises(CaseError):
            emit_report(run_case(zero_case()), 'xml', str(tmp_path))

    def test_unwritable_directory(self, tmp_path):
        blocker = tmp_path / 'blocker'
        blocker.write_text('not a directory', encoding='utf-8')
        with pytest.raises(CaseError, match='cannot write'):
            emit_report(run_case(zero_case()), 'json', str(blocker))

    def test_summary_text(self):
        text = run_case(zero_case()).summary()
        assert 'empty' in text
        assert 'inequality rows hold' in text

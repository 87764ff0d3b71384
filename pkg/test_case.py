import json
import os

import pandas as pd
import pytest

from case import case_from_dict, load_case
from curves import CurveSpec
from errors import CaseError, DomainError
from potentials import BoxPotential, GridPotential


def box_case(**extra):
    raw = {'a': 1.0, 'potential': {'catalog': 'box', 'λ': 10.0, 'x1': [1.0, 2.0]}}
    raw.update(extra)
    return raw


class TestCaseFromDict:
    def test_minimal_box_gets_defaults(self):
        config = case_from_dict(box_case())
        assert isinstance(config.potential, BoxPotential)
        assert config.kind == 'volume'
        assert config.constants.c == pytest.approx(0.046)
        assert config.constants.C == pytest.approx(7.61)
        assert config.grid.L == 8.0
        assert config.grid.h1 <= 1.0 / 64
        assert config.output_format == 'json'

    def test_lambda_spellings(self):
        raw = {'a': 1.0, 'potential': {'catalog': 'box', 'lambda': 3.0, 'x1': [0.0, 1.0]}}
        assert case_from_dict(raw).potential.lam == 3.0

    def test_grid_override(self):
        config = case_from_dict(box_case(L=3, grid={'nx': 48, 'ny': 4}))
        assert (config.grid.L, config.grid.nx, config.grid.ny) == (3.0, 48, 4)

    def test_two_sources_rejected(self):
        raw = {'a': 1.0, 'potential': {'catalog': 'box', 'λ': 1.0, 'x1': [0, 1], 'grid_file': 'v.csv'}}
        with pytest.raises(CaseError, match='exactly one'):
            case_from_dict(raw)

    def test_missing_source_rejected(self):
        with pytest.raises(CaseError, match='exactly one'):
            case_from_dict({'a': 1.0})

    def test_unknown_key_is_named(self):
        with pytest.raises(CaseError, match="'colour'"):
            case_from_dict(box_case(colour='red'))
        with pytest.raises(CaseError, match="'c3'"):
            case_from_dict(box_case(constants={'c3': 1.0}))

    def test_missing_width(self):
        with pytest.raises(CaseError, match="'a'"):
            case_from_dict({'potential': {'catalog': 'zero'}})

    def test_negative_strength_is_a_domain_error(self):
        raw = {'a': 1.0, 'potential': {'catalog': 'box', 'λ': -1.0, 'x1': [0.0, 1.0]}}
        with pytest.raises(DomainError):
            case_from_dict(raw)

    def test_schema_version(self):
        with pytest.raises(CaseError, match='schema_version'):
            case_from_dict(box_case(schema_version=99))

    @pytest.mark.parametrize('key, value', [
        ('n_range', [3, -3]),
        ('n_range', 'all'),
        ('alphas', ['one']),
        ('quadrature', {'inner_panels': 0}),
        ('p', 0.5),
        ('a', -1.0),
        ('output', {'format': 'xml'}),
    ])
    def test_invalid_values(self, key, value):
        with pytest.raises(CaseError):
            case_from_dict(box_case(**{key: value}))

    @pytest.mark.parametrize('extra, key', [
        ({'grid': {'nx': 48, 'ny': '8'}}, "'grid.ny'"),
        ({'grid': {'nx': 48.0}}, "'grid.nx'"),
        ({'grid': {'nx': True}}, "'grid.nx'"),
        ({'grid': {'nx': 2, 'ny': 4}}, "'grid'"),
        ({'constants': {'c': '1'}}, "'c'"),
        ({'constants': {'slots': {'C2': 'big'}}}, "'C2'"),
        ({'constants': {'slots': {'C99': 1.0}}}, 'C99'),
        ({'constants': {'slots': [1.0]}}, "'constants.slots'"),
    ])
    def test_malformed_types_name_the_key(self, extra, key):
        with pytest.raises(CaseError, match=key):
            case_from_dict(box_case(**extra))

    def test_odd_grid_accepted(self):
        config = case_from_dict(box_case(L=4, grid={'nx': 101, 'ny': 8}))
        assert (config.grid.nx, config.grid.ny) == (101, 8)

    def test_explicit_constants_are_kept(self):
        config = case_from_dict(box_case(constants={'c': 0.1, 'C': 3.0, 'slots': {'C2': 1.5}}))
        assert (config.constants.c, config.constants.C) == (0.1, 3.0)
        assert config.constants.slots == {'C2': 1.5}

    def test_curve_case(self):
        raw = {'a': 1.0, 'curve': {'vertices': [[-1.0, 0.2], [0.0, 0.2], [0.0, 0.8]], 'density': [1.0, 2.0, 3.0]}}
        config = case_from_dict(raw)
        assert config.kind == 'curve'
        assert isinstance(config.curve, CurveSpec)
        assert config.source_dict()['density'] == [1.0, 2.0, 3.0]

    def test_curve_with_unknown_key(self):
        raw = {'a': 1.0, 'curve': {'vertices': [[0.0, 0.2], [1.0, 0.2]], 'shape': 'line'}}
        with pytest.raises(CaseError, match="'shape'"):
            case_from_dict(raw)


class TestLoadCase:
    def test_missing_file(self, tmp_path):
        with pytest.raises(CaseError, match='not found'):
            load_case(str(tmp_path / 'absent.json'))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{"a": 1,', encoding='utf-8')
        with pytest.raises(CaseError, match='not valid JSON'):
            load_case(str(path))

    def test_name_from_file_stem(self, tmp_path):
        path = tmp_path / 'benchmark_box.json'
        path.write_text(json.dumps(box_case()), encoding='utf-8')
        config = load_case(str(path))
        assert config.name == 'benchmark_box'
        assert os.path.normpath(config.output_dir) == os.path.normpath(str(tmp_path))

    def test_grid_file_relative_to_case(self, tmp_path):
        rows = [{'x1': x1, 'x2': x2, 'V': 2.0} for x1 in (-1.0, 0.0, 1.0) for x2 in (0.0, 0.5, 1.0)]
        pd.DataFrame(rows).to_csv(tmp_path / 'v.csv', index=False)
        path = tmp_path / 'gridded.json'
        path.write_text(json.dumps({'a': 1.0, 'grid_file': 'v.csv', 'L': 2, 'grid': {'nx': 32, 'ny': 4}}),
                        encoding='utf-8')
        config = load_case(str(path))
        assert isinstance(config.potential, GridPotential)
        assert float(config.potential(0.5, 0.5)) == pytest.approx(2.0)

    def test_missing_grid_file(self, tmp_path):
        path = tmp_path / 'gridded.json'
        path.write_text(json.dumps({'a': 1.0, 'potential': {'grid_file': 'nope.csv'}}), encoding='utf-8')
        with pytest.raises(CaseError, match='not found'):
            load_case(str(path))

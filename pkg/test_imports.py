import importlib

import pytest

MODULES = ['config', 'errors', 'orlicz', 'potentials', 'dyadic', 'inertia', 'strip_solver',
           'delta1d', 'curves', 'case', 'report', 'oracles', 'main']


@pytest.mark.parametrize('name', MODULES)
def test_module_imports(name):
    module = importlib.import_module(name)
    assert module.__name__ == name


def test_config_singleton():
    from config import CONFIG
    assert CONFIG.N_RANGE[0] < CONFIG.N_RANGE[1]
    assert CONFIG.DEFAULT_PREFACTOR > 0

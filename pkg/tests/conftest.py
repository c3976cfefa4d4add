"""
Shared fixtures: the bundled surfaces, torus grids and the golden direction.
"""

import numpy as np
import pytest

from engine.spectral.grid import Grid
from engine.surface.origami import flat_torus, load_origami_file
from models.surface import Direction
from utils.path_helper import get_config_path

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


@pytest.fixture
def torus():
    return flat_torus()


@pytest.fixture
def l3():
    return load_origami_file(get_config_path('surfaces/l3.origami'))


@pytest.fixture
def torus_grid(torus):
    return Grid(torus, 32)


@pytest.fixture
def fine_torus_grid(torus):
    return Grid(torus, 64)


@pytest.fixture
def golden():
    return Direction((1.0, GOLDEN))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(autouse=True)
def _no_out_override(monkeypatch):
    monkeypatch.delenv('PARASURF_OUT', raising=False)


# small truncation so the L3 tests run at N=16
L3_CE = {'n_candidates': 60, 'min_gap_ratio': 1.0}


@pytest.fixture(scope='session')
def l3_grid():
    grid = Grid(load_origami_file(get_config_path('surfaces/l3.origami')), 16)
    grid.build_basis(L3_CE['n_candidates'] + 1)
    return grid

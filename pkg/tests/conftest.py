import numpy as np
import pytest

from rdode.grid import Grid
from rdode.model import builtin_model
from rdode.spectra import analyze
from rdode.steady import (admissible_midpoint, find_constant_steady, sigmoid_guess,
                          solve_ddi_pattern, solve_hysteresis_pattern, solve_newton_steady)


@pytest.fixture(scope="session")
def hyst_pattern():
    """(model, grid, steady) for the default hysteresis pattern on n=128."""
    model = builtin_model("hysteresis")
    grid = Grid(128)
    return model, grid, solve_hysteresis_pattern(model, admissible_midpoint(model.params), grid)


@pytest.fixture(scope="session")
def hyst_analysis(hyst_pattern):
    model, grid, steady = hyst_pattern
    return analyze(model, steady, grid)


@pytest.fixture(scope="session")
def bistable_pattern():
    model = builtin_model("bistable")
    grid = Grid(64)
    guess = sigmoid_guess(model, grid, [0.0, 0.0], [1.0, 1.0])
    return model, grid, solve_newton_steady(model, guess, grid)


@pytest.fixture(scope="session")
def ddi_patterns():
    model = builtin_model("ddi")
    grid = Grid(128)
    return model, grid, {b: solve_ddi_pattern(model, 0.35, grid, branch=b) for b in ("u+", "u-")}


@pytest.fixture(scope="session")
def hyst_constants():
    model = builtin_model("hysteresis")
    grid = Grid(64)
    roots = model.params.intersections()
    return model, grid, [find_constant_steady(model, [u, model.params.ratio * u], grid) for u in roots]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

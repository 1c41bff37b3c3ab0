import numpy as np
import pytest

from spa.data import scenario_a, scenario_a_small, simulate_dataset


@pytest.fixture(scope="session")
def scenario_a_data():
    data, beta = simulate_dataset(scenario_a())
    return data, beta


@pytest.fixture(scope="session")
def scenario_a_small_data():
    data, beta = simulate_dataset(scenario_a_small())
    return data, beta


@pytest.fixture(scope="session")
def single_marker_data():
    """n=50 single-column dataset with a real effect, for 1-d oracles."""
    rng = np.random.default_rng(71)
    raw = rng.integers(0, 3, size=(50, 1)).astype(float)
    from spa.data import Dataset, simulate_phenotypes, standardize

    X = standardize(raw)
    y = simulate_phenotypes(X, [0.8], seed=72)
    return Dataset(X, y, ["snp_001"])

"""Shared fixtures: the packaged median T60 curve and a flat reference."""

from importlib import resources

import numpy as np
import pytest

from peqfdn import T60Curve, load_t60_table


@pytest.fixture(scope="session")
def median_curve() -> T60Curve:
    text = resources.files("peqfdn").joinpath("data/median_t60.csv").read_text()
    return load_t60_table(text, name="median")


@pytest.fixture(scope="session")
def flat_curve() -> T60Curve:
    freqs = np.geomspace(20.0, 20000.0, 31)
    return T60Curve(freqs, np.ones_like(freqs), name="flat-1s")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)

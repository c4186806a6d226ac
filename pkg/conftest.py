# conftest.py
# Shared fixtures: seeded generators and small synthetic wall databases.

import logging

import numpy as np
import pytest

from core.dataset import FEATURES, WallSpecimen, design_matrix, write_specimens
from tools.synth_walls import SynthSpec, gen_walls


def _midrange() -> dict:
    return {f.id: (f.minimum + f.maximum) / 2 for f in FEATURES}


@pytest.fixture
def make_specimen():
    """WallSpecimen factory with mid-range features; keyword overrides win."""

    def factory(**overrides) -> WallSpecimen:
        values = {"id": "W1", "section_shape": "rectangular", "ncde": 500.0, **_midrange()}
        values.update(overrides)
        return WallSpecimen(**values)

    return factory


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def synth_walls():
    """60 walls, nonlinear ground truth on three features."""
    return gen_walls(SynthSpec(seed=7, count=60, informative=("l_w", "t_w", "f_c"), noise_std=0.05))


@pytest.fixture
def walls_csv(tmp_path, synth_walls):
    return synth_walls.write(tmp_path / "walls.csv")


@pytest.fixture
def small_matrix(synth_walls):
    return design_matrix(synth_walls.specimens, ("l_w", "t_w", "f_c", "f_yt"))


@pytest.fixture
def write_walls(tmp_path):
    def writer(specimens, name="walls.csv"):
        return write_specimens(specimens, tmp_path / name)

    return writer


@pytest.fixture(autouse=True)
def quiet_logs(caplog):
    caplog.set_level(logging.WARNING)

"""Shared fixtures. The heavy full-resolution objects are session-scoped so
the acceptance suite builds them once."""

import numpy as np
import pytest

from rlsfi import (
    DesignConfig,
    Direction,
    FrequencyGrid,
    build_desired_1d,
    build_desired_2d,
    design_broadband,
    free_field_steering,
    head_array_12,
    make_uniform_grid,
    synthesize_fir,
)

LOOK = Direction(90.0, 90.0)
FS = 16000.0
TAPS = 1024
GAMMA_DB = -20.0
BEAMWIDTH = 20.0


@pytest.fixture(scope="session")
def head_geom():
    return head_array_12()


@pytest.fixture(scope="session")
def full_grid():
    return make_uniform_grid(5.0, 5.0, include_poles=True)


@pytest.fixture(scope="session")
def freq_grid():
    return FrequencyGrid(FS, TAPS)


@pytest.fixture(scope="session")
def full_steering(head_geom, full_grid, freq_grid):
    return free_field_steering(head_geom, full_grid, freq_grid)


@pytest.fixture(scope="session")
def paper_config():
    return DesignConfig(
        gamma_db=GAMMA_DB,
        look=LOOK,
        beamwidth_3db=BEAMWIDTH,
        num_taps=TAPS,
        sample_rate=FS,
    )


@pytest.fixture(scope="session")
def design_2d(full_steering, full_grid, paper_config):
    desired = build_desired_2d(full_grid, LOOK, BEAMWIDTH)
    return design_broadband(full_steering, desired, paper_config)


@pytest.fixture(scope="session")
def design_1d(full_steering, paper_config):
    desired = build_desired_1d(5.0, 90.0, LOOK, BEAMWIDTH)
    return design_broadband(full_steering, desired, paper_config)


@pytest.fixture(scope="session")
def filters_2d(design_2d):
    return synthesize_fir(design_2d)


@pytest.fixture(scope="session")
def filters_1d(design_1d):
    return synthesize_fir(design_1d)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260809)

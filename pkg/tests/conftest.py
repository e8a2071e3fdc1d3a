import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scatter_crypt.experiment import Experiment, load_config  # noqa: E402
from scatter_crypt.scene import build_scene  # noqa: E402


def small_config(nx=6, nz=6, sx=5, sz=5, g=(2, 2, 2), depth=2.0, extent=3.0, standoff=2.0, **medium):
    m = {"extent_x": extent, "extent_z": extent, "depth": depth, "gx": g[0], "gy": g[1], "gz": g[2],
         "standoff_hologram": standoff, "standoff_sensor": standoff}
    m.update(medium)
    return {
        "wavelength": 1.0,
        "hologram": {"extent_x": 6.0, "extent_z": 6.0, "nx": nx, "nz": nz},
        "sensor": {"extent_x": 5.0, "extent_z": 5.0, "nx": sx, "nz": sz},
        "medium": m,
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_scene():
    return build_scene(small_config())


@pytest.fixture(scope="session")
def desk():
    return Experiment.build(load_config("desk"))


@pytest.fixture(scope="session")
def desk_holo():
    return Experiment.build(load_config("desk_holo"))


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

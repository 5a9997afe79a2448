import math

import pytest
from hypothesis import settings

from bohmivr.dpm import HierarchyConfig
from bohmivr.ivr import run_ensemble, sample_initial_points
from bohmivr.model import Harmonic, InvertedGaussian, PhysicalConstants, QuarticPerturbed, WavepacketSpec

# numba compiles on first use; keep hypothesis from timing that
settings.register_profile("default", deadline=None)
settings.load_profile("default")

CONSTS = PhysicalConstants()
PACKET = WavepacketSpec(beta=1.0, x0=1.0)
HARMONIC = Harmonic()
QUARTIC = QuarticPerturbed()
WELL = InvertedGaussian()
TWO_PI = 2 * math.pi


@pytest.fixture(scope="session")
def harmonic_run():
    """64 trajectories, n_order 2, ten periods, snapshots every 0.01."""
    grid = sample_initial_points(PACKET, 64)
    cfg = HierarchyConfig(n_order=2, dt=1e-3, t_final=10 * TWO_PI)
    return run_ensemble(grid, PACKET, HARMONIC, CONSTS, cfg, output_stride=10)


@pytest.fixture(scope="session")
def quartic_run():
    """64 trajectories, n_order 4, two periods."""
    grid = sample_initial_points(PACKET, 64)
    cfg = HierarchyConfig(n_order=4, dt=1e-3, t_final=2 * TWO_PI)
    return run_ensemble(grid, PACKET, QUARTIC, CONSTS, cfg, output_stride=10)

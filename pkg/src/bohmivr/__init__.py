"""Bohmian trajectories with derivative propagation, assembled into
initial-value-representation correlation functions and spectra."""

from .model import (
    GaussianWindow,
    Harmonic,
    Identity,
    InvertedGaussian,
    PhysicalConstants,
    Polynomial,
    PolynomialMultiplier,
    QuarticPerturbed,
    WavepacketSpec,
)
from .dpm import HierarchyConfig, TrajectoryRecord, integrate_trajectory
from .ivr import CorrelationSeries, autocorrelation, operator_correlation, run_ensemble, sample_initial_points
from .spectrum import WindowSpec, fourier_spectrum
from .oracle import GridSpec, dvr_eigensolve, split_operator_propagate

__version__ = "0.1.0"

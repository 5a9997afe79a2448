#!/usr/bin/env python3
"""Convergence tables on the harmonic case: integrator step, quadrature size,
and split-operator step, each against the closed-form result."""

import math

import numpy as np

from bohmivr.dpm import HierarchyConfig, integrate_trajectory
from bohmivr.ivr import autocorrelation, run_ensemble, sample_initial_points
from bohmivr.model import Harmonic, PhysicalConstants, WavepacketSpec
from bohmivr.oracle import GridSpec, analytic_harmonic_autocorrelation, split_operator_propagate

SPEC, MODEL, CONSTS = WavepacketSpec(1.0, 1.0), Harmonic(), PhysicalConstants()
T = 2 * math.pi


def main():
    print("RK4 step halving (trajectory from x=1.7, t=2pi)")
    prev = None
    for dt in (0.2, 0.1, 0.05, 0.025):
        r = integrate_trajectory(1.7, SPEC, MODEL, CONSTS, HierarchyConfig(n_order=2, dt=dt, t_final=T))
        err = abs(r.x[-1] - 1.7) + abs(r.S[-1, 0] - math.pi)
        print(f"  dt={dt:<6} error={err:.3e}" + (f"  ratio={prev / err:.1f}" if prev else ""))
        prev = err

    print("quadrature size (max | |c| - |c_exact| | over one period)")
    for n in (16, 32, 64, 128):
        run = run_ensemble(sample_initial_points(SPEC, n), SPEC, MODEL, CONSTS, HierarchyConfig(n_order=2, t_final=T), 10)
        c = autocorrelation(run)
        dev = np.max(np.abs(np.abs(c.values) - np.abs(analytic_harmonic_autocorrelation(c.times, SPEC))))
        print(f"  n_points={n:<4} deviation={dev:.3e}")

    print("split-operator step (max |c - c_exact| over one period)")
    prev = None
    for dt in (8e-3, 4e-3, 2e-3, 1e-3):
        s, _ = split_operator_propagate(MODEL, SPEC, GridSpec(), dt, T, int(round(0.4 / dt)))
        err = np.max(np.abs(s.values - analytic_harmonic_autocorrelation(s.times, SPEC)))
        print(f"  dt={dt:<6} error={err:.3e}" + (f"  ratio={prev / err:.1f}" if prev else ""))
        prev = err


if __name__ == "__main__":
    main()

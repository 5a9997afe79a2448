#!/usr/bin/env python3
"""Scan truncation order, damping rate and step size for the anharmonic presets.

For each setting prints the recurrence heights |c(2 pi k)| (quartic) or the
number of |c| maxima and the dominant spectral line (Gaussian well).
"""

import argparse
import itertools
import math

import numpy as np
from scipy import signal

from bohmivr.config import preset_config
from bohmivr.dpm import HierarchyConfig
from bohmivr.ivr import autocorrelation, run_ensemble, sample_initial_points
from bohmivr.model import PhysicalConstants
from bohmivr.spectrum import fourier_spectrum


def run(name, n_order, lam, dt, damp_top):
    cfg = preset_config(name)
    spec, model = cfg.wavepacket_spec(), cfg.model()
    grid = sample_initial_points(spec, cfg.sampling.n_points, cfg.sampling.scheme, cfg.sampling.density_cutoff)
    h = HierarchyConfig(n_order=n_order, lam=lam, dt=dt, t_final=cfg.hierarchy.t_final,
                        damp_top_orders=min(damp_top, n_order))
    stride = max(1, int(round(0.01 / dt)))
    ens = run_ensemble(grid, spec, model, PhysicalConstants(), h, stride)
    c = autocorrelation(ens)
    return c, sum(f is not None for f in ens.frozen), cfg


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("preset", choices=["quartic", "gaussian_well"])
    ap.add_argument("--orders", type=int, nargs="+", default=[2, 4, 6])
    ap.add_argument("--lams", type=float, nargs="+", default=[0.0, 0.1, 0.5])
    ap.add_argument("--dts", type=float, nargs="+", default=[1e-3])
    ap.add_argument("--damp-top", type=int, default=2)
    args = ap.parse_args()
    for n, lam, dt in itertools.product(args.orders, args.lams, args.dts):
        c, frozen, cfg = run(args.preset, n, lam, dt, args.damp_top)
        a = np.abs(c.values)
        if args.preset == "quartic":
            rec = [a[np.argmin(np.abs(c.times - 2 * math.pi * k))] for k in range(1, 11)]
            print(f"n={n} lam={lam:<4} dt={dt:<6} frozen={frozen:2d}  |c(2pi k)| = "
                  + " ".join(f"{v:.2f}" for v in rec))
        else:
            sp = cfg.spectrum
            res = fourier_spectrum(c, cfg.window(), sp.omega_min, sp.omega_max, sp.n_omega, sp.rel_threshold)
            top = max(res.peaks, key=lambda p: p.height).omega if res.peaks else float("nan")
            maxima, _ = signal.find_peaks(a, prominence=0.05, height=0.1)
            print(f"n={n} lam={lam:<4} dt={dt:<6} frozen={frozen:2d}  maxima={len(maxima):2d}  "
                  f"max|c|={a.max():7.2f}  dominant line {top:+.4f}")


if __name__ == "__main__":
    main()

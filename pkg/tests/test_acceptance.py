"""Acceptance criteria, one test per criterion.

Every criterion prints a single ``ACCEPTANCE <n> PASS|FAIL: ...`` line in the
terminal summary, whatever the outcome.  Presets are run once through the
command-line pipeline (workers = 1) and the criteria read the emitted files.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy import signal

from bohmivr.cli import STAGES, run_pipeline
from bohmivr.config import preset_config
from bohmivr.dpm import HierarchyConfig, detect_crossings, integrate_trajectory, jacobian_consistency
from bohmivr.ivr import CorrelationSeries, autocorrelation, run_ensemble, sample_initial_points
from bohmivr.oracle import GridSpec, analytic_harmonic_autocorrelation, dvr_eigensolve, evolve_on_grid
from bohmivr.model import wavefunction_value

from conftest import CONSTS, HARMONIC, PACKET, QUARTIC, TWO_PI, WELL

RESULTS = {}


def record(n, ok, detail):
    RESULTS[n] = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}"
    assert ok, RESULTS[n]


@pytest.fixture(scope="module", autouse=True)
def report(request):
    yield
    tr = request.config.pluginmanager.get_plugin("terminalreporter")
    lines = [RESULTS[k] for k in sorted(RESULTS)]
    if tr is not None:
        tr.write_sep("=", "acceptance criteria")
        for line in lines:
            tr.write_line(line)
    else:
        print("\n".join(lines))


@pytest.fixture(scope="module")
def presets(tmp_path_factory):
    root = tmp_path_factory.mktemp("presets")
    out = {}
    for name in ("harmonic", "quartic", "gaussian_well"):
        t0 = time.perf_counter()
        manifest = run_pipeline(preset_config(name), STAGES, workers=1, out=root / name)
        out[name] = (root / name, manifest, time.perf_counter() - t0)
    return out


def load(directory, name):
    return CorrelationSeries.from_csv(directory / name)


def nearest(series, t):
    return series.values[np.argmin(np.abs(series.times - t))]


def test_1_harmonic_exactness(presets):
    d, manifest, _ = presets["harmonic"]
    c = load(d, "correlation.csv")
    dev = np.max(np.abs(np.abs(c.values) - np.abs(analytic_harmonic_autocorrelation(c.times, PACKET))))
    rec = max(abs(abs(nearest(c, n * TWO_PI)) - 1) for n in range(1, 11))
    runtime = manifest["timings_s"]["propagate"] + manifest["timings_s"]["correlate"]
    ok = dev < 1e-3 and rec < 1e-3 and runtime < 60
    record(1, ok, f"max||c|-|c_exact||={dev:.2e} (<1e-3), max||c(2pi n)|-1|={rec:.2e} (<1e-3), "
                  f"propagate+correlate {runtime:.1f}s (<60s)")


def test_2_harmonic_spectrum(presets):
    d, _, _ = presets["harmonic"]
    peaks = np.loadtxt(d / "peaks.csv", delimiter=",", skiprows=1, ndmin=2)
    target = np.arange(4) - 0.5
    pos = [peaks[np.argmin(np.abs(peaks[:, 0] - e))] for e in target]
    pos_dev = max(abs(p[0] - e) for p, e in zip(pos, target))
    h = np.array([p[1] for p in pos[:3]])
    ref = np.array([0.6065, 0.3033, 0.0758])
    ratio_dev = np.max(np.abs((h / h[0]) / (ref / ref[0]) - 1))
    ok = pos_dev <= 0.02 and ratio_dev <= 0.10
    record(2, ok, f"peaks {np.round([p[0] for p in pos], 4).tolist()} max dev {pos_dev:.1e} (<=0.02); "
                  f"height ratios {np.round(h / h.sum(), 4).tolist()} max rel dev {ratio_dev:.1e} (<=0.10)")


def test_3_well_eigenvalues():
    t0 = time.perf_counter()
    e = dvr_eigensolve(WELL, GridSpec(-10, 10, 512), 2).energies
    dt = time.perf_counter() - t0
    d0, d1 = abs(e[0] + 0.59386), abs(e[1] + 0.0356576)
    record(3, d0 < 1e-3 and d1 < 1e-3 and dt < 10,
           f"E = {e[0]:.6f}, {e[1]:.6f}; deviations {d0:.1e}, {d1:.1e} (<1e-3); {dt:.2f}s")


def test_4_quartic_fidelity(presets):
    d, _, _ = presets["quartic"]
    c = load(d, "correlation.csv")
    ref = load(d, "oracle_correlation.csv")
    mask = c.times <= 2 * TWO_PI + 1e-9
    rv = np.interp(c.times[mask], ref.times, ref.values.real) + 1j * np.interp(c.times[mask], ref.times, ref.values.imag)
    l2 = np.linalg.norm(c.values[mask] - rv) / np.linalg.norm(rv)
    n_peaks = len(np.loadtxt(d / "peaks.csv", delimiter=",", skiprows=1, ndmin=2))
    c2, c12 = abs(nearest(c, TWO_PI)), abs(nearest(c, 6 * TWO_PI))
    e2, e12 = abs(nearest(ref, TWO_PI)), abs(nearest(ref, 6 * TWO_PI))
    checks = {"rel L2": l2 < 0.10, "peaks": n_peaks >= 4, "decay": c12 < 0.5 * c2}
    failed = [k for k, v in checks.items() if not v]
    record(4, not failed, f"rel L2 on [0,4pi] {l2:.3f} (<0.10); {n_peaks} peaks (>=4); "
                          f"|c(12pi)|={c12:.3f} vs 0.5|c(2pi)|={0.5 * c2:.3f} "
                          f"(grid reference: {e12:.3f} vs {0.5 * e2:.3f})"
                          + (f"; failed: {', '.join(failed)}" if failed else ""))


def test_5_gaussian_well(presets):
    d, _, _ = presets["gaussian_well"]
    c = load(d, "correlation.csv")
    a = np.abs(c.values)
    maxima, _ = signal.find_peaks(a, prominence=0.05, height=0.1)
    peaks = np.loadtxt(d / "peaks.csv", delimiter=",", skiprows=1, ndmin=2)
    dominant = peaks[np.argmax(peaks[:, 1]), 0] if len(peaks) else float("nan")
    ref_maxima, _ = signal.find_peaks(np.abs(load(d, "oracle_correlation.csv").values), prominence=0.05, height=0.1)
    ok = len(maxima) >= 6 and abs(dominant + 0.59386) <= 0.05
    record(5, ok, f"{len(maxima)} recursion maxima of |c| (>=6; grid reference has {len(ref_maxima)}); "
                  f"dominant peak {dominant:.4f} (within 0.05 of -0.59386); max |c| = {a.max():.2f}")


def test_6_invariants(harmonic_run, quartic_run):
    checks = {}
    jh = max(jacobian_consistency(r) for r in harmonic_run.records)
    cfg2 = HierarchyConfig(n_order=4, t_final=TWO_PI)
    q2 = run_ensemble(quartic_run.grid, PACKET, QUARTIC, CONSTS, cfg2, 10)
    jq = max(jacobian_consistency(r) for r in q2.records)
    checks["jacobian harmonic"] = (jh < 1e-6, f"{jh:.1e}")
    checks["jacobian quartic"] = (jq < 1e-3, f"{jq:.1e}")
    c0 = max(abs(autocorrelation(r).values[0] - 1) for r in (harmonic_run, quartic_run))
    checks["c(0)"] = (c0 < 1e-6, f"{c0:.1e}")
    g = GridSpec()
    norms = [g.dx * np.vdot(p, p).real for _, p in
             evolve_on_grid(QUARTIC, wavefunction_value(PACKET, g.x), g, 1e-3, 20 * math.pi, 100)]
    drift = np.max(np.abs(np.array(norms) - norms[0]))
    checks["oracle norm"] = (drift < 1e-10, f"{drift:.1e}")
    errs = []
    for dt in (0.1, 0.05):
        r = integrate_trajectory(1.7, PACKET, HARMONIC, CONSTS, HierarchyConfig(n_order=2, dt=dt, t_final=TWO_PI))
        # position alone superconverges at a full period; include the action
        S = 0.5 * TWO_PI
        errs.append(abs(r.x[-1] - 1.7) + abs(r.S[-1, 0] - S))
    ratio = errs[0] / errs[1]
    checks["step halving"] = (13 < ratio < 19, f"ratio {ratio:.1f}")
    first_h, count_h = detect_crossings(harmonic_run.records)
    first_q, _ = detect_crossings(quartic_run.records)
    checks["harmonic crossings"] = (first_h is None and count_h == 0, f"{count_h}")
    checks["quartic first crossing"] = (first_q is not None and np.isfinite(first_q), f"t={first_q}")
    ok = all(v[0] for v in checks.values())
    record(6, ok, "; ".join(f"{k} {v[1]}{'' if v[0] else ' FAILED'}" for k, v in checks.items()))


def test_7_determinism(presets, tmp_path):
    same = {}
    for name, (_, manifest, _) in presets.items():
        m8 = run_pipeline(preset_config(name), STAGES, workers=8, out=tmp_path / name)
        same[name] = m8["files"] == manifest["files"]
        saved = json.loads((tmp_path / name / "manifest.json").read_text())
        same[name] &= saved["files"] == m8["files"]
    record(7, all(same.values()), ", ".join(f"{k}: {'identical' if v else 'DIFFERENT'}" for k, v in same.items())
           + " (workers 1 vs 8, all output files)")

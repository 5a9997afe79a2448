"""
Command-line driver.

    bohmivr preset harmonic > harmonic.ini
    bohmivr run harmonic.ini --stages propagate correlate spectrum oracle compare --workers 4
    bohmivr eigen harmonic.ini
    bohmivr compare runs/harmonic

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import dpm, ivr, oracle, spectrum
from .config import PRESETS, ConfigError, RunConfig, dump_config, emit_preset, parse_config
from .model import NodeError, PhysicalConstants

log = logging.getLogger("bohmivr")

STAGES = ("propagate", "correlate", "spectrum", "oracle", "compare")
MANIFEST = "manifest.json"
NUMERICAL_ERRORS = (FloatingPointError, oracle.EdgeLeakageError, oracle.EigenSolverError,
                    ivr.EndpointOutOfRangeError, ivr.EnsembleMismatchError, NodeError,
                    np.linalg.LinAlgError)


class PipelineError(RuntimeError):
    pass


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _read_keyvalue(path: Path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return {k: v for k, v in rows}


# ---------------------------------------------------------------------------
# ensemble persistence


def _write_ensemble(run: ivr.EnsembleRun, directory: Path) -> None:
    dpm.write_records(run.records, directory)
    rows = []
    for i, (x, w, rec) in enumerate(zip(run.grid.points, run.grid.weights, run.records)):
        rows.append((i, float(x), float(w), "" if rec.frozen_at is None else repr(rec.frozen_at)))
    _write_rows(directory / "status.csv", ["index", "x_init", "weight", "frozen_at"], rows)


def _load_ensemble(directory: Path, grid, spec, model, consts, hcfg, stride, op=None) -> ivr.EnsembleRun:
    status = directory / "status.csv"
    if not status.exists():
        raise PipelineError(f"no propagated ensemble in {directory}; run the propagate stage first")
    with open(status, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != len(grid):
        raise ivr.EnsembleMismatchError(f"{directory} holds {len(rows)} trajectories, config asks for {len(grid)}")
    records = []
    for i, row in enumerate(rows):
        rec = dpm.TrajectoryRecord.from_csv(directory / f"traj_{i:04d}.csv")
        rec.frozen_at = float(row["frozen_at"]) if row["frozen_at"] else None
        records.append(rec)
    return ivr.EnsembleRun(grid, records, spec, model, consts, hcfg, op, stride)


# ---------------------------------------------------------------------------
# pipeline


class _Context:
    def __init__(self, cfg: RunConfig, out: Path, workers: int):
        self.cfg = cfg
        self.out = out
        self.workers = workers
        self.consts = PhysicalConstants()
        self.spec = cfg.wavepacket_spec()
        self.model = cfg.model()
        self.hcfg = cfg.hierarchy_config()
        self.stride = cfg.hierarchy.output_stride
        self.op = cfg.operator()
        s = cfg.sampling
        self.grid = ivr.sample_initial_points(self.spec, s.n_points, s.scheme, s.density_cutoff)
        self.runs: dict[str, ivr.EnsembleRun] = {}

    @property
    def snapshot_interval(self) -> float:
        return self.hcfg.step * self.stride

    def operator_grids(self):
        c, s = self.cfg.correlation, self.cfg.sampling
        grid_a = ivr.sample_initial_points(self.spec, s.n_points, s.scheme, s.density_cutoff, op=self.op)
        grid_p = ivr.sample_initial_points(self.spec, c.operator_plain_points, s.scheme, c.operator_plain_cutoff)
        return grid_a, grid_p

    def ensemble(self, name: str) -> ivr.EnsembleRun:
        if name not in self.runs:
            if name == "trajectories":
                self.runs[name] = _load_ensemble(self.out / name, self.grid, self.spec, self.model,
                                                 self.consts, self.hcfg, self.stride)
            else:
                grid_a, grid_p = self.operator_grids()
                grid, op = (grid_a, self.op) if name == "operator_trajectories" else (grid_p, None)
                self.runs[name] = _load_ensemble(self.out / name, grid, self.spec, self.model,
                                                 self.consts, self.hcfg, self.stride, op)
        return self.runs[name]


def _stage_propagate(ctx: _Context) -> None:
    run = ivr.run_ensemble(ctx.grid, ctx.spec, ctx.model, ctx.consts, ctx.hcfg, ctx.stride, workers=ctx.workers)
    ctx.runs["trajectories"] = run
    _write_ensemble(run, ctx.out / "trajectories")
    if ctx.op is not None:
        grid_a, grid_p = ctx.operator_grids()
        for name, grid, op in (("operator_trajectories", grid_a, ctx.op), ("operator_plain_trajectories", grid_p, None)):
            r = ivr.run_ensemble(grid, ctx.spec, ctx.model, ctx.consts, ctx.hcfg, ctx.stride, op=op,
                                 workers=ctx.workers)
            ctx.runs[name] = r
            _write_ensemble(r, ctx.out / name)


def _stage_correlate(ctx: _Context) -> None:
    run = ctx.ensemble("trajectories")
    series = ivr.autocorrelation(run, form=ctx.cfg.correlation.form)
    series.to_csv(ctx.out / "correlation.csv")
    first, count = dpm.detect_crossings(run.records)
    residual = max(dpm.jacobian_consistency(r) for r in run.records)
    n_frozen = sum(f is not None for f in run.frozen)
    _write_rows(ctx.out / "diagnostics.csv", ["quantity", "value"], [
        ("first_crossing_time", "" if first is None else repr(first)),
        ("crossing_count", count),
        ("max_jacobian_residual", residual),
        ("frozen_trajectories", n_frozen),
    ])
    if ctx.op is not None:
        op_series = ivr.operator_correlation(ctx.ensemble("operator_trajectories"),
                                             ctx.ensemble("operator_plain_trajectories"), ctx.op, ctx.consts)
        op_series.to_csv(ctx.out / "operator_correlation.csv")


def _stage_spectrum(ctx: _Context) -> None:
    path = ctx.out / "correlation.csv"
    if not path.exists():
        raise PipelineError("spectrum stage needs correlation.csv; run correlate first")
    sp = ctx.cfg.spectrum
    result = spectrum.fourier_spectrum(ivr.CorrelationSeries.from_csv(path), ctx.cfg.window(),
                                       sp.omega_min, sp.omega_max, sp.n_omega, sp.rel_threshold)
    result.to_csv(ctx.out / "spectrum.csv")
    result.peaks_to_csv(ctx.out / "peaks.csv")


def _stage_oracle(ctx: _Context) -> None:
    o = ctx.cfg.oracle
    grid = ctx.cfg.oracle_grid()
    stride = max(1, int(round(ctx.snapshot_interval / o.dt)))
    series, _ = oracle.split_operator_propagate(ctx.model, ctx.spec, grid, o.dt, ctx.hcfg.t_final, stride, ctx.consts)
    series.to_csv(ctx.out / "oracle_correlation.csv")
    egrid = ctx.cfg.eigen_grid()
    eig = oracle.dvr_eigensolve(ctx.model, egrid, o.n_states, ctx.consts)
    eig.to_csv(ctx.out / "eigenvalues.csv")
    coeffs = oracle.projection_coefficients(ctx.spec, eig, egrid, ctx.consts)
    _write_rows(ctx.out / "projections.csv", ["index", "energy", "coefficient"],
                [(i, float(e), float(c)) for i, (e, c) in enumerate(zip(eig.energies, coeffs))])
    if ctx.op is not None:
        ref = oracle.operator_correlation_reference(ctx.model, ctx.spec, ctx.op, grid, o.dt,
                                                    ctx.hcfg.t_final, stride, ctx.consts)
        ref.to_csv(ctx.out / "oracle_operator_correlation.csv")


def _aligned(ref: ivr.CorrelationSeries, times: np.ndarray) -> np.ndarray:
    if len(ref.times) == len(times) and np.allclose(ref.times, times, rtol=0, atol=1e-9):
        return ref.values
    return np.interp(times, ref.times, ref.values.real) + 1j * np.interp(times, ref.times, ref.values.imag)


def compare_directory(directory) -> list[tuple[str, float]]:
    """Deviation metrics between trajectory and grid results stored in a run directory."""
    d = Path(directory)
    rows: list[tuple[str, float]] = []
    for mine, ref, label in (("correlation.csv", "oracle_correlation.csv", "autocorrelation"),
                             ("operator_correlation.csv", "oracle_operator_correlation.csv", "operator")):
        if not (d / mine).exists() or not (d / ref).exists():
            continue
        a = ivr.CorrelationSeries.from_csv(d / mine)
        b = _aligned(ivr.CorrelationSeries.from_csv(d / ref), a.times)
        rows.append((f"{label}_max_abs_magnitude_dev", float(np.max(np.abs(np.abs(a.values) - np.abs(b))))))
        rows.append((f"{label}_rel_l2", float(np.linalg.norm(a.values - b) / np.linalg.norm(b))))
    if (d / "peaks.csv").exists() and (d / "eigenvalues.csv").exists():
        peaks = np.loadtxt(d / "peaks.csv", delimiter=",", skiprows=1, ndmin=2)
        energies = np.loadtxt(d / "eigenvalues.csv", delimiter=",", skiprows=1, ndmin=2)[:, 1]
        if len(peaks):
            for i, e in enumerate(energies):
                rows.append((f"peak_dev_E{i}", float(np.min(np.abs(peaks[:, 0] - e)))))
    if not rows:
        raise PipelineError(f"nothing to compare in {d}")
    return rows


def _stage_compare(ctx: _Context) -> None:
    _write_rows(ctx.out / "compare.csv", ["metric", "value"], compare_directory(ctx.out))


STAGE_FUNCS = {
    "propagate": _stage_propagate,
    "correlate": _stage_correlate,
    "spectrum": _stage_spectrum,
    "oracle": _stage_oracle,
    "compare": _stage_compare,
}


def run_pipeline(cfg: RunConfig, stages=STAGES, workers: int | None = None, out=None) -> dict:
    """Run the requested stages in dependency order and write the manifest last.

    Returns the manifest.  Any failure propagates and leaves no manifest.
    """
    unknown = set(stages) - set(STAGES)
    if unknown:
        raise ConfigError(f"unknown stages {sorted(unknown)}")
    out = Path(out if out is not None else cfg.run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / MANIFEST
    if manifest_path.exists():
        manifest_path.unlink()
    workers = workers or cfg.run.workers
    ctx = _Context(cfg, out, workers)
    timings = {}
    ordered = [s for s in STAGES if s in stages]
    for stage in ordered:
        t0 = time.perf_counter()
        log.info("stage %s", stage)
        STAGE_FUNCS[stage](ctx)
        timings[stage] = time.perf_counter() - t0

    status = []
    traj_status = out / "trajectories" / "status.csv"
    if traj_status.exists():
        with open(traj_status, newline="") as fh:
            for row in csv.DictReader(fh):
                state = "ok" if not row["frozen_at"] else f"frozen-at-{row['frozen_at']}"
                status.append({"index": int(row["index"]), "x_init": float(row["x_init"]), "status": state})
    files = {str(p.relative_to(out)): _sha256(p)
             for p in sorted(out.rglob("*")) if p.is_file() and p.name != MANIFEST}
    manifest = {
        "config": dump_config(cfg),
        "stages": ordered,
        "workers": workers,
        "conventions": {
            "amplitude_convention": cfg.wavepacket.amplitude_convention,
            "correlation_form": cfg.correlation.form,
        },
        "grid": {"points": ctx.grid.points.tolist(), "weights": ctx.grid.weights.tolist()},
        "trajectories": status,
        "files": files,
        "timings_s": timings,
    }
    tmp = out / (MANIFEST + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2))
    tmp.replace(manifest_path)
    return manifest


# ---------------------------------------------------------------------------
# entry point


def _load(path: str) -> RunConfig:
    return parse_config(Path(path).read_text())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bohmivr", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preset", help="print a ready-to-run configuration")
    p.add_argument("name", choices=PRESETS)

    p = sub.add_parser("run", help="run pipeline stages for a configuration file")
    p.add_argument("config")
    p.add_argument("--stages", nargs="+", choices=STAGES, default=list(STAGES))
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("eigen", help="grid eigenvalues and projection coefficients")
    p.add_argument("config")

    p = sub.add_parser("compare", help="print deviation metrics for a finished run directory")
    p.add_argument("directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "preset":
            sys.stdout.write(emit_preset(args.name))
        elif args.command == "run":
            cfg = _load(args.config)
            if args.workers is not None and args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            manifest = run_pipeline(cfg, args.stages, args.workers, args.out)
            print(f"wrote {len(manifest['files'])} files; stages: {' '.join(manifest['stages'])}")
        elif args.command == "eigen":
            cfg = _load(args.config)
            grid = cfg.eigen_grid()
            eig = oracle.dvr_eigensolve(cfg.model(), grid, cfg.oracle.n_states)
            coeffs = oracle.projection_coefficients(cfg.wavepacket_spec(), eig, grid)
            print("index,energy,coefficient")
            for i, (e, c) in enumerate(zip(eig.energies, coeffs)):
                print(f"{i},{float(e)!r},{float(c)!r}")
        elif args.command == "compare":
            print("metric,value")
            for name, value in compare_directory(args.directory):
                print(f"{name},{value!r}")
    except (ConfigError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""
Bohm initial-value representation of time-correlation functions.

Trajectories are launched from quadrature points x_j(0) with weights w_j so
that sum_j w_j f(x_j) approximates the integral of f over the initial
support.  Correlation functions are then plain weighted sums over the
trajectory endpoints.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import roots_hermite

from .dpm import HierarchyConfig, TrajectoryRecord, integrate_trajectory
from .model import (
    GaussianWindow,
    Identity,
    NodeError,
    OperatorSpec,
    PhysicalConstants,
    PotentialModel,
    WavepacketSpec,
    wavefunction_value,
)

log = logging.getLogger(__name__)

JACOBIAN = "jacobian"
PAPER_LITERAL_FORM = "paper_literal"


class EnsembleMismatchError(ValueError):
    pass


class EndpointOutOfRangeError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureGrid:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        if pts.shape != wts.shape:
            raise ValueError("points and weights differ in length")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("points must be strictly increasing")
        if np.any(wts <= 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    def __len__(self):
        return len(self.points)


@dataclass
class CorrelationSeries:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values differ in length")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def is_uniform(self, rtol=1e-9) -> bool:
        if len(self.times) < 2 or self.times[0] != 0.0:
            return False
        steps = np.diff(self.times)
        return bool(np.all(np.abs(steps - steps[0]) <= rtol * abs(steps[0])))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "re_c", "im_c", "abs_c"])
            for t, c in zip(self.times, self.values):
                w.writerow([repr(float(t)), repr(float(c.real)), repr(float(c.imag)), repr(float(abs(c)))])

    @classmethod
    def from_csv(cls, path) -> "CorrelationSeries":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1] + 1j * data[:, 2])


@dataclass
class EnsembleRun:
    grid: QuadratureGrid
    records: list[TrajectoryRecord]
    spec: WavepacketSpec
    model: PotentialModel
    consts: PhysicalConstants
    config: HierarchyConfig
    op: OperatorSpec | None = None
    output_stride: int = 1

    def __post_init__(self):
        if len(self.records) != len(self.grid):
            raise EnsembleMismatchError("need exactly one record per grid point")
        t = self.records[0].t
        for r in self.records:
            if not np.array_equal(r.t, t):
                raise EnsembleMismatchError("records do not share snapshot times")

    @property
    def times(self) -> np.ndarray:
        return self.records[0].t

    @property
    def frozen(self) -> list[float | None]:
        return [r.frozen_at for r in self.records]

    def stacked(self, attr: str) -> np.ndarray:
        return np.stack([getattr(r, attr) for r in self.records])


def density_gaussian(spec: WavepacketSpec, op: OperatorSpec | None = None) -> tuple[float, float]:
    """(centre, a) such that the launch density is proportional to exp(-a (x - centre)^2).

    A Gaussian window narrows and shifts the packet; other operators are
    ignored here and sampled over the bare packet's support.
    """
    a = -spec.curvature
    if isinstance(op, GaussianWindow):
        k = a + 2 * op.gamma
        return (a * spec.x0 + 2 * op.gamma * op.x1) / k, k
    return spec.x0, a


def packet_half_width(spec: WavepacketSpec, density_cutoff: float, op: OperatorSpec | None = None) -> float:
    """Distance from the centre at which the density falls to cutoff times its peak."""
    return math.sqrt(math.log(1.0 / density_cutoff) / density_gaussian(spec, op)[1])


def sample_initial_points(spec: WavepacketSpec, n_points: int, scheme: str = "uniform",
                          density_cutoff: float = 1e-8, op: OperatorSpec | None = None) -> QuadratureGrid:
    """Launch points and weights for integrals over the initial packet support.

    ``uniform`` spaces points evenly on [x0 - L, x0 + L] with trapezoid
    weights.  ``gauss-hermite`` uses Gauss-Hermite nodes matched to the
    packet density, with weights rescaled so that sum w f(x) ~ int f dx.
    Passing ``op`` samples the support of a(x) psi_0(x) instead.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if not 0 < density_cutoff < 1:
        raise ValueError("density_cutoff must lie in (0, 1)")
    centre, a = density_gaussian(spec, op)
    if scheme == "uniform":
        L = math.sqrt(math.log(1.0 / density_cutoff) / a)
        pts = np.linspace(centre - L, centre + L, n_points)
        w = np.full(n_points, pts[1] - pts[0])
        w[0] *= 0.5
        w[-1] *= 0.5
        return QuadratureGrid(pts, w)
    if scheme == "gauss-hermite":
        xi, wh = roots_hermite(n_points)
        pts = centre + xi / math.sqrt(a)
        w = wh * np.exp(xi ** 2) / math.sqrt(a)
        return QuadratureGrid(pts, w)
    raise ValueError(f"unknown sampling scheme {scheme!r}")


def _propagate_one(args):
    return integrate_trajectory(*args)


def run_ensemble(grid: QuadratureGrid, spec: WavepacketSpec, model: PotentialModel,
                 consts: PhysicalConstants, config: HierarchyConfig, output_stride: int = 1,
                 op: OperatorSpec | None = None, workers: int = 1) -> EnsembleRun:
    """Integrate one trajectory per grid point; results are collected in grid order."""
    tasks = [(float(x), spec, model, consts, config, output_stride, op) for x in grid.points]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_propagate_one, tasks))
    else:
        records = [_propagate_one(t) for t in tasks]
    return EnsembleRun(grid, records, spec, model, consts, config, op, output_stride)


def autocorrelation(run: EnsembleRun, spec: WavepacketSpec | None = None,
                    consts: PhysicalConstants | None = None, form: str = JACOBIAN) -> CorrelationSeries:
    """c(t) = <psi_0 | psi(t)> as a weighted sum over trajectories.

    ``jacobian`` weights each term by J^(1/2) = exp(lnJ/2); ``paper_literal``
    uses exp(-2 C_0(t)) in its place.
    """
    spec = spec or run.spec
    consts = consts or run.consts
    if spec != run.spec:
        raise EnsembleMismatchError("wavepacket differs from the one used to launch the run")
    n_frozen = sum(f is not None for f in run.frozen)
    if n_frozen:
        log.warning("%d of %d trajectories frozen after divergence", n_frozen, len(run.records))
    x = run.stacked("x")
    C0 = np.stack([r.C[:, 0] for r in run.records])
    S0 = np.stack([r.S[:, 0] for r in run.records])
    if form == JACOBIAN:
        amp = np.exp(0.5 * run.stacked("lnJ"))
    elif form == PAPER_LITERAL_FORM:
        amp = np.exp(-2.0 * C0)
    else:
        raise ValueError(f"unknown correlation form {form!r}")
    phase = np.exp(1j * (S0 - S0[:, :1]) / consts.hbar)
    psi_init = wavefunction_value(spec, x[:, :1], consts)
    terms = run.grid.weights[:, None] * amp * phase * np.conj(wavefunction_value(spec, x, consts)) * psi_init
    values = np.zeros(terms.shape[1], dtype=complex)
    for row in terms:
        values += row
    return CorrelationSeries(run.times.copy(), values)


def operator_correlation(run_A: EnsembleRun, run_plain: EnsembleRun, op: OperatorSpec,
                         consts: PhysicalConstants | None = None) -> CorrelationSeries:
    """<psi(t)| a |psi_A(t)> with psi_A = a psi_0, over the psi_A ensemble.

    psi(t) is rebuilt as a field by monotone cubic interpolation of C_0 and
    S_0 over the plain ensemble's sorted endpoints; psi_A at each of its own
    endpoints comes directly from that trajectory's C_0 and S_0.
    """
    consts = consts or run_plain.consts
    if not np.array_equal(run_A.times, run_plain.times):
        raise EnsembleMismatchError("ensembles do not share snapshot times")
    if run_A.op != op and not (run_A.op is None and isinstance(op, Identity)):
        raise EnsembleMismatchError("psi_A ensemble was launched with a different operator")
    hbar = consts.hbar
    y = run_A.stacked("x")
    lnJ = run_A.stacked("lnJ")
    CA = np.stack([r.C[:, 0] for r in run_A.records])
    SA = np.stack([r.S[:, 0] for r in run_A.records])
    xp = run_plain.stacked("x")
    Cp = np.stack([r.C[:, 0] for r in run_plain.records])
    Sp = np.stack([r.S[:, 0] for r in run_plain.records])
    a0_sign = np.sign(op.value(y[:, 0]))
    w = run_A.grid.weights

    values = np.zeros(len(run_A.times), dtype=complex)
    for k, t in enumerate(run_A.times):
        order = np.argsort(xp[:, k], kind="stable")
        xs = xp[order, k]
        if np.any(np.diff(xs) <= 0):
            raise EnsembleMismatchError(f"coincident plain endpoints at t={t}")
        yk = y[:, k]
        if yk.min() < xs[0] or yk.max() > xs[-1]:
            raise EndpointOutOfRangeError(
                f"psi_A endpoint outside the plain ensemble hull [{xs[0]:.4g}, {xs[-1]:.4g}] at t={t:.4g}")
        a = op.value(yk)
        if np.any(np.sign(a) != a0_sign):
            raise NodeError(f"operator amplitude changes sign along a trajectory at t={t:.4g}")
        C_field = PchipInterpolator(xs, Cp[order, k])(yk)
        S_field = PchipInterpolator(xs, Sp[order, k])(yk)
        psi_conj = np.exp(C_field - 1j * S_field / hbar)
        psi_A = np.exp(CA[:, k] + 1j * SA[:, k] / hbar)
        terms = w * np.exp(lnJ[:, k]) * a * psi_conj * psi_A
        acc = 0j
        for term in terms:
            acc += term
        values[k] = acc
    return CorrelationSeries(run_A.times.copy(), values)

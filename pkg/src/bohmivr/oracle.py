"""
Grid quantum mechanics used as the reference for trajectory results.

Nothing here touches trajectories: wavefunctions live on a fixed uniform
grid, time evolution is Strang-split (potential half step, kinetic step in
momentum space, potential half step) and bound states come from a sinc-DVR
Hamiltonian.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .ivr import CorrelationSeries
from .model import (
    OperatorSpec,
    PhysicalConstants,
    PotentialModel,
    WavepacketSpec,
    potential_value,
    wavefunction_value,
)

EDGE_LIMIT = 1e-8


class EdgeLeakageError(RuntimeError):
    pass


class EigenSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    x_min: float = -10.0
    x_max: float = 10.0
    n_grid: int = 512

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be below x_max")
        if self.n_grid < 64 or self.n_grid & (self.n_grid - 1):
            raise ValueError("n_grid must be a power of two and at least 64")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_grid

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_grid)


@dataclass
class EigenResult:
    energies: np.ndarray
    states: np.ndarray  # shape (n_states, n_grid), normalised with the dx-weighted dot product

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "energy"])
            for i, e in enumerate(self.energies):
                w.writerow([i, repr(float(e))])


def evolve_on_grid(model: PotentialModel, psi0: np.ndarray, grid: GridSpec, dt: float,
                   t_final: float, stride: int = 1, consts: PhysicalConstants = PhysicalConstants()):
    """Yield (t, psi) every ``stride`` Strang steps, starting with (0, psi0).

    The step is adjusted so that t_final is an integer number of steps.
    Raises EdgeLeakageError as soon as |psi|^2 at either boundary exceeds 1e-8.
    """
    if dt > 0.01:
        raise ValueError("dt must not exceed 0.01")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    x = grid.x
    n_steps = int(round(t_final / dt))
    h = t_final / n_steps if n_steps else dt
    k = 2 * np.pi * np.fft.fftfreq(grid.n_grid, d=grid.dx)
    half_v = np.exp(-0.5j * h * potential_value(model, x) / consts.hbar)
    kin = np.exp(-1j * h * consts.hbar * k ** 2 / (2 * consts.mass))

    def check_edges(psi, t):
        if abs(psi[0]) ** 2 > EDGE_LIMIT or abs(psi[-1]) ** 2 > EDGE_LIMIT:
            raise EdgeLeakageError(f"wavefunction reaches the grid edge at t={t:.4g}")

    psi = np.array(psi0, dtype=complex)
    check_edges(psi, 0.0)
    yield 0.0, psi.copy()
    for step in range(1, n_steps + 1):
        psi = half_v * np.fft.ifft(kin * np.fft.fft(half_v * psi))
        check_edges(psi, step * h)
        if step % stride == 0:
            yield step * h, psi.copy()


def split_operator_propagate(model: PotentialModel, spec: WavepacketSpec, grid: GridSpec,
                             dt: float, t_final: float, stride: int = 1,
                             consts: PhysicalConstants = PhysicalConstants(),
                             keep_snapshots: bool = False, psi_init: np.ndarray | None = None):
    """Exact autocorrelation <psi_0|psi(t)> on the grid.

    Returns (series, snapshots); snapshots is None unless requested.
    ``psi_init`` replaces the Gaussian packet, e.g. by an eigenvector.
    """
    psi0 = wavefunction_value(spec, grid.x, consts) if psi_init is None else np.asarray(psi_init, dtype=complex)
    times, values, snaps = [], [], []
    for t, psi in evolve_on_grid(model, psi0, grid, dt, t_final, stride, consts):
        times.append(t)
        values.append(grid.dx * np.vdot(psi0, psi))
        if keep_snapshots:
            snaps.append(psi)
    series = CorrelationSeries(np.array(times), np.array(values))
    return series, (np.array(snaps) if keep_snapshots else None)


def operator_correlation_reference(model: PotentialModel, spec: WavepacketSpec, op: OperatorSpec,
                                   grid: GridSpec, dt: float, t_final: float, stride: int = 1,
                                   consts: PhysicalConstants = PhysicalConstants()) -> CorrelationSeries:
    """<psi(t)| a |psi_A(t)> with psi_A = a psi_0, both propagated on the grid."""
    psi0 = wavefunction_value(spec, grid.x, consts)
    a = op.value(grid.x)
    plain = evolve_on_grid(model, psi0, grid, dt, t_final, stride, consts)
    dressed = evolve_on_grid(model, a * psi0, grid, dt, t_final, stride, consts)
    times, values = [], []
    for (t, psi), (_, psi_a) in zip(plain, dressed):
        times.append(t)
        values.append(grid.dx * np.vdot(psi, a * psi_a))
    return CorrelationSeries(np.array(times), np.array(values))


def sinc_dvr_hamiltonian(model: PotentialModel, grid: GridSpec,
                         consts: PhysicalConstants = PhysicalConstants()) -> np.ndarray:
    n = grid.n_grid
    idx = np.arange(n)
    diff = idx[:, None] - idx[None, :]
    with np.errstate(divide="ignore"):
        T = np.where(diff == 0, np.pi ** 2 / 3, 2.0 * (-1.0) ** diff / np.maximum(diff ** 2, 1))
    T *= consts.hbar ** 2 / (2 * consts.mass * grid.dx ** 2)
    return T + np.diag(potential_value(model, grid.x))


def dvr_eigensolve(model: PotentialModel, grid: GridSpec, n_states: int,
                   consts: PhysicalConstants = PhysicalConstants()) -> EigenResult:
    if not 1 <= n_states <= grid.n_grid:
        raise ValueError("n_states must lie in [1, n_grid]")
    H = sinc_dvr_hamiltonian(model, grid, consts)
    try:
        energies, vecs = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc
    states = vecs[:, :n_states].T / math.sqrt(grid.dx)
    return EigenResult(energies[:n_states].copy(), states)


def projection_coefficients(spec: WavepacketSpec, eig: EigenResult, grid: GridSpec,
                            consts: PhysicalConstants = PhysicalConstants()) -> np.ndarray:
    """|<n|psi_0>|^2 for each eigenvector."""
    psi0 = wavefunction_value(spec, grid.x, consts)
    return np.abs(grid.dx * (eig.states.conj() @ psi0)) ** 2


def bound_state_autocorrelation(t, coefficients, energies, hbar: float = 1.0):
    """sum_n c_n exp(-i E_n t / hbar)."""
    t = np.asarray(t, dtype=float)
    return np.exp(-1j * np.multiply.outer(t, np.asarray(energies)) / hbar) @ np.asarray(coefficients)


def coherent_amplitude_sq(spec: WavepacketSpec) -> float:
    return 0.5 * spec.beta * spec.x0 ** 2


def analytic_harmonic_autocorrelation(t, spec: WavepacketSpec):
    """Closed-form c(t) for V = x^2/2 - 1 and a displaced ground-state packet.

    Exact only when the packet is the unit-frequency coherent state (beta = 1,
    normalized convention, hbar = m = 1).
    """
    t = np.asarray(t, dtype=float)
    a2 = coherent_amplitude_sq(spec)
    return np.exp(a2 * (np.exp(-1j * t) - 1.0)) * np.exp(-0.5j * t) * np.exp(1j * t)

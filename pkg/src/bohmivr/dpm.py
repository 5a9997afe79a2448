"""
Derivative propagation along a single quantum trajectory.

The state carried along a path x(t) is the stack of spatial derivatives of
the log-amplitude C and the action S, truncated at ``n_order``, together
with the log of the volume-element Jacobian.  The equations of motion are
local to the path, so every trajectory is an independent ODE system.

Internally the state is a flat vector ``[x, lnJ, C_0..C_n, S_0..S_n]``; the
right-hand side and the fixed-step RK4 loop are compiled with numba.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

from .model import (
    OperatorSpec,
    PhysicalConstants,
    PotentialModel,
    WavepacketSpec,
    initial_cumulants,
    operator_cumulants,
    potential_code,
)

OVERFLOW_LIMIT = 1e12


class DivergenceError(FloatingPointError):
    """A trajectory component left the finite range."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class CrossingGridError(ValueError):
    pass


@dataclass
class TrajectoryState:
    t: float
    x: float
    C: np.ndarray
    S: np.ndarray
    lnJ: float = 0.0

    @property
    def n_order(self) -> int:
        return len(self.C) - 1


@dataclass(frozen=True)
class HierarchyConfig:
    n_order: int = 4
    lam: float = 0.0
    dt: float = 1e-3
    t_final: float = 2 * math.pi
    damp_top_orders: int = 2
    damp_c: bool = True
    damp_s: bool = True

    def __post_init__(self):
        if self.n_order < 2:
            raise ValueError("n_order must be >= 2")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.t_final < 0:
            raise ValueError("t_final must be >= 0")
        if self.t_final > 0 and self.dt > self.t_final:
            raise ValueError("dt must not exceed t_final")
        if not 0 <= self.damp_top_orders <= self.n_order:
            raise ValueError("damp_top_orders must lie in [0, n_order]")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def step(self) -> float:
        """Step actually taken: t_final split into an integer number of steps."""
        n = self.n_steps
        return self.t_final / n if n else self.dt


@dataclass
class TrajectoryRecord:
    """Snapshots of one trajectory on a uniform output grid.

    Arrays are indexed by snapshot; ``C`` and ``S`` have shape
    (n_snapshots, n_order + 1).  ``frozen_at`` is the time of the last finite
    state if the trajectory diverged; later snapshots repeat that state.
    """

    t: np.ndarray
    x: np.ndarray
    lnJ: np.ndarray
    C: np.ndarray
    S: np.ndarray
    frozen_at: float | None = None

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> TrajectoryState:
        return TrajectoryState(float(self.t[i]), float(self.x[i]), self.C[i].copy(),
                               self.S[i].copy(), float(self.lnJ[i]))

    @property
    def states(self) -> list[TrajectoryState]:
        return [self[i] for i in range(len(self))]

    @property
    def n_order(self) -> int:
        return self.C.shape[1] - 1

    @property
    def x_init(self) -> float:
        return float(self.x[0])

    def to_csv(self, path) -> None:
        n = self.n_order
        header = ["t", "x", "lnJ"] + [f"C{k}" for k in range(n + 1)] + [f"S{k}" for k in range(n + 1)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(len(self)):
                row = [self.t[i], self.x[i], self.lnJ[i], *self.C[i], *self.S[i]]
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "TrajectoryRecord":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, data = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
        n = (len(header) - 3) // 2 - 1
        return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3:4 + n], data[:, 4 + n:])


# ---------------------------------------------------------------------------
# compiled kernels


def binomial_table(n: int) -> np.ndarray:
    table = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        for j in range(i + 1):
            table[i, j] = math.comb(i, j)
    return table


@numba.njit(cache=True)
def _potential_derivs(x, n, kind, params, out):
    if kind == 1:
        depth, width = params[0], params[1]
        u = x / width
        g = math.exp(-0.5 * u * u)
        h_prev, h = 1.0, u
        scale = 1.0
        for k in range(n + 1):
            if k == 0:
                hk = 1.0
            elif k == 1:
                hk = u
            else:
                h_prev, h = h, u * h - (k - 1) * h_prev
                hk = h
            sign = 1.0 if k % 2 == 0 else -1.0
            out[k] = -depth * sign * hk * g / scale
            scale *= width
    else:
        deg = params.shape[0] - 1
        for k in range(n + 1):
            total = 0.0
            for j in range(deg, k - 1, -1):
                perm = 1.0
                for r in range(j - k + 1, j + 1):
                    perm *= r
                total = total * x + params[j] * perm
            out[k] = total


@numba.njit(cache=True)
def _rhs(y, n, kind, params, binom, hbar, m, lam, damp_top, damp_c, damp_s, vbuf, dy):
    # layout: y = [x, lnJ, C_0..C_n, S_0..S_n]; derivatives above n are zero
    c0 = 2
    s0 = 3 + n
    S1 = y[s0 + 1]
    S2 = y[s0 + 2]
    dy[0] = S1 / m
    dy[1] = S2 / m
    _potential_derivs(y[0], n, kind, params, vbuf)
    for k in range(n + 1):
        s_k2 = y[s0 + k + 2] if k + 2 <= n else 0.0
        c_k2 = y[c0 + k + 2] if k + 2 <= n else 0.0
        s_k1 = y[s0 + k + 1] if k + 1 <= n else 0.0
        c_k1 = y[c0 + k + 1] if k + 1 <= n else 0.0
        sc = 0.0
        ss = 0.0
        cc = 0.0
        for j in range(k + 1):
            b = binom[k, j]
            s_a = y[s0 + k + 1 - j] if k + 1 - j <= n else 0.0
            c_b = y[c0 + j + 1] if j + 1 <= n else 0.0
            s_b = y[s0 + j + 1] if j + 1 <= n else 0.0
            c_a = y[c0 + k + 1 - j] if k + 1 - j <= n else 0.0
            sc += b * s_a * c_b
            ss += b * s_b * s_a
            cc += b * c_b * c_a
        dC = -(s_k2 + 2.0 * sc) / (2.0 * m) + S1 * c_k1 / m
        dS = -ss / (2.0 * m) + hbar * hbar / (2.0 * m) * (c_k2 + cc) - vbuf[k] + S1 * s_k1 / m
        if lam > 0.0 and k > n - damp_top:
            if damp_c:
                dC -= lam * y[c0 + k]
            if damp_s:
                dS -= lam * y[s0 + k]
        dy[c0 + k] = dC
        dy[s0 + k] = dS


@numba.njit(cache=True)
def _integrate(y0, n, kind, params, binom, hbar, m, lam, damp_top, damp_c, damp_s,
               dt, n_steps, stride, limit, out):
    """Fixed-step RK4; returns the step index at which the state froze, or -1."""
    dim = y0.shape[0]
    y = y0.copy()
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    tmp = np.empty(dim)
    vbuf = np.empty(n + 1)
    out[0, :] = y
    snap = 1
    frozen = -1
    for step in range(1, n_steps + 1):
        if frozen < 0:
            _rhs(y, n, kind, params, binom, hbar, m, lam, damp_top, damp_c, damp_s, vbuf, k1)
            for i in range(dim):
                tmp[i] = y[i] + 0.5 * dt * k1[i]
            _rhs(tmp, n, kind, params, binom, hbar, m, lam, damp_top, damp_c, damp_s, vbuf, k2)
            for i in range(dim):
                tmp[i] = y[i] + 0.5 * dt * k2[i]
            _rhs(tmp, n, kind, params, binom, hbar, m, lam, damp_top, damp_c, damp_s, vbuf, k3)
            for i in range(dim):
                tmp[i] = y[i] + dt * k3[i]
            _rhs(tmp, n, kind, params, binom, hbar, m, lam, damp_top, damp_c, damp_s, vbuf, k4)
            bad = False
            for i in range(dim):
                tmp[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not (abs(tmp[i]) <= limit):
                    bad = True
            if bad:
                frozen = step - 1
            else:
                for i in range(dim):
                    y[i] = tmp[i]
        if step % stride == 0:
            out[snap, :] = y
            snap += 1
    return frozen


# ---------------------------------------------------------------------------
# public operations


def _pack(state: TrajectoryState) -> np.ndarray:
    return np.concatenate(([state.x, state.lnJ], state.C, state.S)).astype(float)


def hierarchy_rhs(state: TrajectoryState, model: PotentialModel, consts: PhysicalConstants,
                  config: HierarchyConfig) -> TrajectoryState:
    """Time derivative of a trajectory state (returned in state form, with t = 1)."""
    n = config.n_order
    if len(state.C) != n + 1 or len(state.S) != n + 1:
        raise ValueError("state arrays must have length n_order + 1")
    y = _pack(state)
    if not np.all(np.abs(y) <= OVERFLOW_LIMIT):
        raise DivergenceError("state exceeds overflow limit", time=state.t)
    kind, params = potential_code(model)
    dy = np.empty_like(y)
    _rhs(y, n, kind, params, binomial_table(n), consts.hbar, consts.mass, config.lam,
         config.damp_top_orders, config.damp_c, config.damp_s, np.empty(n + 1), dy)
    if not np.all(np.abs(dy) <= OVERFLOW_LIMIT):
        raise DivergenceError("time derivative exceeds overflow limit", time=state.t)
    return TrajectoryState(1.0, dy[0], dy[2:3 + n], dy[3 + n:], dy[1])


def quantum_potential(state: TrajectoryState, consts: PhysicalConstants = PhysicalConstants()) -> float:
    if state.n_order < 2:
        raise ValueError("quantum potential needs C'' (n_order >= 2)")
    return -consts.hbar ** 2 / (2 * consts.mass) * (state.C[2] + state.C[1] ** 2)


def integrate_trajectory(x_init: float, spec: WavepacketSpec, model: PotentialModel,
                         consts: PhysicalConstants, config: HierarchyConfig,
                         output_stride: int = 1, op: OperatorSpec | None = None,
                         on_divergence: str = "freeze") -> TrajectoryRecord:
    """Propagate one trajectory launched at x_init with RK4.

    With ``op`` given the trajectory belongs to the packet a(x) psi_0(x)
    instead of psi_0.  A diverging trajectory is frozen at its last finite
    state (``on_divergence='freeze'``) or raises DivergenceError (``'raise'``).
    """
    if output_stride < 1:
        raise ValueError("output_stride must be >= 1")
    n = config.n_order
    if op is None:
        C, S = initial_cumulants(spec, x_init, n)
    else:
        C, S = operator_cumulants(op, spec, x_init, n, consts)
    y0 = _pack(TrajectoryState(0.0, x_init, C, S, 0.0))
    kind, params = potential_code(model)
    n_steps = config.n_steps
    dt = config.step
    n_snap = n_steps // output_stride + 1
    out = np.empty((n_snap, len(y0)))
    frozen = _integrate(y0, n, kind, params, binomial_table(n), consts.hbar, consts.mass,
                        config.lam, config.damp_top_orders, config.damp_c, config.damp_s,
                        dt, n_steps, output_stride, OVERFLOW_LIMIT, out)
    t = np.arange(n_snap) * (output_stride * dt)
    frozen_at = None if frozen < 0 else frozen * dt
    if frozen_at is not None and on_divergence == "raise":
        raise DivergenceError(f"trajectory from x={x_init} diverged at t={frozen_at}", time=frozen_at)
    return TrajectoryRecord(t, out[:, 0].copy(), out[:, 1].copy(), out[:, 2:3 + n].copy(),
                            out[:, 3 + n:].copy(), frozen_at)


def jacobian_consistency(record: TrajectoryRecord) -> float:
    """Largest violation of lnJ(t) = -2 (C_0(t) - C_0(0)) over the record."""
    if len(record) == 0:
        raise ValueError("empty record")
    resid = record.lnJ + 2.0 * (record.C[:, 0] - record.C[0, 0])
    return float(np.max(np.abs(resid)))


def detect_crossings(records: Sequence[TrajectoryRecord]) -> tuple[float | None, int]:
    """First time adjacent trajectories swap order, and the total number of
    inverted adjacent pairs summed over all snapshots."""
    if not records:
        return None, 0
    t = records[0].t
    for r in records[1:]:
        if len(r.t) != len(t) or not np.array_equal(r.t, t):
            raise CrossingGridError("records do not share a snapshot grid")
    xs = np.stack([r.x for r in records])
    if np.any(np.diff(xs[:, 0]) <= 0):
        raise CrossingGridError("initial positions must be strictly increasing")
    inverted = np.diff(xs, axis=0) <= 0
    per_snapshot = inverted.sum(axis=0)
    hits = np.nonzero(per_snapshot)[0]
    first = float(t[hits[0]]) if len(hits) else None
    return first, int(per_snapshot.sum())


def write_records(records: Sequence[TrajectoryRecord], directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, rec in enumerate(records):
        p = directory / f"traj_{i:04d}.csv"
        rec.to_csv(p)
        paths.append(p)
    return paths

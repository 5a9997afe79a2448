"""
Physical constants, 1-D potentials with analytic derivatives of every order,
the Gaussian initial wavepacket and multiplicative operators.

All objects are frozen dataclasses so they can be shipped to worker
processes and shared freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

NORMALIZED = "normalized"
PAPER_LITERAL = "paper_literal"
AMPLITUDE_CONVENTIONS = (NORMALIZED, PAPER_LITERAL)


class NodeError(ValueError):
    """Raised when an operator amplitude vanishes at an evaluation point."""


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and self.mass > 0):
            raise ValueError("hbar and mass must be strictly positive")


# ---------------------------------------------------------------------------
# Potentials


def hermite_recurrence(n: int, x: float) -> float:
    """Probabilists' Hermite polynomial He_n(x) by upward recurrence."""
    if n < 0:
        raise ValueError("n must be non-negative")
    h_prev, h = 1.0, x
    if n == 0:
        return h_prev
    for k in range(1, n):
        h_prev, h = h, x * h - k * h_prev
    return h


def _poly_deriv(coefficients: tuple[float, ...], x: float, n: int) -> float:
    # coefficients[k] multiplies x**k
    total = 0.0
    for k in range(len(coefficients) - 1, n - 1, -1):
        total = total * x + coefficients[k] * math.perm(k, n)
    return total


@dataclass(frozen=True)
class Polynomial:
    coefficients: tuple[float, ...] = (0.0,)
    kind = "polynomial"

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if not self.coefficients:
            raise ValueError("polynomial needs at least one coefficient")

    def poly_coefficients(self) -> tuple[float, ...]:
        return self.coefficients


@dataclass(frozen=True)
class Harmonic:
    """V = k x^2 / 2 + offset."""

    k: float = 1.0
    offset: float = -1.0
    kind = "harmonic"

    def poly_coefficients(self) -> tuple[float, ...]:
        return (self.offset, 0.0, 0.5 * self.k)


@dataclass(frozen=True)
class QuarticPerturbed:
    """V = k x^2 / 2 + a4 x^4 + offset."""

    k: float = 1.0
    a4: float = 0.01
    offset: float = -1.0
    kind = "quartic"

    def poly_coefficients(self) -> tuple[float, ...]:
        return (self.offset, 0.0, 0.5 * self.k, 0.0, self.a4)


@dataclass(frozen=True)
class InvertedGaussian:
    """V = -depth * exp(-x^2 / (2 width^2))."""

    depth: float = 1.0
    width: float = 1.0
    kind = "inverted_gaussian"

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("width must be positive")


PotentialModel = Union[Harmonic, QuarticPerturbed, InvertedGaussian, Polynomial]


def potential_value_deriv(model: PotentialModel, x: float, n: int) -> float:
    """n-th spatial derivative of the potential at x."""
    if n < 0:
        raise ValueError("derivative order must be non-negative")
    if isinstance(model, InvertedGaussian):
        u = x / model.width
        # d^n/du^n exp(-u^2/2) = (-1)^n He_n(u) exp(-u^2/2)
        return (-model.depth * (-1) ** n * hermite_recurrence(n, u)
                * math.exp(-0.5 * u * u) / model.width ** n)
    return _poly_deriv(model.poly_coefficients(), x, n)


def potential_value(model: PotentialModel, x):
    """Vectorised potential energy on an array of points."""
    x = np.asarray(x, dtype=float)
    if isinstance(model, InvertedGaussian):
        return -model.depth * np.exp(-0.5 * (x / model.width) ** 2)
    return np.polynomial.polynomial.polyval(x, model.poly_coefficients())


def potential_code(model: PotentialModel) -> tuple[int, np.ndarray]:
    """Flat (kind, params) encoding consumed by the compiled integrator."""
    if isinstance(model, InvertedGaussian):
        return 1, np.array([model.depth, model.width])
    return 0, np.array(model.poly_coefficients(), dtype=float)


# ---------------------------------------------------------------------------
# Initial wavepacket


@dataclass(frozen=True)
class WavepacketSpec:
    """Gaussian packet psi = exp(C + i S / hbar) with constant initial phase.

    ``amplitude_convention='normalized'`` uses C = ln(beta/pi)/4 - beta (x-x0)^2 / 2,
    which is normalised. ``'paper_literal'`` drops the factor 1/2 in the
    quadratic term; the resulting packet is narrower and not normalised.
    """

    beta: float = 1.0
    x0: float = 1.0
    phase0: float = 0.0
    amplitude_convention: str = NORMALIZED

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.amplitude_convention not in AMPLITUDE_CONVENTIONS:
            raise ValueError(f"unknown amplitude convention {self.amplitude_convention!r}")

    @property
    def curvature(self) -> float:
        """Second derivative of C (constant for a Gaussian)."""
        return -self.beta if self.amplitude_convention == NORMALIZED else -2.0 * self.beta

    def log_amplitude(self, x):
        x = np.asarray(x, dtype=float)
        return 0.25 * math.log(self.beta / math.pi) + 0.5 * self.curvature * (x - self.x0) ** 2


def initial_cumulants(spec: WavepacketSpec, x: float, n_order: int) -> tuple[np.ndarray, np.ndarray]:
    """C and S derivative stacks (index n holds the n-th derivative) at x."""
    if n_order < 2:
        raise ValueError("n_order must be at least 2")
    C = np.zeros(n_order + 1)
    S = np.zeros(n_order + 1)
    C[0] = float(spec.log_amplitude(x))
    C[1] = spec.curvature * (x - spec.x0)
    C[2] = spec.curvature
    S[0] = spec.phase0
    return C, S


def wavefunction_value(spec: WavepacketSpec, x, consts: PhysicalConstants = PhysicalConstants()):
    return np.exp(spec.log_amplitude(x) + 1j * spec.phase0 / consts.hbar)


# ---------------------------------------------------------------------------
# Multiplicative operators


@dataclass(frozen=True)
class Identity:
    kind = "identity"

    def value(self, x):
        return np.ones_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class GaussianWindow:
    """a(x) = exp(-gamma (x - x1)^2)."""

    gamma: float = 0.5
    x1: float = 0.0
    kind = "gaussian_window"

    def value(self, x):
        return np.exp(-self.gamma * (np.asarray(x, dtype=float) - self.x1) ** 2)


@dataclass(frozen=True)
class PolynomialMultiplier:
    coefficients: tuple[float, ...] = field(default=(1.0,))
    kind = "polynomial"

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    def value(self, x):
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), self.coefficients)


OperatorSpec = Union[Identity, GaussianWindow, PolynomialMultiplier]

NODE_TOL = 1e-12


def _log_series_derivs(taylor: list[float], n: int) -> float:
    # n-th derivative of ln p from the Taylor coefficients p_k = p^(k)/k!
    p0 = taylor[0]
    q = [math.log(abs(p0))]
    for k in range(1, n + 1):
        acc = taylor[k] if k < len(taylor) else 0.0
        for j in range(1, k):
            pk = taylor[k - j] if k - j < len(taylor) else 0.0
            acc -= (j / k) * q[j] * pk
        q.append(acc / p0)
    return q[n] * math.factorial(n)


def operator_log_deriv(op: OperatorSpec, x: float, n: int) -> float:
    """n-th derivative of ln|a(x)| for a multiplicative operator a."""
    if n < 0:
        raise ValueError("derivative order must be non-negative")
    if isinstance(op, Identity):
        return 0.0
    if isinstance(op, GaussianWindow):
        if n == 0:
            return -op.gamma * (x - op.x1) ** 2
        if n == 1:
            return -2.0 * op.gamma * (x - op.x1)
        if n == 2:
            return -2.0 * op.gamma
        return 0.0
    coeffs = op.coefficients
    taylor = [_poly_deriv(coeffs, x, k) / math.factorial(k) for k in range(len(coeffs))]
    if abs(taylor[0]) <= NODE_TOL:
        raise NodeError(f"operator amplitude vanishes at x={x}")
    return _log_series_derivs(taylor, n)


def operator_cumulants(op: OperatorSpec, spec: WavepacketSpec, x: float, n_order: int,
                       consts: PhysicalConstants = PhysicalConstants()) -> tuple[np.ndarray, np.ndarray]:
    """Cumulant stacks of a(x) * psi_0(x); a negative amplitude shifts the phase by pi."""
    C, S = initial_cumulants(spec, x, n_order)
    if isinstance(op, Identity):
        return C, S
    a = float(op.value(x))
    if abs(a) <= NODE_TOL:
        raise NodeError(f"operator amplitude vanishes at x={x}")
    for k in range(n_order + 1):
        C[k] += operator_log_deriv(op, x, k)
    if a < 0:
        S[0] += math.pi * consts.hbar
    return C, S

"""
Spectra of correlation functions and peak extraction.

The record is extended to negative times with c(-t) = c*(t), windowed, and
transformed by direct summation on an arbitrary frequency grid:

    I(w) = dt/(2 pi) |sum_k win(t_k) c(t_k) exp(i w t_k)|

so that a term exp(-i E t) in c(t) shows up as a peak at w = E.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .ivr import CorrelationSeries

WINDOWS = ("rectangular", "hann")


@dataclass(frozen=True)
class WindowSpec:
    kind: str = "hann"
    zero_pad_factor: int = 4

    def __post_init__(self):
        if self.kind not in WINDOWS:
            raise ValueError(f"unknown window {self.kind!r}")
        if self.zero_pad_factor < 1:
            raise ValueError("zero_pad_factor must be >= 1")


@dataclass(frozen=True)
class Peak:
    omega: float
    height: float


@dataclass
class SpectrumResult:
    omegas: np.ndarray
    intensities: np.ndarray
    peaks: list[Peak] = field(default_factory=list)
    resolution: float = 0.0  # main-lobe width of the window, in frequency units

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["omega", "intensity"])
            for o, i in zip(self.omegas, self.intensities):
                w.writerow([repr(float(o)), repr(float(i))])

    def peaks_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["omega", "height"])
            for p in self.peaks:
                w.writerow([repr(p.omega), repr(p.height)])


def _window(kind: str, t: np.ndarray, T: float) -> np.ndarray:
    if kind == "rectangular":
        return np.ones_like(t)
    return 0.5 * (1.0 + np.cos(np.pi * t / T))


def hermitian_extension(series: CorrelationSeries) -> tuple[np.ndarray, np.ndarray]:
    """Times on [-T, T] and values with c(-t) = conj(c(t))."""
    t, c = series.times, series.values
    return np.concatenate((-t[:0:-1], t)), np.concatenate((np.conj(c[:0:-1]), c))


def spectral_amplitude(series: CorrelationSeries, window: WindowSpec, omegas, chunk: int = 256) -> np.ndarray:
    """Complex accumulator dt/(2 pi) sum_k win(t_k) c(t_k) exp(i w t_k), before the modulus."""
    if not series.is_uniform():
        raise ValueError("correlation series must be on a uniform time grid starting at 0")
    t, c = hermitian_extension(series)
    T = series.times[-1]
    wc = _window(window.kind, t, T) * c
    omegas = np.asarray(omegas, dtype=float)
    out = np.empty(len(omegas), dtype=complex)
    for s in range(0, len(omegas), chunk):
        out[s:s + chunk] = np.exp(1j * np.outer(omegas[s:s + chunk], t)) @ wc
    return out * series.dt / (2 * np.pi)


def _refine(omegas, y, i) -> Peak:
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = y0 - 2 * y1 + y2
    if denom == 0:
        return Peak(float(omegas[i]), float(y1))
    p = 0.5 * (y0 - y2) / denom
    h = omegas[i + 1] - omegas[i]
    return Peak(float(omegas[i] + p * h), float(y1 - 0.25 * (y0 - y2) * p))


def main_lobe_width(kind: str, T: float) -> float:
    """Full main-lobe width for a window spanning [-T, T]."""
    bins = 4 if kind == "hann" else 2
    return bins * np.pi / T


def find_peaks(result: SpectrumResult, rel_threshold: float = 0.01) -> list[Peak]:
    """Local maxima at or above rel_threshold * global maximum, refined by a
    parabola through the three surrounding samples.

    A maximum must also dominate everything within ``result.resolution`` of it,
    which discards window sidelobes next to a stronger line.
    """
    if not 0 < rel_threshold < 1:
        raise ValueError("rel_threshold must lie in (0, 1)")
    y = np.asarray(result.intensities)
    if len(y) < 3 or y.max() <= 0:
        return []
    step = result.omegas[1] - result.omegas[0]
    distance = max(1.0, result.resolution / step)
    idx, _ = signal.find_peaks(y, height=rel_threshold * y.max(), distance=distance)
    return [_refine(result.omegas, y, i) for i in idx]


def fourier_spectrum(series: CorrelationSeries, window: WindowSpec = WindowSpec(),
                     omega_min: float = -1.0, omega_max: float = 4.0, n_omega: int = 1001,
                     rel_threshold: float = 0.01) -> SpectrumResult:
    """Spectrum on [omega_min, omega_max].

    The grid holds (n_omega - 1) * zero_pad_factor + 1 points, which is what
    zero padding the record by that factor would give.
    """
    if not omega_min < omega_max:
        raise ValueError("omega_min must be below omega_max")
    if n_omega < 3:
        raise ValueError("n_omega must be >= 3")
    n = (n_omega - 1) * window.zero_pad_factor + 1
    omegas = np.linspace(omega_min, omega_max, n)
    intensities = np.abs(spectral_amplitude(series, window, omegas))
    result = SpectrumResult(omegas, intensities,
                            resolution=main_lobe_width(window.kind, series.times[-1]))
    result.peaks = find_peaks(result, rel_threshold)
    return result

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bohmivr.ivr import CorrelationSeries, autocorrelation
from bohmivr.spectrum import (
    SpectrumResult,
    WindowSpec,
    find_peaks,
    fourier_spectrum,
    hermitian_extension,
    main_lobe_width,
    spectral_amplitude,
)

T = 20 * math.pi
TIMES = np.linspace(0, T, 6284)


def tone(*pairs):
    return CorrelationSeries(TIMES, sum(a * np.exp(-1j * w * TIMES) for a, w in pairs))


def test_window_validation():
    with pytest.raises(ValueError):
        WindowSpec("blackman")
    with pytest.raises(ValueError):
        WindowSpec(zero_pad_factor=0)


def test_pure_tone():
    res = fourier_spectrum(tone((1.0, 0.5)))
    assert len(res.peaks) == 1
    assert res.peaks[0].omega == pytest.approx(0.5, abs=0.01)


def test_two_tones_ratio():
    res = fourier_spectrum(tone((2 / 3, 0.5), (1 / 3, 1.5)))
    assert [round(p.omega, 2) for p in res.peaks] == [0.5, 1.5]
    assert res.peaks[0].height / res.peaks[1].height == pytest.approx(2.0, rel=0.05)


@pytest.mark.parametrize("kind", ["hann", "rectangular"])
def test_sorted_local_maxima_above_threshold(kind):
    res = fourier_spectrum(tone((1.0, -0.3), (0.2, 0.9), (0.05, 2.2)), WindowSpec(kind))
    omegas = [p.omega for p in res.peaks]
    assert omegas == sorted(omegas)
    top = res.intensities.max()
    for p in res.peaks:
        i = np.argmin(np.abs(res.omegas - p.omega))
        assert res.intensities[i] >= 0.01 * top * 0.999


def test_constant_intensity_no_peaks():
    res = SpectrumResult(np.linspace(0, 1, 50), np.ones(50))
    assert find_peaks(res, 0.01) == []
    with pytest.raises(ValueError):
        find_peaks(res, 1.5)


def test_rejects_nonuniform_grid():
    s = CorrelationSeries(np.array([0, 0.1, 0.3, 0.4]), np.ones(4))
    with pytest.raises(ValueError):
        fourier_spectrum(s)
    with pytest.raises(ValueError):
        fourier_spectrum(tone((1, 0.5)), omega_min=1.0, omega_max=0.0)


def test_hermitian_extension():
    s = tone((1.0, 0.7))
    t, c = hermitian_extension(s)
    assert len(t) == 2 * len(s.times) - 1
    np.testing.assert_allclose(c, np.exp(-0.7j * t), atol=1e-12)


def test_zero_padding_keeps_height():
    s = tone((1.0, 0.5))
    heights = [fourier_spectrum(s, WindowSpec("hann", z), omega_min=0.3, omega_max=0.7, n_omega=201).peaks[0].height
               for z in (1, 4, 8)]
    for h in heights[1:]:
        assert h == pytest.approx(heights[0], rel=1e-3)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 0.8))
def test_off_grid_tone_refinement(w0):
    omegas_spacing = (1.0 - 0.0) / ((101 - 1) * 1)
    res = fourier_spectrum(tone((1.0, w0)), WindowSpec("hann", 1), omega_min=0.0, omega_max=1.0, n_omega=101)
    assert len(res.peaks) == 1
    assert abs(res.peaks[0].omega - w0) < omegas_spacing / 10


@settings(max_examples=20, deadline=None)
@given(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_linearity_of_accumulator(a, b):
    t = np.linspace(0, 10, 501)
    c1 = np.exp(-0.4j * t) * np.exp(-0.01 * t)
    c2 = np.cos(1.3 * t) + 0.2j
    omegas = np.linspace(-1, 2, 61)
    win = WindowSpec("hann")
    # Hermitian extension is only conjugate-linear, so linearity holds for real coefficients
    ar, br = a.real, b.real
    lhs = spectral_amplitude(CorrelationSeries(t, ar * c1 + br * c2), win, omegas)
    rhs = ar * spectral_amplitude(CorrelationSeries(t, c1), win, omegas) + \
        br * spectral_amplitude(CorrelationSeries(t, c2), win, omegas)
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-10)


def test_main_lobe_width():
    assert main_lobe_width("hann", 10.0) == pytest.approx(4 * math.pi / 10)
    assert main_lobe_width("rectangular", 10.0) == pytest.approx(2 * math.pi / 10)


def test_harmonic_spectrum(harmonic_run):
    res = fourier_spectrum(autocorrelation(harmonic_run))
    omegas = [p.omega for p in res.peaks]
    assert len(omegas) == 4
    np.testing.assert_allclose(omegas, [-0.5, 0.5, 1.5, 2.5], atol=0.02)
    h = np.array([p.height for p in res.peaks[:3]])
    np.testing.assert_allclose(h / h[0], np.array([0.6065, 0.3033, 0.0758]) / 0.6065, rtol=0.1)


def test_csv_output(tmp_path):
    res = fourier_spectrum(tone((1.0, 0.5)), n_omega=11)
    res.to_csv(tmp_path / "s.csv")
    res.peaks_to_csv(tmp_path / "p.csv")
    data = np.loadtxt(tmp_path / "s.csv", delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 0], res.omegas) and np.array_equal(data[:, 1], res.intensities)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "omega,height"

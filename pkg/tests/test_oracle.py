import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import eval_hermite, factorial

from bohmivr.model import WavepacketSpec, wavefunction_value
from bohmivr.oracle import (
    EdgeLeakageError,
    GridSpec,
    analytic_harmonic_autocorrelation,
    bound_state_autocorrelation,
    dvr_eigensolve,
    evolve_on_grid,
    projection_coefficients,
    split_operator_propagate,
)

from conftest import HARMONIC, PACKET, QUARTIC, TWO_PI, WELL


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(n_grid=100)
    with pytest.raises(ValueError):
        GridSpec(n_grid=32)
    with pytest.raises(ValueError):
        GridSpec(1.0, -1.0)
    g = GridSpec()
    assert g.dx == pytest.approx(20 / 512) and len(g.x) == 512 and g.x[0] == -10


def test_norm_conserved():
    g = GridSpec()
    for model in (HARMONIC, QUARTIC):
        psi0 = wavefunction_value(PACKET, g.x)
        norms = [g.dx * np.vdot(psi, psi).real for _, psi in evolve_on_grid(model, psi0, g, 1e-3, TWO_PI, 100)]
        assert np.max(np.abs(np.array(norms) - norms[0])) < 1e-10
        assert norms[0] == pytest.approx(1.0, abs=1e-12)


def test_harmonic_against_closed_form():
    series, _ = split_operator_propagate(HARMONIC, PACKET, GridSpec(), 5e-4, 20 * math.pi, 200)
    exact = analytic_harmonic_autocorrelation(series.times, PACKET)
    assert np.max(np.abs(series.values - exact)) < 1e-6


def test_splitting_second_order():
    errs = []
    for dt in (4e-3, 2e-3):
        s, _ = split_operator_propagate(HARMONIC, PACKET, GridSpec(), dt, TWO_PI, int(round(0.4 / dt)))
        errs.append(np.max(np.abs(s.values - analytic_harmonic_autocorrelation(s.times, PACKET))))
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_edge_leakage_and_dt_limit():
    with pytest.raises(EdgeLeakageError):
        split_operator_propagate(WELL, PACKET, GridSpec(), 5e-3, 5.0, 10)
    with pytest.raises(ValueError):
        split_operator_propagate(HARMONIC, PACKET, GridSpec(), 0.02, 1.0)
    far = WavepacketSpec(1.0, 9.0)
    with pytest.raises(EdgeLeakageError):
        split_operator_propagate(HARMONIC, far, GridSpec(), 1e-3, 0.1)


def test_stationary_ground_state():
    g = GridSpec()
    eig = dvr_eigensolve(WELL, g, 2)
    series, _ = split_operator_propagate(WELL, PACKET, g, 2e-3, 10.0, 50, psi_init=eig.states[0])
    assert np.max(np.abs(np.abs(series.values) - 1)) < 1e-6


def test_snapshots_returned():
    g = GridSpec(n_grid=256)
    series, snaps = split_operator_propagate(HARMONIC, PACKET, g, 1e-2, 1.0, 10, keep_snapshots=True)
    assert snaps.shape == (len(series.times), 256)
    np.testing.assert_allclose(g.dx * (snaps @ np.conj(wavefunction_value(PACKET, g.x))), series.values,
                               atol=1e-12)


def test_harmonic_levels_and_orthonormality():
    g = GridSpec()
    eig = dvr_eigensolve(HARMONIC, g, 6)
    np.testing.assert_allclose(eig.energies, np.arange(6) - 0.5, atol=1e-6)
    gram = g.dx * eig.states @ eig.states.T
    np.testing.assert_allclose(gram, np.eye(6), atol=1e-8)
    assert np.all(np.diff(eig.energies) > 0)


def test_harmonic_states_match_hermite_functions():
    g = GridSpec()
    eig = dvr_eigensolve(HARMONIC, g, 4)
    for n in range(4):
        ref = eval_hermite(n, g.x) * np.exp(-g.x ** 2 / 2) / math.sqrt(2 ** n * factorial(n) * math.sqrt(math.pi))
        assert abs(abs(g.dx * eig.states[n] @ ref) - 1) < 1e-8


def test_well_eigenvalues():
    eig = dvr_eigensolve(WELL, GridSpec(), 3)
    assert eig.energies[0] == pytest.approx(-0.59386, abs=1e-3)
    assert eig.energies[1] == pytest.approx(-0.0356576, abs=1e-3)
    assert eig.energies[2] > 0


def test_well_ground_state_grid_refinement():
    e512 = dvr_eigensolve(WELL, GridSpec(n_grid=512), 1).energies
    e1024 = dvr_eigensolve(WELL, GridSpec(n_grid=1024), 1).energies
    assert abs(e512[0] - e1024[0]) < 1e-6


def test_well_grid_refinement_on_converged_box():
    # the weakly bound state reaches past |x| = 10, so the box must be wider
    a = dvr_eigensolve(WELL, GridSpec(-40, 40, 512), 2).energies
    b = dvr_eigensolve(WELL, GridSpec(-40, 40, 1024), 2).energies
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-6)


def test_quartic_ground_energy():
    e0 = dvr_eigensolve(QUARTIC, GridSpec(), 1).energies[0]
    assert e0 == pytest.approx(-0.5 + 0.0075, abs=5e-4)


def test_projection_coefficients():
    g = GridSpec()
    eig = dvr_eigensolve(HARMONIC, g, 8)
    c = projection_coefficients(PACKET, eig, g)
    np.testing.assert_allclose(c[:4], [0.6065, 0.3033, 0.0758, 0.0126], atol=1e-3)
    poisson = np.exp(-0.5) * 0.5 ** np.arange(8) / factorial(np.arange(8))
    np.testing.assert_allclose(c, poisson, atol=1e-10)
    assert c.sum() <= 1 + 1e-8
    weig = dvr_eigensolve(WELL, g, 2)
    cw = projection_coefficients(PACKET, weig, g)
    assert cw.sum() < 1


def test_bound_state_sum_matches_propagation():
    g = GridSpec()
    eig = dvr_eigensolve(HARMONIC, g, 30)
    c = projection_coefficients(PACKET, eig, g)
    series, _ = split_operator_propagate(HARMONIC, PACKET, g, 1e-3, TWO_PI, 50)
    ref = bound_state_autocorrelation(series.times, c, eig.energies)
    assert np.max(np.abs(ref - series.values)) < 1e-4


def test_analytic_examples():
    assert analytic_harmonic_autocorrelation(0.0, PACKET) == pytest.approx(1.0)
    assert abs(analytic_harmonic_autocorrelation(math.pi, PACKET)) == pytest.approx(0.367879, abs=1e-6)
    assert abs(analytic_harmonic_autocorrelation(TWO_PI, PACKET)) == pytest.approx(1.0, abs=1e-12)


def test_analytic_by_quadrature():
    # overlap of the initial packet with the rigidly translated coherent state
    for t in (0.7, 2.0, 4.1):
        q, p = math.cos(t), -math.sin(t)
        phase = lambda x: p * x - 0.5 * p * q + 0.5 * t
        psi_t = lambda x: math.pi ** -0.25 * np.exp(-(x - q) ** 2 / 2 + 1j * phase(x))
        f = lambda x: np.conj(wavefunction_value(PACKET, x)) * psi_t(x)
        re = quad(lambda x: f(x).real, -12, 12, epsabs=1e-13)[0]
        im = quad(lambda x: f(x).imag, -12, 12, epsabs=1e-13)[0]
        assert re + 1j * im == pytest.approx(complex(analytic_harmonic_autocorrelation(t, PACKET)), abs=1e-10)


def test_eigen_csv(tmp_path):
    eig = dvr_eigensolve(HARMONIC, GridSpec(), 3)
    eig.to_csv(tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "index,energy" and len(lines) == 4
    with pytest.raises(ValueError):
        dvr_eigensolve(HARMONIC, GridSpec(n_grid=64), 65)

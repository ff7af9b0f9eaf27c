import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydberg_eit.analytic_filter import (EmptyInputError, InputSpec, coherent_filter_kernel,
                                         coherent_intensity, coherent_purity, filter_kernel,
                                         fock_filter_kernel, fock_intensity, fwhm, partial_entry_kernel,
                                         peak_time, photon_component, photon_grid, poisson_weights,
                                         purity_fock, purity_mixture, spinwave_component)
from rydberg_eit.core import FrameError, Grid1D, MediumParams, ParameterError, cumulative, make_mode

# Poisson-weighted purity at nbar = 1, evaluated once with the closed form
# (1 - e^-n)^-2 (1 - e^-2n (1 + 2n)) / 2 in exact rational-exponential arithmetic.
COHERENT_PURITY_NBAR1 = 0.74327981953069


def test_single_photon_is_pure_projector(parabola):
    k = fock_filter_kernel(1, parabola)
    h = parabola(-k.points)
    assert np.allclose(k.values, np.outer(h, h), atol=0)
    assert k.purity() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("N", [1, 2, 3, 5, 10, 20])
@pytest.mark.parametrize("kind", ["parabolic", "gaussian"])
def test_fock_trace_and_purity(N, kind, parabola, gauss):
    mode = parabola if kind == "parabolic" else gauss
    k = fock_filter_kernel(N, mode)
    assert abs(k.trace() - 1.0) < 1e-6
    assert abs(k.purity() - N / (2 * N - 1)) < 1e-4
    assert k.hermiticity_defect() == 0.0


def test_fock_n10_gaussian(gauss):
    assert fock_filter_kernel(10, gauss).purity() == pytest.approx(10 / 19, abs=1e-4)


def test_fock_pointwise(parabola):
    g = Grid1D(-1.0, 0.0, 50)
    k = fock_filter_kernel(3, parabola, g)
    i, j = 17, 33
    x, y = g.points[i], g.points[j]
    ref = 3 * parabola(-x) * parabola(-y) * (1 - cumulative(parabola, -min(x, y))) ** 2
    assert k.values[i, j].real == pytest.approx(ref, rel=1e-13)


def test_fock_errors(parabola):
    with pytest.raises(EmptyInputError):
        fock_filter_kernel(0, parabola)
    with pytest.raises(ParameterError):
        fock_filter_kernel(2, parabola, Grid1D(-0.5, 0.0, 100))


def test_resolution_warning(parabola):
    k = fock_filter_kernel(2, parabola, Grid1D(-1.0, 0.0, 10))
    assert "resolution_warning" in k.meta


def test_purity_fock_values():
    assert purity_fock(1) == 1.0
    assert purity_fock(2) == 2 / 3
    assert abs(purity_fock(10**6) - 0.5) < 1e-6
    with pytest.raises(EmptyInputError):
        purity_fock(0)


def test_coherent_kernel_trace(parabola, gauss):
    k = coherent_filter_kernel(1.0, parabola)
    assert k.trace() == pytest.approx(1 - math.exp(-1), abs=1e-6)
    assert k.meta["vacuum_weight"] == pytest.approx(math.exp(-1))
    assert coherent_filter_kernel(2.0, gauss).trace() == pytest.approx(1 - math.exp(-2), abs=1e-6)
    assert coherent_filter_kernel(1e-6, parabola).purity() == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ParameterError):
        coherent_filter_kernel(0.0, parabola)


def test_coherent_kernel_purity_matches_closed_form(parabola):
    assert coherent_filter_kernel(2.0, parabola).purity() == pytest.approx(coherent_purity(2.0), abs=1e-5)


def test_mixture_reduces_to_fock():
    r = purity_mixture({2: 1.0})
    assert r.efficiency == 1.0 and r.purity == pytest.approx(2 / 3, abs=1e-15)


def test_mixture_vacuum_only():
    r = purity_mixture({0: 1.0})
    assert r.no_photon and r.efficiency == 0.0 and r.purity is None


def test_mixture_validation():
    with pytest.raises(ParameterError):
        purity_mixture({1: 0.5, 2: 0.4})
    with pytest.raises(ParameterError):
        purity_mixture({1: 1.5, 2: -0.5})


def test_poisson_truncation():
    w = poisson_weights(5.0)
    assert 1 - sum(w.values()) < 1e-12
    assert w[5] == pytest.approx(math.exp(-5) * 5**5 / 120, rel=1e-13)


def test_coherent_purity_values():
    assert coherent_purity(1.0) == pytest.approx(COHERENT_PURITY_NBAR1, abs=1e-12)
    assert purity_mixture(poisson_weights(1.0)).purity == pytest.approx(COHERENT_PURITY_NBAR1, abs=1e-9)
    assert abs(coherent_purity(50.0) - 0.5) < 1e-2
    assert abs(purity_mixture(poisson_weights(50.0)).purity - 0.5) < 1e-2


@pytest.mark.parametrize("nbar", [0.5, 1, 2, 5, 10])
def test_coherent_closed_form_equals_sum(nbar):
    assert abs(coherent_purity(nbar) - purity_mixture(poisson_weights(nbar)).purity) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 30), st.floats(0.01, 30))
def test_coherent_purity_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert coherent_purity(hi) <= coherent_purity(lo) + 1e-15
    assert 0.5 <= coherent_purity(hi) <= 1.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 100), min_size=2, max_size=12))
def test_mixture_purity_bounds(raw):
    if sum(raw[1:]) == 0:
        return
    w = [r / sum(raw) for r in raw]
    r = purity_mixture(w)
    assert r.efficiency == pytest.approx(1 - w[0])
    assert 0.0 < r.purity <= 1.0 + 1e-12


def test_filter_kernel_mixture_matches_weighted_sum(parabola):
    spec = InputSpec.mixture({0: 0.2, 1: 0.3, 2: 0.5}, parabola)
    k = filter_kernel(spec)
    assert k.trace() == pytest.approx(0.8, abs=1e-6)
    assert k.meta["vacuum_weight"] == 0.2
    ref = purity_mixture(spec.weights).purity
    assert k.purity() == pytest.approx(ref, abs=1e-5)


# partial entry -------------------------------------------------------------

PARAMS = MediumParams.from_optical_depth(200.0, 1.0, 1.0)


def _sw_grid():
    return Grid1D(0.0, 1.0, 1000)


def test_partial_entry_full_trace(parabola):
    k = partial_entry_kernel(2, 1.0, PARAMS, parabola, _sw_grid())
    assert k.frame == "spinwave"
    assert k.trace() == pytest.approx(1.0, abs=1e-6)


def test_partial_entry_half(parabola):
    k = partial_entry_kernel(2, 0.5, PARAMS, parabola, _sw_grid())
    assert k.trace() == pytest.approx(0.25, abs=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 1.0), st.integers(2, 5))
def test_partial_entry_purity_constant(t, N):
    mode = make_mode("parabolic", T=1.0)
    k = partial_entry_kernel(N, t, PARAMS, mode, Grid1D(0.0, PARAMS.group_velocity * t, 1000))
    assert k.trace() == pytest.approx(cumulative(mode, t) ** N, abs=2e-6)
    assert k.purity() == pytest.approx(N / (2 * N - 1), abs=1e-4)


def test_partial_entry_truncation(parabola):
    with pytest.raises(ParameterError):
        partial_entry_kernel(2, 1.0, PARAMS, parabola, Grid1D(0.0, 0.5, 100))


def test_photon_component_round_trip(parabola):
    slow = MediumParams.from_optical_depth(200.0, 1.0, 0.25)
    k = partial_entry_kernel(2, 1.0, slow, parabola, Grid1D(0.0, 0.25, 800))
    ph = photon_component(k, slow)
    assert ph.frame == "comoving_photon"
    assert ph.trace() == pytest.approx(1.0, abs=1e-6)
    back = spinwave_component(ph, slow, 1.0)
    assert np.max(np.abs(back.values - k.values)) < 1e-12
    assert np.max(np.abs(back.points - k.points)) < 1e-12
    with pytest.raises(FrameError):
        photon_component(ph, slow)


def test_photon_component_unit_velocity(parabola):
    k = partial_entry_kernel(2, 1.0, PARAMS, parabola, _sw_grid())
    assert np.array_equal(photon_component(k, PARAMS).values, k.values)


def test_full_entry_equals_filter_kernel(parabola):
    # at full entry the photonic part of the spin wave is the filter output
    slow = MediumParams.from_optical_depth(200.0, 1.0, 0.5)
    g = Grid1D(0.0, 0.5, 500)
    ph = photon_component(partial_entry_kernel(2, 1.0, slow, parabola, g), slow)
    ref = fock_filter_kernel(2, parabola, Grid1D(-1.0, 0.0, 500))
    assert np.allclose(ph.points, ref.points, atol=1e-12)
    assert np.max(np.abs(ph.values - ref.values)) < 1e-10


# Fig. 2 trends --------------------------------------------------------------

X = np.linspace(-9, 9, 60001)


def test_fock_profiles_narrow_and_advance(gauss):
    widths = [fwhm(X, fock_intensity(N, gauss, X)) for N in (1, 4, 16)]
    peaks = [peak_time(X, fock_intensity(N, gauss, X)) for N in (1, 4, 16)]
    assert widths[0] > widths[1] > widths[2]
    assert peaks[0] > peaks[1] > peaks[2]


def test_coherent_profiles_narrow_and_advance(gauss):
    widths = [fwhm(X, coherent_intensity(n, gauss, X)) for n in (1, 4, 16)]
    peaks = [peak_time(X, coherent_intensity(n, gauss, X)) for n in (1, 4, 16)]
    assert widths[0] > widths[1] > widths[2]
    assert peaks[0] > peaks[1] > peaks[2]


def test_fwhm_log_scaling(gauss):
    s = [fwhm(X, fock_intensity(N, gauss, X)) * math.sqrt(math.log(N)) for N in (8, 64, 512)]
    assert max(s) / min(s) < 1.5


def test_intensity_matches_kernel_diagonal(parabola):
    k = fock_filter_kernel(4, parabola)
    assert np.allclose(k.diagonal(), fock_intensity(4, parabola, k.points), atol=1e-13)


def test_default_grid_covers_mode(gauss):
    g = photon_grid(gauss)
    assert cumulative(gauss, -g.stop) < 1e-12 and cumulative(gauss, -g.start) > 1 - 1e-12

import math

import numpy as np
import pytest
import scipy.special as sp

from rydberg_eit.analytic_filter import coherent_filter_kernel, coherent_purity, fock_filter_kernel
from rydberg_eit.core import FrameError, Grid1D, ParameterError, make_mode
from rydberg_eit.kernel import Kernel
from rydberg_eit.spectral import (ValidationError, coherent_eigensystem, eigen_numeric,
                                  fock_apply_residual, fock_characteristic, fock_eigenvalues,
                                  fock_eigenvectors, reconstruction_error, rescale_to_unit, richardson,
                                  unit_fock_kernel, write_eigenvectors_csv, write_spectrum_json)

UNIT = Grid1D(0.0, 1.0, 2000)


def n2_closed_form(count):
    n = np.arange(1, count + 1)
    return 2.0 / (math.pi**2 * (n - 0.5) ** 2)


def test_fock_eigenvalues_n2():
    p = fock_eigenvalues(2, 5)
    assert np.allclose(p, n2_closed_form(5), rtol=0, atol=1e-14)
    assert p[0] == pytest.approx(0.810569, abs=1e-6)
    assert p[1] == pytest.approx(0.090063, abs=1e-6)


def test_fock_eigenvalues_sum_to_one():
    assert abs(fock_eigenvalues(2, 10000).sum() - 1.0) < 1e-4


def test_fock_eigenvalues_infinite_n():
    j01 = sp.jn_zeros(0, 1)[0]
    assert abs(fock_eigenvalues(10**6, 1)[0] - 4 / j01**2) < 1e-3


@pytest.mark.parametrize("N", [2, 3, 5, 10])
def test_characteristic_residual(N):
    p = fock_eigenvalues(N, 8)
    assert np.all(np.diff(p) < 0)
    assert np.max(np.abs(fock_characteristic(N, p))) < 1e-10


def test_fock_eigenvalues_n1_and_errors():
    assert list(fock_eigenvalues(1, 3)) == [1.0]
    with pytest.raises(ParameterError):
        fock_eigenvalues(0, 3)


@pytest.mark.parametrize("N", [2, 3, 5, 10])
def test_analytic_matches_numeric(N):
    d = eigen_numeric(unit_fock_kernel(N, UNIT), 5)
    assert np.max(np.abs(d.eigenvalues - fock_eigenvalues(N, 5))) < 1e-4


def test_eigenvector_n2():
    v = fock_eigenvectors(2, fock_eigenvalues(2, 1)[0], UNIT)
    assert np.max(np.abs(v - math.sqrt(2) * np.sin(math.pi * UNIT.points / 2))) < 1e-10
    assert v[0] == 0.0


def test_eigenvector_n3_residual():
    p = fock_eigenvalues(3, 1)[0]
    v = fock_eigenvectors(3, p, UNIT)
    assert fock_apply_residual(3, p, UNIT, v) < 1e-5


def test_eigenvector_rejects_non_eigenvalue():
    with pytest.raises(ParameterError):
        fock_eigenvectors(3, 0.5, UNIT)


def test_rank_one_kernel(parabola):
    d = eigen_numeric(fock_filter_kernel(1, parabola), 5)
    assert d.eigenvalues[0] == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(d.eigenvalues[1:])) < 1e-10


def test_numeric_n2_filter_kernel(parabola):
    d = eigen_numeric(fock_filter_kernel(2, parabola), 5)
    assert np.max(np.abs(d.eigenvalues - n2_closed_form(5))) < 1e-4


def test_numeric_n5_sum_of_squares(parabola):
    d = eigen_numeric(fock_filter_kernel(5, parabola), 5)
    assert d.sum_of_squares == pytest.approx(5 / 9, abs=1e-4)


def test_decomposition_invariants(parabola):
    k = fock_filter_kernel(3, parabola)
    d = eigen_numeric(k, 30)
    assert d.trace == pytest.approx(k.trace(), abs=1e-6)
    assert d.sum_of_squares == pytest.approx(k.trace_of_square(), abs=1e-6)
    assert np.max(np.abs(d.gram() - np.eye(30))) < 1e-8
    assert d.residual < 1e-10


def test_reconstruction_converges(parabola):
    k = fock_filter_kernel(2, parabola)
    d = eigen_numeric(k, 60)
    errs = [reconstruction_error(k, d, m) for m in (5, 20, 50)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


def test_non_hermitian_rejected():
    g = Grid1D(0, 1, 10)
    vals = np.triu(np.ones((11, 11)))
    with pytest.raises(ValidationError):
        eigen_numeric(Kernel.on_grid(g, vals, "unit"))


def test_rescale_fock_to_min_kernel(parabola):
    k = fock_filter_kernel(2, parabola)
    u = rescale_to_unit(k, parabola)
    ref = 2 * np.minimum.outer(u.points, u.points)
    assert np.max(np.abs(u.values - ref)) < 1e-8
    assert u.trace() == pytest.approx(k.trace(), abs=1e-13)
    ones = rescale_to_unit(fock_filter_kernel(1, parabola), parabola)
    assert np.max(np.abs(ones.values - 1)) < 1e-12


def test_rescale_pointwise_value():
    # a grid with x~ hitting 0.3 and 0.7 exactly is not needed: evaluate the formula at those points
    mode = make_mode("parabolic", T=1.0)
    k = fock_filter_kernel(2, mode)
    u = rescale_to_unit(k, mode)
    i, j = np.searchsorted(u.points, 0.3), np.searchsorted(u.points, 0.7)
    assert u.values[i, j].real == pytest.approx(2 * min(u.points[i], u.points[j]), abs=1e-8)


@pytest.mark.parametrize("kind", ["parabolic", "gaussian"])
def test_eigenvalues_invariant_under_rescaling(kind, parabola, gauss):
    mode = parabola if kind == "parabolic" else gauss
    k = fock_filter_kernel(3, mode)
    a = eigen_numeric(k, 5).eigenvalues
    b = eigen_numeric(rescale_to_unit(k, mode), 5).eigenvalues
    assert np.max(np.abs(a - b)) < 1e-6


def test_rescale_mode_mismatch(parabola, gauss):
    with pytest.raises(ParameterError):
        rescale_to_unit(fock_filter_kernel(2, parabola), gauss)
    with pytest.raises(FrameError):
        rescale_to_unit(unit_fock_kernel(2, UNIT), parabola)


def test_richardson_removes_quadratic_error(parabola, gauss):
    vals = []
    for mode in (parabola, gauss):
        fine = fock_filter_kernel(5, mode)
        coarse = fock_filter_kernel(5, mode, Grid1D(fine.points[0], fine.points[-1], 1000))
        vals.append(richardson(fine.purity(), coarse.purity()))
    assert abs(vals[0] - vals[1]) < 1e-8
    assert abs(vals[0] - 5 / 9) < 1e-8


def test_coherent_small_nbar():
    d = coherent_eigensystem(1e-6, 3, Grid1D(0, 1, 500))
    assert d.eigenvalues[0] == pytest.approx(d.trace, rel=1e-6)
    assert d.purity() == pytest.approx(1.0, abs=1e-6)


def test_coherent_large_nbar():
    d = coherent_eigensystem(50.0, 3)
    assert abs(d.eigenvalues[0] / d.trace - 0.69) < 1e-2


def test_coherent_purity_cross_module():
    d = coherent_eigensystem(1.0, 5)
    assert abs(d.purity() - coherent_purity(1.0)) < 1e-4
    fits = d.meta["bessel_fit"]
    assert all(f["residual"] < 1e-4 for f in fits)


def test_coherent_unit_kernel_matches_rescaled_filter(parabola):
    k = coherent_filter_kernel(2.0, parabola)
    a = eigen_numeric(k, 5).eigenvalues
    b = coherent_eigensystem(2.0, 5).eigenvalues
    assert np.max(np.abs(a - b)) < 1e-5


def test_serialization(tmp_path, parabola):
    d = eigen_numeric(fock_filter_kernel(2, parabola, Grid1D(-1, 0, 100)), 3)
    js = write_spectrum_json(d, tmp_path / "s.json")
    assert '"eigenvalues"' in js.read_text()
    csvp = write_eigenvectors_csv(d, tmp_path / "v.csv")
    lines = csvp.read_text().splitlines()
    assert lines[0] == "x,phi1,phi2,phi3" and len(lines) == 102

"""Eigen-decomposition of filter and subtractor kernels.

Numerically, a kernel with quadrature weights w is diagonalized through the
symmetric matrix sqrt(w_i) phi_ij sqrt(w_j).  Analytically, the change of
variables x -> int_{-inf}^x h^2(-z) dz turns every Fock kernel into
N min(x, y)^(N-1) on the unit square, whose eigenvalues are the roots of a
Bessel characteristic equation.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .analytic_filter import _entered_fraction
from .bessel import jv, jv_zeros, y1
from .core import Grid1D, ModeFunction, NumericalError, ParameterError
from .kernel import Kernel, _jsonable, fmt

HERMITICITY_TOL = 1e-8


class ValidationError(ValueError):
    """Kernel fails a structural precondition (e.g. not Hermitian)."""


@dataclass
class SpectralDecomposition:
    """Leading eigenpairs of a kernel plus the full eigenvalue list.

    Attributes
    ----------
    eigenvalues : ndarray
        The ``count`` largest eigenvalues, descending.
    eigenvectors : ndarray
        Shape ``(count, n)``; row i samples phi_i on ``points`` and is
        normalized in the weighted inner product.
    residual : float
        max_i ||K phi_i - p_i phi_i|| over the reported pairs.
    all_eigenvalues : ndarray
        Every eigenvalue of the discretized operator, descending.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    residual: float
    all_eigenvalues: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def trace(self) -> float:
        return float(np.sum(self.all_eigenvalues))

    @property
    def sum_of_squares(self) -> float:
        return float(np.sum(self.all_eigenvalues**2))

    def purity(self) -> float:
        return self.sum_of_squares / self.trace**2

    def gram(self) -> np.ndarray:
        """Weighted inner products <phi_i, phi_j>; the identity for orthonormal vectors."""
        v = self.eigenvectors
        return (v.conj() * self.weights) @ v.T

    def reconstruct(self, k: int) -> np.ndarray:
        """sum_{i<k} p_i phi_i(x) phi_i(y)^*."""
        v = self.eigenvectors[:k]
        return (v.T * self.eigenvalues[:k]) @ v.conj()


def eigen_numeric(kernel: Kernel, count: int | None = None) -> SpectralDecomposition:
    """Dense Hermitian diagonalization of the quadrature-weighted kernel.

    Raises
    ------
    ValidationError
        If the kernel is non-Hermitian by more than 1e-8 relative to max|phi|.
    """
    scale = float(np.max(np.abs(kernel.values))) or 1.0
    if kernel.hermiticity_defect() > HERMITICITY_TOL * scale:
        raise ValidationError(f"kernel is not Hermitian (defect {kernel.hermiticity_defect():.3g})")
    n = kernel.points.size
    count = n if count is None else min(int(count), n)
    A = kernel.symmetric_matrix()
    A = 0.5 * (A + A.conj().T)
    if not np.any(A.imag):
        A = A.real
    try:
        evals, evecs = sla.eigh(A)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"diagonalization failed: {exc}") from exc
    evals, evecs = evals[::-1], evecs[:, ::-1]
    lead = evecs[:, :count]
    res = float(np.max(np.linalg.norm(A @ lead - lead * evals[:count], axis=0)))
    sw = np.sqrt(kernel.weights)
    vecs = (lead / sw[:, None]).T
    # fix signs so the largest-magnitude sample of each vector is positive real
    idx = np.argmax(np.abs(vecs), axis=1)
    phase = vecs[np.arange(count), idx]
    vecs = vecs * (np.abs(phase) / phase)[:, None]
    if not np.any(np.iscomplex(vecs)):
        vecs = vecs.real
    return SpectralDecomposition(evals[:count].copy(), vecs, kernel.points, kernel.weights, res,
                                 evals.copy(), {"frame": kernel.frame, **kernel.meta})


def reconstruction_error(kernel: Kernel, dec: SpectralDecomposition, k: int) -> float:
    """Weighted Frobenius norm of kernel minus its rank-k truncation, over the trace."""
    diff = kernel.values - dec.reconstruct(k)
    w = kernel.weights
    return float(np.sqrt(np.sum(np.outer(w, w) * np.abs(diff) ** 2)) / kernel.trace())


def richardson(fine, coarse, order: int = 2):
    """Extrapolate a grid-h result and a grid-2h result with error O(h^order)."""
    r = 2.0**order
    return (r * np.asarray(fine) - np.asarray(coarse)) / (r - 1.0)


def rescale_to_unit(kernel: Kernel, mode: ModeFunction) -> Kernel:
    """Express a co-moving-frame kernel in x~ = int_{-inf}^x h^2(-z) dz.

    phi~(x~, y~) = phi(x, y) / (h(-x) h(-y)) with weights w h^2(-x), so the
    weighted symmetric matrix, and with it every eigenvalue, is unchanged.
    Points where h vanishes carry zero weight and are dropped.
    """
    kernel.require_frame("comoving_photon")
    if "mode" in kernel.meta and kernel.meta["mode"] != mode.kind:
        raise ParameterError(f"kernel was built from a {kernel.meta['mode']} mode, not {mode.kind}")
    x = kernel.points
    h = mode(-x)
    keep = h > 0
    scale = float(np.max(np.abs(kernel.values))) or 1.0
    if np.any(np.abs(np.diag(kernel.values))[~keep] > 1e-12 * scale):
        raise ParameterError("kernel has weight where the mode vanishes; wrong mode?")
    hk = h[keep]
    vals = kernel.values[np.ix_(keep, keep)] / np.outer(hk, hk)
    xt = _entered_fraction(mode, x[keep])
    return Kernel(xt, kernel.weights[keep] * hk**2, vals, "unit", {**kernel.meta, "rescaled_from": "comoving_photon"})


def unit_fock_kernel(N: int, grid: Grid1D) -> Kernel:
    """N min(x, y)^(N-1) on a grid over [0, 1]."""
    x = grid.points
    return Kernel.on_grid(grid, N * np.minimum.outer(x, x) ** (N - 1), "unit", input="fock", N=int(N))


def unit_coherent_kernel(nbar: float, grid: Grid1D) -> Kernel:
    """nbar exp(-nbar (1 - min(x, y))) on a grid over [0, 1]."""
    x = grid.points
    vals = nbar * np.exp(-nbar * (1.0 - np.minimum.outer(x, x)))
    return Kernel.on_grid(grid, vals, "unit", input="coherent", nbar=float(nbar))


def _fock_argument_scale(N):
    return 4.0 * (N - 1) / N


def fock_eigenvalues(N: int, count: int) -> np.ndarray:
    """Largest ``count`` eigenvalues of the Fock-N filter output, descending.

    They solve J_{-1/N}(2 sqrt((N-1)/(N p))) = 0, i.e. p = 4(N-1)/(N z^2) for
    the positive zeros z of J_{-1/N}.
    """
    if int(N) != N or N < 1:
        raise ParameterError(f"N must be an integer >= 1 (got {N})")
    if count < 1:
        raise ParameterError("count must be >= 1")
    if N == 1:
        return np.array([1.0])
    z = jv_zeros(-1.0 / N, count)
    return _fock_argument_scale(N) / z**2


def fock_characteristic(N: int, p) -> np.ndarray:
    """J_{-1/N}(2 sqrt((N-1)/(N p))); zero exactly at the eigenvalues."""
    p = np.asarray(p, dtype=float)
    return jv(-1.0 / N, np.sqrt(_fock_argument_scale(N) / p))


def fock_eigenvectors(N: int, p: float, grid: Grid1D, check: bool = True) -> np.ndarray:
    """Samples of x^((N-1)/2) J_{1-1/N}(z x^(N/2)) on ``grid``, unit weighted norm.

    ``check`` verifies both the characteristic equation and the integral
    equation (K phi = p phi to 1e-5) and raises if either fails.
    """
    if N == 1:
        v = np.ones(grid.size)
    else:
        if check and abs(float(fock_characteristic(N, p))) > 1e-8:
            raise ParameterError(f"p = {p} is not an eigenvalue for N = {N}")
        z = math.sqrt(_fock_argument_scale(N) / p)
        x = grid.points
        v = x ** ((N - 1) / 2.0) * jv(1.0 - 1.0 / N, z * x ** (N / 2.0))
    w = grid.trapezoid_weights()
    v = v / math.sqrt(float(np.sum(w * v * v)))
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    if check:
        res = fock_apply_residual(N, p, grid, v)
        if res > 1e-5:
            raise ParameterError(f"eigenfunction residual {res:.3g} exceeds 1e-5 (grid too coarse?)")
    return v


def fock_apply_residual(N: int, p: float, grid: Grid1D, v) -> float:
    """Weighted L2 norm of K v - p v for the unit Fock kernel."""
    K = unit_fock_kernel(N, grid)
    w = K.weights
    Kv = K.values.real @ (w * v)
    return float(np.sqrt(np.sum(w * (Kv - p * v) ** 2)))


def coherent_bessel_basis(nbar: float, p: float, x) -> np.ndarray:
    """The two candidate functions e^{-nbar(1-x)/2} {J_1, Y_1}(2 e^{-nbar(1-x)/2} / sqrt(p))."""
    x = np.asarray(x, dtype=float)
    a = np.exp(-0.5 * nbar * (1.0 - x))
    arg = 2.0 * a / math.sqrt(p)
    return np.stack([a * jv(1.0, arg), a * y1(arg)])


def coherent_eigensystem(nbar: float, count: int, grid: Grid1D | None = None) -> SpectralDecomposition:
    """Diagonalize nbar exp(-nbar(1 - min)) on [0, 1] and fit the Bessel form.

    ``meta["bessel_fit"]`` holds, per eigenvector, the least-squares
    coefficients of the J_1/Y_1 pair and the relative L2 residual of the fit.
    """
    if not nbar > 0:
        raise ParameterError("nbar must be > 0")
    grid = grid or Grid1D(0.0, 1.0, 2000)
    dec = eigen_numeric(unit_coherent_kernel(nbar, grid), count)
    w = grid.trapezoid_weights()
    sw = np.sqrt(w)
    fits = []
    for p, v in zip(dec.eigenvalues, dec.eigenvectors):
        if p <= 0:
            fits.append({"coefficients": [0.0, 0.0], "residual": float("nan")})
            continue
        B = coherent_bessel_basis(nbar, p, grid.points)
        coef, *_ = np.linalg.lstsq((B * sw).T, sw * v, rcond=None)
        resid = math.sqrt(float(np.sum(w * (B.T @ coef - v) ** 2)))
        fits.append({"coefficients": coef.tolist(), "residual": resid})
    dec.meta["bessel_fit"] = fits
    dec.meta["nbar"] = float(nbar)
    return dec


def write_spectrum_json(dec: SpectralDecomposition, path, **extra) -> Path:
    path = Path(path)
    data = {
        "eigenvalues": dec.eigenvalues.tolist(),
        "residual": dec.residual,
        "trace": dec.trace,
        "sum_of_squares": dec.sum_of_squares,
        "purity": dec.purity(),
        "parameters": _jsonable(dec.meta),
        **_jsonable(extra),
    }
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_eigenvectors_csv(dec: SpectralDecomposition, path, count: int | None = None) -> Path:
    """Columns: x, then phi_1 .. phi_count (real part; imaginary part if complex)."""
    path = Path(path)
    k = dec.eigenvalues.size if count is None else min(count, dec.eigenvalues.size)
    cplx = np.iscomplexobj(dec.eigenvectors)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["x"]
        for i in range(k):
            head += [f"re_phi{i + 1}", f"im_phi{i + 1}"] if cplx else [f"phi{i + 1}"]
        w.writerow(head)
        for j, x in enumerate(dec.points):
            row = [fmt(x)]
            for i in range(k):
                v = dec.eigenvectors[i, j]
                row += [fmt(v.real), fmt(v.imag)] if cplx else [fmt(v)]
            w.writerow(row)
    return path


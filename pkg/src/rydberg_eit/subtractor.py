"""Single-photon subtractor: a collective two-level absorber that takes
exactly one photon out of a pulse and transmits the rest.

Analytic side: the remaining light after one absorption event, the
photon-number sector weights, and the Gram kernel of the conditional states
(indexed by absorption time), whose spectrum is the spectrum of the whole
absorber-excited output.  Numerical side: a direct integrator for two
incoming photons, in which the pair amplitude EE(x, y) decays with rate
Gamma per photon inside the absorber and feeds the one-photon density
matrix ee(x, y) once the absorber is excited.

Coordinates follow the filter module: X = x - t is co-moving, so a photon
that arrives at time t sits at X = -t and the input mode appears as h(-X).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .analytic_filter import EmptyInputError, InputSpec, photon_grid
from .core import Grid1D, ModeFunction, NumericalError, ParameterError, cumulative
from .kernel import Kernel
from .spectral import eigen_numeric

MEDIUM_ABSORPTION_LENGTHS = 10.0
SHARP_REGIME_RATIO = 20.0
DEFAULT_CELLS_PER_LENGTH = 4


@dataclass(frozen=True)
class SubtractorParams:
    """Absorption rate ``gamma`` (units of the atomic linewidth) and input mode.

    ``medium_length`` defaults to 10 absorption lengths 1/gamma; a two-photon
    amplitude surviving that far is below exp(-10).  ``gamma = 0`` is allowed
    and describes an empty line.
    """

    gamma: float
    mode: ModeFunction
    medium_length: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ParameterError(f"gamma must be finite and >= 0 (got {self.gamma})")
        if not isinstance(self.mode, ModeFunction):
            raise ParameterError("mode must be a ModeFunction")
        if self.medium_length is not None and not self.medium_length > 0:
            raise ParameterError(f"medium_length must be > 0 (got {self.medium_length})")
        if self.gamma == 0 and self.medium_length is None:
            object.__setattr__(self, "medium_length", self.mode.duration)

    @property
    def length(self) -> float:
        return self.medium_length if self.medium_length is not None else MEDIUM_ABSORPTION_LENGTHS / self.gamma

    @property
    def sharpness(self) -> float:
        """gamma times the pulse duration; the analytic result needs this large."""
        return self.gamma * self.mode.duration

    def regime_warning(self) -> str | None:
        if self.sharpness < SHARP_REGIME_RATIO:
            return (f"gamma*T = {self.sharpness:.3g} < {SHARP_REGIME_RATIO:g}: absorption is not "
                    "sharp on the pulse time scale, expect deviations from the analytic output")
        return None


# ---------------------------------------------------------------- analytic


def _remaining_overlap(mode, X):
    # <A_s|A_t> for the leftover mode after absorption at s, t: int_{max(s,t)}^inf h^2
    t = -np.asarray(X, dtype=float)
    return 1.0 - cumulative(mode, np.maximum.outer(t, t))


def _arrived_before(mode, X):
    # int_{-inf}^{-X} h^2, the weight arriving before the photon at X
    return cumulative(mode, -np.asarray(X, dtype=float))


def remaining_photon_kernel(mode: ModeFunction, grid: Grid1D, weight: float = 1.0) -> Kernel:
    """The photon left behind when one of two photons is absorbed.

    ee(X, Y) = 2 h(-X) h(-Y) int_{-inf}^{-max(X, Y)} h^2, times ``weight``.
    The earlier photon is always the absorbed one, so the survivor carries the
    arrival-time weight of everything before it.
    """
    X = grid.points
    h = mode(-X)
    before = _arrived_before(mode, np.maximum.outer(X, X))
    vals = 2.0 * weight * np.outer(h, h) * before
    return Kernel.on_grid(grid, vals, "comoving_photon", role="remaining_photon", mode=mode.kind)


def absorption_gram_kernel(spec: InputSpec, grid: Grid1D) -> Kernel:
    """Gram kernel of the conditional output states, indexed by absorption time.

    K(X, Y) = sum_m |c_m|^2 m h(-X) h(-Y) <A_X|A_Y>^(m-1), where A_X is the
    leftover mode after absorption at arrival time -X.  The absorber-excited
    output is sum over absorption times of these states, so its nonzero
    spectrum is the spectrum of K.
    """
    X = grid.points
    h = spec.mode(-X)
    ov = _remaining_overlap(spec.mode, X)
    vals = np.zeros((X.size, X.size))
    for m, w in sorted(spec.weights.items()):
        if m >= 1 and w > 0:
            vals += w * m * ov ** (m - 1)
    vals *= np.outer(h, h)
    return Kernel.on_grid(grid, vals, "comoving_photon", role="absorption_gram", mode=spec.mode.kind,
                          **_spec_meta(spec))


def _spec_meta(spec: InputSpec) -> dict:
    meta = {"input": spec.kind}
    if spec.kind == "fock":
        meta["N"] = spec.N
    elif spec.kind == "coherent":
        meta["nbar"] = spec.nbar
    return meta


@dataclass
class SubtractionResult:
    """Output of the ideal subtractor for a given input.

    Attributes
    ----------
    vacuum_weight : float
        Probability that no light remains: nothing to absorb (m = 0) or the
        only photon absorbed (m = 1).
    absorbed_probability : float
        Probability that the absorber ends up excited, 1 - |c_0|^2.
    sector_weights : dict
        Remaining photon number k -> probability, for the absorber-excited part.
    kernel : Kernel or None
        One-photon sector of the remaining light (from m = 2 input photons).
    gram : Kernel or None
        Absorption-time Gram kernel (see :func:`absorption_gram_kernel`).
    """

    spec: InputSpec
    vacuum_weight: float
    absorbed_probability: float
    sector_weights: dict
    kernel: Kernel | None
    gram: Kernel | None
    notes: list = field(default_factory=list)

    @property
    def photons_remain(self) -> bool:
        return any(k >= 1 and w > 0 for k, w in self.sector_weights.items())

    @property
    def one_photon_only(self) -> bool:
        """True when every remaining photon state is a single photon."""
        return self.photons_remain and all(w == 0 or k == 1 for k, w in self.sector_weights.items())

    def spectral_kernel(self) -> Kernel | None:
        """The kernel to diagonalize for the spectrum of the remaining light.

        The explicit one-photon density matrix when only one photon can
        remain, the absorption-time Gram kernel when several sectors mix,
        and None when no photon remains.
        """
        if not self.photons_remain:
            return None
        return self.kernel if self.one_photon_only else self.gram

    def purity(self) -> float:
        """Purity of the absorber-excited output, tr rho^2 / (tr rho)^2."""
        if self.gram is None:
            raise EmptyInputError("no photon absorbed")
        return self.gram.purity()


def subtract_analytic(spec: InputSpec, grid: Grid1D | None = None) -> SubtractionResult:
    """Ideal (sharp-absorption) subtractor output for ``spec``.

    Raises
    ------
    EmptyInputError
        If the input holds no photons at all.
    """
    w = spec.weights
    absorbed = sum(v for m, v in w.items() if m >= 1)
    if absorbed <= 0:
        raise EmptyInputError("input is vacuum: no photon to subtract")
    grid = grid or photon_grid(spec.mode)
    sectors = {m - 1: v for m, v in sorted(w.items()) if m >= 1 and v > 0}
    kernel = None
    if w.get(2, 0.0) > 0:
        kernel = remaining_photon_kernel(spec.mode, grid, w[2]).with_meta(**_spec_meta(spec))
    notes = []
    if any(k >= 2 for k in sectors):
        notes.append("sectors with two or more remaining photons are represented by the Gram kernel only")
    return SubtractionResult(spec, w.get(0, 0.0) + w.get(1, 0.0), absorbed, sectors, kernel,
                             absorption_gram_kernel(spec, grid), notes)


# ---------------------------------------------------------------- spectra


@dataclass
class SpectrumMatch:
    filter_eigenvalues: np.ndarray
    subtractor_eigenvalues: np.ndarray
    max_abs_difference: float
    sector_mismatch: bool = False
    note: str = ""

    def summary(self) -> dict:
        return {
            "filter_eigenvalues": self.filter_eigenvalues.tolist(),
            "subtractor_eigenvalues": self.subtractor_eigenvalues.tolist(),
            "max_abs_difference": self.max_abs_difference,
            "sector_mismatch": self.sector_mismatch,
            "note": self.note,
        }


_IDENTITY_KEYS = ("input", "N", "nbar", "mode")


def spectrum_match(filter_kernel: Kernel, subtractor, count: int = 10) -> SpectrumMatch:
    """Compare the leading eigenvalues of filter and subtractor outputs.

    ``subtractor`` is a :class:`SubtractionResult` or a kernel.  Both must
    come from the same input (checked through kernel metadata).  When no
    photon remains after subtraction the sectors cannot be compared and the
    report says so instead of raising.
    """
    if isinstance(subtractor, SubtractionResult):
        sub_meta = {"mode": subtractor.spec.mode.kind, **_spec_meta(subtractor.spec)}
        sub_kernel = subtractor.spectral_kernel()
    else:
        sub_kernel = subtractor
        sub_meta = dict(subtractor.meta)
    for key in _IDENTITY_KEYS:
        a, b = filter_kernel.meta.get(key), sub_meta.get(key)
        if a is not None and b is not None and a != b:
            raise ParameterError(f"filter and subtractor kernels come from different inputs ({key}: {a} vs {b})")
    empty = np.zeros(0)
    if sub_kernel is None or sub_kernel.trace() <= 0:
        return SpectrumMatch(eigen_numeric(filter_kernel, count).eigenvalues, empty, math.inf, True,
                             "no photon remains after subtraction; sectors are not comparable")
    f = eigen_numeric(filter_kernel, count).eigenvalues
    s = eigen_numeric(sub_kernel, count).eigenvalues
    k = min(f.size, s.size)
    return SpectrumMatch(f, s, float(np.max(np.abs(f[:k] - s[:k]))))


def reflected_unit_kernel(N: int, points) -> np.ndarray:
    """N min(1 - x, 1 - y)^(N-1): the unit-interval filter kernel under x -> 1 - x."""
    r = 1.0 - np.asarray(points, dtype=float)
    return N * np.minimum.outer(r, r) ** (N - 1)


# ---------------------------------------------------------------- simulation


def closed_form_two_photon(params: SubtractorParams, x, y, t):
    """sqrt(2) h(t-x) h(t-y) exp(-gamma [H(x) x + H(y) y]) in lab coordinates,
    with the absorber occupying [0, medium length]."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    L = params.length
    inside = np.clip(x, 0.0, L)[:, None] + np.clip(y, 0.0, L)[None, :]
    h = params.mode
    return math.sqrt(2.0) * np.outer(h(t - x), h(t - y)) * np.exp(-params.gamma * inside)


def closed_form_remaining(params: SubtractorParams, x, y, t):
    """Sharp-absorption ee(x, y, t) in lab coordinates at any time.

    2 h(t-x) h(t-y) int_{-inf}^{t - max(x, y, 0)} h^2: the source acts while
    both photons are still ahead of the absorber.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    h = params.mode
    upper = t - np.maximum(np.maximum.outer(x, y), 0.0)
    return 2.0 * np.outer(h(t - x), h(t - y)) * cumulative(h, upper)


def simulation_grid(params: SubtractorParams, cells_per_length: int = DEFAULT_CELLS_PER_LENGTH,
                    n: int | None = None) -> Grid1D:
    """Co-moving node grid over the pulse with about ``cells_per_length``
    nodes per absorption length 1/gamma (at least 200 nodes)."""
    t0, t1 = params.mode.support
    if n is None:
        per = params.gamma * (t1 - t0) * cells_per_length
        n = max(200, int(math.ceil(per)))
    return Grid1D(-t1, -t0, int(n))


@dataclass
class SubtractorTrajectory:
    """Result of :func:`subtract_simulate`.

    Arrays live on the co-moving ``grid``; at lab time t a node X sits at
    x = X + t.  ``EE`` and ``ee`` are the final fields, ``snapshots`` maps
    requested times to copies of both.
    """

    grid: Grid1D
    times: np.ndarray
    two_photon_norm: np.ndarray
    trace: np.ndarray
    EE: np.ndarray
    ee: np.ndarray
    snapshots: dict
    diagnostics: dict
    params: SubtractorParams

    @property
    def time(self) -> float:
        return float(self.times[-1])

    def lab_points(self, t: float | None = None) -> np.ndarray:
        return self.grid.points + (self.time if t is None else t)

    def kernel(self) -> Kernel:
        return Kernel.on_grid(self.grid, self.ee, "comoving_photon", role="remaining_photon",
                              mode=self.params.mode.kind, input="fock", N=2, source="simulation")

    def bookkeeping_defect(self) -> float:
        return float(np.max(np.abs(self.two_photon_norm + self.trace - self.two_photon_norm[0])))


def _weighted_min_eigenvalue(ee, w):
    sw = np.sqrt(w)
    A = sw[:, None] * ee * sw[None, :]
    return float(np.linalg.eigvalsh(0.5 * (A + A.conj().T))[0])


def subtract_simulate(params: SubtractorParams, grid: Grid1D | None = None, tmax: float | None = None,
                      *, courant: float = 1.0, snapshot_times=(), record_every: int = 1,
                      initial=None) -> SubtractorTrajectory:
    """Integrate the two-photon absorber equations.

    The pair amplitude is advanced along its characteristics in the
    co-moving frame.  With the time step equal to the node spacing, a node
    is either wholly inside or wholly outside the absorber during each step,
    so the decay factors are exact and the source integral over the step is
    done in closed form block by block.  The total two-photon norm plus the
    trace of ee is then conserved to rounding error.

    Parameters
    ----------
    grid : Grid1D, optional
        Co-moving node grid covering the pulse; the run starts when its last
        node reaches the absorber.  Default :func:`simulation_grid`.
    tmax : float, optional
        Final lab time; default is when the pulse tail has crossed the absorber.
    courant : float
        Must be 1; characteristic stepping has no other stable choice here.
    initial : array, optional
        Symmetric two-photon amplitude on the grid, default sqrt(2) h h.

    Raises
    ------
    ParameterError
        Centred grid, Courant number other than 1, or tmax before the start.
    NumericalError
        If a field becomes non-finite.
    """
    if courant != 1.0:
        raise ParameterError(f"CFL: the subtractor integrator steps exactly along characteristics "
                             f"and needs Courant number 1 (got {courant})")
    grid = grid or simulation_grid(params)
    if grid.centered:
        raise ParameterError("subtractor grid must be a node grid (centered=False)")
    t0_mode, t1_mode = params.mode.support
    if grid.start > -t1_mode + 1e-12 or grid.stop < -t0_mode - 1e-12:
        raise ParameterError("grid does not cover the pulse support")
    note = params.regime_warning()
    if note:
        warnings.warn(note, stacklevel=2)
    X, w, dx = grid.points, grid.weights(), grid.dx
    n = X.size
    t_start = -grid.stop
    tmax = t1_mode + params.length if tmax is None else float(tmax)
    if tmax < t_start:
        raise ParameterError(f"tmax = {tmax} is before the pulse reaches the absorber ({t_start})")
    steps = int(math.ceil((tmax - t_start) / dx - 1e-9))
    n_med = max(1, int(round(params.length / dx)))
    if initial is None:
        h = params.mode(-X)
        EE = math.sqrt(2.0) * np.outer(h, h)
    else:
        EE = np.array(initial)
        if EE.shape != (n, n):
            raise ParameterError(f"initial amplitude must have shape {(n, n)}")
        if np.max(np.abs(EE - EE.T)) > 1e-12 * (np.max(np.abs(EE)) or 1.0):
            raise ParameterError("initial two-photon amplitude must be symmetric")
    ee = np.zeros_like(EE)
    a = params.gamma * dx
    decay = math.exp(-a)
    # int_0^dt 2 gamma exp(-gamma c s) ds for c = 2, 3, 4 (survivor outside, one, both inside)
    f2, f3, f4 = ((2.0 / c) * -math.expm1(-a * c) for c in (2, 3, 4))
    snap_steps = {}
    for ts in snapshot_times:
        k = int(round((ts - t_start) / dx))
        if not 0 <= k <= steps:
            raise ParameterError(f"snapshot time {ts} outside [{t_start}, {t_start + steps * dx}]")
        snap_steps.setdefault(k, []).append(float(ts))
    rec_times, rec_n2, rec_tr = [], [], []
    snapshots, herm, min_eig = {}, 0.0, 0.0
    ww = np.outer(w, w)

    def record(k):
        nonlocal herm, min_eig
        rec_times.append(t_start + k * dx)
        rec_n2.append(0.5 * float(np.sum(ww * np.abs(EE) ** 2)))
        rec_tr.append(float(np.real(np.sum(w * np.diag(ee)))))
        if k in snap_steps:
            herm = max(herm, float(np.max(np.abs(ee - ee.conj().T))))
            min_eig = min(min_eig, _weighted_min_eigenvalue(ee, w))
            for ts in snap_steps[k]:
                snapshots[ts] = (EE.copy(), ee.copy())

    record(0)
    for k in range(steps):
        # node i is at lab index i - (n - 1) + k at the start of the step
        lo = max(0, n - 1 - k)
        hi = min(n, n - 1 - k + n_med)
        if lo < hi and a > 0:
            med = slice(lo, hi)
            B = EE[:, med] * np.sqrt(w[med])
            G = B.conj() @ B.T
            ee += f2 * G
            ee[med, :] += (f3 - f2) * G[med, :]
            ee[:, med] += (f3 - f2) * G[:, med]
            ee[med, med] += (f4 - 2.0 * f3 + f2) * G[med, med]
            EE[med, :] *= decay
            EE[:, med] *= decay
        if (k + 1) % record_every == 0 or k + 1 == steps or (k + 1) in snap_steps:
            record(k + 1)
        if (k + 1) % 256 == 0 and not np.all(np.isfinite(ee)):
            raise NumericalError(f"non-finite density matrix at step {k + 1}")
    if not (np.all(np.isfinite(ee)) and np.all(np.isfinite(EE))):
        raise NumericalError("non-finite fields at the end of the run")
    if steps not in snap_steps:
        herm = max(herm, float(np.max(np.abs(ee - ee.conj().T))))
        min_eig = min(min_eig, _weighted_min_eigenvalue(ee, w))
    diagnostics = {
        "steps": steps,
        "dt": dx,
        "gamma_dt": a,
        "medium_length": params.length,
        "medium_cells": n_med,
        "sharpness": params.sharpness,
        "hermiticity_defect": herm,
        "min_eigenvalue": min_eig,
        "warnings": [note] if note else [],
    }
    n2, tr = np.array(rec_n2), np.array(rec_tr)
    diagnostics["bookkeeping_defect"] = float(np.max(np.abs(n2 + tr - n2[0])))
    return SubtractorTrajectory(grid, np.array(rec_times), n2, tr, EE, ee, snapshots, diagnostics, params)


def relative_l2(values, reference, weights) -> float:
    """Weighted L2 distance of two kernels on the same grid, relative to ``reference``."""
    ww = np.outer(weights, weights)
    num = np.sum(ww * np.abs(np.asarray(values) - reference) ** 2)
    den = np.sum(ww * np.abs(reference) ** 2)
    return float(math.sqrt(num / den))

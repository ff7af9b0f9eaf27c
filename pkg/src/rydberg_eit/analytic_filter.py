"""Closed-form output of the single-photon filter.

A pulse of photons in mode h(t) enters a fully blockaded medium with perfect
EIT.  The first photon is stored as a spin wave, every later photon scatters
on entry, and tracing out the scattered light leaves a single, generally
impure, photon.  Coordinates x in the co-moving photon frame are related to
arrival times by t = -x, so the input mode appears as h(-x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

from .core import FrameError, Grid1D, MediumParams, ModeFunction, ParameterError, cumulative
from .kernel import Kernel

DEFAULT_POINTS = 2000
MIXTURE_TAIL = 1e-12
# h^2 of a gaussian beyond this many sigmas carries < 1e-14 of the weight
GAUSSIAN_GRID_SIGMAS = 8.0


class EmptyInputError(ValueError):
    """No photons in the input."""


@dataclass(frozen=True)
class InputSpec:
    """Input light: a Fock state, a coherent state, or a diagonal mixture.

    ``weights`` maps photon number m to |c_m|^2 and is filled in for every
    kind (Poisson weights are truncated where the omitted tail is < 1e-12).
    """

    kind: str
    mode: ModeFunction
    N: int | None = None
    nbar: float | None = None
    weights: dict | None = None

    @classmethod
    def fock(cls, N, mode):
        if int(N) != N or N < 1:
            raise EmptyInputError(f"Fock input needs integer N >= 1 (got {N})")
        return cls("fock", mode, N=int(N), weights={int(N): 1.0})

    @classmethod
    def coherent(cls, nbar, mode):
        if not nbar > 0:
            raise ParameterError(f"coherent input needs nbar > 0 (got {nbar})")
        return cls("coherent", mode, nbar=float(nbar), weights=poisson_weights(nbar))

    @classmethod
    def mixture(cls, weights, mode):
        w = _weights_dict(weights)
        if any(v < 0 for v in w.values()) or abs(sum(w.values()) - 1.0) > 1e-12:
            raise ParameterError("mixture weights must be >= 0 and sum to 1")
        return cls("mixture", mode, weights=w)


def _weights_dict(weights) -> dict:
    if isinstance(weights, dict):
        return {int(m): float(v) for m, v in weights.items() if v != 0}
    return {m: float(v) for m, v in enumerate(weights) if v != 0}


def poisson_weights(nbar: float, tail: float = MIXTURE_TAIL) -> dict:
    """Poisson photon-number weights, truncated once the omitted tail < ``tail``."""
    out = {}
    total = 0.0
    m = 0
    while True:
        w = math.exp(-nbar + m * math.log(nbar) - math.lgamma(m + 1)) if nbar > 0 else float(m == 0)
        out[m] = w
        total += w
        if m > nbar and 1.0 - total < tail:
            return out
        m += 1


def photon_grid(mode: ModeFunction, n: int = DEFAULT_POINTS) -> Grid1D:
    """Grid in the co-moving frame covering the support of h(-x)."""
    if mode.kind == "gaussian":
        s, c = mode.params["sigma"], mode.params["center"]
        half = GAUSSIAN_GRID_SIGMAS * s
        return Grid1D(-c - half, -c + half, n)
    t0, t1 = mode.support
    return Grid1D(-t1, -t0, n)


def _entered_fraction(mode, x):
    # int_{-inf}^{x} h^2(-z) dz = 1 - H(-x), nondecreasing in x
    return 1.0 - cumulative(mode, -np.asarray(x))


def _check_coverage(mode, grid, tol=1e-9):
    u = _entered_fraction(mode, grid.points)
    if u[0] > tol or 1.0 - u[-1] > tol:
        raise ParameterError(
            f"grid [{grid.start}, {grid.stop}] misses {u[0] + 1 - u[-1]:.3g} of the mode weight")
    return u


def _resolution_note(mode, grid):
    inside = np.count_nonzero(mode(-grid.points) > 0)
    return None if inside >= 50 else f"only {inside} grid points inside the mode support"


def fock_filter_kernel(N: int, mode: ModeFunction, grid: Grid1D | None = None) -> Kernel:
    """Output photon of an N-photon Fock input, co-moving frame.

    phi(x, y) = N h(-x) h(-y) [int_{-inf}^{min(x,y)} h^2(-z) dz]^(N-1)
    """
    if int(N) != N or N < 1:
        raise EmptyInputError(f"need N >= 1 photons (got {N})")
    grid = grid or photon_grid(mode)
    u = _check_coverage(mode, grid)
    h = mode(-grid.points)
    vals = N * np.outer(h, h) * np.minimum.outer(u, u) ** (N - 1)
    meta = dict(input="fock", N=int(N), mode=mode.kind, vacuum_weight=0.0)
    note = _resolution_note(mode, grid)
    if note:
        meta["resolution_warning"] = note
    return Kernel.on_grid(grid, vals, "comoving_photon", **meta)


def coherent_filter_kernel(nbar: float, mode: ModeFunction, grid: Grid1D | None = None) -> Kernel:
    """One-photon part of the output for a coherent input of mean ``nbar``.

    phi(x, y) = nbar h(-x) h(-y) exp[-nbar int_{min(x,y)}^{inf} h^2(-z) dz];
    its trace is 1 - exp(-nbar), the vacuum weight exp(-nbar) goes to ``meta``.
    """
    if not nbar > 0:
        raise ParameterError(f"nbar must be > 0 (got {nbar})")
    grid = grid or photon_grid(mode)
    u = _check_coverage(mode, grid)
    h = mode(-grid.points)
    vals = nbar * np.outer(h, h) * np.exp(-nbar * (1.0 - np.minimum.outer(u, u)))
    meta = dict(input="coherent", nbar=float(nbar), mode=mode.kind, vacuum_weight=math.exp(-nbar))
    return Kernel.on_grid(grid, vals, "comoving_photon", **meta)


def filter_kernel(spec: InputSpec, grid: Grid1D | None = None) -> Kernel:
    """Dispatch on the input kind; mixtures sum the Fock kernels by weight."""
    if spec.kind == "fock":
        return fock_filter_kernel(spec.N, spec.mode, grid)
    if spec.kind == "coherent":
        return coherent_filter_kernel(spec.nbar, spec.mode, grid)
    grid = grid or photon_grid(spec.mode)
    total = None
    for m, w in sorted(spec.weights.items()):
        if m == 0:
            continue
        k = fock_filter_kernel(m, spec.mode, grid).values * w
        total = k if total is None else total + k
    if total is None:
        raise EmptyInputError("mixture has no photons")
    return Kernel.on_grid(grid, total, "comoving_photon", input="mixture",
                          vacuum_weight=spec.weights.get(0, 0.0))


def purity_fock(N: int) -> float:
    """Purity N / (2N - 1) of the filtered photon for a Fock input."""
    if int(N) != N or N < 1:
        raise EmptyInputError(f"need N >= 1 (got {N})")
    return N / (2 * N - 1)


@dataclass(frozen=True)
class MixtureResult:
    efficiency: float
    purity: float | None
    no_photon: bool = False


def purity_mixture(weights) -> MixtureResult:
    """Efficiency 1 - |c_0|^2 and purity of the filtered photon for a diagonal mixture.

    ``weights`` is a dict ``{m: |c_m|^2}`` or a sequence indexed by m.
    """
    w = _weights_dict(weights)
    if any(v < 0 for v in w.values()) or abs(sum(w.values()) - 1.0) > 1e-12:
        raise ParameterError("weights must be >= 0 and sum to 1 within 1e-12")
    eff = 1.0 - w.get(0, 0.0)
    ms = np.array(sorted(m for m in w if m >= 1), dtype=float)
    if ms.size == 0 or eff <= 0:
        return MixtureResult(0.0, None, no_photon=True)
    cs = np.array([w[int(m)] for m in ms])
    M, Nn = np.meshgrid(ms, ms, indexing="ij")
    pair = 2.0 * M * Nn / ((Nn + M - 1.0) * (Nn + M))
    tr_sq = float(cs @ pair @ cs)
    return MixtureResult(eff, tr_sq / eff**2)


def coherent_purity(nbar: float) -> float:
    """Closed-form purity for coherent input; falls from 1 to 1/2 as nbar grows."""
    if not nbar > 0:
        raise ParameterError("nbar must be > 0")
    eff = -math.expm1(-nbar)
    # 1 - e^{-2n}(1 + 2n) is the regularized lower incomplete gamma P(2, 2n)
    return float(gammainc(2.0, 2.0 * nbar)) / (2.0 * eff * eff)


def partial_entry_kernel(N: int, t: float, params: MediumParams, mode: ModeFunction,
                         grid: Grid1D | None = None) -> Kernel:
    """Spin-wave density matrix while the pulse is still entering (spin-wave frame).

    ss(x, y, t) = (N / v_g) h(t - x/v_g) h(t - y/v_g) [int_{t - min(x,y)/v_g}^{t} h^2]^(N-1)
    on x, y in [0, L].
    """
    if int(N) != N or N < 1:
        raise EmptyInputError(f"need N >= 1 (got {N})")
    vg = params.group_velocity
    grid = grid or Grid1D(0.0, params.length, DEFAULT_POINTS)
    needed = vg * (t - mode.support[0])
    if grid.stop - grid.start < needed - 1e-12 or grid.start > 0:
        raise ParameterError(
            f"spin-wave grid of length {grid.stop - grid.start:g} truncates the entered pulse "
            f"(needs {needed:g} from z = 0)")
    z = grid.points
    h = mode(t - z / vg)
    Ht = cumulative(mode, t)
    entered = Ht - cumulative(mode, t - z / vg)
    vals = (N / vg) * np.outer(h, h) * np.minimum.outer(entered, entered) ** (N - 1)
    return Kernel.on_grid(grid, vals, "spinwave", input="fock", N=int(N), time=float(t),
                          group_velocity=vg, vacuum_weight=0.0)


def photon_component(kernel: Kernel, params: MediumParams) -> Kernel:
    """Photonic kernel ee = v_g ss of a spin-wave kernel, mapped to the co-moving frame.

    A spin-wave coordinate z at time t maps to x = z / v_g - t; the Jacobian
    1/v_g in the weights cancels the v_g in the values, so the trace is kept.
    """
    kernel.require_frame("spinwave")
    vg = params.group_velocity
    if "group_velocity" in kernel.meta and not math.isclose(kernel.meta["group_velocity"], vg):
        raise FrameError("kernel was built for a different group velocity")
    t = kernel.meta.get("time", 0.0)
    return Kernel(kernel.points / vg - t, kernel.weights / vg, kernel.values * vg,
                  "comoving_photon", {**kernel.meta, "group_velocity": vg, "time": t})


def spinwave_component(kernel: Kernel, params: MediumParams, t: float) -> Kernel:
    """Inverse of :func:`photon_component` at time ``t``."""
    kernel.require_frame("comoving_photon")
    vg = params.group_velocity
    return Kernel(vg * (kernel.points + t), kernel.weights * vg, kernel.values / vg,
                  "spinwave", {**kernel.meta, "group_velocity": vg, "time": float(t)})


def fock_intensity(N: int, mode: ModeFunction, x) -> np.ndarray:
    """Diagonal phi(x, x) of the Fock kernel without building the matrix."""
    x = np.asarray(x, dtype=float)
    return N * mode(-x) ** 2 * _entered_fraction(mode, x) ** (N - 1)


def coherent_intensity(nbar: float, mode: ModeFunction, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return nbar * mode(-x) ** 2 * np.exp(-nbar * (1.0 - _entered_fraction(mode, x)))


def fwhm(x, y) -> float:
    """Full width at half maximum of a single-peaked sampled profile."""
    x, y = np.asarray(x), np.asarray(y)
    k = int(np.argmax(y))
    half = 0.5 * y[k]
    i = k
    while i > 0 and y[i] > half:
        i -= 1
    j = k
    while j < y.size - 1 and y[j] > half:
        j += 1
    if y[i] > half or y[j] > half:
        raise ValueError("profile does not fall to half maximum inside the grid")
    left = x[i] + (half - y[i]) * (x[i + 1] - x[i]) / (y[i + 1] - y[i])
    right = x[j - 1] + (half - y[j - 1]) * (x[j] - x[j - 1]) / (y[j] - y[j - 1])
    return float(right - left)


def peak_time(x, y) -> float:
    """Arrival time -x of the profile maximum (parabolic refinement)."""
    x, y = np.asarray(x), np.asarray(y)
    k = int(np.clip(np.argmax(y), 1, y.size - 2))
    y0, y1, y2 = y[k - 1], y[k], y[k + 1]
    denom = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
    return float(-(x[k] + shift * (x[1] - x[0])))

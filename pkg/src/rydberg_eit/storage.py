"""Interaction-free storage and forward retrieval of single excitations.

The linear three-field system (photon e, intermediate p, spin wave s) with
a constant control field is solved in two ways: exactly in the frequency
domain via the Laplace transform in time, and in the time domain with the
characteristic stepper, which also yields an explicit energy audit.

The source efficiency of the blockade filter is estimated as the product of
a storage efficiency (proxied by forward retrieval of the parabolic target
spin wave) and the weighted retrieval efficiency of the eigenmodes of the
filtered density matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic_filter import InputSpec, filter_kernel, photon_grid
from .characteristics import EITStepper
from .core import Grid1D, MediumParams, ModeFunction, NumericalError, ParameterError, make_mode
from .spectral import eigen_numeric

NORM_TOL = 1e-6
MODE_WEIGHT_CUTOFF = 0.999
DEFAULT_PULSE_DURATION = 100.0


@dataclass(frozen=True)
class LinearMedium:
    """Coupling ``g``, control ``omega`` (may be 0) and length of a linear medium."""

    g: float
    omega: float
    length: float

    def __post_init__(self):
        if not (self.g > 0 and self.length > 0 and self.omega >= 0):
            raise ParameterError(f"need g, length > 0 and omega >= 0 (got {self.g}, {self.omega}, {self.length})")

    @classmethod
    def from_params(cls, params: MediumParams, omega: float | None = None):
        return cls(params.g, params.omega if omega is None else float(omega), params.length)

    @property
    def optical_depth(self) -> float:
        return 2.0 * self.g**2 * self.length

    @property
    def group_velocity(self) -> float:
        return (self.omega / self.g) ** 2

    def kappa(self, s):
        """Spatial decay rate of the photon at Laplace frequency s: s + g^2 s / (s^2 + s + Omega^2)."""
        s = np.asarray(s, dtype=complex)
        return s + self.g**2 * s / (s * s + s + self.omega**2)


@dataclass(frozen=True)
class SpinWave:
    """A spin-wave amplitude s(z) sampled on ``grid`` (trapezoid weights)."""

    grid: Grid1D
    values: np.ndarray

    def norm(self) -> float:
        return float(np.sum(self.grid.weights() * np.abs(self.values) ** 2))

    def normalized(self) -> "SpinWave":
        return SpinWave(self.grid, self.values / math.sqrt(self.norm()))

    @classmethod
    def parabolic(cls, length: float = 1.0, n: int = 400, centered: bool = False) -> "SpinWave":
        """s(z) proportional to 1 - 4 (z/L - 1/2)^2, normalized."""
        grid = Grid1D(0.0, length, n, centered=centered)
        return cls(grid, (1.0 - 4.0 * (grid.points / length - 0.5) ** 2).astype(complex)).normalized()


@dataclass
class LinearResult:
    """Outcome of :func:`propagate_linear`.

    ``efficiency`` is the photon energy leaving at z = L.  The time-domain
    method also fills the loss to p decay, the excitation left in the medium,
    the output record and, if requested, the stored spin wave.
    """

    efficiency: float
    method: str
    decay_loss: float | None = None
    residual: float | None = None
    times: np.ndarray | None = None
    output: np.ndarray | None = None
    stored: SpinWave | None = None
    stored_norm: float | None = None

    @property
    def audit(self) -> float | None:
        """efficiency + decay loss + residual, which should equal the input norm."""
        if self.decay_loss is None:
            return None
        return self.efficiency + self.decay_loss + self.residual


# ---------------------------------------------------------------- frequency domain


def frequency_grid(medium: LinearMedium, extra_scales=(), refine: float = 1.0):
    """Nodes and weights for (1/2 pi) int d omega over the real line.

    omega = a sinh(u) with uniform u: linear spacing below the narrowest
    scale a, logarithmic above it.  Inside the transparency window the
    photon phase advances as omega L / v_g, so the relative spacing du is
    kept below sqrt(2 / OD) / 4.  The integrands decay at least as omega^-4,
    so the range stops at 50 times the broadest scale.
    """
    scales = [1.0, medium.g, medium.group_velocity / medium.length, *extra_scales]
    if medium.omega > 0:
        scales.append(medium.omega)
    scales = [float(x) for x in scales if x > 0]
    a = 0.25 * min(scales)
    W = 50.0 * max(scales)
    du = min(0.05, 0.25 * math.sqrt(2.0 / max(medium.optical_depth, 1e-300))) / refine
    umax = math.asinh(W / a)
    m = int(math.ceil(umax / du))
    u = np.linspace(-umax, umax, 2 * m + 1)
    w = np.full(u.size, u[1] - u[0])
    w[[0, -1]] *= 0.5
    return a * np.sinh(u), w * a * np.cosh(u) / (2.0 * math.pi)


def retrieval_efficiencies(medium: LinearMedium, z, weights, waves, refine: float = 1.0) -> np.ndarray:
    """Forward-retrieval efficiency of each spin wave (rows of ``waves``).

    Uses e(L, s) = -g Omega / (s^2 + s + Omega^2) int_0^L exp(-kappa(s)(L - z)) s0(z) dz
    and Parseval's theorem for int |e(L, t)|^2 dt.
    """
    waves = np.atleast_2d(np.asarray(waves, dtype=complex))
    if medium.omega == 0:
        return np.zeros(waves.shape[0])
    z = np.asarray(z, dtype=float)
    A = waves * weights
    L = medium.length
    g, om = medium.g, medium.omega

    omega, wq = frequency_grid(medium, refine=refine)
    total = np.zeros(waves.shape[0])
    for sl in _chunks(omega.size):
        s = 1j * omega[sl]
        k = medium.kappa(s)
        pref = -g * om / (s * s + s + om * om)
        e = (A @ np.exp(-np.multiply.outer(L - z, k))) * pref
        total += np.abs(e) ** 2 @ wq[sl]
    return total


def _chunks(n, size=512):
    return [slice(i, min(n, i + size)) for i in range(0, n, size)]


def transmission_efficiency(medium: LinearMedium, mode: ModeFunction, refine: float = 1.0,
                            n: int = 4000) -> float:
    """Fraction of a single photon in ``mode`` that leaves the far end.

    int |h(omega)|^2 exp(-2 Re kappa(i omega) L) d omega / 2 pi.
    """
    t = np.linspace(*mode.support, n + 1)
    wt = np.full(t.size, t[1] - t[0])
    wt[[0, -1]] *= 0.5
    h = mode(t) * wt
    omega, wq = frequency_grid(medium, [1.0 / mode.duration, n / mode.duration / 50.0], refine)
    total = 0.0
    for sl in _chunks(omega.size):
        spec = h @ np.exp(-1j * np.multiply.outer(t, omega[sl]))
        k = medium.kappa(1j * omega[sl])
        total += float(np.sum(wq[sl] * np.abs(spec) ** 2 * np.exp(-2.0 * np.real(k) * medium.length)))
    return total


# ---------------------------------------------------------------- time domain


def _check_normalized(norm, what):
    if abs(norm - 1.0) > NORM_TOL:
        raise ParameterError(f"{what} is not normalized (norm {norm:.6g}); normalize it first")


def propagate_linear(params: MediumParams | LinearMedium, source, *, method: str = "frequency",
                     n: int = 400, courant: float = 1.0, tmax: float | None = None,
                     store_at: float | None = None, tol: float = 1e-7) -> LinearResult:
    """Propagate one excitation through the linear medium with constant control.

    Parameters
    ----------
    source : ModeFunction or SpinWave
        A photon entering at z = 0 from t = 0 on, or a spin wave present at
        t = 0 that is retrieved forward.  Must be normalized.
    method : {"frequency", "time"}
        Exact Laplace-domain result, or the characteristic stepper on ``n``
        cells with energy audit (required for ``store_at``).
    tmax : float, optional
        Time-domain horizon.  By default the run stops once less than ``tol``
        of the excitation is left in the medium and the input has ended.
    store_at : float, optional
        Also record the spin wave at this time (storage with constant control).

    Raises
    ------
    ParameterError
        Unnormalized input, unknown method, or Courant number outside (0, 1].
    """
    medium = params if isinstance(params, LinearMedium) else LinearMedium.from_params(params)
    if method not in ("frequency", "time"):
        raise ParameterError(f"unknown method {method!r}")
    if not 0 < courant <= 1:
        raise ParameterError(f"CFL: Courant number must be in (0, 1] (got {courant})")
    photon = isinstance(source, ModeFunction)
    if not photon:
        if not isinstance(source, SpinWave):
            raise ParameterError("source must be a ModeFunction or a SpinWave")
        _check_normalized(source.norm(), "spin wave")
        if abs(source.grid.stop - source.grid.start - medium.length) > 1e-9 or source.grid.start != 0:
            raise ParameterError("spin wave grid must span [0, L]")
    if method == "frequency" and store_at is None:
        if photon:
            return LinearResult(transmission_efficiency(medium, source), "frequency")
        eff = retrieval_efficiencies(medium, source.grid.points, source.grid.weights(), source.values[None, :])
        return LinearResult(float(eff[0]), "frequency")
    return _propagate_time(medium, source, photon, n, courant, tmax, store_at, tol)


def _propagate_time(medium, source, photon, n, courant, tmax, store_at, tol):
    grid = Grid1D(0.0, medium.length, n, centered=True)
    if photon:
        if source.support[0] < 0:
            raise ParameterError("time-domain input mode must start at t >= 0")
        inflow, initial, t_in = source, None, source.support[1]
    else:
        s0 = np.interp(grid.points, source.grid.points, source.values.real) \
            + 1j * np.interp(grid.points, source.grid.points, source.values.imag)
        s0 = s0 / math.sqrt(np.sum(grid.weights() * np.abs(s0) ** 2))
        z = np.zeros(grid.size, dtype=complex)
        inflow, initial, t_in = None, (z, z.copy(), s0), 0.0
    st = EITStepper(medium, grid, inflow=inflow, initial=initial, courant=courant)
    vg = medium.group_velocity
    horizon = tmax if tmax is not None else t_in + (200.0 * medium.length / vg if vg > 0 else 10.0)
    steps = int(math.ceil(horizon / st.dt))
    out = np.zeros(steps + 1, dtype=complex)
    stored = None
    store_step = None if store_at is None else int(round(store_at / st.dt))
    k = 0
    for k in range(1, steps + 1):
        out[k] = st.step()
        if k == store_step:
            stored = SpinWave(grid, st.s.copy())
        done = tmax is None and k % 64 == 0 and k * st.dt > t_in and (store_step is None or k >= store_step)
        if done and st.norm() < tol:
            break
        if k % 1024 == 0 and not np.all(np.isfinite(st.e)):
            raise NumericalError(f"non-finite field at step {k}")
    times = st.dt * np.arange(k + 1)
    decay = float(st.decay_loss)
    residual = float(st.norm())
    return LinearResult(float(st.exited), "time", decay, residual, times, out[:k + 1], stored,
                        None if stored is None else stored.norm())


# ---------------------------------------------------------------- source efficiency


@dataclass
class SourceEfficiency:
    nbar: float | None
    od_b: float
    eta_store: float
    eta_retrieve: float
    modes_used: int
    eigenvalues: np.ndarray
    mode_efficiencies: np.ndarray

    @property
    def eta(self) -> float:
        return self.eta_store * self.eta_retrieve

    def row(self) -> dict:
        return {"nbar": self.nbar, "od_b": self.od_b, "eta_store": self.eta_store,
                "eta_retrieve": self.eta_retrieve, "eta": self.eta}


def blockaded_medium(od_b: float, pulse_duration: float, length: float = 1.0) -> LinearMedium:
    """Medium of optical depth ``od_b`` whose control compresses the pulse to L."""
    if not od_b > 0:
        raise ParameterError(f"od_b must be > 0 (got {od_b})")
    p = MediumParams.from_optical_depth(od_b, length, length / pulse_duration)
    return LinearMedium.from_params(p)


def kernel_spin_waves(kernel, mode: ModeFunction, length: float = 1.0):
    """Eigenmodes of a co-moving photon kernel mapped onto spin waves in [0, L].

    The photon that arrives first is stored deepest: z = L (x + t1) / T.
    Returns (z, weights, eigenvalues, waves); each wave has unit norm in z.
    """
    t0, t1 = mode.support
    T = t1 - t0
    dec = eigen_numeric(kernel)
    z = length * (kernel.points + t1) / T
    wz = kernel.weights * length / T
    waves = dec.eigenvectors * math.sqrt(T / length)
    return z, wz, dec.eigenvalues, waves


def source_efficiency(spec: InputSpec, od_b: float, grid: Grid1D | None = None, *,
                      pulse_duration: float = DEFAULT_PULSE_DURATION, length: float = 1.0,
                      cutoff: float = MODE_WEIGHT_CUTOFF) -> SourceEfficiency:
    """Single-photon source efficiency eta = eta_store * eta_retrieve.

    The control is chosen so the compressed input fills the medium (group
    velocity L / T for the physical ``pulse_duration`` T, in units of
    1/gamma).  The shape of the filtered photon does not depend on T; T only
    sets how adiabatic the constant-control retrieval is.  eta_store is the forward-retrieval
    efficiency of the parabolic spin wave; eta_retrieve is the
    eigenvalue-weighted retrieval efficiency of the filtered photon's
    eigenmodes, normalized to the photon weight that was kept (modes are
    added until they hold ``cutoff`` of the trace).
    """
    mode = spec.mode
    medium = blockaded_medium(od_b, pulse_duration, length)
    target = SpinWave.parabolic(length, 400)
    eta_store = float(retrieval_efficiencies(medium, target.grid.points, target.grid.weights(),
                                             target.values[None, :])[0])
    kernel = filter_kernel(spec, grid or photon_grid(mode, 800))
    z, wz, p, waves = kernel_spin_waves(kernel, mode, length)
    p = np.clip(p, 0.0, None)
    keep = int(np.searchsorted(np.cumsum(p) / np.sum(p), cutoff) + 1)
    keep = min(keep, p.size)
    eff = retrieval_efficiencies(medium, z, wz, waves[:keep])
    eta_ret = float(np.sum(p[:keep] * eff) / np.sum(p[:keep]))
    return SourceEfficiency(spec.nbar, float(od_b), eta_store, eta_ret, keep, p[:keep], eff)


def efficiency_sweep(nbars, ods, mode: ModeFunction | None = None,
                     pulse_duration: float = DEFAULT_PULSE_DURATION) -> list[SourceEfficiency]:
    """Source efficiency for coherent inputs over a grid of nbar and od_b."""
    mode = mode or make_mode("parabolic", T=1.0)
    return [source_efficiency(InputSpec.coherent(nb, mode), od, pulse_duration=pulse_duration)
            for nb in nbars for od in ods]

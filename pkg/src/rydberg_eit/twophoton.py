"""Dissipative propagation of two photons through a Rydberg-EIT medium.

The unnormalized two-excitation wavefunction (EE, EP, ES, PP, PS, SS) lives
on the interior square x, y in [0, L]; the first argument of a mixed
amplitude is the photon (E) or P coordinate as in EP(x, y) = <E(x) P(y)>.
Whenever one excitation scatters, population moves into the
single-excitation density matrix (ee ... ss) through the source terms.

Regions outside the square are never gridded.  While photon x is still
outside (x < 0), photon y is an ordinary single photon in the linear EIT
medium, so the strip amplitudes factorize as sqrt(2) h(t - x) (E1, P1, S1)(y, t)
and the 1D solution is stepped in lockstep to feed the x = 0 and y = 0 edges.

Time stepping: Courant number dt/dx = 1 makes advection an exact shift along
characteristics; the pointwise linear dynamics (including the interaction
phase V(x - y)) are integrated exactly with one 9x9 matrix exponential per
separation |i - j|, combined by Strang splitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.linalg.blas import zherk

from . import _kernels
from .characteristics import EITStepper, shift, single_excitation_generator
from .core import Grid1D, MediumParams, ModeFunction, NumericalError, ParameterError, cumulative

SQRT2 = math.sqrt(2.0)
INTERACTIONS = ("full_v6", "hard_sphere", "none")


@dataclass(frozen=True)
class SimConfig:
    """Numerical and physical setup of a two-photon run.

    Parameters
    ----------
    nx : int
        Grid cells per medium length L.
    courant : float
        dt / dx in (0, 1]; 1 gives exact advection.
    interaction : {"full_v6", "hard_sphere", "none"}
        ``full_v6`` uses V(r) = C6 / (r^6 + a^6); ``hard_sphere`` zeroes SS
        for |r| < z_b after every local substep; ``none`` sets V = 0.
    regularization : float, optional
        The length a; defaults to max(dx, z_b / 20).
    t_end : float, optional
        Final time; defaults to the end of the input mode.
    snapshot_every : int
        Steps between stored |EE| and ss snapshots (0: only first and last).
    series_every : int
        Steps between entries of the efficiency/purity time series (0: only
        the first and last); each entry costs one extra local half step.
    """

    params: MediumParams
    mode: ModeFunction
    nx: int = 256
    courant: float = 1.0
    interaction: str = "full_v6"
    regularization: float | None = None
    t_end: float | None = None
    snapshot_every: int = 0
    series_every: int = 16

    def __post_init__(self):
        if self.nx < 4:
            raise ParameterError("need at least 4 cells")
        if not 0 < self.courant <= 1.0:
            raise ParameterError(f"CFL violated: dt/dx = {self.courant} must lie in (0, 1]")
        if self.interaction not in INTERACTIONS:
            raise ParameterError(f"unknown interaction {self.interaction!r}")
        if self.regularization is not None and self.regularization < self.dx:
            raise ParameterError("regularization length must be >= dx")
        if self.mode.support[0] < 0:
            raise ParameterError("the input mode must vanish for t < 0")

    @property
    def grid(self) -> Grid1D:
        return Grid1D(0.0, self.params.length, self.nx, centered=True)

    @property
    def dx(self) -> float:
        return self.params.length / self.nx

    @property
    def dt(self) -> float:
        return self.courant * self.dx

    @property
    def end_time(self) -> float:
        return self.mode.support[1] if self.t_end is None else self.t_end

    @property
    def steps(self) -> int:
        return int(math.ceil(self.end_time / self.dt - 1e-9))

    @property
    def reg_length(self) -> float:
        if self.regularization is not None:
            return self.regularization
        return max(self.dx, self.params.blockade_radius / 20.0)

    def potential(self, r) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        if self.interaction != "full_v6" or self.params.c6 == 0:
            return np.zeros_like(r)
        return self.params.c6 / (r**6 + self.reg_length**6)


@dataclass
class TwoPhotonState:
    """Two-excitation amplitudes on the interior grid at ``time``."""

    EE: np.ndarray
    EP: np.ndarray
    ES: np.ndarray
    PP: np.ndarray
    PS: np.ndarray
    SS: np.ndarray
    time: float = 0.0

    @classmethod
    def zeros(cls, n: int, time: float = 0.0):
        return cls(*(np.zeros((n, n), dtype=complex) for _ in range(6)), time=time)

    def fields(self):
        return self.EE, self.EP, self.ES, self.PP, self.PS, self.SS

    def norm(self, w: np.ndarray) -> float:
        W = np.outer(w, w)
        a2 = [np.sum(W * np.abs(f) ** 2) for f in self.fields()]
        return float(0.5 * a2[0] + a2[1] + a2[2] + 0.5 * a2[3] + a2[4] + 0.5 * a2[5])

    def symmetry_defect(self) -> float:
        return max(float(np.max(np.abs(f - f.T))) for f in (self.EE, self.PP, self.SS))

    def copy(self):
        return TwoPhotonState(*(f.copy() for f in self.fields()), time=self.time)


@dataclass
class OneExcitationDensity:
    """Interior single-excitation density matrix; pe, se, sp are derived."""

    ee: np.ndarray
    ep: np.ndarray
    es: np.ndarray
    pp: np.ndarray
    ps: np.ndarray
    ss: np.ndarray
    exited: float = 0.0
    time: float = 0.0

    @classmethod
    def zeros(cls, n: int, time: float = 0.0):
        return cls(*(np.zeros((n, n), dtype=complex) for _ in range(6)), time=time)

    @property
    def pe(self):
        return self.ep.conj().T

    @property
    def se(self):
        return self.es.conj().T

    @property
    def sp(self):
        return self.ps.conj().T

    def fields(self):
        return self.ee, self.ep, self.es, self.pp, self.ps, self.ss

    def trace_inside(self, w) -> float:
        return float(np.sum(w * (np.diag(self.ee) + np.diag(self.pp) + np.diag(self.ss)).real))

    def trace(self, w) -> float:
        """tr[rho_1] including the photon part that already left the medium."""
        return self.trace_inside(w) + self.exited

    def trace_of_square(self, w) -> float:
        W = np.outer(w, w)
        diag = sum(np.sum(W * np.abs(f) ** 2) for f in (self.ee, self.pp, self.ss))
        off = sum(np.sum(W * np.abs(f) ** 2) for f in (self.ep, self.es, self.ps))
        return float(diag + 2.0 * off)

    def purity(self, w) -> float:
        tr = self.trace_inside(w)
        return self.trace_of_square(w) / tr**2 if tr > 0 else float("nan")

    def hermiticity_defect(self) -> float:
        return max(float(np.max(np.abs(f - f.conj().T))) for f in (self.ee, self.pp, self.ss))

    def min_diagonal(self) -> float:
        return float(min(np.min(np.diag(f).real) for f in (self.ee, self.pp, self.ss)))

    def copy(self):
        return OneExcitationDensity(*(f.copy() for f in self.fields()), exited=self.exited, time=self.time)


@dataclass
class SourceTerms:
    ee: np.ndarray
    ep: np.ndarray
    es: np.ndarray
    pp: np.ndarray
    ps: np.ndarray
    ss: np.ndarray

    @classmethod
    def zeros(cls, n):
        return cls(*(np.zeros((n, n), dtype=complex) for _ in range(6)))

    def fields(self):
        return self.ee, self.ep, self.es, self.pp, self.ps, self.ss

    def total_rate(self, w) -> float:
        """d tr[rho_1] / dt supplied by the sources."""
        return float(np.sum(w * (np.diag(self.ee) + np.diag(self.pp) + np.diag(self.ss)).real))

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(f))) for f in self.fields())


# ---------------------------------------------------------------------------
# local generators


def two_photon_generator(params: MediumParams, V: float) -> np.ndarray:
    """Pointwise generator on (EE, EP_xy, EP_yx, ES_xy, ES_yx, PP, PS_xy, PS_yx, SS)."""
    g, om = params.g, params.omega
    ig, io = 1j * g, 1j * om
    M = np.zeros((9, 9), dtype=complex)
    M[0, 1] = M[0, 2] = ig
    for a, es in ((1, 3), (2, 4)):
        M[a, a] = -1.0
        M[a, 0] = M[a, 5] = ig
        M[a, es] = io
    for a, ep, ps in ((3, 1, 6), (4, 2, 7)):
        M[a, ps] = ig
        M[a, ep] = io
    M[5, 5] = -2.0
    M[5, 1] = M[5, 2] = ig
    M[5, 6] = M[5, 7] = io
    for a, es in ((6, 3), (7, 4)):
        M[a, a] = -1.0
        M[a, es] = ig
        M[a, 5] = M[a, 8] = io
    M[8, 8] = -1j * V
    M[8, 6] = M[8, 7] = io
    return M


ONE_EXCITATION_ORDER = ((0, 0), (0, 1), (1, 0), (0, 2), (2, 0), (1, 1), (1, 2), (2, 1), (2, 2))


def one_excitation_generator(params: MediumParams) -> np.ndarray:
    """Pointwise generator of d rho/dt = G rho + rho G^+ on (ee, ep, pe, es, se, pp, ps, sp, ss).

    G is the (e, p, s) single-excitation generator; rho_ab(x, y) pairs
    component a at x with the conjugate of component b at y.
    """
    G = single_excitation_generator(params)
    pos = {ab: k for k, ab in enumerate(ONE_EXCITATION_ORDER)}
    A = np.zeros((9, 9), dtype=complex)
    for k, (a, b) in enumerate(ONE_EXCITATION_ORDER):
        for c in range(3):
            A[k, pos[(c, b)]] += G[a, c]
            A[k, pos[(a, c)]] += np.conj(G[b, c])
    return A


def _exp_and_phi(A: np.ndarray, tau: float):
    """exp(A tau) and int_0^tau exp(A s) ds from one augmented exponential."""
    n = A.shape[0]
    big = np.zeros((2 * n, 2 * n), dtype=complex)
    big[:n, :n] = A * tau
    big[:n, n:] = np.eye(n) * tau
    E = expm(big)
    return E[:n, :n].copy(), E[:n, n:].copy()


# ---------------------------------------------------------------------------
# entry strip


class EntryStrip:
    """Amplitudes in the region x < 0 < y < L, stepped alongside the interior.

    EE = sqrt(2) h(t - x) E1(y, t), EP = sqrt(2) h(t - x) P1(y, t) and
    ES = sqrt(2) h(t - x) S1(y, t), where (E1, P1, S1) is the single-photon
    EIT solution driven by h(t) at y = 0.
    """

    def __init__(self, params: MediumParams, mode: ModeFunction, grid: Grid1D, courant: float = 1.0):
        self.mode = mode
        self.stepper = EITStepper(params, grid, inflow=mode, courant=courant)
        self._prev = self._snapshot()

    def _snapshot(self):
        st = self.stepper
        return st.e.copy(), st.p.copy(), st.s.copy()

    @property
    def time(self):
        return self.stepper.time

    def advance(self):
        """Step once; return (E1, P1, S1) at the time the first grid point is fed.

        That time is t + dt - lag, with lag = x_0 / c the travel time to the
        first point (dt / 2 on a cell-centered grid at Courant number 1); the
        profiles are interpolated linearly inside the step.
        """
        self._prev = self._snapshot()
        st = self.stepper
        st.step()
        cur = self._snapshot()
        lam = min(max((st.dt - st.lag) / st.dt, 0.0), 1.0)
        return tuple((1.0 - lam) * a + lam * b for a, b in zip(self._prev, cur))

    def single_photon_norm(self) -> float:
        st = self.stepper
        return float(st.norm() + st.exited)

    def two_photon_norm(self) -> float:
        """Norm carried by the strips (one photon outside) and by both photons outside."""
        out = 1.0 - cumulative(self.mode, self.time)
        return 2.0 * out * self.single_photon_norm() + out * out


@dataclass
class StripRecord:
    """Recorded strip solution: arrays indexed by (time step, y)."""

    times: np.ndarray
    y: np.ndarray
    E1: np.ndarray
    P1: np.ndarray
    S1: np.ndarray
    mode: ModeFunction

    def amplitudes(self, x, k):
        """(EE, EP, ES) at photon position x < 0 and time index k, as functions of y."""
        amp = SQRT2 * float(self.mode(self.times[k] - x))
        return amp * self.E1[k], amp * self.P1[k], amp * self.S1[k]


def precompute_entry_strip(params: MediumParams, mode: ModeFunction, grid: Grid1D, tmax: float,
                           courant: float = 1.0) -> StripRecord:
    """Solve the strip equations up to ``tmax`` and record (E1, P1, S1)(y, t)."""
    if tmax < mode.support[1]:
        raise ParameterError(f"tmax = {tmax} ends before the pulse ({mode.support[1]})")
    st = EITStepper(params, grid, inflow=mode, courant=courant)
    nt = int(math.ceil(tmax / st.dt - 1e-9))
    rec = [np.zeros((nt + 1, grid.size), dtype=complex) for _ in range(3)]
    for k in range(nt + 1):
        if k:
            st.step()
        rec[0][k], rec[1][k], rec[2][k] = st.e, st.p, st.s
    times = st.dt * np.arange(nt + 1)
    return StripRecord(times, grid.points, *rec, mode)


# ---------------------------------------------------------------------------
# source terms


def _hermitian(upper: np.ndarray) -> np.ndarray:
    """Complete a matrix whose upper triangle holds a Hermitian result."""
    full = np.triu(upper)
    full += np.triu(full, 1).conj().T
    return full


def source_terms(state: TwoPhotonState, w: np.ndarray) -> SourceTerms:
    """Sources feeding rho_1 when a P excitation at z decays.

    The remaining excitation is psi_z = sqrt(2) (EP(., z), PP(z, .), PS(z, .))
    and f = sum_z w_z psi_z psi_z^+ with the grid weights w.  The Hermitian
    blocks use rank-k updates (BLAS herk), the others plain products.
    """
    r = np.sqrt(2.0 * w)
    X = state.EP * r[None, :]               # X[x, z] = sqrt(2 w_z) EP(x, z)
    Y = state.PP * r[:, None]               # Y[z, x]
    Z = state.PS * r[:, None]               # Z[z, y]
    ee = _hermitian(zherk(1.0, X))
    pp = _hermitian(zherk(1.0, Y, trans=2)).conj()
    ss = _hermitian(zherk(1.0, Z, trans=2)).conj()
    Yc, Zc = Y.conj(), Z.conj()
    return SourceTerms(ee, X @ Yc, X @ Zc, pp, Y.T @ Zc, ss)


# ---------------------------------------------------------------------------
# solver


@dataclass
class Trajectory:
    """Output of :func:`run`."""

    times: np.ndarray
    trace: np.ndarray
    purity: np.ndarray
    two_photon_norm: np.ndarray
    vacuum: np.ndarray
    reference_trace: np.ndarray
    snapshots: list = field(default_factory=list)
    final_state: TwoPhotonState | None = None
    final_density: OneExcitationDensity | None = None
    grid: Grid1D | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def efficiency(self) -> float:
        return float(self.trace[-1])

    @property
    def final_purity(self) -> float:
        return float(self.purity[-1])


class TwoPhotonSolver:
    """Holds the precomputed propagators of a :class:`SimConfig`."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.grid = config.grid
        self.w = self.grid.weights()
        n = self.grid.size
        half = 0.5 * config.dt
        p = config.params
        r = self.grid.dx * np.arange(n)
        V = config.potential(r)
        self.U2 = np.stack([expm(two_photon_generator(p, v) * half) for v in V])
        A = one_excitation_generator(p)
        self.U1, self.B1 = _exp_and_phi(A, half)
        self.U1_full, self.B1_full = _exp_and_phi(A, config.dt)
        self.blockade_band = None
        if config.interaction == "hard_sphere":
            i = np.arange(n)
            self.blockade_band = np.abs(i[:, None] - i[None, :]) * self.grid.dx < p.blockade_radius

    # -- two-photon ---------------------------------------------------------

    def local_two_photon(self, state: TwoPhotonState):
        _kernels.two_photon_local(*state.fields(), self.U2)
        if self.blockade_band is not None:
            state.SS[self.blockade_band] = 0.0

    def step_two_photon(self, state: TwoPhotonState, inflow) -> float:
        """Advance ``state`` by dt in place; return the norm that left through x = L or y = L.

        ``inflow`` = (E1, P1, S1) from :meth:`EntryStrip.advance`, i.e. the
        y-profiles fed into the first row divided by sqrt(2) h.
        """
        cfg = self.config
        if not np.all(np.isfinite(state.EE)):
            raise NumericalError(f"non-finite two-photon amplitude at t = {state.time:.6g}")
        self.local_two_photon(state)
        t_in = state.time + cfg.dt - self.grid.offset * self.grid.dx
        amp = SQRT2 * float(cfg.mode(t_in))
        e1, p1, s1 = inflow
        w = self.w
        out = cfg.dt * float(np.sum(w * (np.abs(state.EE[-1]) ** 2 + np.abs(state.EP[-1]) ** 2
                                         + np.abs(state.ES[-1]) ** 2)))
        c = cfg.courant
        edge = amp * e1
        EE = shift(state.EE, edge, c, axis=0)
        EE = shift(EE, edge, c, axis=1)
        EE[0, :] = edge
        EE[:, 0] = edge
        state.EE = EE
        state.EP = shift(state.EP, amp * p1, c, axis=0)
        state.ES = shift(state.ES, amp * s1, c, axis=0)
        self.local_two_photon(state)
        state.time += cfg.dt
        return out

    # -- one-excitation -----------------------------------------------------

    def local_one_excitation(self, rho: OneExcitationDensity, f: SourceTerms, full: bool = False):
        """rho <- exp(A tau) rho + Phi(tau) f with tau = dt/2, or dt if ``full``.

        Two consecutive half steps with the same source equal one full step,
        which :func:`run` uses to fuse the Strang halves of adjacent steps.
        """
        U, B = (self.U1_full, self.B1_full) if full else (self.U1, self.B1)
        _kernels.one_excitation_local(*rho.fields(), *f.fields(), U, B)

    def shift_one_excitation(self, rho: OneExcitationDensity) -> float:
        cfg = self.config
        c = cfg.courant
        out = cfg.dt * float(rho.ee[-1, -1].real)
        ee = shift(shift(rho.ee, 0.0, c, axis=0), 0.0, c, axis=1)
        ee[0, :] = 0.0
        ee[:, 0] = 0.0
        rho.ee = ee
        rho.ep = shift(rho.ep, 0.0, c, axis=0)
        rho.es = shift(rho.es, 0.0, c, axis=0)
        rho.exited += out
        return out

    def step_one_excitation(self, rho: OneExcitationDensity, f_start: SourceTerms, f_end: SourceTerms):
        """Strang step: local(dt/2) with f(t), shift, local(dt/2) with f(t + dt)."""
        self.local_one_excitation(rho, f_start)
        self.shift_one_excitation(rho)
        self.local_one_excitation(rho, f_end)
        rho.time += self.config.dt

    def sources(self, state: TwoPhotonState) -> SourceTerms:
        return source_terms(state, self.w)


def step_two_photon(state: TwoPhotonState, config: SimConfig, inflow, solver: TwoPhotonSolver | None = None):
    """Functional wrapper: copy ``state`` and advance it one step."""
    solver = solver or TwoPhotonSolver(config)
    new = state.copy()
    solver.step_two_photon(new, inflow)
    return new


def step_one_excitation(density: OneExcitationDensity, sources, config: SimConfig,
                        solver: TwoPhotonSolver | None = None):
    """Functional wrapper; ``sources`` is one SourceTerms or a (start, end) pair."""
    solver = solver or TwoPhotonSolver(config)
    f0, f1 = sources if isinstance(sources, tuple) else (sources, sources)
    new = density.copy()
    solver.step_one_excitation(new, f0, f1)
    if new.hermiticity_defect() > 1e-8 * max(1.0, float(np.max(np.abs(new.ee)))):
        raise NumericalError("single-excitation density lost hermiticity")
    return new


def plan(config: SimConfig) -> dict:
    """Grid, CFL and cost summary used by ``--dry-run``.

    ``warnings`` flags under-resolution: the sources are sampled once per
    step, so g dt must stay well below one, and the blockade radius should
    span a few cells.
    """
    p = config.params
    n = config.grid.size
    warnings = []
    if p.g * config.dt > 0.2:
        warnings.append(f"g*dt = {p.g * config.dt:.3g} > 0.2: coupling under-resolved in time")
    if p.c6 > 0 and p.blockade_radius < 4 * config.dx:
        warnings.append("blockade radius spans fewer than 4 cells")
    if p.group_velocity * config.mode.duration > p.length:
        warnings.append("compressed pulse longer than the medium")
    return {
        "cells": config.nx,
        "points_per_axis": n,
        "dx": config.dx,
        "dt": config.dt,
        "courant": config.courant,
        "steps": config.steps,
        "end_time": config.end_time,
        "optical_depth": p.optical_depth,
        "group_velocity": p.group_velocity,
        "blockade_radius": p.blockade_radius,
        "compressed_pulse_length": p.group_velocity * config.mode.duration,
        "coupling_per_step": p.g * config.dt,
        "interaction": config.interaction,
        "regularization": config.reg_length,
        "memory_mb": 18 * n * n * 16 / 2**20,
        "warnings": warnings,
    }


def run(config: SimConfig, progress=None) -> Trajectory:
    """Integrate from t = 0 (pulse entirely outside) to ``config.end_time``."""
    solver = TwoPhotonSolver(config)
    grid, w = solver.grid, solver.w
    n = grid.size
    strip = EntryStrip(config.params, config.mode, grid, config.courant)
    state = TwoPhotonState.zeros(n)
    rho = OneExcitationDensity.zeros(n)
    exited2 = 0.0
    series = []
    snaps = []

    def record(rho):
        tr = rho.trace(w)
        n2 = state.norm(w) + strip.two_photon_norm() + exited2
        pur = rho.purity(w) if rho.trace_inside(w) > 1e-14 else float("nan")
        H = cumulative(config.mode, state.time)
        series.append((state.time, tr, pur, n2, 1.0 - n2 - tr, H * H))

    def snapshot(rho):
        snaps.append({"time": state.time, "abs_EE": np.abs(state.EE), "ss": rho.ss.copy()})

    record(rho)
    snapshot(rho)
    peak_source = 0.0
    # rho is kept half a local step behind: the Strang halves of adjacent
    # steps share the source f(t_k) and are applied as one full step.
    for k in range(1, config.steps + 1):
        inflow = strip.advance()
        exited2 += solver.step_two_photon(state, inflow)
        f = solver.sources(state)
        peak_source = max(peak_source, f.max_abs())
        solver.shift_one_excitation(rho)
        rho.time += config.dt
        last = k == config.steps
        want_series = bool(config.series_every) and k % config.series_every == 0
        want_snap = bool(config.snapshot_every) and k % config.snapshot_every == 0
        synced = None
        if last or want_series or want_snap:
            synced = rho.copy()
            solver.local_one_excitation(synced, f)
        if last:
            rho = synced
        else:
            solver.local_one_excitation(rho, f, full=True)
        if last or want_series:
            record(synced)
        if want_snap and not last:
            snapshot(synced)
        if k % 64 == 0:
            if not np.all(np.isfinite(rho.ss)):
                raise NumericalError(f"non-finite density at t = {state.time:.6g}")
            if progress:
                progress(k, config.steps)
    snapshot(rho)
    arr = np.array(series)
    diag = {
        "symmetry_defect": state.symmetry_defect(),
        "hermiticity_defect": rho.hermiticity_defect(),
        "min_diagonal": rho.min_diagonal(),
        "peak_source": peak_source,
        "single_photon_loss": float(strip.stepper.decay_loss),
        "exited_two_photon": exited2,
        "plan": plan(config),
    }
    return Trajectory(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], arr[:, 5], snaps,
                      state, rho, grid, diag)

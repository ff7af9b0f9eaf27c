"""Method-of-characteristics building blocks shared by the PDE solvers.

Photons move at c = 1.  With the time step equal to the grid spacing
(Courant number 1) advection is an exact one-cell shift; smaller Courant
numbers fall back to first-order upwind interpolation.  Local (pointwise)
linear dynamics are integrated exactly with matrix exponentials and combined
with the shifts by Strang splitting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .core import Grid1D, MediumParams, NumericalError, ParameterError


def single_excitation_generator(params: MediumParams) -> np.ndarray:
    """Local generator for (e, p, s): de/dt = i g p, dp/dt = -p + i g e + i Omega s, ds/dt = i Omega p."""
    g, om = params.g, params.omega
    return np.array([[0, 1j * g, 0], [1j * g, -1.0, 1j * om], [0, 1j * om, 0]], dtype=complex)


def shift(field: np.ndarray, inflow, courant: float = 1.0, axis: int = -1) -> np.ndarray:
    """Advect ``field`` one step toward larger index along ``axis``.

    ``inflow`` is the value entering at index 0.  Returns the new field and,
    through the last slice of the old one, the caller can read the outflow.
    """
    f = np.moveaxis(field, axis, -1)
    out = np.empty_like(f)
    if courant == 1.0:
        out[..., 1:] = f[..., :-1]
        out[..., 0] = inflow
    else:
        out[..., 1:] = (1.0 - courant) * f[..., 1:] + courant * f[..., :-1]
        out[..., 0] = inflow
    return np.moveaxis(out, -1, axis)


@dataclass
class EITHistory:
    """Time record of a 1D single-excitation run.

    ``e``, ``p``, ``s`` have shape ``(nt + 1, ..., n + 1)`` when fields were
    recorded (``None`` otherwise); ``out`` holds e(L, t) for every step; losses are
    cumulative totals at the end of the run.
    """

    times: np.ndarray
    out: np.ndarray
    e: np.ndarray | None
    p: np.ndarray | None
    s: np.ndarray | None
    final: tuple
    decay_loss: np.ndarray
    inflow_norm: np.ndarray
    exited: np.ndarray


class EITStepper:
    """Incremental 1D solver for the linear (e, p, s) system.

    Each step is local(dt/2), shift, local(dt/2).  The exact local propagator
    conserves |e|^2 + |p|^2 + |s|^2 up to the 2|p|^2 decay, which is
    accumulated with the trapezoid rule in ``decay_loss``; ``exited`` holds
    the outgoing photon flux integrated over time.

    Parameters
    ----------
    inflow : callable, optional
        e(0, t) entering the medium; vectorized over t.  Omitted means vacuum.
    initial : tuple of arrays, optional
        Initial (e, p, s); each may carry leading batch dimensions.
    courant : float
        dt / dx, in (0, 1].
    """

    def __init__(self, params: MediumParams, grid: Grid1D, *, inflow=None, initial=None,
                 courant: float = 1.0, t0: float = 0.0):
        if not 0 < courant <= 1:
            raise ParameterError(f"Courant number must be in (0, 1] (got {courant})")
        self.grid = grid
        self.courant = courant
        self.dt = courant * grid.dx
        self.time = t0
        self.inflow = inflow
        n = grid.size
        if initial is None:
            self.e = np.zeros(n, dtype=complex)
            self.p = np.zeros(n, dtype=complex)
            self.s = np.zeros(n, dtype=complex)
        else:
            self.e, self.p, self.s = (np.array(a, dtype=complex) for a in initial)
        # the first point sits a distance ``lag`` inside the medium
        self.lag = grid.offset * grid.dx
        if inflow is not None:
            self.e[..., 0] = float(inflow(t0 - self.lag))
        self._U = expm(single_excitation_generator(params) * (0.5 * self.dt))
        self._w = grid.weights()
        batch = self.e.shape[:-1]
        self.decay_loss = np.zeros(batch)
        self.exited = np.zeros(batch)
        self._pnorm = np.sum(self._w * np.abs(self.p) ** 2, axis=-1)

    def _local(self):
        U = self._U
        e, p, s = self.e, self.p, self.s
        self.e, self.p, self.s = (U[0, 0] * e + U[0, 1] * p + U[0, 2] * s,
                                  U[1, 0] * e + U[1, 1] * p + U[1, 2] * s,
                                  U[2, 0] * e + U[2, 1] * p + U[2, 2] * s)

    def step(self):
        """Advance one step; return e(L) leaving the medium during it."""
        t1 = self.time + self.dt
        self._local()
        out = self.e[..., -1].copy()
        inflow = 0.0 if self.inflow is None else float(self.inflow(t1 - self.lag))
        self.e = shift(self.e, inflow, self.courant)
        self._local()
        pnorm = np.sum(self._w * np.abs(self.p) ** 2, axis=-1)
        self.decay_loss = self.decay_loss + self.dt * (self._pnorm + pnorm)
        self._pnorm = pnorm
        self.exited = self.exited + self.dt * np.abs(out) ** 2
        self.time = t1
        return out

    def norm(self) -> np.ndarray:
        return field_norm(self.grid, self.e, self.p, self.s)


def propagate_eit_1d(params: MediumParams, grid: Grid1D, nsteps: int, *, inflow=None,
                     initial=None, courant: float = 1.0, record: bool = False,
                     t0: float = 0.0) -> EITHistory:
    """Run :class:`EITStepper` for ``nsteps`` steps and collect the history."""
    st = EITStepper(params, grid, inflow=inflow, initial=initial, courant=courant, t0=t0)
    times = t0 + st.dt * np.arange(nsteps + 1)
    hin = np.zeros(nsteps + 1) if inflow is None else np.asarray(inflow(times - st.lag), dtype=float)
    batch = st.e.shape[:-1]
    out = np.zeros((nsteps + 1,) + batch, dtype=complex)
    out[0] = st.e[..., -1]
    rec = None
    if record:
        rec = [np.zeros((nsteps + 1,) + st.e.shape, dtype=complex) for _ in range(3)]
        rec[0][0], rec[1][0], rec[2][0] = st.e, st.p, st.s
    for k in range(1, nsteps + 1):
        out[k] = st.step()
        if record:
            rec[0][k], rec[1][k], rec[2][k] = st.e, st.p, st.s
        if k % 256 == 0 and not np.all(np.isfinite(st.e)):
            raise NumericalError(f"non-finite field at step {k}")
    if grid.centered:
        steps = st.dt * hin[1:] ** 2
    else:
        steps = 0.5 * st.dt * (hin[1:] ** 2 + hin[:-1] ** 2)
    inflow_norm = np.concatenate([[0.0], np.cumsum(steps)])
    return EITHistory(times, out, *(rec or (None, None, None)), (st.e, st.p, st.s),
                      st.decay_loss, inflow_norm, st.exited)


def field_norm(grid: Grid1D, *fields) -> np.ndarray:
    w = grid.weights()
    return sum(np.sum(w * np.abs(f) ** 2, axis=-1) for f in fields)

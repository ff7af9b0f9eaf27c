"""Units, medium parameters, grids and input temporal modes.

All quantities live in the rescaled units of the propagation equations:
time and rates in units of the |g>-|e> halfwidth gamma (gamma = 1), lengths
in units of c/gamma (c = 1).  There is no SI layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

# Gaussian modes are cut at this many standard deviations of h^2; the
# discarded weight is below 1e-30.
GAUSSIAN_SUPPORT_SIGMAS = 12.0
SIMPSON_PANELS = 8192


class ParameterError(ValueError):
    """Invalid physical or numerical parameter."""


class DegenerateModeError(ValueError):
    """A mode function that cannot be normalized."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (non-convergence, NaN, bracketing)."""


class FrameError(ValueError):
    """Kernel used in the wrong reference frame."""


@dataclass(frozen=True)
class MediumParams:
    """Physical constants of the rescaled problem.

    Parameters
    ----------
    g : float
        Collective atom-photon coupling.
    omega : float
        Control Rabi frequency.
    length : float
        Medium length L.
    c6 : float
        van der Waals coefficient; 0 switches interactions off.
    """

    g: float
    omega: float
    length: float
    c6: float = 0.0

    def __post_init__(self):
        if not (self.g > 0 and self.omega > 0 and self.length > 0):
            raise ParameterError(
                f"need g, omega, length > 0 (got {self.g}, {self.omega}, {self.length})")
        if self.c6 < 0:
            raise ParameterError(f"c6 must be >= 0 (got {self.c6})")

    @property
    def group_velocity(self) -> float:
        return (self.omega / self.g) ** 2

    @property
    def blockade_radius(self) -> float:
        return (self.c6 / self.omega**2) ** (1.0 / 6.0)

    @property
    def optical_depth(self) -> float:
        return 2.0 * self.g**2 * self.length

    @property
    def absorption_length(self) -> float:
        return 1.0 / self.g**2

    @classmethod
    def from_optical_depth(cls, od, length, group_velocity, blockade_radius=0.0):
        """Build parameters from (OD, L, v_g, z_b) instead of (g, Omega, L, C6)."""
        if od <= 0 or length <= 0 or group_velocity <= 0 or blockade_radius < 0:
            raise ParameterError("od, length, group_velocity must be > 0")
        g = math.sqrt(od / (2.0 * length))
        omega = g * math.sqrt(group_velocity)
        c6 = blockade_radius**6 * omega**2
        return cls(g=g, omega=omega, length=length, c6=c6)


@dataclass(frozen=True)
class ModeFunction:
    """A real, normalized temporal mode h(t) with compact support.

    Use :func:`make_mode` to build one; the constructor does not normalize.
    """

    kind: str
    params: dict
    support: tuple
    amplitude: float
    samples_t: np.ndarray | None = field(default=None, repr=False, compare=False)
    samples_h: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        t0, t1 = self.support
        inside = (t >= t0) & (t <= t1)
        if self.kind == "parabolic":
            T = self.params["T"]
            u = t / T - 0.5
            val = 1.0 - 4.0 * u * u
        elif self.kind == "gaussian":
            s, c = self.params["sigma"], self.params["center"]
            val = np.exp(-((t - c) ** 2) / (4.0 * s * s))
        else:
            val = np.interp(t, self.samples_t, self.samples_h)
        return np.where(inside, self.amplitude * val, 0.0)

    def cumulative(self, t):
        """H(t) = integral of h^2 from -inf to t (closed form per kind)."""
        return cumulative(self, t)

    @property
    def duration(self) -> float:
        return self.support[1] - self.support[0]


def _parabola_antiderivative(u):
    return u - 8.0 * u**3 / 3.0 + 16.0 * u**5 / 5.0


def make_mode(kind: str, **params) -> ModeFunction:
    """Build a normalized mode.

    Parameters
    ----------
    kind : {"parabolic", "gaussian", "tabulated"}
        ``parabolic`` takes ``T`` (h proportional to 1 - 4(t/T - 1/2)^2 on
        [0, T]); ``gaussian`` takes ``sigma`` and ``center`` (h^2 is a normal
        density with standard deviation sigma); ``tabulated`` takes sample
        arrays ``t`` and ``h`` that are linearly interpolated.
    """
    if kind == "parabolic":
        T = float(params.get("T", 1.0))
        if not T > 0:
            raise ParameterError(f"parabolic mode needs T > 0 (got {T})")
        support = (0.0, T)
        shape = dict(T=T)
        raw = ModeFunction(kind, shape, support, 1.0)
    elif kind == "gaussian":
        sigma = float(params.get("sigma", 1.0))
        center = float(params.get("center", 0.0))
        if not sigma > 0:
            raise ParameterError(f"gaussian mode needs sigma > 0 (got {sigma})")
        half = GAUSSIAN_SUPPORT_SIGMAS * sigma
        support = (center - half, center + half)
        shape = dict(sigma=sigma, center=center)
        raw = ModeFunction(kind, shape, support, 1.0)
    elif kind == "tabulated":
        ts = np.asarray(params["t"], dtype=float)
        hs = np.asarray(params["h"], dtype=float)
        if ts.ndim != 1 or ts.shape != hs.shape or ts.size < 2:
            raise ParameterError("tabulated mode needs matching 1D t and h arrays")
        if not (np.all(np.isfinite(ts)) and np.all(np.isfinite(hs))):
            raise ParameterError("tabulated samples must be finite")
        if np.any(np.diff(ts) <= 0):
            raise ParameterError("tabulated times must be strictly increasing")
        if not np.any(hs != 0):
            raise DegenerateModeError("all tabulated samples are zero")
        support = (float(ts[0]), float(ts[-1]))
        raw = ModeFunction(kind, {}, support, 1.0, ts, hs)
        norm2 = _segment_integrals(ts, hs).sum()
        return ModeFunction(kind, {}, support, 1.0 / math.sqrt(norm2), ts, hs)
    else:
        raise ParameterError(f"unknown mode kind {kind!r}")

    tt = np.linspace(support[0], support[1], SIMPSON_PANELS + 1)
    norm2 = simpson(raw(tt) ** 2, x=tt)
    if not norm2 > 0:
        raise DegenerateModeError("mode has zero norm")
    return ModeFunction(kind, shape, support, 1.0 / math.sqrt(norm2))


def _segment_integrals(ts, hs):
    # exact integral of the squared linear interpolant on each segment
    a, b = hs[:-1], hs[1:]
    return np.diff(ts) * (a * a + a * b + b * b) / 3.0


def cumulative(mode: ModeFunction, t):
    """Return H(t) = int_{-inf}^t h^2, vectorized over ``t``."""
    t = np.asarray(t, dtype=float)
    t0, t1 = mode.support
    tc = np.clip(t, t0, t1)
    if mode.kind == "parabolic":
        T = mode.params["T"]
        u = tc / T - 0.5
        val = mode.amplitude**2 * T * (_parabola_antiderivative(u) - _parabola_antiderivative(-0.5))
    elif mode.kind == "gaussian":
        s, c = mode.params["sigma"], mode.params["center"]
        erf = np.vectorize(math.erf, otypes=[float])
        scale = mode.amplitude**2 * s * math.sqrt(math.pi / 2.0)
        lo = math.erf(-GAUSSIAN_SUPPORT_SIGMAS / math.sqrt(2.0))
        val = scale * (erf((tc - c) / (s * math.sqrt(2.0))) - lo)
    else:
        ts, hs = mode.samples_t, mode.samples_h
        seg = _segment_integrals(ts, hs)
        csum = np.concatenate([[0.0], np.cumsum(seg)])
        k = np.clip(np.searchsorted(ts, tc, side="right") - 1, 0, ts.size - 2)
        a = hs[k]
        slope = (hs[k + 1] - hs[k]) / (ts[k + 1] - ts[k])
        d = tc - ts[k]
        # int_0^d (a + slope*s)^2 ds
        part = a * a * d + a * slope * d * d + slope * slope * d**3 / 3.0
        val = mode.amplitude**2 * (csum[k] + part)
    val = np.where(t >= t1, 1.0, np.where(t <= t0, 0.0, val))
    return np.clip(val, 0.0, 1.0) if val.ndim else float(min(max(val, 0.0), 1.0))


def norm_defect(mode: ModeFunction) -> float:
    """|int h^2 - 1| evaluated with the module quadrature."""
    if mode.kind == "tabulated":
        total = mode.amplitude**2 * _segment_integrals(mode.samples_t, mode.samples_h).sum()
    else:
        tt = np.linspace(*mode.support, SIMPSON_PANELS + 1)
        total = simpson(mode(tt) ** 2, x=tt)
    return abs(total - 1.0)


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on [start, stop] with n intervals.

    By default the points are the n + 1 nodes ``start + i*dx`` with
    trapezoid weights.  With ``centered=True`` they are the n cell midpoints
    ``start + (i + 1/2) dx`` with equal weights dx (midpoint rule), which is
    what the characteristic PDE solvers use: a one-cell shift then moves
    exactly dx of length across the boundary.
    """

    start: float
    stop: float
    n: int
    centered: bool = False

    def __post_init__(self):
        if self.n < 1 or not self.stop > self.start:
            raise ParameterError(f"bad grid [{self.start}, {self.stop}] with n={self.n}")

    @property
    def dx(self) -> float:
        return (self.stop - self.start) / self.n

    @property
    def offset(self) -> float:
        return 0.5 if self.centered else 0.0

    @property
    def points(self) -> np.ndarray:
        return self.coordinate(np.arange(self.size))

    @property
    def size(self) -> int:
        return self.n if self.centered else self.n + 1

    def coordinate(self, i):
        return self.start + self.dx * (np.asarray(i) + self.offset)

    def index(self, x):
        """Index of the point nearest to ``x``."""
        i = np.rint((np.asarray(x) - self.start) / self.dx - self.offset).astype(int)
        return np.clip(i, 0, self.size - 1) if self.centered else i

    def trapezoid_weights(self) -> np.ndarray:
        """Quadrature weights: trapezoid on nodes, midpoint rule on cells."""
        w = np.full(self.size, self.dx)
        if not self.centered:
            w[0] = w[-1] = 0.5 * self.dx
        return w

    weights = trapezoid_weights


@dataclass(frozen=True)
class Grid2D:
    """Cartesian square of a :class:`Grid1D`."""

    axis: Grid1D

    @property
    def shape(self):
        return (self.axis.size, self.axis.size)

    def mesh(self):
        p = self.axis.points
        return np.meshgrid(p, p, indexing="ij")

    def weights(self) -> np.ndarray:
        w = self.axis.trapezoid_weights()
        return np.outer(w, w)

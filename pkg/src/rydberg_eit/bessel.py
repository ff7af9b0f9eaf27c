"""Bessel functions J_nu (real order, |nu| <= 2) and Y_0, Y_1 without scipy.special.

Three regimes, chosen per argument:

* ``x <= SERIES_MAX``: ascending power series.
* ``SERIES_MAX < x < HANKEL_MIN``: Miller's backward recurrence in the order,
  normalized with the Neumann sum (x/2)^mu = sum_k (mu + 2k) Gamma(mu + k) / k! J_{mu+2k}.
  Y_0 and Y_1 follow from the Neumann series over the same even/odd orders.
* ``x >= HANKEL_MIN``: Hankel's asymptotic expansion, truncated at its
  smallest term (error well below 1e-16 there).
"""

from __future__ import annotations

import math

import numpy as np

from .core import NumericalError

SERIES_MAX = 5.0
HANKEL_MIN = 20.0
EULER_GAMMA = 0.5772156649015329


def _asarray(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(~np.isfinite(x)):
        raise ValueError("Bessel argument must be finite and >= 0")
    return x


def _series_j(nu, x):
    # sum_k (-1)^k (x/2)^(2k+nu) / (k! Gamma(k+nu+1)); terms with a pole in Gamma vanish
    half = x / 2.0
    q = -half * half
    out = np.zeros_like(x)
    k0 = 0
    if nu < 0 and float(nu).is_integer():
        k0 = int(-nu)
    lg = math.lgamma(k0 + 1) + math.lgamma(k0 + nu + 1)
    sign = (-1) ** k0 * np.sign(math.gamma(k0 + nu + 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        term = sign * np.exp((2 * k0 + nu) * np.log(np.where(half > 0, half, 1.0)) - lg)
    term = np.where(half > 0, term, 1.0 if (nu == 0) else 0.0)
    if nu < 0 and not float(nu).is_integer():
        term = np.where(half > 0, term, np.inf)
    out += term
    for k in range(k0 + 1, k0 + 80):
        term = term * q / (k * (k + nu))
        out += term
        if np.all(np.abs(term) <= 1e-17 * np.abs(out)):
            break
    return out


def _hankel_pq(nu, x):
    mu = 4.0 * nu * nu
    P = np.ones_like(x)
    Q = np.zeros_like(x)
    a = np.ones_like(x)
    done = np.zeros(x.shape, dtype=bool)
    prev = np.full_like(x, np.inf)
    for k in range(1, 120):
        a = a * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        mag = np.abs(a)
        done |= (mag > prev) | (mag < 1e-18)
        contrib = np.where(done, 0.0, a)
        if k % 2:
            Q += (-1) ** ((k - 1) // 2) * contrib
        else:
            P += (-1) ** (k // 2) * contrib
        prev = mag
        if np.all(done):
            break
    return P, Q


def _hankel(nu, x):
    P, Q = _hankel_pq(nu, x)
    chi = x - (0.5 * nu + 0.25) * math.pi
    amp = np.sqrt(2.0 / (math.pi * x))
    return amp * (P * np.cos(chi) - Q * np.sin(chi)), amp * (P * np.sin(chi) + Q * np.cos(chi))


def _miller(mu, x, extra=0):
    """Return J_{mu+k}(x) for k = 0..K as rows of an array (x in the mid range)."""
    top = int(1.5 * float(np.max(x))) + 40 + extra
    top += top % 2
    vals = np.zeros((top + 2,) + x.shape)
    vals[top] = 1e-30
    for k in range(top, 0, -1):
        vals[k - 1] = 2.0 * (mu + k) / x * vals[k] - vals[k + 1]
        big = np.abs(vals[k - 1]) > 1e250
        if np.any(big):
            vals[:, big] *= 1e-250
    ks = np.arange(0, top + 1, 2)
    if mu == 0.0:
        norm = vals[0] + 2.0 * vals[2:top + 1:2].sum(axis=0)
        scale = 1.0 / norm
    else:
        coef = np.array([(mu + 2 * k) * math.exp(math.lgamma(mu + k) - math.lgamma(k + 1)) for k in ks // 2])
        norm = np.tensordot(coef, vals[ks], axes=1)
        scale = (x / 2.0) ** mu / norm
    return vals[: top + 1] * scale


def jv(nu: float, x):
    """Bessel function of the first kind J_nu(x) for real |nu| <= 2 and x >= 0."""
    nu = float(nu)
    if abs(nu) > 2.0:
        raise ValueError(f"order {nu} outside the supported range |nu| <= 2")
    x = _asarray(x)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    if nu < 0 and nu.is_integer():
        out = (-1) ** int(-nu) * jv(-nu, x)
        return float(out[0]) if scalar else out
    lo = x <= SERIES_MAX
    hi = x >= HANKEL_MIN
    mid = ~(lo | hi)
    if np.any(lo):
        out[lo] = _series_j(nu, x[lo])
    if np.any(hi):
        out[hi] = _hankel(nu, x[hi])[0]
    if np.any(mid):
        # nu = n0 + mu with mu in [0, 1); negative n0 is reached by downward steps
        n0 = math.floor(nu)
        mu = nu - n0
        xm = x[mid]
        rows = _miller(mu, xm)
        if n0 >= 0:
            out[mid] = rows[n0]
        else:
            a, b = rows[0], rows[1]  # J_mu, J_{mu+1}
            order = mu
            for _ in range(-n0):
                a, b = 2.0 * order / xm * a - b, a
                order -= 1.0
            out[mid] = a
    return float(out[0]) if scalar else out


def _y01_series(x):
    half = x / 2.0
    q = -half * half
    lg = np.log(half) + EULER_GAMMA
    j0 = _series_j(0.0, x)
    j1 = _series_j(1.0, x)
    # Y0: (2/pi)[lg J0 + sum_{k>=1} (-1)^(k+1) H_k (x^2/4)^k / (k!)^2]
    s0 = np.zeros_like(x)
    term = np.ones_like(x)
    hk = 0.0
    for k in range(1, 60):
        term = term * q / (k * k)
        hk += 1.0 / k
        s0 -= hk * term
    y0 = (2.0 / math.pi) * (lg * j0 + s0)
    # Y1: -2/(pi x) + (2/pi) lg J1 - (1/pi) sum_k (H_k + H_{k+1}) (-1)^k (x/2)^(2k+1) / (k!(k+1)!)
    s1 = np.zeros_like(x)
    term = half.copy()
    hk, hk1 = 0.0, 1.0
    for k in range(0, 60):
        if k:
            term = term * q / (k * (k + 1))
            hk += 1.0 / k
            hk1 += 1.0 / (k + 1)
        s1 += (hk + hk1) * term
    y1 = -2.0 / (math.pi * x) + (2.0 / math.pi) * (lg * j1) - s1 / math.pi
    return y0, y1


def _y01_neumann(x):
    J = _miller(0.0, x, extra=2)
    lg = np.log(x / 2.0) + EULER_GAMMA
    top = J.shape[0] - 2
    ks = np.arange(1, top // 2)
    sgn = ((-1.0) ** ks)[:, None]
    even = J[2 * ks]
    y0 = (2.0 / math.pi) * (lg * J[0] - 2.0 * np.sum(sgn * even / ks[:, None], axis=0))
    diff = J[2 * ks - 1] - J[2 * ks + 1]
    y1 = -(2.0 / math.pi) * (J[0] / x - lg * J[1] - np.sum(sgn * diff / ks[:, None], axis=0))
    return y0, y1


def _y01(x):
    x = _asarray(x)
    if np.any(x == 0):
        raise ValueError("Y_n is singular at x = 0")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    y0 = np.empty_like(x)
    y1 = np.empty_like(x)
    lo = x <= SERIES_MAX
    hi = x >= HANKEL_MIN
    mid = ~(lo | hi)
    if np.any(lo):
        y0[lo], y1[lo] = _y01_series(x[lo])
    if np.any(mid):
        y0[mid], y1[mid] = _y01_neumann(x[mid])
    if np.any(hi):
        y0[hi] = _hankel(0.0, x[hi])[1]
        y1[hi] = _hankel(1.0, x[hi])[1]
    if scalar:
        return float(y0[0]), float(y1[0])
    return y0, y1


def y0(x):
    """Bessel function of the second kind Y_0(x), x > 0."""
    return _y01(x)[0]


def y1(x):
    """Bessel function of the second kind Y_1(x), x > 0."""
    return _y01(x)[1]


def bessel(kind: str, nu: float, x):
    """Dispatcher: ``kind`` is ``"J"`` (any |nu| <= 2) or ``"Y"`` (nu in {0, 1})."""
    if kind == "J":
        return jv(nu, x)
    if kind == "Y":
        if nu == 0:
            return y0(x)
        if nu == 1:
            return y1(x)
        raise ValueError("only Y_0 and Y_1 are provided")
    raise ValueError(f"unknown Bessel kind {kind!r}")


def _mcmahon(nu, s):
    # s-th positive zero of J_nu, asymptotic in s
    beta = (s + 0.5 * nu - 0.25) * math.pi
    mu = 4.0 * nu * nu
    return beta - (mu - 1) / (8 * beta) - 4 * (mu - 1) * (7 * mu - 31) / (3 * (8 * beta) ** 3)


def _bisect_secant(f, a, b, fa, fb, tol=1e-13):
    for _ in range(200):
        # secant guess, fall back to bisection if it leaves the bracket
        c = b - fb * (b - a) / (fb - fa) if fb != fa else 0.5 * (a + b)
        if not (min(a, b) < c < max(a, b)):
            c = 0.5 * (a + b)
        fc = f(c)
        if fc == 0.0:
            return c
        if (fa < 0) != (fc < 0):
            b, fb = c, fc
        else:
            a, fa = c, fc
        if abs(b - a) < tol * max(1.0, abs(c)):
            return 0.5 * (a + b)
        # guard against one-sided secant stagnation
        m = 0.5 * (a + b)
        fm = f(m)
        if (fa < 0) != (fm < 0):
            b, fb = m, fm
        else:
            a, fa = m, fm
    raise NumericalError("root polishing did not converge")


def jv_zeros(nu: float, count: int, step: float = math.pi / 4) -> np.ndarray:
    """First ``count`` positive zeros of J_nu, -1 < nu <= 2.

    Zeros are bracketed by a scan with spacing ``step`` (consecutive zeros are
    about pi apart) and polished by safeguarded bisection/secant to 1e-13.
    Zeros beyond the Hankel threshold start from McMahon's expansion and are
    bracketed within +-step of it, which keeps large counts cheap.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if not -1.0 < nu <= 2.0:
        raise ValueError("zeros supported for -1 < nu <= 2")

    def f(z):
        return jv(nu, z)

    roots = []
    # For nu in (-1, 0) J_nu starts at +inf; start just right of 0.
    z = 1e-6
    fz = f(z)
    while len(roots) < count and z < HANKEL_MIN + 10:
        z2 = z + step
        f2 = f(z2)
        if fz == 0.0:
            roots.append(z)
        elif (fz < 0) != (f2 < 0):
            roots.append(_bisect_secant(f, z, z2, fz, f2))
        z, fz = z2, f2
    roots = roots[:count]
    s = len(roots) + 1
    if len(roots) < count:
        # vectorized guesses, then a few Newton steps using J_nu' = J_{nu-1} - (nu/x) J_nu
        ss = np.arange(s, count + 1, dtype=float)
        guess = np.array([_mcmahon(nu, k) for k in ss])
        if roots and abs(guess[0] - roots[-1]) < 2.0:
            raise NumericalError("zero scan and asymptotic continuation overlap")
        zr = guess
        for _ in range(8):
            jz = _hankel(nu, zr)[0]
            djz = _hankel(nu - 1.0, zr)[0] - nu / zr * jz
            dz = jz / djz
            zr = zr - dz
            if np.max(np.abs(dz) / zr) < 1e-15:
                break
        if np.any(np.abs(zr - guess) > step):
            raise NumericalError("asymptotic zero polishing left its bracket")
        roots = np.concatenate([roots, zr])
    return np.asarray(roots, dtype=float)

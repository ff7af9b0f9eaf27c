"""Compiled pointwise updates for the two-dimensional solvers.

Both kernels visit each unordered pair (i, j), i <= j, once and update the
pair (i, j), (j, i) together, so symmetry and conjugation relations between
the two points are preserved exactly.
"""

from __future__ import annotations

import numba
import numpy as np
from numba import njit, prange

# the portable work-queue layer needs no TBB/OpenMP runtime
numba.config.THREADING_LAYER = "workqueue"


@njit(parallel=True, cache=True)
def two_photon_local(EE, EP, ES, PP, PS, SS, U):
    """Apply U[|i-j|] to (EE, EP_xy, EP_yx, ES_xy, ES_yx, PP, PS_xy, PS_yx, SS)."""
    n = EE.shape[0]
    for i in prange(n):
        v = np.empty(9, dtype=np.complex128)
        for j in range(i, n):
            v[0] = EE[i, j]
            v[1] = EP[i, j]
            v[2] = EP[j, i]
            v[3] = ES[i, j]
            v[4] = ES[j, i]
            v[5] = PP[i, j]
            v[6] = PS[i, j]
            v[7] = PS[j, i]
            v[8] = SS[i, j]
            M = U[j - i]
            w0 = 0j
            w1 = 0j
            w2 = 0j
            w3 = 0j
            w4 = 0j
            w5 = 0j
            w6 = 0j
            w7 = 0j
            w8 = 0j
            for k in range(9):
                vk = v[k]
                w0 += M[0, k] * vk
                w1 += M[1, k] * vk
                w2 += M[2, k] * vk
                w3 += M[3, k] * vk
                w4 += M[4, k] * vk
                w5 += M[5, k] * vk
                w6 += M[6, k] * vk
                w7 += M[7, k] * vk
                w8 += M[8, k] * vk
            EE[i, j] = w0
            EE[j, i] = w0
            EP[i, j] = w1
            EP[j, i] = w2
            ES[i, j] = w3
            ES[j, i] = w4
            PP[i, j] = w5
            PP[j, i] = w5
            PS[i, j] = w6
            PS[j, i] = w7
            SS[i, j] = w8
            SS[j, i] = w8


@njit(parallel=True, cache=True)
def one_excitation_local(ee, ep, es, pp, ps, ss, fee, fep, fes, fpp, fps, fss, U, B):
    """v <- U v + B f on (ee, ep, pe, es, se, pp, ps, sp, ss), with pe = ep^H etc."""
    n = ee.shape[0]
    for i in prange(n):
        v = np.empty(9, dtype=np.complex128)
        f = np.empty(9, dtype=np.complex128)
        w = np.empty(9, dtype=np.complex128)
        for j in range(i, n):
            v[0] = ee[i, j]
            v[1] = ep[i, j]
            v[2] = np.conj(ep[j, i])
            v[3] = es[i, j]
            v[4] = np.conj(es[j, i])
            v[5] = pp[i, j]
            v[6] = ps[i, j]
            v[7] = np.conj(ps[j, i])
            v[8] = ss[i, j]
            f[0] = fee[i, j]
            f[1] = fep[i, j]
            f[2] = np.conj(fep[j, i])
            f[3] = fes[i, j]
            f[4] = np.conj(fes[j, i])
            f[5] = fpp[i, j]
            f[6] = fps[i, j]
            f[7] = np.conj(fps[j, i])
            f[8] = fss[i, j]
            for a in range(9):
                acc = 0j
                for k in range(9):
                    acc += U[a, k] * v[k] + B[a, k] * f[k]
                w[a] = acc
            if i == j:
                # diagonal of a Hermitian block is real; pe(x,x) = conj(ep(x,x))
                ee[i, i] = w[0].real
                ep[i, i] = 0.5 * (w[1] + np.conj(w[2]))
                es[i, i] = 0.5 * (w[3] + np.conj(w[4]))
                pp[i, i] = w[5].real
                ps[i, i] = 0.5 * (w[6] + np.conj(w[7]))
                ss[i, i] = w[8].real
            else:
                ee[i, j] = w[0]
                ee[j, i] = np.conj(w[0])
                ep[i, j] = w[1]
                ep[j, i] = np.conj(w[2])
                es[i, j] = w[3]
                es[j, i] = np.conj(w[4])
                pp[i, j] = w[5]
                pp[j, i] = np.conj(w[5])
                ps[i, j] = w[6]
                ps[j, i] = np.conj(w[7])
                ss[i, j] = w[8]
                ss[j, i] = np.conj(w[8])

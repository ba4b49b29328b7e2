# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled accumulation over flattened risk sets (hot path of every fit).

Same contract as ``numpy_backend.cox_expected_pass`` with a global shift;
the dispatch layer reroutes extreme linear predictors to the per-event
shift fallback before this kernel is reached.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

from remfrail._kernels.common import KernelPass


def cox_expected_pass(cnp.int64_t[::1] indptr, cnp.int32_t[::1] risk_dyads,
                      cnp.int32_t[::1] event_dyads, int n_actors,
                      cnp.float64_t[::1] eta, X=None, int want=2):
    cdef Py_ssize_t E = event_dyads.shape[0]
    cdef Py_ssize_t n = n_actors
    cdef Py_ssize_t n_dyads = eta.shape[0]
    cdef Py_ssize_t p = 0
    cdef cnp.float64_t[:, ::1] Xv
    if X is not None and X.shape[1] > 0:
        Xv = X
        p = Xv.shape[1]
    if E == 0:
        return KernelPass(logdenos=np.empty(0))

    cdef Py_ssize_t D = p + 2 * n
    cdef Py_ssize_t e, k, q1, q2, d, s, r, lo, hi
    cdef double shift, deno, invd, w, wx

    shift = eta[0]
    for k in range(1, n_dyads):
        if eta[k] > shift:
            shift = eta[k]

    expeta_arr = np.empty(n_dyads)
    cdef cnp.float64_t[::1] expeta = expeta_arr
    for k in range(n_dyads):
        expeta[k] = exp(eta[k] - shift)

    logdenos_arr = np.empty(E)
    cdef cnp.float64_t[::1] logdenos = logdenos_arr

    cdef cnp.float64_t[::1] exp_marg = None
    cdef cnp.float64_t[::1] pop_marg = None
    cdef cnp.float64_t[::1] swx = None
    cdef cnp.float64_t[:, ::1] cross = None
    cdef cnp.float64_t[:, ::1] M = None
    cdef cnp.float64_t[:, ::1] sxx = None
    cdef cnp.float64_t[:, ::1] sex = None
    cdef cnp.float64_t[:, ::1] spx = None

    exp_marg_arr = pop_marg_arr = swx_arr = None
    cross_arr = M_arr = sxx_arr = sex_arr = spx_arr = None
    if want >= 1:
        exp_marg_arr = np.zeros(n)
        pop_marg_arr = np.zeros(n)
        swx_arr = np.zeros(p if p else 0)
        exp_marg = exp_marg_arr
        pop_marg = pop_marg_arr
        if p:
            swx = swx_arr
    if want >= 2:
        cross_arr = np.zeros((n, n))
        M_arr = np.zeros((E, D))
        cross = cross_arr
        M = M_arr
        if p:
            sxx_arr = np.zeros((p, p))
            sex_arr = np.zeros((n, p))
            spx_arr = np.zeros((n, p))
            sxx = sxx_arr
            sex = sex_arr
            spx = spx_arr

    for e in range(E):
        lo = indptr[e]
        hi = indptr[e + 1]
        deno = 0.0
        for k in range(lo, hi):
            deno += expeta[risk_dyads[k]]
        logdenos[e] = log(deno) + shift
        if want == 0:
            continue
        invd = 1.0 / deno
        for k in range(lo, hi):
            d = risk_dyads[k]
            w = expeta[d] * invd
            s = d / n
            r = d - s * n
            exp_marg[s] += w
            pop_marg[r] += w
            if want >= 2:
                cross[s, r] += w
                M[e, p + s] += w
                M[e, p + n + r] += w
            for q1 in range(p):
                wx = w * Xv[d, q1]
                swx[q1] += wx
                if want >= 2:
                    M[e, q1] += wx
                    sex[s, q1] += wx
                    spx[r, q1] += wx
                    for q2 in range(q1, p):
                        sxx[q1, q2] += wx * Xv[d, q2]

    if want >= 2 and p:
        # fill the strictly lower triangle accumulated only above
        sxx_arr = sxx_arr + sxx_arr.T - np.diag(np.diag(sxx_arr))

    if want == 1:
        return KernelPass(logdenos=logdenos_arr, exp_marg=exp_marg_arr,
                          pop_marg=pop_marg_arr, swx=swx_arr)
    if want >= 2:
        return KernelPass(logdenos=logdenos_arr, exp_marg=exp_marg_arr,
                          pop_marg=pop_marg_arr, swx=swx_arr, cross=cross_arr,
                          M=M_arr, sxx=sxx_arr, sex=sex_arr, spx=spx_arr)
    return KernelPass(logdenos=logdenos_arr)

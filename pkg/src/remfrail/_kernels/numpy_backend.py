"""Pure-numpy accumulation over flattened risk sets.

Mirrors the compiled kernel bit-for-bit in structure: one global shift of
the linear predictor (per-dyad ``exp`` is computed once, risk-set entries
only gather), segment reductions for the denominators, and scatter-adds
for the marginal accumulations. ``per_event_shift=True`` switches to a
per-risk-set max shift, needed only when the linear predictor spans a
range wide enough to underflow the global shift.
"""

from __future__ import annotations

import numpy as np

from .common import KernelPass

WANT_VALUE = 0
WANT_GRAD = 1
WANT_HESS = 2


def cox_expected_pass(indptr, risk_dyads, event_dyads, n_actors, eta,
                      X=None, want=WANT_HESS, per_event_shift=False) -> KernelPass:
    n = int(n_actors)
    E = len(event_dyads)
    p = 0 if X is None else X.shape[1]
    if E == 0:
        return KernelPass(logdenos=np.empty(0))

    starts = indptr[:-1]
    seg_len = np.diff(indptr)
    eta_flat = eta[risk_dyads]

    if per_event_shift:
        seg_max = np.maximum.reduceat(eta_flat, starts)
        ex = np.exp(eta_flat - np.repeat(seg_max, seg_len))
        denos = np.add.reduceat(ex, starts)
        logdenos = np.log(denos) + seg_max
    else:
        shift = float(eta.max())
        ex = np.exp(eta_flat - shift)
        denos = np.add.reduceat(ex, starts)
        logdenos = np.log(denos) + shift

    if want == WANT_VALUE:
        return KernelPass(logdenos=logdenos)

    w = ex / np.repeat(denos, seg_len)
    senders = risk_dyads // n
    receivers = risk_dyads - senders * n
    exp_marg = np.bincount(senders, weights=w, minlength=n)
    pop_marg = np.bincount(receivers, weights=w, minlength=n)

    Xf = X[risk_dyads] if p else None
    swx = w @ Xf if p else np.empty(0)

    if want == WANT_GRAD:
        return KernelPass(logdenos=logdenos, exp_marg=exp_marg,
                          pop_marg=pop_marg, swx=swx)

    cross = np.bincount(risk_dyads, weights=w, minlength=n * n).reshape(n, n)

    D = p + 2 * n
    eidx = np.repeat(np.arange(E, dtype=np.int64), seg_len)
    M = np.zeros((E, D))
    M[:, p:p + n] = np.bincount(eidx * n + senders, weights=w,
                                minlength=E * n).reshape(E, n)
    M[:, p + n:] = np.bincount(eidx * n + receivers, weights=w,
                               minlength=E * n).reshape(E, n)

    sxx = sex = spx = None
    if p:
        wX = w[:, None] * Xf
        for k in range(p):
            M[:, k] = np.add.reduceat(wX[:, k], starts)
        sxx = Xf.T @ wX
        sex = np.empty((n, p))
        spx = np.empty((n, p))
        for k in range(p):
            sex[:, k] = np.bincount(senders, weights=wX[:, k], minlength=n)
            spx[:, k] = np.bincount(receivers, weights=wX[:, k], minlength=n)

    return KernelPass(logdenos=logdenos, exp_marg=exp_marg, pop_marg=pop_marg,
                      swx=swx, cross=cross, M=M, sxx=sxx, sex=sex, spx=spx)

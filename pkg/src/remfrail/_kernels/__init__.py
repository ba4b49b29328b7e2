"""Likelihood accumulation kernels: compiled core with numpy fallback.

The compiled Cython kernel is preferred when its extension module built;
otherwise the numpy implementation is used. Set ``REMFRAIL_PURE_PYTHON=1``
to force the fallback (used by the backend-comparison benchmark and
tests). Both backends implement the same `cox_expected_pass` contract and
agree to floating-point roundoff.
"""

from __future__ import annotations

import os

from . import numpy_backend
from .common import KernelPass

__all__ = ["ACTIVE_BACKEND", "KernelPass", "available_backends", "cox_expected_pass"]

#: Linear-predictor spread beyond which the global-shift kernels could
#: underflow a whole risk set; such calls reroute to a per-event shift.
ETA_RANGE_LIMIT = 500.0

_cython_backend = None
if os.environ.get("REMFRAIL_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _cox as _cython_backend
    except ImportError:
        _cython_backend = None

_impl = _cython_backend if _cython_backend is not None else numpy_backend
ACTIVE_BACKEND = "cython" if _cython_backend is not None else "numpy"


def available_backends() -> dict[str, object]:
    backends: dict[str, object] = {"numpy": numpy_backend}
    if _cython_backend is not None:
        backends["cython"] = _cython_backend
    return backends


def cox_expected_pass(indptr, risk_dyads, event_dyads, n_actors, eta,
                      X=None, want=2) -> KernelPass:
    """Run one accumulation sweep with the active backend.

    See `remfrail._kernels.common.KernelPass` for the output contract and
    ``numpy_backend.cox_expected_pass`` for the reference implementation.
    """
    if len(event_dyads) and eta.size:
        if float(eta.max()) - float(eta.min()) > ETA_RANGE_LIMIT:
            return numpy_backend.cox_expected_pass(
                indptr, risk_dyads, event_dyads, n_actors, eta, X, want,
                per_event_shift=True)
    return _impl.cox_expected_pass(indptr, risk_dyads, event_dyads,
                                   n_actors, eta, X, want)

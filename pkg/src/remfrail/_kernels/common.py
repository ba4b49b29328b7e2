"""Shared result container for the likelihood accumulation backends."""

from typing import NamedTuple, Optional

import numpy as np


class KernelPass(NamedTuple):
    """Expected-value accumulations from one sweep over all risk sets.

    With ``w_d = exp(eta_d) / sum_{d' in R_e} exp(eta_d')`` the per-event
    softmax weight of dyad ``d`` and design vector layout
    ``[covariates (p), sender one-hot (n), receiver one-hot (n)]``:

    - ``logdenos[e]``: log of event e's risk-set denominator.
    - ``exp_marg[i]`` / ``pop_marg[j]``: total weight routed through sender
      i / receiver j, summed over events.
    - ``swx[k]``: total weighted covariate sum.
    - ``cross[i, j]``: total weight of dyad (i, j), the sender/receiver
      second-moment coupling.
    - ``M[e, :]``: event e's weighted mean design vector (softmax mean).
    - ``sxx``, ``sex``, ``spx``: weighted covariate second moments and the
      covariate-by-sender / covariate-by-receiver couplings.
    """

    logdenos: np.ndarray
    exp_marg: Optional[np.ndarray] = None
    pop_marg: Optional[np.ndarray] = None
    swx: Optional[np.ndarray] = None
    cross: Optional[np.ndarray] = None
    M: Optional[np.ndarray] = None
    sxx: Optional[np.ndarray] = None
    sex: Optional[np.ndarray] = None
    spx: Optional[np.ndarray] = None

"""Stratified Cox log partial likelihood and its Gaussian-penalized variant.

The linear predictor of dyad ``(i, j)`` is

    eta_ij = theta . x_ij + b_exp[i] + b_pop[j]

with ``theta`` the fixed effects and ``b_exp`` / ``b_pop`` the per-actor
expansiveness and popularity effects. The log partial likelihood sums, over
events, the event dyad's eta minus the log-sum-exp over its risk set. With
strictly increasing jittered times no ties remain; if a caller constructs
records sharing a time, each keeps its own full risk set, which is exactly
the Breslow handling of ties.

The unpenalized likelihood is invariant to adding a constant to all of
``b_exp`` (or all of ``b_pop``); the quadratic penalty of `lppl` removes
that indeterminacy, so reported effect estimates are shrinkage-centered.

Value, gradient, and Hessian accumulation is a reduction over events with
independent contributions, delegated to the compiled kernel (or its numpy
fallback) in `remfrail._kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import cox_expected_pass
from .errors import EstimationError
from .model_data import ModelData


@dataclass
class Parameters:
    """Packed model parameters in layout ``[theta, b_exp, b_pop]``."""

    theta: np.ndarray
    b_exp: np.ndarray
    b_pop: np.ndarray

    def __post_init__(self):
        self.theta = np.atleast_1d(np.asarray(self.theta, dtype=np.float64))
        self.b_exp = np.asarray(self.b_exp, dtype=np.float64)
        self.b_pop = np.asarray(self.b_pop, dtype=np.float64)
        if len(self.b_exp) != len(self.b_pop):
            raise ValueError("b_exp and b_pop must have equal length")
        for arr in (self.theta, self.b_exp, self.b_pop):
            if arr.size and not np.all(np.isfinite(arr)):
                raise ValueError("parameters must be finite")

    @classmethod
    def zeros(cls, n_actors: int, n_theta: int = 0) -> "Parameters":
        return cls(np.zeros(n_theta), np.zeros(n_actors), np.zeros(n_actors))

    @property
    def n_actors(self) -> int:
        return len(self.b_exp)

    def pack(self) -> np.ndarray:
        return np.concatenate([self.theta, self.b_exp, self.b_pop])

    @classmethod
    def unpack(cls, vec: np.ndarray, n_actors: int, n_theta: int = 0) -> "Parameters":
        vec = np.asarray(vec, dtype=np.float64)
        if len(vec) != n_theta + 2 * n_actors:
            raise ValueError("parameter vector has wrong length")
        return cls(vec[:n_theta], vec[n_theta:n_theta + n_actors],
                   vec[n_theta + n_actors:])


@dataclass(frozen=True)
class VarianceSpec:
    """Standard deviations of the expansiveness and popularity effects."""

    sigma_exp: float
    sigma_pop: float

    def __post_init__(self):
        if not (self.sigma_exp > 0 and self.sigma_pop > 0):
            raise ValueError("variance parameters must be strictly positive")

    def variance_vector(self, n_actors: int) -> np.ndarray:
        """Per-coordinate prior variances in ``[b_exp, b_pop]`` order."""
        return np.concatenate([
            np.full(n_actors, self.sigma_exp ** 2),
            np.full(n_actors, self.sigma_pop ** 2),
        ])

    def logdet(self, n_actors: int) -> float:
        """Log determinant of the diagonal prior covariance (size 2n)."""
        return 2.0 * n_actors * (np.log(self.sigma_exp) + np.log(self.sigma_pop))


def eta_table(data: ModelData, params: Parameters) -> np.ndarray:
    """Linear predictor for every ordered dyad, flat over ``i * n + j``."""
    eta = np.add.outer(params.b_exp, params.b_pop).ravel()
    if data.n_covariates:
        if len(params.theta) != data.n_covariates:
            raise ValueError("theta length does not match covariate count")
        eta = eta + data.covariates @ params.theta
    elif len(params.theta):
        raise ValueError("theta given but model data has no covariates")
    return np.ascontiguousarray(eta)


def _run_pass(data: ModelData, params: Parameters, want: int):
    eta = eta_table(data, params)
    out = cox_expected_pass(data.indptr, data.risk_dyads, data.event_dyads,
                            data.n_actors, eta,
                            data.covariates if data.n_covariates else None,
                            want)
    value = float(eta[data.event_dyads].sum() - out.logdenos.sum())
    if not np.isfinite(value):
        raise EstimationError("non-finite log partial likelihood")
    return value, out


def lpl_value(data: ModelData, params: Parameters) -> float:
    return _run_pass(data, params, want=0)[0]


def _gradient(data: ModelData, out) -> np.ndarray:
    n = data.n_actors
    obs_exp = np.bincount(data.event_senders(), minlength=n).astype(np.float64)
    obs_pop = np.bincount(data.event_receivers(), minlength=n).astype(np.float64)
    parts = []
    if data.n_covariates:
        obs_x = data.covariates[data.event_dyads].sum(axis=0)
        parts.append(obs_x - out.swx)
    parts.append(obs_exp - out.exp_marg)
    parts.append(obs_pop - out.pop_marg)
    return np.concatenate(parts)


def _hessian(data: ModelData, out) -> np.ndarray:
    n = data.n_actors
    p = data.n_covariates
    D = p + 2 * n
    F = np.zeros((D, D))
    idx = np.arange(n)
    F[p + idx, p + idx] = out.exp_marg
    F[p + n + idx, p + n + idx] = out.pop_marg
    F[p:p + n, p + n:] = out.cross
    F[p + n:, p:p + n] = out.cross.T
    if p:
        F[:p, :p] = out.sxx
        F[:p, p:p + n] = out.sex.T
        F[p:p + n, :p] = out.sex
        F[:p, p + n:] = out.spx.T
        F[p + n:, :p] = out.spx
    H = out.M.T @ out.M - F
    return 0.5 * (H + H.T)


def lpl(data: ModelData, params: Parameters,
        ) -> tuple[float, np.ndarray, np.ndarray]:
    """Log partial likelihood with exact analytic gradient and Hessian.

    Returns
    -------
    (value, gradient, hessian)
        Gradient and Hessian are over the packed layout
        ``[theta, b_exp, b_pop]``. The Hessian is negative semidefinite;
        its null space contains the two constant directions of ``b_exp``
        and ``b_pop``.
    """
    value, out = _run_pass(data, params, want=2)
    return value, _gradient(data, out), _hessian(data, out)


def penalty_terms(params: Parameters, phi: VarianceSpec,
                  ) -> tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient, and Hessian diagonal of the Gaussian penalty."""
    var = phi.variance_vector(params.n_actors)
    b = np.concatenate([params.b_exp, params.b_pop])
    value = -0.5 * float(b @ (b / var))
    grad = -b / var
    hess_diag = -1.0 / var
    return value, grad, hess_diag


def lppl(data: ModelData, params: Parameters, phi: VarianceSpec,
         ) -> tuple[float, np.ndarray, np.ndarray]:
    """Penalized log partial likelihood: `lpl` minus the Gaussian penalty

    ``(|b_exp|^2 / sigma_exp^2 + |b_pop|^2 / sigma_pop^2) / 2``.
    """
    value, grad, hess = lpl(data, params)
    pv, pg, ph = penalty_terms(params, phi)
    p = len(params.theta)
    grad = grad.copy()
    hess = hess.copy()
    grad[p:] += pg
    hess[np.arange(p, len(grad)), np.arange(p, len(grad))] += ph
    return value + pv, grad, hess


def lppl_value(data: ModelData, params: Parameters, phi: VarianceSpec) -> float:
    return lpl_value(data, params) + penalty_terms(params, phi)[0]


def event_log_denominators(data: ModelData, params: Parameters) -> np.ndarray:
    """Per-event log risk-set denominators (input to the Breslow estimator)."""
    return _run_pass(data, params, want=0)[1].logdenos

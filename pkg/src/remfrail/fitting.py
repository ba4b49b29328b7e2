"""Model fitting: penalized Newton inner solver, Laplace marginal, and the
fixed-effects and frailty fit entry points.

For fixed variance parameters the penalized likelihood is maximized over
``(theta, b)`` by Newton iterations with step-halving. The marginal
criterion profiled over the two standard deviations is the Laplace
approximation

    LPPL(theta_hat, b_hat) - log det(Sigma) / 2 - log det(H_bb) / 2
        + q log(2 pi) / 2,

with ``H_bb`` the random-effects block of the negated penalized Hessian at
the inner optimum and ``q`` the number of random effects. The outer search
over ``(log sigma_exp, log sigma_pop)`` is derivative-free (Nelder-Mead
within bounds), warm-starting each inner solve from the previous optimum.
"""

from __future__ import annotations

import io
import json
import logging
import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np
import scipy.linalg
import scipy.optimize

from ._util import round12
from .errors import EstimationError
from .likelihood import Parameters, VarianceSpec, lpl, lpl_value
from .model_data import ModelData

logger = logging.getLogger(__name__)


class Objective(Protocol):
    """Maximization target over a packed parameter vector.

    The last ``q`` coordinates are the (penalizable) random effects. Both
    fit entry points use the Cox objective; tests substitute synthetic
    objectives, e.g. quadratics, through the same seam.
    """

    n_theta: int
    q: int

    def value(self, x: np.ndarray) -> float: ...

    def value_grad_hess(self, x: np.ndarray
                        ) -> tuple[float, np.ndarray, np.ndarray]: ...


class CoxObjective:
    """Packed-vector view of the stratified Cox log partial likelihood."""

    def __init__(self, data: ModelData, theta_only: bool = False):
        self.data = data
        self.theta_only = theta_only
        self.n_theta = data.n_covariates
        self.q = 0 if theta_only else 2 * data.n_actors
        self.dim = self.n_theta + self.q

    def unpack(self, x: np.ndarray) -> Parameters:
        if self.theta_only:
            n = self.data.n_actors
            return Parameters(x, np.zeros(n), np.zeros(n))
        return Parameters.unpack(x, self.data.n_actors, self.n_theta)

    def value(self, x: np.ndarray) -> float:
        return lpl_value(self.data, self.unpack(x))

    def value_grad_hess(self, x: np.ndarray):
        v, g, h = lpl(self.data, self.unpack(x))
        if self.theta_only:
            p = self.n_theta
            return v, g[:p], h[:p, :p]
        return v, g, h


@dataclass
class NewtonResult:
    params: np.ndarray
    value: float
    hessian: np.ndarray
    converged: bool
    iterations: int
    grad_norm: float
    ridged: bool = False


def _penalized(objective, x: np.ndarray, prior_var: np.ndarray | None,
               with_derivs: bool = True):
    if with_derivs:
        value, grad, hess = objective.value_grad_hess(x)
    else:
        value = objective.value(x)
        grad = hess = None
    if prior_var is not None and len(prior_var):
        q = len(prior_var)
        b = x[-q:]
        value = value - 0.5 * float(b @ (b / prior_var))
        if with_derivs:
            grad = grad.copy()
            hess = hess.copy()
            grad[-q:] -= b / prior_var
            tail = np.arange(len(x) - q, len(x))
            hess[tail, tail] -= 1.0 / prior_var
    return value, grad, hess


def newton_maximize(objective: Objective, prior_var: np.ndarray | None,
                    init: np.ndarray, gtol: float = 1e-8,
                    max_iter: int = 50, max_halvings: int = 20) -> NewtonResult:
    """Maximize a (possibly penalized) objective by damped Newton steps.

    Stops when the gradient max-norm falls below ``gtol`` or after
    ``max_iter`` iterations. A singular Newton system is repaired with an
    escalating ridge and reported through the result. Exact on quadratic
    objectives in a single step.
    """
    x = np.asarray(init, dtype=np.float64).copy()
    value, grad, hess = _penalized(objective, x, prior_var)
    ridged = False
    iterations = 0
    converged = False
    while True:
        gnorm = float(np.max(np.abs(grad))) if len(grad) else 0.0
        if gnorm < gtol:
            converged = True
            break
        if iterations >= max_iter:
            break
        iterations += 1

        a = -hess
        ridge = 0.0
        while True:
            try:
                chol = scipy.linalg.cho_factor(
                    a if ridge == 0.0 else a + ridge * np.eye(len(a)),
                    check_finite=False)
                break
            except scipy.linalg.LinAlgError:
                ridge = max(ridge * 10.0, 1e-8 * max(1.0, float(np.max(np.abs(a)))))
                ridged = True
                if ridge > 1e12:
                    raise EstimationError("Newton system irreparably singular")
        step = scipy.linalg.cho_solve(chol, grad, check_finite=False)

        # near the optimum the predicted gain can sit below float resolution
        # of the value; accept such plateau steps instead of stalling
        slack = 8.0 * np.finfo(float).eps * (1.0 + abs(value))
        scale = 1.0
        accepted = False
        for _ in range(max_halvings):
            x_try = x + scale * step
            try:
                v_try = _penalized(objective, x_try, prior_var,
                                   with_derivs=False)[0]
            except (EstimationError, FloatingPointError):
                v_try = -np.inf
            if v_try >= value - slack:
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            break
        x = x + scale * step
        value, grad, hess = _penalized(objective, x, prior_var)

    if not converged:
        logger.warning("Newton did not converge: |grad|=%g after %d iterations",
                       gnorm, iterations)
    return NewtonResult(params=x, value=value, hessian=hess,
                        converged=converged, iterations=iterations,
                        grad_norm=gnorm, ridged=ridged)


def inner_newton(data: ModelData, phi: VarianceSpec,
                 init: Parameters | None = None, gtol: float = 1e-8,
                 max_iter: int = 50) -> tuple[Parameters, np.ndarray, bool]:
    """Maximize the penalized partial likelihood at fixed variances.

    Returns ``(params_hat, hessian, converged)`` where ``hessian`` is the
    full penalized-likelihood Hessian at the optimum (negative definite
    when the solve succeeded).
    """
    objective = CoxObjective(data)
    prior_var = phi.variance_vector(data.n_actors)
    x0 = (init.pack() if init is not None
          else np.zeros(objective.dim))
    res = newton_maximize(objective, prior_var, x0, gtol=gtol,
                          max_iter=max_iter)
    try:
        scipy.linalg.cho_factor(-res.hessian, check_finite=False)
    except scipy.linalg.LinAlgError:
        logger.warning("curvature at the penalized optimum is not "
                       "negative definite")
    return objective.unpack(res.params), res.hessian, res.converged


def laplace_value(objective: Objective, prior_var: np.ndarray,
                  sigma_logdet: float, init: np.ndarray,
                  gtol: float = 1e-8, max_iter: int = 50,
                  profile_only: bool = False,
                  ) -> tuple[float, NewtonResult]:
    """Laplace-approximated log marginal for a generic inner objective."""
    res = newton_maximize(objective, prior_var, init, gtol=gtol,
                          max_iter=max_iter)
    q = len(prior_var)
    h_bb = -res.hessian[-q:, -q:]
    try:
        chol = scipy.linalg.cholesky(h_bb, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        raise EstimationError(
            "random-effects curvature block not positive definite") from None
    logdet_hbb = 2.0 * float(np.sum(np.log(np.diag(chol))))
    value = res.value - 0.5 * sigma_logdet + 0.5 * q * math.log(2.0 * math.pi)
    if not profile_only:
        value -= 0.5 * logdet_hbb
    return float(value), res


def laplace_marginal(data: ModelData, phi: VarianceSpec,
                     init: Parameters | None = None, gtol: float = 1e-8,
                     max_iter: int = 50, profile_only: bool = False) -> float:
    """Laplace approximation of the log integrated partial likelihood.

    Inner non-convergence propagates as a warning through the Newton
    solver; a non-positive-definite random-effects block raises
    `EstimationError`.
    """
    objective = CoxObjective(data)
    x0 = init.pack() if init is not None else np.zeros(objective.dim)
    value, _ = laplace_value(objective, phi.variance_vector(data.n_actors),
                             phi.logdet(data.n_actors), x0, gtol=gtol,
                             max_iter=max_iter, profile_only=profile_only)
    return value


@dataclass
class FitOptions:
    """Controls for the variance-profile (outer) optimization."""

    sigma_min: float = 1e-3
    sigma_max: float = 1e2
    log_sigma_tol: float = 1e-3
    init_sigma: tuple[float, float] | None = None
    max_outer_evals: int = 200
    inner_gtol: float = 1e-8
    inner_max_iter: int = 50
    profile_only: bool = False


@dataclass
class FitResult:
    """Fitted effects, variance estimates, and convergence diagnostics."""

    theta: np.ndarray
    b_exp: np.ndarray
    b_pop: np.ndarray
    sigma: VarianceSpec | None
    loglik: float
    marginal: float | None
    converged: bool
    iterations: int
    gradient_norm: float
    boundary: bool = False
    risk_policy: str = "full"
    kind: str = ""

    def params(self) -> Parameters:
        return Parameters(self.theta, self.b_exp, self.b_pop)

    def to_json_dict(self) -> dict:
        return {
            "theta": [round12(v) for v in np.atleast_1d(self.theta)],
            "b_exp": [round12(v) for v in self.b_exp],
            "b_pop": [round12(v) for v in self.b_pop],
            "sigma_exp": round12(self.sigma.sigma_exp) if self.sigma else None,
            "sigma_pop": round12(self.sigma.sigma_pop) if self.sigma else None,
            "loglik": round12(self.loglik),
            "marginal": round12(self.marginal) if self.marginal is not None else None,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "risk_policy": self.risk_policy,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_json_dict(), indent=indent)

    def frailty_csv(self, stream=None, symbols=None) -> str | None:
        """Per-actor effect estimates as CSV ``actor,b_exp_hat,b_pop_hat``."""
        out = stream if stream is not None else io.StringIO()
        out.write("actor,b_exp_hat,b_pop_hat\n")
        for i, (be, bp) in enumerate(zip(self.b_exp, self.b_pop)):
            label = symbols.label_of(i) if symbols is not None else i
            out.write(f"{label},{be:.12g},{bp:.12g}\n")
        if stream is None:
            return out.getvalue()
        return None


def fit_fixed(data: ModelData, gtol: float = 1e-8, max_iter: int = 50) -> FitResult:
    """Maximize the partial likelihood over theta only (all frailties zero).

    With no fixed covariates the model reduces to pure stratification and
    the result simply carries the log likelihood at the empty parameter.
    """
    n = data.n_actors
    if data.n_covariates == 0:
        params = Parameters.zeros(n)
        value = lpl_value(data, params)
        return FitResult(theta=np.empty(0), b_exp=params.b_exp,
                         b_pop=params.b_pop, sigma=None, loglik=value,
                         marginal=None, converged=True, iterations=0,
                         gradient_norm=0.0,
                         risk_policy=data.risk_policy.describe(),
                         kind=data.kind.value)
    objective = CoxObjective(data, theta_only=True)
    res = newton_maximize(objective, None, np.zeros(objective.n_theta),
                          gtol=gtol, max_iter=max_iter)
    return FitResult(theta=res.params, b_exp=np.zeros(n), b_pop=np.zeros(n),
                     sigma=None, loglik=res.value, marginal=None,
                     converged=res.converged, iterations=res.iterations,
                     gradient_norm=res.grad_norm,
                     risk_policy=data.risk_policy.describe(),
                     kind=data.kind.value)


def fit_frailty(data: ModelData, options: FitOptions | None = None) -> FitResult:
    """Fit the frailty model: profile the Laplace marginal over variances.

    The two standard deviations are searched on the log scale within
    bounds by Nelder-Mead; each marginal evaluation runs the penalized
    Newton solver warm-started from the previous optimum. A solution
    pinned at the variance bounds is flagged through ``boundary``.
    """
    opts = options or FitOptions()
    objective = CoxObjective(data)
    n = data.n_actors
    lo, hi = math.log(opts.sigma_min), math.log(opts.sigma_max)

    warm = {"x": np.zeros(objective.dim)}
    evals = {"count": 0, "all_inner_converged": True}

    def neg_marginal(log_sigma: np.ndarray) -> float:
        phi = VarianceSpec(math.exp(log_sigma[0]), math.exp(log_sigma[1]))
        value, res = laplace_value(
            objective, phi.variance_vector(n), phi.logdet(n), warm["x"],
            gtol=opts.inner_gtol, max_iter=opts.inner_max_iter,
            profile_only=opts.profile_only)
        warm["x"] = res.params
        evals["count"] += 1
        evals["all_inner_converged"] &= res.converged
        return -value

    if opts.init_sigma is not None:
        s0 = opts.init_sigma
    else:
        # moment-style initial guess: spread of the penalized mode at unit
        # variances, kept away from the bounds
        _, res0 = laplace_value(objective, VarianceSpec(1.0, 1.0).variance_vector(n),
                                0.0, warm["x"], gtol=1e-6,
                                max_iter=opts.inner_max_iter)
        warm["x"] = res0.params
        guess = Parameters.unpack(res0.params, n, objective.n_theta)
        s0 = (float(np.clip(np.std(guess.b_exp), 0.1, 2.0)),
              float(np.clip(np.std(guess.b_pop), 0.1, 2.0)))

    x0 = np.clip(np.log(np.asarray(s0)), lo, hi)
    opt = scipy.optimize.minimize(
        neg_marginal, x0, method="Nelder-Mead",
        bounds=[(lo, hi), (lo, hi)],
        options={"xatol": opts.log_sigma_tol, "fatol": 1e-2,
                 "maxfev": opts.max_outer_evals})

    phi_hat = VarianceSpec(math.exp(opt.x[0]), math.exp(opt.x[1]))
    marginal, res = laplace_value(
        objective, phi_hat.variance_vector(n), phi_hat.logdet(n), warm["x"],
        gtol=opts.inner_gtol, max_iter=opts.inner_max_iter,
        profile_only=opts.profile_only)
    params = Parameters.unpack(res.params, n, objective.n_theta)
    loglik = lpl_value(data, params)

    tol = opts.log_sigma_tol
    boundary = bool(min(opt.x) <= lo + tol or max(opt.x) >= hi - tol)
    if boundary:
        logger.warning("variance estimate at search bound: sigma=(%g, %g)",
                       phi_hat.sigma_exp, phi_hat.sigma_pop)
    return FitResult(theta=params.theta, b_exp=params.b_exp, b_pop=params.b_pop,
                     sigma=phi_hat, loglik=loglik, marginal=marginal,
                     converged=bool(opt.success and res.converged
                                    and evals["all_inner_converged"]),
                     iterations=evals["count"], gradient_norm=res.grad_norm,
                     boundary=boundary,
                     risk_policy=data.risk_policy.describe(),
                     kind=data.kind.value)

"""Bivariate odds-ratio model for two binary outcomes.

Two marginal logistic regressions linked by a constant odds ratio psi: the
joint cell probabilities come from the Plackett construction, and the
nine-parameter likelihood (four coefficients per outcome plus log psi) is
maximized by quasi-Newton ascent with central-difference gradients.  The hot
fitting loop lives in a compiled kernel with a pure-numpy fallback
(see _backend).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import InvalidInput

__all__ = [
    "BivariateFit",
    "JointCellProbs",
    "N_PARAMS",
    "biv_loglik",
    "fit_bivariate_or",
    "initial_params",
    "plackett_joint",
]

N_PARAMS = 9  # mu1, lam1, alpha1, beta1, mu2, lam2, alpha2, beta2, log psi

COEF_BOUND = 10.0
LOGPSI_BOUND = 20.0
PROB_EPS = 1e-6
GRAD_TOL = 1e-6
MAX_ITER = 200
LOGLIK_GUARD = -1e300


@dataclass(frozen=True)
class JointCellProbs:
    p11: float
    p10: float
    p01: float
    p00: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p11, self.p10, self.p01, self.p00])


@dataclass
class BivariateFit:
    params: np.ndarray  # length 9
    converged: bool
    diverged_or_separated: bool
    loglik: float
    n_iterations: int = 0

    @property
    def beta1(self) -> float:
        return float(self.params[3])

    @property
    def beta2(self) -> float:
        return float(self.params[7])

    @property
    def log_psi(self) -> float:
        return float(self.params[8])


def plackett_joint(p1: float, p2: float, psi: float) -> JointCellProbs:
    """Joint cell probabilities with given marginals and odds ratio psi.

    Uses the numerically stable root p11 = 2 psi p1 p2 / (s + sqrt(D)) with
    s = 1 + (p1 + p2)(psi - 1) and D = s^2 - 4 psi (psi - 1) p1 p2, which
    equals the textbook quadratic root for psi != 1 and p1*p2 at psi = 1.
    """
    if not (0.0 < p1 < 1.0 and 0.0 < p2 < 1.0):
        raise InvalidInput(f"marginals must lie in (0,1), got {p1}, {p2}")
    if not psi > 0.0:
        raise InvalidInput(f"psi must be positive, got {psi}")
    p11 = _plackett_p11(p1, p2, psi)
    p10 = max(p1 - p11, 0.0)
    p01 = max(p2 - p11, 0.0)
    p00 = max(1.0 - p1 - p2 + p11, 0.0)
    total = p11 + p10 + p01 + p00
    if abs(total - 1.0) > 1e-12:
        p11, p10, p01, p00 = (c / total for c in (p11, p10, p01, p00))
    return JointCellProbs(p11, p10, p01, p00)


def _plackett_p11(p1: float, p2: float, psi: float) -> float:
    if abs(psi - 1.0) < 1e-12:
        return p1 * p2
    s = 1.0 + (p1 + p2) * (psi - 1.0)
    disc = s * s - 4.0 * psi * (psi - 1.0) * p1 * p2
    root = math.sqrt(max(disc, 0.0))
    if s >= 0.0:
        # conjugate form: no cancellation for s >= 0 (covers psi >= 1)
        p11 = 2.0 * psi * p1 * p2 / (s + root)
    else:
        # s < 0 only occurs for psi < 1, where psi - 1 is safely negative
        p11 = (s - root) / (2.0 * (psi - 1.0))
    return min(p11, min(p1, p2))


def _marginal_probs(params: np.ndarray, x, t) -> tuple[np.ndarray, np.ndarray]:
    eta1 = params[0] + params[1] * t + params[2] * x + params[3] * t * x
    eta2 = params[4] + params[5] * t + params[6] * x + params[7] * t * x
    p1 = 1.0 / (1.0 + np.exp(-np.clip(eta1, -35.0, 35.0)))
    p2 = 1.0 / (1.0 + np.exp(-np.clip(eta2, -35.0, 35.0)))
    return p1, p2


def biv_loglik(params, x_j, treatment, y1, y2) -> float:
    """Multinomial log-likelihood over the four outcome cells.

    Marginals come from the per-outcome linear predictors (1, t, x, t*x) and
    the cells from the Plackett construction with psi = exp(params[8]).
    Returns -1e300 if any observed cell probability underflows.
    """
    params = np.asarray(params, dtype=float)
    if params.shape != (N_PARAMS,):
        raise InvalidInput(f"expected {N_PARAMS} parameters")
    x = np.asarray(x_j, dtype=float)
    t = np.asarray(treatment, dtype=float)
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    if not (x.shape == t.shape == y1.shape == y2.shape):
        raise InvalidInput("all arrays must have equal length")

    p1, p2 = _marginal_probs(params, x, t)
    psi = math.exp(min(params[8], 700.0))
    if abs(psi - 1.0) < 1e-12:
        p11 = p1 * p2
    else:
        s = 1.0 + (p1 + p2) * (psi - 1.0)
        disc = np.maximum(s * s - 4.0 * psi * (psi - 1.0) * p1 * p2, 0.0)
        root = np.sqrt(disc)
        pos = s >= 0.0
        # conjugate form where s >= 0, textbook root where s < 0: each is
        # cancellation-free on its side
        p11 = np.where(pos, 2.0 * psi * p1 * p2, s - root) / np.where(
            pos, s + root, 2.0 * (psi - 1.0)
        )
        p11 = np.minimum(p11, np.minimum(p1, p2))
    cell = np.where(
        y1 == 1,
        np.where(y2 == 1, p11, p1 - p11),
        np.where(y2 == 1, p2 - p11, 1.0 - p1 - p2 + p11),
    )
    if np.any(cell <= 0.0):
        return LOGLIK_GUARD
    return float(np.sum(np.log(cell)))


def initial_params(x_j, treatment, y1, y2) -> np.ndarray:
    """Starting point: intercepts at the logit of the outcome means, log psi
    at the pooled empirical log odds ratio clamped to [-5, 5], rest zero.

    Returns None when an outcome is constant (the fit is degenerate).
    """
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    m1, m2 = y1.mean(), y2.mean()
    if not (0.0 < m1 < 1.0 and 0.0 < m2 < 1.0):
        return None
    init = np.zeros(N_PARAMS)
    init[0] = math.log(m1 / (1.0 - m1))
    init[4] = math.log(m2 / (1.0 - m2))
    # 0.5 continuity correction keeps the empirical log OR finite
    a = float(np.sum((y1 == 1) & (y2 == 1))) + 0.5
    b = float(np.sum((y1 == 1) & (y2 == 0))) + 0.5
    c = float(np.sum((y1 == 0) & (y2 == 1))) + 0.5
    d = float(np.sum((y1 == 0) & (y2 == 0))) + 0.5
    init[8] = float(np.clip(math.log(a * d / (b * c)), -5.0, 5.0))
    return init


def _zeroed_fit(n_iter: int = 0) -> BivariateFit:
    return BivariateFit(
        params=np.zeros(N_PARAMS),
        converged=False,
        diverged_or_separated=True,
        loglik=float("nan"),
        n_iterations=n_iter,
    )


def _apply_zero_out(fit: BivariateFit, x, t) -> BivariateFit:
    p1, p2 = _marginal_probs(fit.params, x, t)
    bad = (
        not fit.converged
        or np.any(np.abs(fit.params[:8]) > COEF_BOUND)
        or abs(fit.params[8]) > LOGPSI_BOUND
        or np.any(p1 < PROB_EPS) or np.any(p1 > 1.0 - PROB_EPS)
        or np.any(p2 < PROB_EPS) or np.any(p2 > 1.0 - PROB_EPS)
    )
    if bad:
        fit.diverged_or_separated = True
        fit.params = fit.params.copy()
        fit.params[3] = 0.0
        fit.params[7] = 0.0
    return fit


def fit_bivariate_or(x_j, treatment, y1, y2) -> BivariateFit:
    """Maximum-likelihood fit of the single-covariate bivariate model.

    Quasi-Newton (BFGS) ascent with central-difference gradients, converged
    when the gradient max-norm falls below 1e-6, capped at 200 iterations.
    Non-convergence, any coefficient beyond 10 in magnitude (20 for log psi),
    or a fitted marginal within 1e-6 of 0/1 sets the diverged_or_separated
    flag and zeroes both interaction coefficients.  Never raises on data.
    """
    x = np.ascontiguousarray(x_j, dtype=float)
    t = np.ascontiguousarray(treatment, dtype=float)
    y1 = np.ascontiguousarray(y1, dtype=float)
    y2 = np.ascontiguousarray(y2, dtype=float)
    if not (x.shape == t.shape == y1.shape == y2.shape):
        raise InvalidInput("all arrays must have equal length")
    if t.min() == t.max():
        raise InvalidInput("both arms must be present")

    init = initial_params(x, t, y1, y2)
    if init is None:
        return _zeroed_fit()
    params, loglik, converged, n_iter = _backend.bfgs_fit(
        x, t, y1, y2, init, MAX_ITER, GRAD_TOL
    )
    fit = BivariateFit(
        params=np.asarray(params),
        converged=bool(converged),
        diverged_or_separated=False,
        loglik=float(loglik),
        n_iterations=int(n_iter),
    )
    return _apply_zero_out(fit, x, t)


def fit_covariate_matrix(X, treatment, y1, y2) -> np.ndarray:
    """Fit every column of X; returns a (J, 2) array of (beta1, beta2) with
    the zero-out rule applied.  This is the per-fold hot path."""
    X = np.ascontiguousarray(X, dtype=float)
    t = np.ascontiguousarray(treatment, dtype=float)
    y1c = np.ascontiguousarray(y1, dtype=float)
    y2c = np.ascontiguousarray(y2, dtype=float)
    n, J = X.shape
    out = np.zeros((J, 2))
    init = initial_params(X[:, 0], t, y1c, y2c)
    if init is None:
        return out
    results = _backend.bfgs_fit_many(X, t, y1c, y2c, init, MAX_ITER, GRAD_TOL)
    params_all, logliks, convs, iters = results
    for j in range(J):
        fit = BivariateFit(
            params=params_all[j],
            converged=bool(convs[j]),
            diverged_or_separated=False,
            loglik=float(logliks[j]),
            n_iterations=int(iters[j]),
        )
        fit = _apply_zero_out(fit, X[:, j], t)
        if not fit.diverged_or_separated:
            out[j, 0] = fit.beta1
            out[j, 1] = fit.beta2
    return out

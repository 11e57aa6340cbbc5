"""Univariate logistic regression by iteratively reweighted least squares.

Supplies the marginal single-covariate interaction coefficients that feed
one-dimensional risk scores, and the Wald test for a treatment-by-sensitivity
interaction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .statnum import TestResult, normal_sf2

__all__ = [
    "LogisticFit",
    "fit_logistic",
    "fit_single_covariate_interaction",
    "interaction_wald_p",
]

MAX_ITER = 50
SCORE_TOL = 1e-8
DEVIANCE_RTOL = 1e-10
COEF_BOUND = 10.0
PROB_EPS = 1e-6


@dataclass
class LogisticFit:
    coefficients: np.ndarray
    standard_errors: np.ndarray
    converged: bool
    diverged_or_separated: bool
    n_iterations: int
    deviance: float = field(default=float("nan"))


def _expit(eta: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(eta, -35.0, 35.0)))


def _deviance(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-300, 1.0 - 1e-16)
    return -2.0 * float(np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def _zeroed(p: int, n_iter: int) -> LogisticFit:
    return LogisticFit(
        coefficients=np.zeros(p),
        standard_errors=np.full(p, np.nan),
        converged=False,
        diverged_or_separated=True,
        n_iterations=n_iter,
    )


def fit_logistic(design: np.ndarray, response: np.ndarray) -> LogisticFit:
    """Maximum-likelihood logistic fit via IRLS with step halving.

    Starts from zero coefficients with the intercept at the logit of the
    response mean (when the first column is constant).  Convergence when the
    score max-norm falls below 1e-8 or the relative deviance change below
    1e-10, capped at 50 iterations.  Separation (any |coefficient| > 10 or a
    fitted probability within 1e-6 of 0/1) and a singular information matrix
    zero the fit and set the diverged_or_separated flag.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2:
        raise InvalidInput("design must be a 2-D matrix")
    n, p = X.shape
    if y.shape != (n,):
        raise InvalidInput("response length does not match design")
    if n < p or p < 1:
        raise InvalidInput(f"need n >= p >= 1, got n={n}, p={p}")
    if not np.all((y == 0) | (y == 1)):
        raise InvalidInput("response must be binary")

    ybar = y.mean()
    if ybar <= 0.0 or ybar >= 1.0:
        return _zeroed(p, 0)

    beta = np.zeros(p)
    if np.all(X[:, 0] == X[0, 0]) and X[0, 0] != 0:
        beta[0] = math.log(ybar / (1.0 - ybar)) / X[0, 0]

    prob = _expit(X @ beta)
    dev = _deviance(y, prob)
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        score = X.T @ (y - prob)
        if np.max(np.abs(score)) <= SCORE_TOL:
            converged = True
            break
        w = np.clip(prob * (1.0 - prob), 1e-10, None)
        info = X.T @ (X * w[:, None])
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            return _zeroed(p, it)
        if not np.all(np.isfinite(step)):
            return _zeroed(p, it)

        # step halving keeps the deviance non-increasing at every iteration
        scale = 1.0
        for _ in range(30):
            cand = beta + scale * step
            cand_prob = _expit(X @ cand)
            cand_dev = _deviance(y, cand_prob)
            if cand_dev <= dev + 1e-12:
                break
            scale *= 0.5
        else:
            converged = True  # no improving step left: at the optimum
            break
        beta, prob = cand, cand_prob
        if abs(dev - cand_dev) <= DEVIANCE_RTOL * (abs(dev) + 1e-300):
            dev = cand_dev
            converged = True
            break
        dev = cand_dev

    separated = bool(
        np.any(np.abs(beta) > COEF_BOUND)
        or np.any(prob < PROB_EPS)
        or np.any(prob > 1.0 - PROB_EPS)
    )
    if not converged or separated:
        fit = _zeroed(p, it)
        fit.converged = converged
        return fit

    w = np.clip(prob * (1.0 - prob), 1e-10, None)
    info = X.T @ (X * w[:, None])
    try:
        cov = np.linalg.inv(info)
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        se = np.full(p, np.nan)
    return LogisticFit(
        coefficients=beta,
        standard_errors=se,
        converged=True,
        diverged_or_separated=False,
        n_iterations=it,
        deviance=dev,
    )


def fit_single_covariate_interaction(
    x_j: np.ndarray, treatment: np.ndarray, response: np.ndarray
) -> float:
    """Interaction coefficient from the model 1 + t + x + t*x.

    Returns 0 when the fit diverges or separates, so a cross-validation fold
    always produces a score contribution.
    """
    x = np.asarray(x_j, dtype=float)
    t = np.asarray(treatment, dtype=float)
    y = np.asarray(response, dtype=float)
    if not (x.shape == t.shape == y.shape):
        raise InvalidInput("x_j, treatment and response must have equal length")
    if t.min() == t.max():
        raise InvalidInput("both arms must be present")
    design = np.column_stack([np.ones_like(x), t, x, t * x])
    fit = fit_logistic(design, y)
    if fit.diverged_or_separated:
        return 0.0
    return float(fit.coefficients[3])


def interaction_wald_p(
    treatment: np.ndarray, sensitive: np.ndarray, response: np.ndarray
) -> TestResult:
    """Two-sided Wald p-value for t*s in response ~ 1 + t + s + t*s.

    An empty treatment-by-sensitivity cell, or a degenerate fit, gives p = 1
    with the degenerate flag set.
    """
    t = np.asarray(treatment, dtype=float)
    s = np.asarray(sensitive, dtype=float)
    y = np.asarray(response, dtype=float)
    for arr, name in ((t, "treatment"), (s, "sensitive")):
        if not np.all((arr == 0) | (arr == 1)):
            raise InvalidInput(f"{name} must be binary")
    counts = [np.sum((t == a) & (s == b)) for a in (0, 1) for b in (0, 1)]
    if min(counts) == 0:
        return TestResult(1.0, 0.0, "interaction_wald", degenerate=True)
    design = np.column_stack([np.ones_like(t), t, s, t * s])
    fit = fit_logistic(design, y)
    if fit.diverged_or_separated or not np.isfinite(fit.standard_errors[3]) \
            or fit.standard_errors[3] <= 0:
        return TestResult(1.0, 0.0, "interaction_wald", degenerate=True)
    z = fit.coefficients[3] / fit.standard_errors[3]
    return TestResult(normal_sf2(z), float(z), "interaction_wald")

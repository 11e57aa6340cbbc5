"""Pure-numpy fallback for the bivariate fitting kernel.

Implements the same BFGS ascent with central-difference gradients as the
compiled kernel in _bivfit_c.pyx.  Selected automatically when the extension
is unavailable (see _backend).
"""

from __future__ import annotations

import numpy as np

GUARD = -1e300
ARMIJO_C1 = 1e-4
MAX_HALVINGS = 40
SY_EPS = 1e-12


def _loglik(theta, x, t, cell_idx):
    if abs(theta[8]) > 50.0:
        return GUARD
    eta1 = theta[0] + theta[1] * t + theta[2] * x + theta[3] * t * x
    eta2 = theta[4] + theta[5] * t + theta[6] * x + theta[7] * t * x
    p1 = 1.0 / (1.0 + np.exp(-np.clip(eta1, -35.0, 35.0)))
    p2 = 1.0 / (1.0 + np.exp(-np.clip(eta2, -35.0, 35.0)))
    psi = np.exp(theta[8])
    if abs(psi - 1.0) < 1e-12:
        p11 = p1 * p2
    else:
        s = 1.0 + (p1 + p2) * (psi - 1.0)
        disc = np.maximum(s * s - 4.0 * psi * (psi - 1.0) * p1 * p2, 0.0)
        root = np.sqrt(disc)
        pos = s >= 0.0
        # conjugate form where s >= 0, textbook root where s < 0
        p11 = np.where(pos, 2.0 * psi * p1 * p2, s - root) / np.where(
            pos, s + root, 2.0 * (psi - 1.0)
        )
        p11 = np.minimum(p11, np.minimum(p1, p2))
    cells = np.stack([p11, p1 - p11, p2 - p11, 1.0 - p1 - p2 + p11])
    obs = cells[cell_idx, np.arange(x.shape[0])]
    if np.any(obs <= 0.0):
        return GUARD
    return float(np.sum(np.log(obs)))


def _gradient(theta, x, t, cell_idx):
    g = np.empty(9)
    for k in range(9):
        h = 1e-6 * max(1.0, abs(theta[k]))
        up = theta.copy()
        up[k] += h
        dn = theta.copy()
        dn[k] -= h
        g[k] = (_loglik(up, x, t, cell_idx) - _loglik(dn, x, t, cell_idx)) / (2.0 * h)
    return g


def _cell_index(y1, y2):
    # 0 -> (1,1), 1 -> (1,0), 2 -> (0,1), 3 -> (0,0)
    return (2 - 2 * y1.astype(np.intp)) + (1 - y2.astype(np.intp))


def bfgs_fit(x, t, y1, y2, init, max_iter, gtol):
    """Maximize the bivariate log-likelihood from ``init``.

    Returns (params, loglik, converged, n_iterations).
    """
    cell_idx = _cell_index(np.asarray(y1), np.asarray(y2))
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)

    theta = np.asarray(init, dtype=float).copy()
    f = -_loglik(theta, x, t, cell_idx)
    g = -_gradient(theta, x, t, cell_idx)
    H = np.eye(9)
    converged = bool(np.max(np.abs(g)) <= gtol)
    it = 0
    while not converged and it < max_iter:
        it += 1
        d = -H @ g
        gd = float(g @ d)
        if gd >= 0.0:
            H = np.eye(9)
            d = -g
            gd = float(g @ d)

        alpha, ok = _line_search(theta, d, f, gd, x, t, cell_idx)
        if not ok:
            # steepest-descent retry with a reset Hessian approximation
            H = np.eye(9)
            d = -g
            gd = float(g @ d)
            alpha, ok = _line_search(theta, d, f, gd, x, t, cell_idx)
            if not ok:
                break
        theta_new = theta + alpha * d
        f_new = -_loglik(theta_new, x, t, cell_idx)
        g_new = -_gradient(theta_new, x, t, cell_idx)
        s = theta_new - theta
        yv = g_new - g
        sy = float(s @ yv)
        if sy > SY_EPS:
            rho = 1.0 / sy
            Hy = H @ yv
            yHy = float(yv @ Hy)
            H = (
                H
                - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                + rho * rho * yHy * np.outer(s, s)
                + rho * np.outer(s, s)
            )
        theta, f, g = theta_new, f_new, g_new
        converged = bool(np.max(np.abs(g)) <= gtol)

    return theta, -f, converged, it


def _line_search(theta, d, f, gd, x, t, cell_idx):
    alpha = 1.0
    for _ in range(MAX_HALVINGS):
        f_new = -_loglik(theta + alpha * d, x, t, cell_idx)
        if f_new <= f + ARMIJO_C1 * alpha * gd:
            return alpha, True
        alpha *= 0.5
    return 0.0, False


def bfgs_fit_many(X, t, y1, y2, init, max_iter, gtol):
    """Fit every column of X with a shared starting point."""
    X = np.asarray(X, dtype=float)
    n, J = X.shape
    params = np.empty((J, 9))
    logliks = np.empty(J)
    convs = np.empty(J, dtype=bool)
    iters = np.empty(J, dtype=np.int64)
    for j in range(J):
        p, ll, c, it = bfgs_fit(X[:, j], t, y1, y2, init, max_iter, gtol)
        params[j] = p
        logliks[j] = ll
        convs[j] = c
        iters[j] = it
    return params, logliks, convs, iters

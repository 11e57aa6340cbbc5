# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel for the bivariate odds-ratio fits.

Mirrors _bivfit_py: BFGS ascent of the nine-parameter likelihood with
central-difference gradients.  One fit per covariate column; the per-fold
loop over columns runs entirely in C.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log, sqrt

cnp.import_array()

cdef double GUARD = -1e300
cdef double ARMIJO_C1 = 1e-4
cdef int MAX_HALVINGS = 40
cdef double SY_EPS = 1e-12
cdef int P = 9


cdef double _loglik(double* th, double* x, double* t,
                    signed char* cell_idx, Py_ssize_t n) noexcept nogil:
    cdef double psi, s, disc, p11, pmin, c, acc, prod
    cdef double eta1, eta2, p1, p2, xi, ti
    cdef Py_ssize_t i
    cdef int idx
    if fabs(th[8]) > 50.0:
        return GUARD
    psi = exp(th[8])
    acc = 0.0
    prod = 1.0
    for i in range(n):
        xi = x[i]
        ti = t[i]
        eta1 = th[0] + th[1] * ti + th[2] * xi + th[3] * ti * xi
        eta2 = th[4] + th[5] * ti + th[6] * xi + th[7] * ti * xi
        if eta1 > 35.0:
            eta1 = 35.0
        elif eta1 < -35.0:
            eta1 = -35.0
        if eta2 > 35.0:
            eta2 = 35.0
        elif eta2 < -35.0:
            eta2 = -35.0
        p1 = 1.0 / (1.0 + exp(-eta1))
        p2 = 1.0 / (1.0 + exp(-eta2))
        if fabs(psi - 1.0) < 1e-12:
            p11 = p1 * p2
        else:
            s = 1.0 + (p1 + p2) * (psi - 1.0)
            disc = s * s - 4.0 * psi * (psi - 1.0) * p1 * p2
            if disc < 0.0:
                disc = 0.0
            if s >= 0.0:
                p11 = 2.0 * psi * p1 * p2 / (s + sqrt(disc))
            else:
                p11 = (s - sqrt(disc)) / (2.0 * (psi - 1.0))
            pmin = p1 if p1 < p2 else p2
            if p11 > pmin:
                p11 = pmin
        idx = cell_idx[i]
        if idx == 0:
            c = p11
        elif idx == 1:
            c = p1 - p11
        elif idx == 2:
            c = p2 - p11
        else:
            c = 1.0 - p1 - p2 + p11
        if c <= 0.0:
            return GUARD
        prod *= c
        if prod < 1e-100:
            acc += log(prod)
            prod = 1.0
    return acc + log(prod)


cdef inline double _cell_prob(double psi, int near_one, double p1, double p2,
                              int idx) noexcept nogil:
    # joint cell probability; non-positive value flags a degenerate cell
    cdef double s, disc, p11, pmin, c
    if near_one:
        p11 = p1 * p2
    else:
        s = 1.0 + (p1 + p2) * (psi - 1.0)
        disc = s * s - 4.0 * psi * (psi - 1.0) * p1 * p2
        if disc < 0.0:
            disc = 0.0
        if s >= 0.0:
            p11 = 2.0 * psi * p1 * p2 / (s + sqrt(disc))
        else:
            p11 = (s - sqrt(disc)) / (2.0 * (psi - 1.0))
        pmin = p1 if p1 < p2 else p2
        if p11 > pmin:
            p11 = pmin
    if idx == 0:
        c = p11
    elif idx == 1:
        c = p1 - p11
    elif idx == 2:
        c = p2 - p11
    else:
        c = 1.0 - p1 - p2 + p11
    return c


cdef double _loglik_pert_eta(double psi, int which, double* eta, double* p_other,
                             double* x, double* t, int basis, double dh,
                             signed char* cell_idx, Py_ssize_t n) noexcept nogil:
    # loglik with one linear-predictor coefficient perturbed by dh, reusing
    # the cached marginal of the untouched outcome
    cdef double e, z, p, lc, acc, prod
    cdef int near_one = 1 if fabs(psi - 1.0) < 1e-12 else 0
    cdef Py_ssize_t i
    acc = 0.0
    prod = 1.0
    for i in range(n):
        if basis == 0:
            z = 1.0
        elif basis == 1:
            z = t[i]
        elif basis == 2:
            z = x[i]
        else:
            z = t[i] * x[i]
        e = eta[i] + dh * z
        if e > 35.0:
            e = 35.0
        elif e < -35.0:
            e = -35.0
        p = 1.0 / (1.0 + exp(-e))
        if which == 1:
            lc = _cell_prob(psi, near_one, p, p_other[i], cell_idx[i])
        else:
            lc = _cell_prob(psi, near_one, p_other[i], p, cell_idx[i])
        if lc <= 0.0:
            return GUARD
        prod *= lc
        if prod < 1e-100:
            acc += log(prod)
            prod = 1.0
    return acc + log(prod)


cdef double _loglik_pert_psi(double th8, double* p1, double* p2,
                             signed char* cell_idx, Py_ssize_t n) noexcept nogil:
    # loglik with only the log odds-ratio parameter perturbed
    cdef double psi, lc, acc, prod
    cdef int near_one
    cdef Py_ssize_t i
    if fabs(th8) > 50.0:
        return GUARD
    psi = exp(th8)
    near_one = 1 if fabs(psi - 1.0) < 1e-12 else 0
    acc = 0.0
    prod = 1.0
    for i in range(n):
        lc = _cell_prob(psi, near_one, p1[i], p2[i], cell_idx[i])
        if lc <= 0.0:
            return GUARD
        prod *= lc
        if prod < 1e-100:
            acc += log(prod)
            prod = 1.0
    return acc + log(prod)


cdef void _gradient(double* th, double* x, double* t, signed char* cell_idx,
                    Py_ssize_t n, double* g,
                    double* e1, double* e2, double* p1, double* p2) noexcept nogil:
    # central differences; each perturbation touches only one marginal, so
    # the other marginal's probabilities are computed once and reused
    cdef double h, orig, up, dn, psi, e, xi, ti
    cdef int k, basis, bad_psi
    cdef Py_ssize_t i
    bad_psi = 1 if fabs(th[8]) > 50.0 else 0
    psi = 0.0 if bad_psi else exp(th[8])
    for i in range(n):
        xi = x[i]
        ti = t[i]
        e1[i] = th[0] + th[1] * ti + th[2] * xi + th[3] * ti * xi
        e2[i] = th[4] + th[5] * ti + th[6] * xi + th[7] * ti * xi
        e = e1[i]
        if e > 35.0:
            e = 35.0
        elif e < -35.0:
            e = -35.0
        p1[i] = 1.0 / (1.0 + exp(-e))
        e = e2[i]
        if e > 35.0:
            e = 35.0
        elif e < -35.0:
            e = -35.0
        p2[i] = 1.0 / (1.0 + exp(-e))
    for k in range(P):
        orig = th[k]
        h = fabs(orig)
        if h < 1.0:
            h = 1.0
        h *= 1e-6
        if k < 8 and bad_psi:
            up = GUARD
            dn = GUARD
        elif k < 4:
            basis = k
            up = _loglik_pert_eta(psi, 1, e1, p2, x, t, basis, h, cell_idx, n)
            dn = _loglik_pert_eta(psi, 1, e1, p2, x, t, basis, -h, cell_idx, n)
        elif k < 8:
            basis = k - 4
            up = _loglik_pert_eta(psi, 2, e2, p1, x, t, basis, h, cell_idx, n)
            dn = _loglik_pert_eta(psi, 2, e2, p1, x, t, basis, -h, cell_idx, n)
        else:
            up = _loglik_pert_psi(orig + h, p1, p2, cell_idx, n)
            dn = _loglik_pert_psi(orig - h, p1, p2, cell_idx, n)
        g[k] = (up - dn) / (2.0 * h)


cdef double _max_abs(double* v) noexcept nogil:
    cdef double m = 0.0
    cdef int k
    for k in range(P):
        if fabs(v[k]) > m:
            m = fabs(v[k])
    return m


cdef double _dot(double* a, double* b) noexcept nogil:
    cdef double acc = 0.0
    cdef int k
    for k in range(P):
        acc += a[k] * b[k]
    return acc


cdef void _identity(double* H) noexcept nogil:
    cdef int i
    for i in range(P * P):
        H[i] = 0.0
    for i in range(P):
        H[i * P + i] = 1.0


cdef double _line_search(double* theta, double* d, double f, double gd,
                         double* x, double* t, signed char* cell_idx,
                         Py_ssize_t n, double* trial) noexcept nogil:
    # returns the accepted step length, or -1 on failure
    cdef double alpha = 1.0
    cdef double f_new
    cdef int k, j
    for j in range(MAX_HALVINGS):
        for k in range(P):
            trial[k] = theta[k] + alpha * d[k]
        f_new = -_loglik(trial, x, t, cell_idx, n)
        if f_new <= f + ARMIJO_C1 * alpha * gd:
            return alpha
        alpha *= 0.5
    return -1.0


cdef int _bfgs(double* x, double* t, signed char* cell_idx, Py_ssize_t n,
               double* theta, int max_iter, double gtol,
               double* out_loglik, int* out_iter,
               double* e1, double* e2, double* p1, double* p2) noexcept nogil:
    cdef double f, f_new, gd, alpha, sy, rho, yHy
    cdef double g[9]
    cdef double g_new[9]
    cdef double d[9]
    cdef double s[9]
    cdef double yv[9]
    cdef double Hy[9]
    cdef double trial[9]
    cdef double H[81]
    cdef int it = 0
    cdef int k, m, converged

    f = -_loglik(theta, x, t, cell_idx, n)
    _gradient(theta, x, t, cell_idx, n, g, e1, e2, p1, p2)
    for k in range(P):
        g[k] = -g[k]
    _identity(H)
    converged = 1 if _max_abs(g) <= gtol else 0

    while not converged and it < max_iter:
        it += 1
        for k in range(P):
            d[k] = 0.0
            for m in range(P):
                d[k] -= H[k * P + m] * g[m]
        gd = _dot(g, d)
        if gd >= 0.0:
            _identity(H)
            for k in range(P):
                d[k] = -g[k]
            gd = _dot(g, d)

        alpha = _line_search(theta, d, f, gd, x, t, cell_idx, n, trial)
        if alpha < 0.0:
            _identity(H)
            for k in range(P):
                d[k] = -g[k]
            gd = _dot(g, d)
            alpha = _line_search(theta, d, f, gd, x, t, cell_idx, n, trial)
            if alpha < 0.0:
                break

        for k in range(P):
            s[k] = alpha * d[k]
            trial[k] = theta[k] + s[k]
        f_new = -_loglik(trial, x, t, cell_idx, n)
        _gradient(trial, x, t, cell_idx, n, g_new, e1, e2, p1, p2)
        for k in range(P):
            g_new[k] = -g_new[k]
            yv[k] = g_new[k] - g[k]
        sy = _dot(s, yv)
        if sy > SY_EPS:
            rho = 1.0 / sy
            for k in range(P):
                Hy[k] = 0.0
                for m in range(P):
                    Hy[k] += H[k * P + m] * yv[m]
            yHy = _dot(yv, Hy)
            for k in range(P):
                for m in range(P):
                    H[k * P + m] += (
                        -rho * (s[k] * Hy[m] + Hy[k] * s[m])
                        + (rho * rho * yHy + rho) * s[k] * s[m]
                    )
        for k in range(P):
            theta[k] = trial[k]
            g[k] = g_new[k]
        f = f_new
        converged = 1 if _max_abs(g) <= gtol else 0

    out_loglik[0] = -f
    out_iter[0] = it
    return converged


def bfgs_fit(x, t, y1, y2, init, int max_iter, double gtol):
    """Single-covariate fit; returns (params, loglik, converged, n_iter)."""
    params, lls, convs, iters = bfgs_fit_many(
        np.asarray(x, dtype=np.float64).reshape(-1, 1),
        t, y1, y2, init, max_iter, gtol,
    )
    return params[0], float(lls[0]), bool(convs[0]), int(iters[0])


def bfgs_fit_many(X, t, y1, y2, init, int max_iter, double gtol):
    """Fit every column of X from the shared starting point ``init``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Xc = np.ascontiguousarray(X, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tc = np.ascontiguousarray(t, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] init_c = np.ascontiguousarray(init, dtype=np.float64)
    y1a = np.ascontiguousarray(y1)
    y2a = np.ascontiguousarray(y2)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] cells = (
        (2 - 2 * y1a.astype(np.int64)) + (1 - y2a.astype(np.int64))
    ).astype(np.int8)

    cdef Py_ssize_t n = Xc.shape[0]
    cdef Py_ssize_t J = Xc.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] params = np.empty((J, P))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] logliks = np.empty(J)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] convs = np.empty(J, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] iters = np.empty(J, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] col = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] work = np.empty((4, n))

    cdef double ll
    cdef int nit, conv
    cdef Py_ssize_t j, i
    cdef double theta[9]
    cdef int k

    for j in range(J):
        for i in range(n):
            col[i] = Xc[i, j]
        for k in range(P):
            theta[k] = init_c[k]
        with nogil:
            conv = _bfgs(&col[0], &tc[0], <signed char*>&cells[0], n,
                         theta, max_iter, gtol, &ll, &nit,
                         &work[0, 0], &work[1, 0], &work[2, 0], &work[3, 0])
        for k in range(P):
            params[j, k] = theta[k]
        logliks[j] = ll
        convs[j] = conv
        iters[j] = nit

    return params, logliks, convs.astype(bool), iters

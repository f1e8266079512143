# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: perspective prox root solve and the fused TREX loop.

Semantics must match ``_pykernels`` exactly; that module is the reference.
"""

import numpy as np

from libc.math cimport fabs, pow, sqrt, NAN, INFINITY

BACKEND = "compiled"

cdef int _MAX_ROOT_ITER = 200


cdef double _phi(double t, double qstar, double c1, double c2, double c3) nogil:
    return pow(t, 2.0 * qstar - 1.0) + c1 * pow(t, qstar - 1.0) + c2 * t - c3


cdef double _dphi(double t, double qstar, double c1, double c2) nogil:
    return (2.0 * qstar - 1.0) * pow(t, 2.0 * qstar - 2.0) \
        + c1 * (qstar - 1.0) * pow(t, qstar - 2.0) + c2


cdef double _tau_root(double qstar, double rho, double eta, double ynorm) except -1.0:
    cdef double c1 = qstar * eta / rho
    cdef double c2 = qstar / (rho * rho)
    cdef double c3 = c2 * ynorm
    cdef double lo, hi, width_tol, f_tol, t, ft, d, t_new
    cdef int i

    lo = 0.0 if eta >= 0.0 else pow(-qstar * eta / rho, 1.0 / qstar)
    hi = ynorm
    width_tol = 1e-14 * (1.0 + ynorm)
    f_tol = 1e-12 * (1.0 if fabs(c3) < 1.0 else fabs(c3))
    t = 0.5 * (lo + hi)
    for i in range(_MAX_ROOT_ITER):
        ft = _phi(t, qstar, c1, c2, c3)
        if ft > 0.0:
            hi = t
        else:
            lo = t
        if hi - lo <= width_tol or fabs(ft) <= f_tol:
            return t
        d = _dphi(t, qstar, c1, c2) if t > 0.0 else 0.0
        t_new = t - ft / d if d > 0.0 else 0.5 * (lo + hi)
        if not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        t = t_new
    raise _make_root_error(lo, hi)


cdef object _make_root_error(double lo, double hi):
    from ..errors import NumericalError
    return NumericalError(
        f"perspective prox root solve did not converge; bracket [{lo!r}, {hi!r}]"
    )


def tau_root(double qstar, double rho, double eta, double ynorm):
    """See ``_pykernels.tau_root``."""
    return _tau_root(qstar, rho, eta, ynorm)


cdef int _persp_prox_buf(double eta, double[:] y, double qstar, double rho,
                         double* eta_out, double[:] y_out) except -1:
    """Write prox of the perspective into (eta_out, y_out); y and y_out may alias."""
    cdef Py_ssize_t n = y.shape[0], i
    cdef double ynorm = 0.0, tau, scale
    for i in range(n):
        ynorm += y[i] * y[i]
    ynorm = sqrt(ynorm)
    if qstar * eta + rho * pow(ynorm, qstar) <= 0.0:
        eta_out[0] = 0.0
        for i in range(n):
            y_out[i] = 0.0
        return 0
    if ynorm == 0.0:
        eta_out[0] = eta
        for i in range(n):
            y_out[i] = 0.0
        return 0
    tau = _tau_root(qstar, rho, eta, ynorm)
    eta_out[0] = eta + (rho / qstar) * pow(tau, qstar)
    scale = 1.0 - tau / ynorm
    for i in range(n):
        y_out[i] = y[i] * scale
    return 0


def perspective_prox(double eta, y, double qstar, double rho):
    """See ``_pykernels.perspective_prox``."""
    cdef double[:] yv = np.ascontiguousarray(y, dtype=np.float64)
    out = np.empty(yv.shape[0])
    cdef double[:] ov = out
    cdef double eta_out = 0.0
    _persp_prox_buf(eta, yv, qstar, rho, &eta_out, ov)
    return eta_out, out


cdef double _persp_value(double eta, double[:] y, double q, double beta) nogil:
    cdef Py_ssize_t i
    cdef double ynorm = 0.0
    for i in range(y.shape[0]):
        ynorm += y[i] * y[i]
    ynorm = sqrt(ynorm)
    if eta > 0.0:
        return pow(ynorm, q) / (beta * pow(eta, q - 1.0))
    if eta == 0.0 and ynorm == 0.0:
        return 0.0
    return INFINITY


def perspective_value(double eta, y, double q, double beta):
    """See ``_pykernels.perspective_value``."""
    cdef double[:] yv = np.ascontiguousarray(y, dtype=np.float64)
    return _persp_value(eta, yv, q, beta)


def soft_threshold(x, double gamma):
    """See ``_pykernels.soft_threshold``."""
    out = np.ascontiguousarray(x, dtype=np.float64).copy()
    cdef double[:] ov = out
    cdef Py_ssize_t i
    cdef double v
    for i in range(ov.shape[0]):
        v = ov[i]
        if v > gamma:
            ov[i] = v - gamma
        elif v < -gamma:
            ov[i] = v + gamma
        else:
            ov[i] = 0.0
    return out


cdef void _mv(double[:, :] A, double[:] x, double[:] out) nogil:
    cdef Py_ssize_t i, j, m = A.shape[0], n = A.shape[1]
    cdef double acc
    for i in range(m):
        acc = 0.0
        for j in range(n):
            acc += A[i, j] * x[j]
        out[i] = acc


cdef void _mtv(double[:, :] A, double[:] x, double[:] out) nogil:
    cdef Py_ssize_t i, j, m = A.shape[0], n = A.shape[1]
    cdef double acc
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += A[i, j] * x[i]
        out[j] = acc


def drs1_trex_run(M, G, double a, z, double q, double beta, double alpha,
                  Py_ssize_t n_iter, double lam0, psi_mat, b0, c0, btru,
                  double guard=1e8):
    """See ``_pykernels.drs1_trex_run``."""
    cdef double[:, :] Mv = np.ascontiguousarray(M, dtype=np.float64)
    cdef double[:, :] Gv = np.ascontiguousarray(G, dtype=np.float64)
    cdef double[:] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t N1 = Mv.shape[0], p = Mv.shape[1], n, i
    cdef double qstar = q / (q - 1.0)
    cdef double rho = pow(beta * (1.0 - 1.0 / qstar), qstar - 1.0)

    cdef bint hsdm = psi_mat is not None and lam0 > 0.0
    cdef double[:, :] Qv = None
    cdef double[:, :] Ev = None
    if hsdm:
        Qv = np.ascontiguousarray(psi_mat, dtype=np.float64)
        Ev = np.ascontiguousarray(np.asarray(G) @ np.asarray(M), dtype=np.float64)

    cdef bint has_btru = btru is not None
    cdef double[:] btru_v = None
    if has_btru:
        btru_v = np.ascontiguousarray(btru, dtype=np.float64)

    b_arr = np.array(b0, dtype=np.float64)
    c_arr = np.array(c0, dtype=np.float64)
    cdef double[:] b = b_arr
    cdef double[:] c = c_arr

    res_arr = np.empty(n_iter)
    obj_arr = np.empty(n_iter)
    psi_arr = np.full(n_iter, np.nan)
    dist_arr = np.full(n_iter, np.nan)
    cdef double[:] res = res_arr
    cdef double[:] obj = obj_arr
    cdef double[:] psi = psi_arr
    cdef double[:] dist = dist_arr

    work_r = np.empty(N1); work_s = np.empty(N1); work_w = np.empty(N1)
    work_t = np.empty(N1); work_csh = np.empty(N1)
    work_p = np.empty(p); work_bh = np.empty(p); work_g = np.empty(p)
    work_mg = np.empty(p)
    bstar_arr = np.empty(p)
    cdef double[:] r = work_r, s = work_s, w = work_w, tvec = work_t
    cdef double[:] c_half = work_csh
    cdef double[:] pvec = work_p, b_half = work_bh, grad = work_g, mtg = work_mg
    cdef double[:] bstar = bstar_arr
    cdef double pe, bt, ct, bn, cn, acc, lam, v, l1
    cdef Py_ssize_t n_done = 0

    for i in range(p):
        bstar[i] = b[i]

    for n in range(n_iter):
        acc = 0.0
        for i in range(p):
            acc += b[i] * b[i]
        for i in range(N1):
            acc += c[i] * c[i]
        if sqrt(acc) > guard:
            break
        _mv(Mv, b, r)
        for i in range(N1):
            r[i] -= c[i]
        _mv(Gv, r, s)
        _mtv(Mv, s, pvec)
        for i in range(p):
            pvec[i] = b[i] - pvec[i]
            b_half[i] = 2.0 * pvec[i] - b[i]
        for i in range(N1):
            c_half[i] = c[i] + 2.0 * s[i]
        # reflected prox on the b block (soft threshold, gamma = 1)
        for i in range(p):
            v = b_half[i]
            if v > 1.0:
                v = v - 1.0
            elif v < -1.0:
                v = v + 1.0
            else:
                v = 0.0
            b_half[i] = 2.0 * v - b_half[i]
        # reflected prox on the c block (shifted perspective)
        for i in range(N1 - 1):
            tvec[i] = c_half[i + 1] - zv[i]
        _persp_prox_buf(c_half[0] - a, tvec[: N1 - 1], qstar, rho, &pe, tvec[: N1 - 1])
        ct = 2.0 * (a + pe) - c_half[0]
        acc = 0.0
        cn = (1.0 - alpha) * c[0] + alpha * ct
        acc += (cn - c[0]) * (cn - c[0])
        c[0] = cn
        for i in range(1, N1):
            ct = 2.0 * (zv[i - 1] + tvec[i - 1]) - c_half[i]
            cn = (1.0 - alpha) * c[i] + alpha * ct
            acc += (cn - c[i]) * (cn - c[i])
            c[i] = cn
        for i in range(p):
            bt = b_half[i]
            bn = (1.0 - alpha) * b[i] + alpha * bt
            acc += (bn - b[i]) * (bn - b[i])
            b[i] = bn
        res[n] = sqrt(acc)

        # extract b* = b - M^T (I + M M^T)^{-1} (M b - c)
        _mv(Mv, b, r)
        for i in range(N1):
            r[i] -= c[i]
        _mv(Gv, r, s)
        _mtv(Mv, s, bstar)
        for i in range(p):
            bstar[i] = b[i] - bstar[i]

        if hsdm:
            _mv(Qv, bstar, grad)
            _mv(Ev, grad, tvec)
            _mtv(Mv, tvec, mtg)
            lam = lam0 / (n + 1.0)
            for i in range(p):
                b[i] -= lam * (grad[i] - mtg[i])
            for i in range(N1):
                c[i] -= lam * tvec[i]
            acc = 0.0
            for i in range(p):
                acc += bstar[i] * grad[i]
            psi[n] = 0.5 * acc

        _mv(Mv, bstar, w)
        for i in range(N1 - 1):
            w[i + 1] -= zv[i]
        l1 = 0.0
        for i in range(p):
            l1 += fabs(bstar[i])
        obj[n] = _persp_value(w[0] - a, w[1:], q, beta) + l1
        if has_btru:
            acc = 0.0
            for i in range(p):
                acc += (bstar[i] - btru_v[i]) * (bstar[i] - btru_v[i])
            dist[n] = sqrt(acc)
        n_done = n + 1

    return b_arr, c_arr, bstar_arr, res_arr, obj_arr, psi_arr, dist_arr, n_done

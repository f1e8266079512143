"""Pure-NumPy fallback kernels.

Mirrors the compiled extension ``_ckernels`` function-for-function.  The
backend is chosen at import time in ``hiersplit._kern``; see there for the
selection rules.  These implementations are the reference semantics — the
compiled module must agree with them to floating-point roundoff.
"""

import numpy as np

BACKEND = "pure"

_MAX_ROOT_ITER = 200


def tau_root(qstar, rho, eta, ynorm):
    """Positive root of the prox stationarity equation of the ``|.|^q`` perspective.

    Solves  t^(2q*-1) + (q* eta / rho) t^(q*-1) + (q*/rho^2) t - q*||y||/rho^2 = 0
    on the bracket [max(0, (-q* eta/rho)^(1/q*)), ||y||], which contains exactly
    one stationary point of the underlying strongly convex prox problem.
    """
    c1 = qstar * eta / rho
    c2 = qstar / (rho * rho)
    c3 = c2 * ynorm

    def phi(t):
        return t ** (2.0 * qstar - 1.0) + c1 * t ** (qstar - 1.0) + c2 * t - c3

    def dphi(t):
        return (
            (2.0 * qstar - 1.0) * t ** (2.0 * qstar - 2.0)
            + c1 * (qstar - 1.0) * t ** (qstar - 2.0)
            + c2
        )

    lo = 0.0 if eta >= 0.0 else (-qstar * eta / rho) ** (1.0 / qstar)
    hi = ynorm
    width_tol = 1e-14 * (1.0 + ynorm)
    f_tol = 1e-12 * max(1.0, abs(c3))
    t = 0.5 * (lo + hi)
    for _ in range(_MAX_ROOT_ITER):
        ft = phi(t)
        if ft > 0.0:
            hi = t
        else:
            lo = t
        if hi - lo <= width_tol or abs(ft) <= f_tol:
            return t
        # Newton step, kept only while it stays strictly bracketed.
        d = dphi(t) if t > 0.0 else 0.0
        t_new = t - ft / d if d > 0.0 else 0.5 * (lo + hi)
        if not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        t = t_new
    from ..errors import NumericalError

    raise NumericalError(
        f"perspective prox root solve did not converge; bracket [{lo!r}, {hi!r}]"
    )


def perspective_prox(eta, y, qstar, rho):
    """Prox (index 1) of the perspective of ``||.||^q / beta`` in unshifted coordinates.

    ``qstar = q/(q-1)`` and ``rho = (beta (1 - 1/qstar))^(qstar-1)`` encode
    (q, beta).  Returns the pair (eta_out, y_out); eta_out >= 0 always.
    """
    y = np.asarray(y, dtype=float)
    ynorm = float(np.linalg.norm(y))
    if qstar * eta + rho * ynorm**qstar <= 0.0:
        return 0.0, np.zeros_like(y)
    if ynorm == 0.0:
        return eta, np.zeros_like(y)
    tau = tau_root(qstar, rho, eta, ynorm)
    eta_out = eta + (rho / qstar) * tau**qstar
    y_out = y * (1.0 - tau / ynorm)
    return eta_out, y_out


def perspective_value(eta, y, q, beta):
    """Value of the perspective of ``||.||^q / beta`` in unshifted coordinates."""
    y = np.asarray(y, dtype=float)
    if eta > 0.0:
        return float(np.linalg.norm(y) ** q / (beta * eta ** (q - 1.0)))
    if eta == 0.0 and not np.any(y):
        return 0.0
    return float("inf")


def soft_threshold(x, gamma):
    """Componentwise shrinkage: prox of ``gamma * ||.||_1``."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - gamma, 0.0)


def drs1_trex_run(M, G, a, z, q, beta, alpha, n_iter, lam0, psi_mat, b0, c0,
                  btru, guard=1e8):
    """Fused iteration loop for one generalized-TREX subproblem.

    Runs ``n_iter`` steps of the relaxed type-I Douglas-Rachford operator on
    the (b, c) product space (``alpha`` is the plain KM weight), where prox
    splits into soft-thresholding on the b block and the shifted perspective
    prox on the c block.  With ``psi_mat`` set (gradient of the second-stage
    criterion is ``psi_mat @ b``) and ``lam0 > 0``, each step appends the
    steepest-descent correction with step ``lam0 / n`` (hybrid steepest
    descent); otherwise it is the plain relaxed fixed-point iteration.

    Returns ``(b, c, bstar, res, obj, psi, dist, n_done)`` where the middle
    four are per-iteration traces (``psi``/``dist`` are NaN when not
    applicable) and ``n_done < n_iter`` signals that the iterate norm crossed
    ``guard`` (divergence; the caller decides how to surface it).
    """
    M = np.asarray(M, dtype=float)
    G = np.asarray(G, dtype=float)
    z = np.asarray(z, dtype=float)
    b = np.array(b0, dtype=float)
    c = np.array(c0, dtype=float)
    qstar = q / (q - 1.0)
    rho = (beta * (1.0 - 1.0 / qstar)) ** (qstar - 1.0)
    hsdm = psi_mat is not None and lam0 > 0.0
    if hsdm:
        Q = np.asarray(psi_mat, dtype=float)
        E = G @ M

    res = np.empty(n_iter)
    obj = np.empty(n_iter)
    psi = np.full(n_iter, np.nan)
    dist = np.full(n_iter, np.nan)

    n_done = 0
    bstar = b.copy()
    for n in range(n_iter):
        if np.sqrt(np.sum(b * b) + np.sum(c * c)) > guard:
            break
        r = M @ b - c
        s = G @ r
        p = b - M.T @ s
        b_half = 2.0 * p - b
        c_half = c + 2.0 * s  # = 2 (M p) - c  since  M p = c + s
        pb = soft_threshold(b_half, 1.0)
        pe, pv = perspective_prox(c_half[0] - a, c_half[1:] - z, qstar, rho)
        b_t = 2.0 * pb - b_half
        c_t = np.concatenate(([2.0 * (a + pe)], 2.0 * (z + pv))) - c_half
        b_new = (1.0 - alpha) * b + alpha * b_t
        c_new = (1.0 - alpha) * c + alpha * c_t
        res[n] = np.sqrt(
            np.sum((b_new - b) ** 2) + np.sum((c_new - c) ** 2)
        )
        b, c = b_new, c_new

        r2 = M @ b - c
        s2 = G @ r2
        bstar = b - M.T @ s2
        if hsdm:
            grad = Q @ bstar
            t = E @ grad
            lam = lam0 / (n + 1.0)
            b = b - lam * (grad - M.T @ t)
            c = c - lam * t
            psi[n] = 0.5 * float(bstar @ grad)

        w = M @ bstar
        obj[n] = perspective_value(w[0] - a, w[1:] - z, q, beta) + np.sum(
            np.abs(bstar)
        )
        if btru is not None:
            dist[n] = float(np.linalg.norm(bstar - btru))
        n_done = n + 1

    return b, c, bstar, res, obj, psi, dist, n_done

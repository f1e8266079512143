"""Hybrid steepest descent drivers.

All drivers share the two-phase update: one step of the averaged operator
(1-alpha) I + alpha T, then a diminishing-step gradient correction assembled
from the adjoint of the linear extraction map (never finite differences).

Driver guarantees (finite dimensions):

* ``hsdm_lal_strong`` — strong convergence to the unique solution when the
  second-stage gradient is strongly monotone, under W1-W3 or L1-L3 step
  schedules;
* ``hsdm_drs_I`` / ``hsdm_drs_II`` / ``hsdm_lal`` — vanishing distance to the
  solution set under square-summable-not-summable schedules, provided the
  operator's fixed point set is bounded.  Boundedness is not verified
  symbolically; the divergence guard converts violations into errors.
"""

import numpy as np

from .errors import ConfigError, DivergenceError, StructuralError
from .linop import as_vector
from .splitting import drs_product_I, drs_product_II, lal_operator
from .trace import IterTrace

__all__ = [
    "StepSchedule",
    "HierProblem",
    "hsdm_generic",
    "hsdm_drs_I",
    "hsdm_drs_II",
    "hsdm_lal_strong",
    "hsdm_lal",
]


class StepSchedule:
    """Diminishing step sizes lambda_1, lambda_2, ...

    ``harmonic`` gives lambda_n = lambda0 / n, which is square-summable but
    not summable and also satisfies the W1-W3 conditions (vanishing, divergent
    sum, summable increments).  User-supplied W or L sequences are validated
    heuristically on the given prefix: nonnegative, trending to zero.
    """

    def __init__(self, kind, lambda0=1.0, values=None):
        if kind not in ("harmonic", "w-sequence", "l-sequence"):
            raise ConfigError(f"unknown schedule kind {kind!r}")
        self.kind = kind
        self.lambda0 = float(lambda0)
        if kind == "harmonic":
            if self.lambda0 <= 0:
                raise ConfigError("lambda0 must be positive")
            self.values = None
        else:
            v = np.asarray(values, dtype=float)
            if v.ndim != 1 or v.size < 10:
                raise ConfigError("schedule list needs at least 10 entries")
            if np.any(v < 0):
                raise ConfigError("schedule values must be nonnegative")
            head = v[: max(1, v.size // 10)].mean()
            tail = v[-max(1, v.size // 10):].mean()
            if tail > head:
                raise ConfigError(
                    "schedule values must trend to zero (prefix heuristic)"
                )
            self.values = v

    @classmethod
    def harmonic(cls, lambda0=1.0):
        return cls("harmonic", lambda0=lambda0)

    @classmethod
    def w_sequence(cls, values):
        return cls("w-sequence", values=values)

    @classmethod
    def l_sequence(cls, values):
        return cls("l-sequence", values=values)

    def step(self, n):
        """lambda_{n+1} for 0-based iteration counter n."""
        if self.values is None:
            return self.lambda0 / (n + 1.0)
        if n >= self.values.size:
            raise ConfigError("step schedule exhausted before max_iter")
        return float(self.values[n])


class HierProblem:
    """A first-stage split problem paired with a smooth second-stage criterion.

    ``strong_monotonicity`` certifies a modulus for the gradient of psi and is
    required by the strongly convergent LAL driver; when supplied it is
    sanity-checked on random pairs.
    """

    def __init__(self, split, psi, strong_monotonicity=None, check_seed=0):
        if psi.dim != split.dim:
            raise StructuralError("psi must live on the first-stage domain")
        self.split = split
        self.psi = psi
        self.strong_monotonicity = strong_monotonicity
        if strong_monotonicity is not None:
            if strong_monotonicity <= 0:
                raise ConfigError("strong monotonicity modulus must be positive")
            rng = np.random.default_rng(check_seed)
            for _ in range(20):
                x = rng.standard_normal(split.dim)
                y = rng.standard_normal(split.dim)
                gap = float((psi.grad(x) - psi.grad(y)) @ (x - y))
                bound = strong_monotonicity * float((x - y) @ (x - y))
                if gap < bound * (1.0 - 1e-8) - 1e-12:
                    raise ConfigError(
                        "claimed strong monotonicity modulus fails on random pairs"
                    )


def _guard(norm, guard, trace, what):
    if norm > guard:
        raise DivergenceError(
            f"{what}: iterate norm exceeded the divergence guard; a boundedness "
            "hypothesis on the fixed point set is likely violated (bounded "
            "solution set plus bounded subdifferential images suffice).",
            trace=trace,
        )


def hsdm_generic(T, theta, sched, alpha, z0, max_iter, divergence_guard=1e8):
    """HSDM on an arbitrary nonexpansive operator: z <- T_a z - lambda grad(theta).

    ``theta`` is the lifted criterion on the fixed-point space (for a split
    problem, psi composed with the extraction map).  Returns the final iterate
    and trace.
    """
    if not 0.0 < alpha <= 1.0:
        raise ConfigError("alpha must lie in (0, 1]")
    if theta.dim != T.dim:
        raise ConfigError("theta must live on the operator space")
    z = as_vector(z0, T.dim).copy()
    trace = IterTrace()
    for n in range(max_iter):
        z_half = (1.0 - alpha) * z + alpha * T.apply(z)
        res = float(np.linalg.norm(z_half - z))
        z = z_half - sched.step(n) * theta.grad(z_half)
        nz = float(np.linalg.norm(z))
        obj = np.nan
        if T.problem is not None:
            obj = T.problem.first_stage_value(T.extract(z_half))
        trace.append(nz, res, objective=obj, psi=theta.value(z_half))
        _guard(nz, divergence_guard, trace, "hsdm_generic")
    return z, trace


def hsdm_drs_I(H, sched, alpha=0.5, init=None, max_iter=10_000,
               divergence_guard=1e8):
    """Type-I product-space driver.

    Per iteration: averaged DRS step on (x, y); extract x* through the
    null-space projection; then descend along the lifted gradient, whose x and
    y components are (I - A*(I+AA*)^{-1}A) grad and (I+AA*)^{-1} A grad.
    Returns the last x* and the trace.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1) for this driver")
    T = drs_product_I(H.split)
    n, gram, A = T.n, T.gram, H.split.stacked
    psi = H.psi
    z = np.zeros(T.dim) if init is None else as_vector(init, T.dim).copy()
    trace = IterTrace()
    xstar = T.extract(z)
    for k in range(max_iter):
        z_half = (1.0 - alpha) * z + alpha * T.apply(z)
        res = float(np.linalg.norm(z_half - z))
        xh, yh = z_half[:n], z_half[n:]
        xstar = xh - A.adjoint_apply(gram.solve(A.apply(xh) - yh))
        g = psi.grad(xstar)
        t = gram.solve(A.apply(g))
        lam = sched.step(k)
        x_new = xh - lam * (g - A.adjoint_apply(t))
        y_new = yh - lam * t
        z = np.concatenate((x_new, y_new))
        nz = float(np.linalg.norm(z))
        trace.append(nz, res, objective=H.split.first_stage_value(xstar),
                     psi=psi.value(xstar))
        _guard(nz, divergence_guard, trace, "hsdm_drs_I")
    return xstar, trace


def hsdm_drs_II(H, sched, alpha=0.5, init=None, max_iter=10_000,
                divergence_guard=1e8):
    """Type-II diagonal-space driver (scalar-row terms only).

    The lifted gradient is the block-replicated grad psi(x*) / (m+1), applied
    to every block after the averaged operator step.  Returns the last block
    mean x* and the trace.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1) for this driver")
    T = drs_product_II(H.split)
    m, n = T.m, T.n
    psi = H.psi
    z = np.zeros(T.dim) if init is None else as_vector(init, T.dim).copy()
    trace = IterTrace()
    xstar = T.extract(z)
    for k in range(max_iter):
        z_half = (1.0 - alpha) * z + alpha * T.apply(z)
        res = float(np.linalg.norm(z_half - z))
        X = z_half.reshape(m + 1, n)
        xstar = X.mean(axis=0)
        lam = sched.step(k)
        X = X - (lam / (m + 1.0)) * psi.grad(xstar)[None, :]
        z = X.reshape(-1)
        nz = float(np.linalg.norm(z))
        trace.append(nz, res, objective=H.split.first_stage_value(xstar),
                     psi=psi.value(xstar))
        _guard(nz, divergence_guard, trace, "hsdm_drs_II")
    return xstar, trace


def hsdm_lal_strong(H, sched, alpha=1.0, eta_xy=1.0, eta_nu=1.0, u=None,
                    init=None, max_iter=10_000, divergence_guard=1e8):
    """Strongly convergent LAL driver.

    Requires a strong-monotonicity certificate on grad psi; minimizes the
    regularized lifted criterion psi(x) + (eta_xy/2)||Ax - y||^2
    + (eta_nu/2)||nu||^2 over the LAL fixed points, so the x iterates converge
    strongly to the unique solution.  Any alpha in (0, 1] and any positive
    eta_xy, eta_nu are admissible.
    """
    if H.strong_monotonicity is None:
        raise ConfigError(
            "hsdm_lal_strong needs a strong-monotonicity certificate on psi"
        )
    if not 0.0 < alpha <= 1.0:
        raise ConfigError("alpha must lie in (0, 1]")
    if eta_xy <= 0 or eta_nu <= 0:
        raise ConfigError("eta_xy and eta_nu must be positive")
    T = lal_operator(H.split, u=u)
    n, K = T.n, T.K
    A = H.split.stacked
    psi = H.psi
    w = np.zeros(T.dim) if init is None else as_vector(init, T.dim).copy()
    trace = IterTrace()
    for k in range(max_iter):
        w_half = (1.0 - alpha) * w + alpha * T.apply(w)
        res = float(np.linalg.norm(w_half - w))
        xh, yh, nuh = w_half[:n], w_half[n:n + K], w_half[n + K:]
        r = A.apply(xh) - yh
        lam = sched.step(k)
        x_new = xh - lam * (psi.grad(xh) + eta_xy * A.adjoint_apply(r))
        y_new = yh + lam * eta_xy * r
        nu_new = nuh - lam * eta_nu * nuh
        w = np.concatenate((x_new, y_new, nu_new))
        nw = float(np.linalg.norm(w))
        trace.append(nw, res, objective=H.split.first_stage_value(xh),
                     psi=psi.value(xh))
        _guard(nw, divergence_guard, trace, "hsdm_lal_strong")
    return w[:n], trace


def hsdm_lal(H, sched, alpha=0.5, u=None, init=None, max_iter=10_000,
             divergence_guard=1e8):
    """LAL driver without strong monotonicity (vanishing distance to the
    solution set under a bounded fixed-point set).

    Only the x block receives the gradient correction since the extraction
    map's adjoint embeds grad psi as (grad, 0, 0).  Returns the last x* and
    the trace.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1) for this driver")
    T = lal_operator(H.split, u=u)
    n = T.n
    psi = H.psi
    w = np.zeros(T.dim) if init is None else as_vector(init, T.dim).copy()
    trace = IterTrace()
    xstar = w[:n]
    for k in range(max_iter):
        w_half = (1.0 - alpha) * w + alpha * T.apply(w)
        res = float(np.linalg.norm(w_half - w))
        xh = w_half[:n]
        xstar = xh - sched.step(k) * psi.grad(xh)
        w = np.concatenate((xstar, w_half[n:]))
        nw = float(np.linalg.norm(w))
        trace.append(nw, res, objective=H.split.first_stage_value(xstar),
                     psi=psi.value(xstar))
        _guard(nw, divergence_guard, trace, "hsdm_lal")
    return xstar, trace

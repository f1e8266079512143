"""Proximable convex functions and prox calculus.

A :class:`Proximable` exposes a value and a prox at any index ``gamma > 0``;
a :class:`Smooth` exposes a value, gradient, and Lipschitz bound.  The zoo
below covers everything the solvers need: hinge, l1, indicators, quadratics,
semi-orthogonal compositions, the perspective of ``||.||^q / beta``, Moreau
envelopes, and conjugates via the Moreau decomposition.
"""

import numpy as np

from . import _kern
from .errors import StructuralError
from .linop import as_vector

__all__ = [
    "Proximable",
    "Zero",
    "L1Norm",
    "HingeLoss",
    "BallIndicator",
    "BoxIndicator",
    "PointIndicator",
    "SquaredDeviation",
    "PartialSquaredNorm",
    "Scaled",
    "Translated",
    "SeparableSum",
    "SemiOrthogonalComposition",
    "PerspectiveQ",
    "Smooth",
    "ZeroSmooth",
    "NearestPointObjective",
    "MatrixQuadObjective",
    "MoreauEnvelope",
    "prox_hinge",
    "soft_threshold",
    "project_ball",
    "prox_semiorthogonal",
    "prox_perspective",
    "prox_conjugate",
    "moreau_envelope",
]

_FEAS_TOL = 1e-9


class Proximable:
    """Convex function with a computable prox: argmin_y f(y) + ||y-x||^2 / (2 gamma)."""

    def __init__(self, dim):
        if dim < 1:
            raise StructuralError("Proximable dim must be >= 1")
        self.dim = int(dim)

    def value(self, x):
        raise NotImplementedError

    def prox(self, gamma, x):
        raise NotImplementedError

    def _check(self, gamma, x):
        if gamma <= 0:
            raise StructuralError("prox index gamma must be positive")
        return as_vector(x, self.dim, type(self).__name__)


class Zero(Proximable):
    """The zero function; prox is the identity."""

    def value(self, x):
        return 0.0

    def prox(self, gamma, x):
        return self._check(gamma, x).copy()


class L1Norm(Proximable):
    """weight * ||x||_1; prox is soft thresholding."""

    def __init__(self, dim, weight=1.0):
        super().__init__(dim)
        self.weight = float(weight)

    def value(self, x):
        return self.weight * float(np.sum(np.abs(as_vector(x, self.dim))))

    def prox(self, gamma, x):
        return soft_threshold(gamma * self.weight, self._check(gamma, x))


class HingeLoss(Proximable):
    """weight * sum_i max(0, 1 - x_i)."""

    def __init__(self, dim=1, weight=1.0):
        super().__init__(dim)
        self.weight = float(weight)

    def value(self, x):
        return self.weight * float(np.sum(np.maximum(0.0, 1.0 - as_vector(x, self.dim))))

    def prox(self, gamma, x):
        x = self._check(gamma, x)
        g = gamma * self.weight
        return np.minimum(x + g, np.maximum(x, 1.0))

    def prox_batch(self, gammas, ts):
        """Componentwise prox with a per-component index (dim-1 use)."""
        g = np.asarray(gammas, dtype=float) * self.weight
        ts = np.asarray(ts, dtype=float)
        return np.minimum(ts + g, np.maximum(ts, 1.0))


class BallIndicator(Proximable):
    """Indicator of the closed ball of given radius; prox is radial projection."""

    def __init__(self, dim, radius, center=None):
        super().__init__(dim)
        if radius <= 0:
            raise StructuralError("ball radius must be positive")
        self.radius = float(radius)
        self.center = (
            np.zeros(dim) if center is None else as_vector(center, dim, "ball center")
        )

    def value(self, x):
        x = as_vector(x, self.dim)
        d = np.linalg.norm(x - self.center) - self.radius
        return 0.0 if d <= _FEAS_TOL * (1.0 + self.radius) else float("inf")

    def prox(self, gamma, x):
        x = self._check(gamma, x)
        return self.center + project_ball(self.radius, x - self.center)


class BoxIndicator(Proximable):
    """Indicator of the box [lo, hi]^dim (componentwise bounds allowed)."""

    def __init__(self, dim, lo, hi):
        super().__init__(dim)
        self.lo = np.broadcast_to(np.asarray(lo, dtype=float), (dim,)).copy()
        self.hi = np.broadcast_to(np.asarray(hi, dtype=float), (dim,)).copy()
        if np.any(self.lo > self.hi):
            raise StructuralError("box bounds must satisfy lo <= hi")

    def value(self, x):
        x = as_vector(x, self.dim)
        scale = 1.0 + float(np.max(np.abs(x)))
        inside = np.all(x >= self.lo - _FEAS_TOL * scale) and np.all(
            x <= self.hi + _FEAS_TOL * scale
        )
        return 0.0 if inside else float("inf")

    def prox(self, gamma, x):
        return np.clip(self._check(gamma, x), self.lo, self.hi)


class PointIndicator(Proximable):
    """Indicator of a single point; prox is the constant map."""

    def __init__(self, dim, point=None):
        super().__init__(dim)
        self.point = (
            np.zeros(dim) if point is None else as_vector(point, dim, "point")
        )

    def value(self, x):
        x = as_vector(x, self.dim)
        d = np.linalg.norm(x - self.point)
        return 0.0 if d <= _FEAS_TOL * (1.0 + np.linalg.norm(self.point)) else float("inf")

    def prox(self, gamma, x):
        self._check(gamma, x)
        return self.point.copy()


class SquaredDeviation(Proximable):
    """(weight/2) ||x - center||^2; prox shrinks toward the center."""

    def __init__(self, dim, center=None, weight=1.0):
        super().__init__(dim)
        if weight <= 0:
            raise StructuralError("weight must be positive")
        self.weight = float(weight)
        self.center = (
            np.zeros(dim) if center is None else as_vector(center, dim, "center")
        )

    def value(self, x):
        d = as_vector(x, self.dim) - self.center
        return 0.5 * self.weight * float(d @ d)

    def prox(self, gamma, x):
        x = self._check(gamma, x)
        gw = gamma * self.weight
        return (x + gw * self.center) / (1.0 + gw)


class PartialSquaredNorm(Proximable):
    """(1/2) ||x[mask]||^2: a quadratic that leaves the unmasked coordinates free."""

    def __init__(self, dim, mask):
        super().__init__(dim)
        self.mask = np.asarray(mask, dtype=bool)
        if self.mask.shape != (dim,):
            raise StructuralError("mask must have one flag per coordinate")

    def value(self, x):
        x = as_vector(x, self.dim)
        return 0.5 * float(x[self.mask] @ x[self.mask])

    def prox(self, gamma, x):
        out = self._check(gamma, x).copy()
        out[self.mask] /= 1.0 + gamma
        return out


class Translated(Proximable):
    """x -> f(x - shift); prox commutes with the translation."""

    def __init__(self, fn, shift):
        super().__init__(fn.dim)
        self.fn = fn
        self.shift = as_vector(shift, fn.dim, "translation shift")

    def value(self, x):
        return self.fn.value(as_vector(x, self.dim) - self.shift)

    def prox(self, gamma, x):
        x = self._check(gamma, x)
        return self.shift + self.fn.prox(gamma, x - self.shift)


class Scaled(Proximable):
    """c * f for c > 0; prox at gamma is f's prox at c * gamma."""

    def __init__(self, fn, scale):
        super().__init__(fn.dim)
        if scale <= 0:
            raise StructuralError("scale must be positive")
        self.fn = fn
        self.scale = float(scale)

    def value(self, x):
        return self.scale * self.fn.value(x)

    def prox(self, gamma, x):
        return self.fn.prox(gamma * self.scale, x)


class SeparableSum(Proximable):
    """Direct sum of proximables on consecutive coordinate blocks.

    The prox decomposes componentwise, which is what makes the stacked
    splitting operators computable.
    """

    def __init__(self, parts):
        parts = list(parts)
        if not parts:
            raise StructuralError("SeparableSum needs at least one part")
        super().__init__(sum(p.dim for p in parts))
        self.parts = parts
        ends = np.cumsum([p.dim for p in parts])
        starts = np.concatenate(([0], ends[:-1]))
        self.slices = [slice(int(s), int(e)) for s, e in zip(starts, ends)]

    def value(self, x):
        x = as_vector(x, self.dim)
        return float(sum(p.value(x[sl]) for p, sl in zip(self.parts, self.slices)))

    def prox(self, gamma, x):
        x = self._check(gamma, x)
        out = np.empty_like(x)
        for p, sl in zip(self.parts, self.slices):
            out[sl] = p.prox(gamma, x[sl])
        return out


class SemiOrthogonalComposition(Proximable):
    """g(A x) for A with A A* = nu I (nu > 0).

    prox_{gamma g o A}(x) = x + A*(prox_{nu gamma g}(A x) - A x) / nu.
    The semi-orthogonality is verified at construction.
    """

    def __init__(self, g, A, nu=None, tol=1e-9):
        super().__init__(A.domain_dim)
        if g.dim != A.codomain_dim:
            raise StructuralError("inner function dim must match operator codomain")
        gram = A.gram_matrix()
        nu_inferred = float(gram[0, 0])
        nu = nu_inferred if nu is None else float(nu)
        if nu <= 0 or np.max(np.abs(gram - nu * np.eye(A.codomain_dim))) > tol * (
            1.0 + nu
        ):
            raise StructuralError("A A* is not a positive multiple of the identity")
        self.g = g
        self.A = A
        self.nu = nu

    def value(self, x):
        return self.g.value(self.A.apply(as_vector(x, self.dim)))

    def prox(self, gamma, x):
        x = self._check(gamma, x)
        ax = self.A.apply(x)
        return x + self.A.adjoint_apply(self.g.prox(self.nu * gamma, ax) - ax) / self.nu


class PerspectiveQ(Proximable):
    """Perspective of ``||.||^q / beta`` on R x R^N, optionally translated.

    With shift (a, b) the function is (eta, y) -> phi~((eta, y) - (a, b)) where
    phi~(eta, y) = ||y||^q / (beta eta^(q-1)) for eta > 0, 0 at the origin, and
    +inf elsewhere.  The prox reduces to a scalar root solve (see ``_kern``);
    its output always has a nonnegative eta component (pre-shift).
    """

    def __init__(self, n, q, beta, shift=None):
        super().__init__(1 + n)
        if q <= 1:
            raise StructuralError("perspective exponent q must exceed 1")
        if beta <= 0:
            raise StructuralError("beta must be positive")
        self.n = int(n)
        self.q = float(q)
        self.beta = float(beta)
        self.qstar = self.q / (self.q - 1.0)
        self.rho = (self.beta * (1.0 - 1.0 / self.qstar)) ** (self.qstar - 1.0)
        if shift is None:
            self.shift_eta, self.shift_y = 0.0, np.zeros(n)
        else:
            self.shift_eta = float(shift[0])
            self.shift_y = as_vector(shift[1], n, "perspective shift")

    def value(self, x):
        x = as_vector(x, self.dim)
        return _kern.perspective_value(
            x[0] - self.shift_eta, x[1:] - self.shift_y, self.q, self.beta
        )

    def prox(self, gamma, x):
        x = self._check(gamma, x)
        # gamma * perspective(q, beta) is the perspective with beta / gamma,
        # which only rescales rho.
        rho_g = self.rho * gamma ** -(self.qstar - 1.0)
        eta_p, y_p = _kern.perspective_prox(
            x[0] - self.shift_eta, x[1:] - self.shift_y, self.qstar, rho_g
        )
        return np.concatenate(([self.shift_eta + eta_p], self.shift_y + y_p))

    def conjugate_inner_value(self, u):
        """(||.||^q / beta)^*(u) = (rho / qstar) ||u||^qstar, used in optimality checks."""
        u = as_vector(u, self.n)
        return (self.rho / self.qstar) * float(np.linalg.norm(u) ** self.qstar)

    def inner_gradient(self, w):
        """Gradient of ||.||^q / beta at w (w != 0 or q >= 2)."""
        w = as_vector(w, self.n)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return np.zeros(self.n)
        return (self.q / self.beta) * nw ** (self.q - 2.0) * w


def prox_hinge(gamma, t):
    """Scalar prox of the hinge max(0, 1 - t): min(t + gamma, max(t, 1))."""
    if gamma <= 0:
        raise StructuralError("gamma must be positive")
    return min(t + gamma, max(t, 1.0))


def soft_threshold(gamma, x):
    """Componentwise shrinkage by gamma (prox of gamma * ||.||_1)."""
    if gamma <= 0:
        raise StructuralError("gamma must be positive")
    return _kern.soft_threshold(np.asarray(x, dtype=float), gamma)


def project_ball(radius, x):
    """Projection onto the closed ball of given radius about the origin."""
    if radius <= 0:
        raise StructuralError("radius must be positive")
    x = np.asarray(x, dtype=float)
    nx = np.linalg.norm(x)
    if nx <= radius:
        return x.copy()
    return (radius / nx) * x


def prox_semiorthogonal(g, A, x, nu=None, gamma=1.0):
    """One-shot prox of g o A for semi-orthogonal A (A A* = nu I)."""
    return SemiOrthogonalComposition(g, A, nu=nu).prox(gamma, x)


def prox_perspective(persp, eta, y, gamma=1.0):
    """Prox of a (possibly shifted) :class:`PerspectiveQ` at the point (eta, y)."""
    out = persp.prox(gamma, np.concatenate(([eta], np.asarray(y, dtype=float))))
    return float(out[0]), out[1:]


def prox_conjugate(f, gamma, x):
    """Prox of gamma * f^* via the Moreau decomposition.

    prox_{gamma f*}(x) = x - gamma prox_{f / gamma}(x / gamma); at gamma = 1
    this is the inverse-resolvent identity prox_{f*} = I - prox_f.
    """
    if gamma <= 0:
        raise StructuralError("gamma must be positive")
    x = as_vector(x, f.dim)
    return x - gamma * f.prox(1.0 / gamma, x / gamma)


class Smooth:
    """Differentiable convex function with a Lipschitz-continuous gradient."""

    def __init__(self, dim, lipschitz):
        if dim < 1:
            raise StructuralError("Smooth dim must be >= 1")
        if lipschitz <= 0:
            raise StructuralError("lipschitz bound must be positive")
        self.dim = int(dim)
        self.lipschitz = float(lipschitz)

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError


class ZeroSmooth(Smooth):
    """Constant zero criterion (gradient vanishes)."""

    def __init__(self, dim):
        super().__init__(dim, lipschitz=1.0)

    def value(self, x):
        return 0.0

    def grad(self, x):
        return np.zeros(self.dim)


class NearestPointObjective(Smooth):
    """(1/2) ||x - anchor||^2; strongly monotone gradient with modulus 1."""

    def __init__(self, anchor):
        anchor = np.asarray(anchor, dtype=float)
        super().__init__(anchor.shape[0], lipschitz=1.0)
        self.anchor = anchor
        self.strong_monotonicity = 1.0
        self.quad_matrix = np.eye(self.dim)

    def value(self, x):
        d = as_vector(x, self.dim) - self.anchor
        return 0.5 * float(d @ d)

    def grad(self, x):
        return as_vector(x, self.dim) - self.anchor


class MatrixQuadObjective(Smooth):
    """(1/2) x^T Q x for symmetric positive-semidefinite Q."""

    def __init__(self, Q, lipschitz=None):
        Q = np.asarray(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise StructuralError("Q must be a square matrix")
        if lipschitz is None:
            lipschitz = max(float(np.linalg.norm(Q, 2)), np.finfo(float).tiny)
        super().__init__(Q.shape[0], lipschitz)
        self.quad_matrix = Q

    def value(self, x):
        x = as_vector(x, self.dim)
        return 0.5 * float(x @ (self.quad_matrix @ x))

    def grad(self, x):
        return self.quad_matrix @ as_vector(x, self.dim)


class MoreauEnvelope(Smooth):
    """Envelope min_y f(y) + ||x - y||^2 / (2 gamma): smooth with 1/gamma gradient."""

    def __init__(self, f, gamma):
        if gamma <= 0:
            raise StructuralError("envelope index gamma must be positive")
        super().__init__(f.dim, lipschitz=1.0 / gamma)
        self.f = f
        self.gamma = float(gamma)

    def value(self, x):
        x = as_vector(x, self.dim)
        p = self.f.prox(self.gamma, x)
        d = x - p
        return float(self.f.value(p)) + float(d @ d) / (2.0 * self.gamma)

    def grad(self, x):
        x = as_vector(x, self.dim)
        return (x - self.f.prox(self.gamma, x)) / self.gamma


def moreau_envelope(f, gamma):
    """Smooth surrogate of a proximable f (see :class:`MoreauEnvelope`)."""
    return MoreauEnvelope(f, gamma)

"""Dense linear-operator substrate.

Everything is finite-dimensional and dense: an operator is a matrix with an
explicit adjoint (transpose), plus the two services the splitting layer needs
over and over — an operator-norm upper bound (power iteration) and the
positive-definite solve ``(I + A A*)^{-1} v`` reused in every iteration of the
product-space operators.
"""

import numpy as np
import scipy.linalg

from .errors import NumericalError, StructuralError

__all__ = [
    "LinearMap",
    "StackedMap",
    "GramSolver",
    "adjoint_check",
    "opnorm_estimate",
    "gram_solve",
    "as_vector",
]


def as_vector(x, dim=None, name="vector"):
    """Validate a finite 1-D float array of the expected dimension."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        v = v.reshape(-1)
    if dim is not None and v.shape[0] != dim:
        raise StructuralError(f"{name}: expected dimension {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise StructuralError(f"{name}: entries must be finite")
    return v


class LinearMap:
    """Bounded linear operator backed by a dense matrix.

    The adjoint is the transpose (Euclidean inner products throughout).
    Instances are immutable; the operator-norm estimate is cached on first use.
    ``opnorm_upper`` may be supplied when an analytic bound is known.
    """

    def __init__(self, mat, opnorm_upper=None):
        self.mat = np.array(mat, dtype=float)
        if self.mat.ndim != 2:
            raise StructuralError("LinearMap expects a 2-D matrix")
        if not np.all(np.isfinite(self.mat)):
            raise StructuralError("LinearMap entries must be finite")
        self.codomain_dim, self.domain_dim = self.mat.shape
        self._opnorm_upper = opnorm_upper
        self._opnorm_est = None

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n), opnorm_upper=1.0)

    @classmethod
    def scaled_identity(cls, n, scale):
        return cls(scale * np.eye(n), opnorm_upper=abs(scale))

    @classmethod
    def row(cls, coeffs):
        """The functional x -> <coeffs, x> as a 1-row operator."""
        coeffs = np.asarray(coeffs, dtype=float)
        return cls(coeffs.reshape(1, -1))

    def apply(self, x):
        return self.mat @ as_vector(x, self.domain_dim, "LinearMap input")

    def adjoint_apply(self, u):
        return self.mat.T @ as_vector(u, self.codomain_dim, "LinearMap adjoint input")

    def gram_matrix(self):
        """A A* as a dense (codomain x codomain) matrix."""
        return self.mat @ self.mat.T

    @property
    def opnorm_upper(self):
        if self._opnorm_upper is not None:
            return self._opnorm_upper
        return self.opnorm()

    def opnorm(self, iters=200, seed=0):
        """Cached power-iteration estimate of the operator norm."""
        if self._opnorm_est is None:
            self._opnorm_est = opnorm_estimate(self, iters=iters, seed=seed)
        return self._opnorm_est

    def __matmul__(self, x):
        return self.apply(x)


class StackedMap(LinearMap):
    """Vertical stack x -> (A_1 x, ..., A_m x) of maps sharing a domain."""

    def __init__(self, blocks):
        blocks = list(blocks)
        if not blocks:
            raise StructuralError("StackedMap needs at least one block")
        n = blocks[0].domain_dim
        for block in blocks:
            if block.domain_dim != n:
                raise StructuralError("StackedMap blocks must share the domain")
        super().__init__(np.vstack([b.mat for b in blocks]))
        self.blocks = blocks
        ends = np.cumsum([b.codomain_dim for b in blocks])
        starts = np.concatenate(([0], ends[:-1]))
        self.slices = [slice(int(s), int(e)) for s, e in zip(starts, ends)]

    def split(self, y):
        """Slice a codomain vector into the per-block pieces."""
        y = as_vector(y, self.codomain_dim, "StackedMap codomain vector")
        return [y[sl] for sl in self.slices]


def adjoint_check(A, trials=100, seed=0, tol=1e-10):
    """Randomized test of <Ax, u> == <x, A*u>.

    Returns True iff the identity holds to relative tolerance ``tol`` for all
    sampled pairs.  A shape mismatch between apply/adjoint_apply outputs is a
    structural error, not a False.
    """
    if trials < 1:
        raise StructuralError("adjoint_check: trials must be >= 1")
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        x = rng.standard_normal(A.domain_dim)
        u = rng.standard_normal(A.codomain_dim)
        ax = np.asarray(A.apply(x))
        atu = np.asarray(A.adjoint_apply(u))
        if ax.shape != (A.codomain_dim,) or atu.shape != (A.domain_dim,):
            raise StructuralError("adjoint_check: apply/adjoint output shape mismatch")
        lhs = float(ax @ u)
        rhs = float(x @ atu)
        if abs(lhs - rhs) > tol * (1.0 + abs(lhs)):
            return False
    return True


def opnorm_estimate(A, iters=200, seed=0):
    """Power-iteration estimate of ||A||_op.

    Iterates v <- A*A v and reports the square root of the Rayleigh quotient,
    which is nondecreasing in ``iters`` for a fixed seed.  Returns 0.0 for the
    zero operator.
    """
    if iters < 1:
        raise StructuralError("opnorm_estimate: iters must be >= 1")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.domain_dim)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return 0.0
    v /= nv
    est = 0.0
    for _ in range(iters):
        w = A.adjoint_apply(A.apply(v))
        est = float(np.sqrt(max(v @ w, 0.0)))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    return est


class GramSolver:
    """Cached Cholesky solve of (I + A A*) w = v.

    The factorization is computed eagerly at construction and reused across
    all iterations of an operator built on ``base``.
    """

    def __init__(self, base):
        self.base = base
        gram = np.eye(base.codomain_dim) + base.gram_matrix()
        try:
            self._cho = scipy.linalg.cho_factor(gram)
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            with np.errstate(all="ignore"):
                cond = float(np.linalg.cond(np.nan_to_num(gram)))
            raise NumericalError(
                f"I + AA* factorization failed (condition number {cond:.3e})"
            ) from exc

    def solve(self, v):
        v = as_vector(v, self.base.codomain_dim, "gram_solve rhs")
        return scipy.linalg.cho_solve(self._cho, v)

    def inverse_matrix(self):
        """Dense (I + A A*)^{-1}, used by the fused kernels."""
        return scipy.linalg.cho_solve(self._cho, np.eye(self.base.codomain_dim))


def gram_solve(solver, v):
    """Solve (I + A A*) w = v with a prebuilt :class:`GramSolver`."""
    return solver.solve(v)

"""Hierarchical SVM: margin maximization over the least-empirical-hinge-loss set.

The two-stage classifier ("M2LEHL") maximizes the margin among all (w, b)
minimizing the total hinge loss, which reproduces the classic max-margin
machine on separable data and stays well defined on nonseparable data.  The
first stage is decomposed into one scalar hinge row per sample,
(w, b) -> y_i (x_i^T w - b), solved on the diagonal product space; the second
stage (1/2)||w||^2 rides on top via hybrid steepest descent.  A ball
constraint on (w, b) with a generous default radius guarantees a nonempty,
bounded solution set; it must stay inactive at the solution and is checked.

Baselines: the one-stage soft-margin machine (same splitting machinery) and a
QP max-margin oracle for separable data (independent solver, used for
acceptance checks).
"""

import warnings

import numpy as np

from .errors import ConfigError, StructuralError
from .hsdm import HierProblem, StepSchedule, hsdm_drs_II
from .linop import LinearMap
from .prox import (
    BallIndicator,
    HingeLoss,
    MatrixQuadObjective,
    PartialSquaredNorm,
)
from .splitting import KMConfig, SplitProblem, drs_product_II, km_iterate

__all__ = [
    "Dataset",
    "LinearClassifier",
    "SvmConfig",
    "hinge_loss",
    "error_count",
    "m2lehl_train",
    "softmargin_train",
    "original_svm_qp",
    "iris_subsets",
]


class Dataset:
    """Labeled points (x_i, y_i) with y_i in {-1, +1}."""

    def __init__(self, points, labels):
        self.points = np.asarray(points, dtype=float)
        self.labels = np.asarray(labels, dtype=float)
        if self.points.ndim != 2:
            raise StructuralError("points must be an N x p array")
        self.N, self.p = self.points.shape
        if self.labels.shape != (self.N,):
            raise StructuralError("labels must match the number of points")
        if self.N < 2:
            raise StructuralError("need at least two samples")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise StructuralError("labels must be -1 or +1")

    def both_classes(self):
        return np.any(self.labels > 0) and np.any(self.labels < 0)

    def margin_rows(self):
        """Rows of the map (w, b) -> y_i (x_i^T w - b), one per sample."""
        return self.labels[:, None] * np.column_stack((self.points, -np.ones(self.N)))


class LinearClassifier:
    """Hyperplane w^T x - b = 0 with the +/-1 margin hyperplanes."""

    def __init__(self, w, b):
        self.w = np.asarray(w, dtype=float)
        self.b = float(b)

    @property
    def margin(self):
        nw = np.linalg.norm(self.w)
        if nw == 0.0:
            raise StructuralError("margin undefined for w = 0")
        return 1.0 / nw

    def scores(self, dataset):
        """Functional margins y_i (w^T x_i - b)."""
        return dataset.labels * (dataset.points @ self.w - self.b)

    def to_record(self, dataset=None):
        rec = {"w": [float(v) for v in self.w], "b": self.b}
        rec["margin"] = 1.0 / float(np.linalg.norm(self.w)) if np.any(self.w) else None
        if dataset is not None:
            rec["errors"] = error_count(dataset, self)
            rec["hinge_loss"] = hinge_loss(dataset, self)
        return rec


class SvmConfig:
    """Training parameters for the splitting-based SVM solvers.

    ``radius`` bounds (w, b) jointly; the default (1000 x the largest point
    norm) is meant to never bind, which ``m2lehl_train`` verifies post hoc.
    The default step scale compensates the 1/(N+1) block averaging of the
    gradient in the type-II driver.
    """

    def __init__(self, radius=None, alpha=0.5, lambda0=None, max_iter=50_000):
        if radius is not None and radius <= 0:
            raise ConfigError("radius must be positive")
        if not 0.0 < alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if lambda0 is not None and lambda0 <= 0:
            raise ConfigError("lambda0 must be positive")
        self.radius = radius
        self.alpha = float(alpha)
        self.lambda0 = None if lambda0 is None else float(lambda0)
        self.max_iter = int(max_iter)

    def effective_radius(self, dataset):
        if self.radius is not None:
            return self.radius
        return 1e3 * max(1.0, float(np.max(np.linalg.norm(dataset.points, axis=1))))

    def effective_lambda0(self, dataset):
        if self.lambda0 is not None:
            return self.lambda0
        return 0.2 * (dataset.N + 1)


def hinge_loss(dataset, classifier):
    """Total hinge loss sum_i max(0, 1 - y_i (w^T x_i - b))."""
    return float(np.sum(np.maximum(0.0, 1.0 - classifier.scores(dataset))))


def error_count(dataset, classifier):
    """Number of samples strictly violating their margin hyperplane.

    Counts y_i (w^T x_i - b) < 1 with a 1e-9 slack so that support vectors
    sitting numerically on the boundary are not miscounted.
    """
    return int(np.sum(classifier.scores(dataset) < 1.0 - 1e-9))


def _hinge_split(dataset, f, hinge_weight=1.0):
    rows = dataset.margin_rows()
    terms = [(HingeLoss(1, weight=hinge_weight), LinearMap.row(rows[i]))
             for i in range(dataset.N)]
    return SplitProblem(f, terms)


def _margin_polish(dataset, x):
    """Snap a near-solution onto the active-margin vertex it is approaching.

    The hierarchical optimum typically has several samples exactly on a
    margin hyperplane, which makes the error count of any finite-precision
    iterate unstable.  For each candidate active set (scores within a
    tolerance of 1), solve the equality-constrained stage-two KKT system
    (min (1/2)||w||^2 subject to active scores = 1); the winner among the
    candidates and the iterate itself is chosen hierarchically — smallest
    hinge loss first (1e-9 band), then smallest stage-two value — so the snap
    can never degrade the iterate in the two-stage ordering.
    """
    rows = dataset.margin_rows()
    n = x.size
    scores = rows @ x

    def stage_values(v):
        s = rows @ v
        return float(np.sum(np.maximum(0.0, 1.0 - s))), 0.5 * float(v[:-1] @ v[:-1])

    h0, p0 = stage_values(x)
    candidates = [(h0, p0, x)]
    P = np.eye(n)
    P[-1, -1] = 0.0
    for tol in (1e-6, 1e-5, 1e-4, 1e-3, 1e-2):
        act = np.flatnonzero(np.abs(scores - 1.0) <= tol)
        if act.size == 0:
            continue
        RA = rows[act]
        kkt = np.block([[P, RA.T], [RA, np.zeros((act.size, act.size))]])
        rhs = np.concatenate((np.zeros(n), np.ones(act.size)))
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        cand = sol[:n]
        h, p = stage_values(cand)
        candidates.append((h, p, cand))
    h_min = min(h for h, _, _ in candidates)
    band = h_min + 1e-9 * (1.0 + abs(h_min))
    _, _, best = min(
        ((p, h, c) for h, p, c in candidates if h <= band),
        key=lambda t: (t[0], t[1]),
    )
    return best


def m2lehl_train(dataset, cfg=None, polish=True):
    """Max-margin classifier over the hinge-loss minimizers.

    Builds the product-space problem with the ball indicator as the f block
    and one scalar hinge row per sample, then runs the type-II HSDM driver
    with psi(w, b) = (1/2)||w||^2, followed by the self-validating
    active-margin polish (disable with ``polish=False``).  Returns
    (classifier, trace).
    """
    cfg = cfg or SvmConfig()
    if not dataset.both_classes():
        raise StructuralError("training needs samples from both classes")
    r = cfg.effective_radius(dataset)
    n = dataset.p + 1
    split = _hinge_split(dataset, BallIndicator(n, r))
    Q = np.eye(n)
    Q[-1, -1] = 0.0
    psi = MatrixQuadObjective(Q, lipschitz=1.0)
    hier = HierProblem(split, psi)
    x, trace = hsdm_drs_II(
        hier,
        StepSchedule.harmonic(cfg.effective_lambda0(dataset)),
        alpha=cfg.alpha,
        max_iter=cfg.max_iter,
    )
    if polish:
        x = _margin_polish(dataset, x)
    if np.linalg.norm(x) >= 0.99 * r:
        warnings.warn(
            "ball constraint nearly active at the M2LEHL solution; rerun with a "
            "larger radius", stacklevel=2,
        )
    return LinearClassifier(x[:-1], x[-1]), trace


def softmargin_train(dataset, C=1.0, cfg=None):
    """Soft-margin baseline: minimize (1/2)||w||^2 + C * total hinge loss.

    One-stage problem solved by the plain relaxed fixed-point iteration on the
    same diagonal product space (no hierarchy).  Returns the classifier.
    """
    if C <= 0:
        raise ConfigError("C must be positive")
    cfg = cfg or SvmConfig()
    n = dataset.p + 1
    mask = np.ones(n, dtype=bool)
    mask[-1] = False
    split = _hinge_split(dataset, PartialSquaredNorm(n, mask), hinge_weight=C)
    T = drs_product_II(split)
    km = KMConfig(alpha=cfg.alpha, max_iter=cfg.max_iter, fp_residual_tol=1e-12)
    z, _ = km_iterate(T, km, np.zeros(T.dim), record_objective=False)
    x = T.extract(z)
    return LinearClassifier(x[:-1], x[-1])


def original_svm_qp(dataset):
    """Max-margin QP oracle for separable data (independent of the splitting
    solvers): minimize ||w||^2 subject to all functional margins >= 1.

    Raises :class:`StructuralError` when the data is not linearly separable.
    """
    import cvxpy as cp

    w = cp.Variable(dataset.p)
    b = cp.Variable()
    cons = [
        cp.multiply(dataset.labels, dataset.points @ w - b) >= 1.0
    ]
    prob = cp.Problem(cp.Minimize(cp.sum_squares(w)), cons)
    prob.solve()
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise StructuralError(
            f"original SVM is infeasible (data not linearly separable): {prob.status}"
        )
    return LinearClassifier(np.asarray(w.value).reshape(-1), float(b.value))


def softmargin_objective_oracle(dataset, C=1.0):
    """Independent optimal value of the soft-margin objective (QP via cvxpy)."""
    import cvxpy as cp

    w = cp.Variable(dataset.p)
    b = cp.Variable()
    xi = cp.Variable(dataset.N)
    cons = [
        cp.multiply(dataset.labels, dataset.points @ w - b) >= 1.0 - xi,
        xi >= 0,
    ]
    prob = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(w) + C * cp.sum(xi)), cons)
    prob.solve()
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise StructuralError(f"soft-margin QP failed: {prob.status}")
    return float(prob.value), LinearClassifier(np.asarray(w.value).reshape(-1),
                                               float(b.value))


def iris_subsets(features, species):
    """Build the two Iris experiment subsets.

    ``features`` is the 150 x 4 measurement matrix (sepal length/width, petal
    length/width), ``species`` an array of 0/1/2 class codes in the standard
    order (setosa, versicolor, virginica).  Returns
    ``{"sep": Dataset, "nsep": Dataset}``: classes 0/1 with the sepal features
    (linearly separable) and classes 1/2 with the petal features (not).
    """
    features = np.asarray(features, dtype=float)
    species = np.asarray(species)
    if features.shape != (150, 4) or species.shape != (150,):
        raise StructuralError("expected the 150 x 4 Iris layout")
    sel_sep = species <= 1
    sep = Dataset(
        features[sel_sep][:, :2],
        np.where(species[sel_sep] == 0, 1.0, -1.0),
    )
    sel_nsep = species >= 1
    nsep = Dataset(
        features[sel_nsep][:, 2:],
        np.where(species[sel_nsep] == 1, 1.0, -1.0),
    )
    return {"sep": sep, "nsep": nsep}

import csv

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def iris_arrays():
    """The standard 150 x 4 Iris measurements with 0/1/2 class codes."""
    sklearn_datasets = pytest.importorskip("sklearn.datasets")
    iris = sklearn_datasets.load_iris()
    return np.asarray(iris.data, dtype=float), np.asarray(iris.target)


@pytest.fixture(scope="session")
def iris_csv(iris_arrays, tmp_path_factory):
    """Iris materialized as the user-facing 150 x 5 CSV layout."""
    features, species = iris_arrays
    names = {0: "setosa", 1: "versicolor", 2: "virginica"}
    path = tmp_path_factory.mktemp("data") / "iris.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sepal_length", "sepal_width", "petal_length",
                         "petal_width", "species"])
        for row, cls in zip(features, species):
            writer.writerow([*(f"{v:.1f}" for v in row), names[int(cls)]])
    return path


def perspective_prox_oracle(eta, y, q, beta, grid=201, sweeps=80):
    """Brute-force prox of the ||.||^q / beta perspective at (eta, y).

    By rotational symmetry the minimizer's vector part is r * y/||y|| with
    r in [0, ||y||], so the problem reduces to two variables (s, r).  A dense
    grid seeds alternating exact 1-D minimizations (valid because the
    objective is jointly strictly convex and smooth on s > 0); the closed
    lower-semicontinuity point (0, 0) is compared separately.  Independent of
    the closed-form implementation (no root solves).
    """
    from scipy.optimize import minimize_scalar

    y = np.asarray(y, dtype=float)
    ynorm = float(np.linalg.norm(y))
    yhat = y / ynorm if ynorm > 0 else np.zeros_like(y)

    def objective(s, r):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            val = np.where(s > 0, r**q / (beta * np.maximum(s, 1e-300) ** (q - 1)),
                           np.inf)
        val = np.where((s == 0) & (r == 0), 0.0, val)
        return val + 0.5 * (s - eta) ** 2 + 0.5 * (r - ynorm) ** 2

    def point_objective(s, r):
        return float(objective(np.array([s]), np.array([r]))[0])

    s_hi = abs(eta) + ynorm**q / beta + 2.0
    origin_val = point_objective(0.0, 0.0)

    # coarse joint grid seed (away from the s = 0 boundary)
    ss = np.linspace(s_hi / grid, s_hi, grid)
    rs = np.linspace(0.0, ynorm, grid) if ynorm > 0 else np.array([0.0])
    S, R = np.meshgrid(ss, rs, indexing="ij")
    vals = objective(S, R)
    k = np.unravel_index(np.argmin(vals), vals.shape)
    s, r = float(S[k]), float(R[k])

    tiny = 1e-14 * (1.0 + s_hi)
    for _ in range(sweeps):
        s = minimize_scalar(lambda t: point_objective(t, r), bounds=(tiny, s_hi),
                            method="bounded", options={"xatol": 1e-13}).x
        if ynorm > 0:
            r = minimize_scalar(lambda t: point_objective(s, t),
                                bounds=(0.0, ynorm), method="bounded",
                                options={"xatol": 1e-13}).x
    if origin_val < point_objective(s, r):
        return 0.0, np.zeros_like(y)
    return float(s), float(r) * yhat


def hinge_prox_oracle(gamma, t, lo=-10.0, hi=10.0, n=2_000_001):
    """1-D dense-grid minimization of max(0, 1-y) + (y-t)^2 / (2 gamma)."""
    ys = np.linspace(lo, hi, n)
    vals = np.maximum(0.0, 1.0 - ys) + (ys - t) ** 2 / (2.0 * gamma)
    return float(ys[np.argmin(vals)])


def scalar_prox_oracle(fn_value, gamma, t, lo=-10.0, hi=10.0, n=2_000_001):
    """1-D dense-grid prox for an arbitrary scalar convex function."""
    ys = np.linspace(lo, hi, n)
    vals = fn_value(ys) + (ys - t) ** 2 / (2.0 * gamma)
    return float(ys[np.argmin(vals)])

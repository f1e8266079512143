"""Fast invariant suite behind the ``selftest`` CLI command.

Each check is deterministic (fixed seeds) and cheap; together they cover the
prox formulas, operator identities, and desk-instance oracles.  Setting the
environment variable HIERSPLIT_SELFTEST_PERTURB injects a deliberate failure
so harnesses can verify that failures are detected.
"""

import os

import numpy as np

from .linop import GramSolver, LinearMap, StackedMap, adjoint_check, opnorm_estimate
from .prox import (
    HingeLoss,
    L1Norm,
    MoreauEnvelope,
    PerspectiveQ,
    PointIndicator,
    SquaredDeviation,
    prox_conjugate,
    prox_hinge,
    project_ball,
    soft_threshold,
)
from .splitting import (
    KMConfig,
    SplitProblem,
    drs_operator,
    drs_product_I,
    drs_product_II,
    km_iterate,
    lal_operator,
    nonexpansiveness_check,
)


def _close(a, b, tol=1e-9):
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float),
                       rtol=0.0, atol=tol)


def _checks():
    rng = np.random.default_rng(7)
    perturb = 1.01 if os.environ.get("HIERSPLIT_SELFTEST_PERTURB") else 1.0

    A = LinearMap(rng.standard_normal((4, 6)))
    yield "adjoint identity (random dense map)", adjoint_check(A, trials=50), ""

    est = opnorm_estimate(LinearMap(np.diag([1.0, 2.0, 5.0])), iters=100, seed=1)
    yield "operator norm of diag(1,2,5)", abs(est - 5.0) < 1e-6, f"got {est!r}"

    solver = GramSolver(A)
    v = rng.standard_normal(4)
    w = solver.solve(v)
    resid = np.linalg.norm((np.eye(4) + A.gram_matrix()) @ w - v)
    yield "gram solve residual", resid <= 1e-8 * np.linalg.norm(v), f"residual {resid:.2e}"

    stack = StackedMap([LinearMap.row([1.0, 2.0]), LinearMap.identity(2)])
    yield "stacked map adjoint", adjoint_check(stack, trials=50), ""

    got = prox_hinge(1.0, -0.5) * perturb
    yield "hinge prox at (gamma=1, t=-0.5)", _close(got, 0.5), f"got {got!r}"
    yield "hinge prox identity region", _close(prox_hinge(0.3, 2.0), 2.0), ""

    got = soft_threshold(1.0, np.array([3.0, -0.5]))
    yield "soft threshold (1, (3,-0.5))", _close(got, [2.0, 0.0]), f"got {got!r}"

    got = project_ball(1.0, np.array([3.0, 4.0]))
    yield "ball projection (3,4) -> (0.6,0.8)", _close(got, [0.6, 0.8]), f"got {got!r}"

    yield "Moreau decomposition (l1, gamma=1)", _close(
        L1Norm(3).prox(1.0, np.array([2.0, -0.3, 0.7]))
        + prox_conjugate(L1Norm(3), 1.0, np.array([2.0, -0.3, 0.7])),
        [2.0, -0.3, 0.7],
    ), ""

    env = MoreauEnvelope(PointIndicator(1), 1.0)
    yield "envelope of the point indicator", _close(
        [env.value([3.0]), env.grad([3.0])[0]], [4.5, 3.0]
    ), ""

    persp = PerspectiveQ(1, q=2.0, beta=2.0)
    out = persp.prox(1.0, np.array([-1.0, 0.0]))
    yield "perspective prox dead branch", _close(out, [0.0, 0.0]), f"got {out!r}"
    out = persp.prox(1.0, np.array([5.0, 0.0]))
    yield "perspective prox fixed region", _close(out, [5.0, 0.0]), f"got {out!r}"

    for name, fn in (
        ("hinge", HingeLoss(4)),
        ("l1", L1Norm(4)),
        ("perspective q=2", PerspectiveQ(3, 2.0, 0.5)),
    ):
        ok = True
        for _ in range(25):
            x = 3.0 * rng.standard_normal(fn.dim)
            y = 3.0 * rng.standard_normal(fn.dim)
            px, py = fn.prox(1.0, x), fn.prox(1.0, y)
            d = px - py
            if float(d @ d) > float((x - y) @ d) + 1e-9:
                ok = False
        yield f"firm nonexpansiveness ({name})", ok, ""

    f, g = L1Norm(1), SquaredDeviation(1, center=[3.0])
    T = drs_operator(f, g)
    z, _ = km_iterate(T, KMConfig(alpha=0.5, max_iter=3000, fp_residual_tol=1e-13),
                      np.zeros(1), record_objective=False)
    got = T.extract(z)[0]
    yield "DRS desk oracle |x| + (x-3)^2/2 -> 2", abs(got - 2.0) < 1e-6, f"got {got!r}"

    prob = SplitProblem(f, [(g, LinearMap.identity(1))])
    T1 = drs_product_I(prob)
    z, _ = km_iterate(T1, KMConfig(alpha=0.5, max_iter=3000, fp_residual_tol=1e-13),
                      np.zeros(T1.dim), record_objective=False)
    got = T1.extract(z)[0]
    yield "type-I product route agrees", abs(got - 2.0) < 1e-6, f"got {got!r}"

    T2 = drs_product_II(prob)
    z, _ = km_iterate(T2, KMConfig(alpha=0.5, max_iter=3000, fp_residual_tol=1e-13),
                      np.zeros(T2.dim), record_objective=False)
    got = T2.extract(z)[0]
    yield "type-II product route agrees", abs(got - 2.0) < 1e-6, f"got {got!r}"

    prob2 = SplitProblem(
        SquaredDeviation(2, center=[2.0, 3.0]),
        [(PointIndicator(1), LinearMap(np.array([[0.5, 0.0]])))],
    )
    TL = lal_operator(prob2, u=0.5)
    z, _ = km_iterate(TL, KMConfig(alpha=0.5, max_iter=6000, fp_residual_tol=1e-13),
                      np.zeros(TL.dim), record_objective=False)
    got = TL.extract(z)
    yield "LAL equality-constrained projection", _close(got, [0.0, 3.0], 1e-5), f"got {got!r}"

    yield "nonexpansiveness (type-I operator)", nonexpansiveness_check(T1, trials=40,
                                                                       seed=3), ""


def run_selftest(stream=None):
    """Run all checks; print one line per check; return 0 iff everything passed."""
    import sys

    stream = stream or sys.stdout
    failures = 0
    for name, ok, detail in _checks():
        status = "PASS" if ok else "FAIL"
        line = f"{status}  {name}"
        if not ok and detail:
            line += f"  [{detail}]"
        print(line, file=stream)
        failures += 0 if ok else 1
    verdict = "all checks passed" if failures == 0 else f"{failures} check(s) failed"
    print(f"selftest: {verdict}", file=stream)
    return 0 if failures == 0 else 5

import numpy as np
import pytest

from hiersplit.errors import ConfigError, StructuralError
from hiersplit.svm import (
    Dataset,
    LinearClassifier,
    SvmConfig,
    error_count,
    hinge_loss,
    iris_subsets,
    m2lehl_train,
    original_svm_qp,
    softmargin_train,
)


@pytest.fixture
def toy_1d():
    return Dataset(np.array([[1.0], [-1.0]]), np.array([1.0, -1.0]))


@pytest.fixture
def separable_2d(rng):
    """Seeded separable blobs with margin ~1 around a known hyperplane."""
    n = 30
    pts = rng.standard_normal((n, 2))
    labels = np.where(pts[:, 0] + 0.5 * pts[:, 1] > 0, 1.0, -1.0)
    pts += labels[:, None] * np.array([0.9, 0.45]) / np.linalg.norm([1.0, 0.5])
    return Dataset(pts, labels)


def test_dataset_validation():
    with pytest.raises(StructuralError):
        Dataset(np.zeros((3, 2)), np.array([1.0, 2.0, -1.0]))
    with pytest.raises(StructuralError):
        Dataset(np.zeros((1, 2)), np.array([1.0]))
    with pytest.raises(StructuralError):
        Dataset(np.zeros((2, 2)), np.array([1.0]))


def test_hinge_loss_examples(toy_1d):
    assert hinge_loss(toy_1d, LinearClassifier([1.0], 0.0)) == pytest.approx(0.0)
    assert hinge_loss(toy_1d, LinearClassifier([0.0], 0.0)) == pytest.approx(2.0)
    assert hinge_loss(toy_1d, LinearClassifier([0.5], 0.0)) == pytest.approx(1.0)


def test_error_count_examples(toy_1d):
    assert error_count(toy_1d, LinearClassifier([1.0], 0.0)) == 0
    assert error_count(toy_1d, LinearClassifier([0.0], 0.0)) == 2
    assert error_count(toy_1d, LinearClassifier([0.5], 0.0)) == 2


def test_margin_and_rows(toy_1d):
    clf = LinearClassifier([2.0], 0.0)
    assert clf.margin == pytest.approx(0.5)
    rows = toy_1d.margin_rows()
    # y_i (x_i^T w - b): rows act on (w, b)
    assert np.allclose(rows @ np.array([2.0, 0.5]), [1.5, 2.5])
    with pytest.raises(StructuralError):
        LinearClassifier([0.0], 1.0).margin


def test_invariance_under_permutation(rng, separable_2d):
    clf = LinearClassifier([1.0, 0.5], 0.0)
    perm = rng.permutation(separable_2d.N)
    shuffled = Dataset(separable_2d.points[perm], separable_2d.labels[perm])
    assert hinge_loss(separable_2d, clf) == pytest.approx(hinge_loss(shuffled, clf))
    assert error_count(separable_2d, clf) == error_count(shuffled, clf)


def test_m2lehl_toy(toy_1d):
    clf, trace = m2lehl_train(toy_1d, SvmConfig(max_iter=20_000))
    assert np.allclose(clf.w, [1.0], atol=1e-3)
    assert clf.b == pytest.approx(0.0, abs=1e-3)
    assert clf.margin == pytest.approx(1.0, abs=2e-3)
    assert len(trace) == 20_000


def test_m2lehl_requires_both_classes():
    with pytest.raises(StructuralError):
        m2lehl_train(Dataset(np.eye(2), np.array([1.0, 1.0])))


def test_m2lehl_ball_warning(toy_1d):
    with pytest.warns(UserWarning, match="ball"):
        m2lehl_train(toy_1d, SvmConfig(radius=0.5, max_iter=2000))


def test_qp_oracle_toy(toy_1d):
    clf = original_svm_qp(toy_1d)
    assert np.allclose(clf.w, [1.0], atol=1e-6)
    assert clf.b == pytest.approx(0.0, abs=1e-6)


def test_qp_oracle_three_point_geometry():
    # all three margins active: w2 - b = 1, w2 + b = 1, 3 w1 - b = 1
    # => b = 0, w = (1/3, 1)
    data = Dataset(np.array([[0.0, 1.0], [0.0, -1.0], [3.0, 0.0]]),
                   np.array([1.0, -1.0, 1.0]))
    clf = original_svm_qp(data)
    assert np.allclose(clf.w, [1.0 / 3.0, 1.0], atol=1e-6)
    assert clf.b == pytest.approx(0.0, abs=1e-6)
    assert clf.margin == pytest.approx(3.0 / np.sqrt(10.0), abs=1e-6)


def test_qp_oracle_rejects_nonseparable():
    data = Dataset(np.array([[1.0], [1.0]]), np.array([1.0, -1.0]))
    with pytest.raises(StructuralError, match="separable"):
        original_svm_qp(data)


def test_m2lehl_reproduces_qp_on_separable(separable_2d):
    qp = original_svm_qp(separable_2d)
    clf, _ = m2lehl_train(separable_2d, SvmConfig(max_iter=40_000))
    assert hinge_loss(separable_2d, clf) <= 1e-6
    assert np.linalg.norm(clf.w) <= np.linalg.norm(qp.w) * (1.0 + 1e-3)
    assert abs(clf.margin - qp.margin) <= 1e-2 * qp.margin


def test_softmargin_limits(toy_1d):
    hard = softmargin_train(toy_1d, C=1e6, cfg=SvmConfig(max_iter=20_000))
    assert np.allclose(hard.w, [1.0], atol=1e-3)
    weak = softmargin_train(toy_1d, C=1e-6, cfg=SvmConfig(max_iter=5000))
    assert np.linalg.norm(weak.w) <= 1e-3


def test_softmargin_rejects_bad_c(toy_1d):
    with pytest.raises(ConfigError):
        softmargin_train(toy_1d, C=-1.0)


def test_m2lehl_dominates_softmargin_in_hinge(rng):
    # nonseparable blob pair
    pts = np.vstack([rng.standard_normal((20, 2)) + [0.5, 0],
                     rng.standard_normal((20, 2)) - [0.5, 0]])
    labels = np.concatenate([np.ones(20), -np.ones(20)])
    data = Dataset(pts, labels)
    m2, _ = m2lehl_train(data, SvmConfig(max_iter=40_000))
    soft = softmargin_train(data, C=1.0, cfg=SvmConfig(max_iter=40_000))
    assert hinge_loss(data, m2) <= hinge_loss(data, soft) + 1e-6


def test_iris_subsets_shapes(iris_arrays):
    subs = iris_subsets(*iris_arrays)
    assert subs["sep"].N == 100 and subs["sep"].p == 2
    assert subs["nsep"].N == 100 and subs["nsep"].p == 2
    assert subs["sep"].both_classes() and subs["nsep"].both_classes()
    with pytest.raises(StructuralError):
        iris_subsets(np.zeros((10, 4)), np.zeros(10))


def test_classifier_record(toy_1d):
    rec = LinearClassifier([1.0], 0.0).to_record(toy_1d)
    assert rec["margin"] == pytest.approx(1.0)
    assert rec["errors"] == 0
    assert rec["hinge_loss"] == pytest.approx(0.0)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone as sk_clone

from gradcheck import all_errors
from pufguard.features import parity_transform, raw_transform
from pufguard.learners import LearnerKind, make_learner, predict, predict_proba, train, train_multiclass
from pufguard.learners.base import encode_targets, sigmoid
from pufguard.learners.forest import RandomForest, Tree, gini, leaf_class, resolve_max_features
from pufguard.learners.logistic import LogisticRegression, logistic_loss_grad, rprop_minimize
from pufguard.learners.neural import NeuralNetwork
from pufguard.puf import create_instance, generate_crps

XOR_X = raw_transform(np.array([[0, 0], [0, 1], [1, 0], [1, 1]]))
XOR_Y = np.array([-1, 1, 1, -1])
FAST = {"lr": {}, "rf": {"n_estimators": 10}, "nn": {"max_epochs": 30}}


@pytest.mark.parametrize("seed", range(3))
def test_gradients_match_finite_differences(seed):
    for name, errs in all_errors(seed).items():
        assert max(errs) < 1e-4, name


def test_sigmoid_is_stable():
    z = np.array([-1000.0, -5.0, 0.0, 5.0, 1000.0])
    s = sigmoid(z)
    assert np.all(np.isfinite(s))
    assert s[2] == 0.5 and s[0] == 0.0 and s[-1] == 1.0
    assert np.allclose(s, 1 / (1 + np.exp(-np.clip(z, -700, 700))))


def test_encode_targets_binary_and_multiclass():
    classes, idx = encode_targets([1, 1, 1])
    assert classes.tolist() == [-1, 1] and idx.tolist() == [1, 1, 1]
    classes, idx = encode_targets([2, 0, 5])
    assert classes.tolist() == [0, 2, 5] and idx.tolist() == [1, 0, 2]
    with pytest.raises(ValueError):
        encode_targets([3, 3])


@pytest.mark.parametrize("kind", ["lr", "rf", "nn"])
def test_single_class_collapses_to_plus_one(kind):
    X = np.random.default_rng(0).standard_normal((30, 4))
    model = train(kind, X, np.ones(30), FAST[kind])
    assert np.all(predict(model, X) == 1)


def test_lr_clones_small_arbiter():
    inst = create_instance("arbiter", 16, seed=3)
    train_set = generate_crps(inst, 2000, 1)
    test_set = generate_crps(inst, 500, 2)
    model = train("lr", parity_transform(train_set.challenges), train_set.responses)
    acc = np.mean(predict(model, parity_transform(test_set.challenges)) == test_set.responses)
    assert acc >= 0.98


def test_xor_toy_separates_lr_from_nn():
    lr = train("lr", XOR_X, XOR_Y)
    assert np.mean(predict(lr, XOR_X) == XOR_Y) <= 0.75
    X = np.repeat(XOR_X, 25, axis=0)
    y = np.repeat(XOR_Y, 25)
    nn = train("nn", X, y, {"hidden": 8, "optimizer": "adam", "learning_rate": 0.05, "max_epochs": 300,
                            "batch_size": 16})
    assert np.mean(predict(nn, XOR_X) == XOR_Y) == 1.0


def test_lr_fixed_parameters():
    zero = LogisticRegression.from_params(np.zeros(3), 0.0)
    X = np.random.default_rng(0).standard_normal((5, 3))
    assert np.all(predict_proba(zero, X) == 0.5)
    assert np.all(predict(zero, X) == 1)
    biased = LogisticRegression.from_params(np.zeros(3), 10.0)
    assert np.allclose(predict_proba(biased, X), 1 / (1 + np.exp(-10)))


def _stump(vote_plus: bool) -> Tree:
    value = np.array([[0.0, 1.0]]) if vote_plus else np.array([[1.0, 0.0]])
    return Tree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), value)


def _forest(votes):
    rf = RandomForest(n_estimators=len(votes))
    rf.classes_ = np.array([-1, 1])
    rf.n_features_in_ = 2
    rf.estimators_ = [_stump(v) for v in votes]
    return rf


def test_forest_vote_fraction_and_unanimity():
    X = np.zeros((3, 2))
    assert np.allclose(predict_proba(_forest([True, True, True, False]), X), 0.75)
    assert np.all(predict(_forest([False] * 3), X) == -1)
    assert np.all(predict(_forest([True, False]), X) == 1)


def test_leaf_ties_go_to_plus_one():
    assert leaf_class(np.array([[0.5, 0.5], [0.6, 0.4]])).tolist() == [1, 0]
    assert leaf_class(np.array([[0.2, 0.4, 0.4]])).tolist() == [2]


def test_gini():
    assert gini(np.array([5, 5])) == 0.5
    assert gini(np.array([4, 0])) == 0.0
    assert gini(np.array([0, 0])) == 0.0


def test_resolve_max_features():
    assert resolve_max_features("sqrt", 65) == 9
    assert resolve_max_features(None, 7) == 7
    assert resolve_max_features(0.5, 9) == 5
    assert resolve_max_features(3, 2) == 2


def test_single_tree_memorises_unique_rows():
    rng = np.random.default_rng(0)
    X = rng.integers(0, 2, (200, 12)).astype(float)
    X = np.unique(X, axis=0)
    y = rng.choice([-1, 1], len(X))
    rf = RandomForest(n_estimators=1, max_depth=None, max_features=None, bootstrap=False).fit(X, y)
    assert np.all(rf.predict(X) == y)


def test_forest_continuous_features():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((400, 3))
    y = np.where(X[:, 0] + 0.5 * X[:, 1] > 0, 1, -1)
    rf = RandomForest(n_estimators=20, random_state=3).fit(X[:300], y[:300])
    assert np.mean(rf.predict(X[300:]) == y[300:]) > 0.85


def test_rf_threads_do_not_change_model():
    rng = np.random.default_rng(2)
    X = rng.choice([-1.0, 1.0], (300, 10))
    y = np.where(X[:, 0] * X[:, 1] > 0, 1, -1)
    a = RandomForest(n_estimators=12, random_state=5, n_jobs=1).fit(X, y)
    b = RandomForest(n_estimators=12, random_state=5, n_jobs=4).fit(X, y)
    assert np.array_equal(a.votes(X), b.votes(X))


def test_rprop_monotone_and_converges():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((200, 5))
    t = (X @ rng.standard_normal(5) + 0.3 * rng.standard_normal(200) > 0).astype(float)
    x, losses = rprop_minimize(lambda p: logistic_loss_grad(p, X, t, 0.01), np.zeros(6))
    assert np.all(np.diff(losses) <= 0)
    assert losses[-1] < losses[0]
    _, g = logistic_loss_grad(x, X, t, 0.01)
    assert np.linalg.norm(g) < 1e-2


def test_rprop_on_quadratic_finds_minimum():
    target = np.array([3.0, -2.0, 0.5])
    x, losses = rprop_minimize(lambda v: (np.sum((v - target) ** 2), 2 * (v - target)), np.zeros(3), tol=0.0,
                               max_epochs=500)
    assert np.allclose(x, target, atol=1e-3)
    assert np.all(np.diff(losses) <= 0)


@pytest.mark.parametrize("kind", ["lr", "rf", "nn"])
def test_training_is_reproducible(kind):
    rng = np.random.default_rng(4)
    X = rng.choice([-1.0, 1.0], (200, 8))
    y = np.where(X[:, :3].prod(axis=1) > 0, 1, -1)
    a = train(kind, X, y, FAST[kind], seed=7)
    b = train(kind, X, y, FAST[kind], seed=7)
    assert np.array_equal(predict_proba(a, X), predict_proba(b, X))


@pytest.mark.parametrize("kind", ["lr", "rf", "nn"])
def test_predict_matches_proba_threshold(kind):
    rng = np.random.default_rng(5)
    X = rng.standard_normal((150, 4))
    y = np.where(X[:, 0] > 0.2, 1, -1)
    model = train(kind, X, y, FAST[kind])
    assert np.array_equal(predict(model, X) == 1, predict_proba(model, X) >= 0.5)
    p = model.predict_proba(X)
    assert p.shape == (150, 2) and np.all((p >= 0) & (p <= 1))


@pytest.mark.parametrize("kind", ["lr", "rf", "nn"])
def test_dimension_mismatch_is_an_error(kind):
    model = train(kind, np.eye(4), [1, -1, 1, -1], FAST[kind])
    with pytest.raises(ValueError):
        model.predict(np.zeros((2, 5)))


def test_binary_train_rejects_other_labels():
    with pytest.raises(ValueError):
        train("lr", np.eye(3), [0, 1, 2])


@pytest.mark.parametrize("kind", ["lr", "nn", "rf"])
def test_multiclass_separable_clusters(kind):
    rng = np.random.default_rng(0)
    centers = np.eye(3) * 6
    y = np.repeat(np.arange(3), 40)
    X = centers[y] + rng.standard_normal((120, 3))
    model = train_multiclass(X, y, kind, FAST[kind] if kind != "nn" else {"max_epochs": 200})
    nearest = np.argmin(((X[:, None, :] - centers[None]) ** 2).sum(axis=-1), axis=1)
    assert np.mean(model.predict(X) == y) == 1.0
    assert np.array_equal(model.predict(X), nearest)
    assert model.predict_proba(X).shape == (120, 3)


def test_multiclass_with_two_classes_matches_binary():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((100, 3))
    yi = (X[:, 0] > 0).astype(int)
    multi = train_multiclass(X, yi, "lr")
    binary = train("lr", X, 2 * yi - 1)
    assert np.array_equal(2 * multi.predict(X) - 1, binary.predict(X))


def test_multiclass_random_labels_at_chance():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((4000, 10))
    y = rng.integers(0, 8, 4000)
    model = train_multiclass(X[:2000], y[:2000], "lr")
    assert abs(np.mean(model.predict(X[2000:]) == y[2000:]) - 1 / 8) <= 0.05


def test_multiclass_needs_two_classes():
    with pytest.raises(ValueError):
        train_multiclass(np.eye(3), [2, 2, 2], "lr")


def test_estimator_protocol():
    model = make_learner("nn", {"hidden": 4}, seed=9)
    assert model.get_params()["random_state"] == 9
    assert sk_clone(model).get_params() == model.get_params()
    assert LearnerKind.parse("RF") is LearnerKind.RF
    with pytest.raises(ValueError):
        LearnerKind.parse("svm")
    with pytest.raises(ValueError):
        NeuralNetwork(optimizer="lbfgs").fit(np.eye(2), [1, -1])


@settings(max_examples=25, deadline=None)
@given(w=st.lists(st.floats(-5, 5), min_size=3, max_size=3), b=st.floats(-5, 5))
def test_lr_probability_is_sigmoid_of_margin(w, b):
    X = np.random.default_rng(0).standard_normal((10, 3))
    model = LogisticRegression.from_params(np.array(w), b)
    assert np.allclose(predict_proba(model, X), 1 / (1 + np.exp(-(X @ np.array(w) + b))))

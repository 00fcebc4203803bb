import numpy as np
import pytest

from flightsynth.learners import (
    CLASSIFIERS, REGRESSORS, Dataset, FoldError, LearnerError, LearnerSpec, MetricError,
    SingularError, classification_metrics, kfold, mae, regression_metrics, rmse, stratified_kfold,
    train_classifier, train_regressor,
)
from flightsynth.learners.ensemble import BoostingRegressor, DecisionTree, RandomForest
from flightsynth.learners.tree import build_tree, fit_binning


def blobs(n=400, seed=0):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal(-3, 1, (n // 2, 2)), rng.normal(3, 1, (n // 2, 2))])
    y = np.array(["neg"] * (n // 2) + ["pos"] * (n // 2), dtype=object)
    return Dataset(x, y)


# -- folds -------------------------------------------------------------------------
def test_folds_even_split():
    labels = np.array(["a"] * 50 + ["b"] * 50, dtype=object)
    plan = stratified_kfold(labels, 5, seed=1)
    for fold in plan.folds:
        assert (labels[fold] == "a").sum() == 10 and (labels[fold] == "b").sum() == 10


def test_folds_proportional_counts():
    labels = np.array(["a"] * 60 + ["b"] * 43, dtype=object)
    plan = stratified_kfold(labels, 5, seed=2)
    every = np.concatenate(plan.folds)
    assert sorted(every.tolist()) == list(range(103))
    for fold in plan.folds:
        for cls, total in (("a", 60), ("b", 43)):
            got = (labels[fold] == cls).sum()
            assert abs(got - total * len(fold) / 103) <= 1
            assert got in (total // 5, total // 5 + 1)


def test_folds_deterministic_and_seeded():
    labels = np.array(list("ab") * 30, dtype=object)
    a = stratified_kfold(labels, 3, seed=4)
    b = stratified_kfold(labels, 3, seed=4)
    c = stratified_kfold(labels, 3, seed=5)
    assert all(np.array_equal(x, y) for x, y in zip(a.folds, b.folds))
    assert not all(np.array_equal(x, y) for x, y in zip(a.folds, c.folds))


def test_folds_errors():
    with pytest.raises(FoldError):
        stratified_kfold(np.array(["a"] * 10 + ["b"] * 2, dtype=object), 5)
    with pytest.raises(FoldError):
        stratified_kfold(np.array(["a"] * 10, dtype=object), 1)


def test_plain_kfold_partition():
    plan = kfold(23, 5, seed=0)
    assert sorted(np.concatenate(plan.folds).tolist()) == list(range(23))
    for train, test in plan.splits():
        assert len(np.intersect1d(train, test)) == 0 and len(train) + len(test) == 23


# -- classifiers ----------------------------------------------------------------------
@pytest.mark.parametrize("name", CLASSIFIERS)
def test_separable_blobs(name):
    data = blobs()
    model = train_classifier(LearnerSpec(name, seed=3), data)
    assert np.mean(model.predict(data.x) == data.y) >= 0.95


@pytest.mark.parametrize("name", CLASSIFIERS)
def test_noise_labels_cv_near_chance(name):
    rng = np.random.default_rng(7)
    x = rng.normal(size=(1000, 4))
    y = rng.permutation(np.array(["a", "b"] * 500, dtype=object))
    data = Dataset(x, y)
    plan = stratified_kfold(y, 5, seed=0)
    accs = []
    for train, test in plan.splits():
        model = train_classifier(LearnerSpec(name, seed=1), data.take(train))
        accs.append(np.mean(model.predict(x[test]) == y[test]))
    assert abs(np.mean(accs) - 0.5) <= 0.1


def test_tree_xor():
    x = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
    y = np.array(["0", "0", "1", "1"], dtype=object)
    model = train_classifier(LearnerSpec("decision_tree"), Dataset(x, y))
    assert np.all(model.predict(x) == y)
    assert model.tree_.depth >= 2


@pytest.mark.parametrize("name", CLASSIFIERS)
def test_classifiers_deterministic(name):
    rng = np.random.default_rng(1)
    x = rng.normal(size=(300, 3))
    y = np.where(x[:, 0] + rng.normal(size=300) > 0, "p", "q").astype(object)
    a = train_classifier(LearnerSpec(name, seed=9), Dataset(x, y)).predict_proba(x)
    b = train_classifier(LearnerSpec(name, seed=9), Dataset(x, y)).predict_proba(x)
    np.testing.assert_array_equal(a, b)


def test_single_class_rejected():
    x = np.zeros((5, 2))
    with pytest.raises(LearnerError):
        train_classifier(LearnerSpec("knn"), Dataset(x, np.array(["a"] * 5, dtype=object)))


def test_multiclass_support():
    rng = np.random.default_rng(2)
    centers = np.array([[0, 0], [6, 0], [0, 6]])
    x = np.vstack([rng.normal(c, 1, (100, 2)) for c in centers])
    y = np.repeat(np.array(["r", "s", "t"], dtype=object), 100)
    for name in CLASSIFIERS:
        model = train_classifier(LearnerSpec(name), Dataset(x, y))
        assert np.mean(model.predict(x) == y) >= 0.9, name


def test_forest_of_one_is_the_tree():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(500, 4))
    y = np.where(x[:, 0] * x[:, 1] + 0.3 * rng.normal(size=500) > 0, "a", "b").astype(object)
    tree = DecisionTree(max_depth=12, seed=5).fit(x, y)
    forest = RandomForest(n_trees=1, max_depth=12, max_features=None, bootstrap=False, seed=5).fit(x, y)
    t, f = tree.tree_, forest.trees_[0]
    for attr in ("feature", "threshold", "left", "right", "value"):
        np.testing.assert_array_equal(getattr(t, attr), getattr(f, attr))
    np.testing.assert_array_equal(tree.predict(x), forest.predict(x))


def _gini_oracle(x, y):
    """Best (feature, threshold) of a Gini split by enumerating every cut
    between sorted distinct values; first best in (feature, threshold) order."""
    best = None
    classes = sorted(set(y))
    for j in range(x.shape[1]):
        u = np.unique(x[:, j])
        for a, b in zip(u[:-1], u[1:]):
            thr = 0.5 * (a + b)
            score = 0.0
            for side in (x[:, j] < thr, x[:, j] >= thr):
                m = side.sum()
                score += m - sum(((y[side] == c).sum()) ** 2 for c in classes) / m
            if best is None or score < best[0] - 1e-12:
                best = (score, j, thr)
    return best


def test_root_split_matches_brute_force():
    rng = np.random.default_rng(11)
    for trial in range(20):
        x = rng.integers(0, 12, size=(60, 3)).astype(float)
        y = np.where(x[:, trial % 3] + rng.normal(0, 3, 60) > 6, 1, 0)
        if len(set(y.tolist())) < 2:
            continue
        binning = fit_binning(x)
        tree = build_tree(binning.transform(x), binning, y, "classification", 2, max_depth=1)
        score, j, thr = _gini_oracle(x, y)
        assert tree.feature[0] == j
        assert tree.threshold[0] == thr


# -- regressors -------------------------------------------------------------------------
def test_ols_exact_line():
    x = np.arange(10.0)[:, None]
    model = train_regressor(LearnerSpec("ols"), Dataset(x, 2 * x[:, 0] + 1))
    assert abs(model.coef_[0] - 2) <= 1e-8 and abs(model.intercept_ - 1) <= 1e-8


def test_ridge_limit_matches_ols():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(200, 3))
    y = x @ [1.0, -2.0, 0.5] + rng.normal(size=200)
    ols = train_regressor(LearnerSpec("ols"), Dataset(x, y))
    ridge = train_regressor(LearnerSpec("ridge", {"lam": 1e-9}), Dataset(x, y))
    np.testing.assert_allclose(ridge.coef_, ols.coef_, atol=1e-6)
    assert abs(ridge.intercept_ - ols.intercept_) <= 1e-6


def test_lasso_large_penalty_zeroes():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(100, 4))
    y = x @ [1.0, 2.0, 0.0, -1.0]
    model = train_regressor(LearnerSpec("lasso", {"lam": 1e6}), Dataset(x, y))
    assert np.all(model.coef_ == 0)
    assert model.intercept_ == pytest.approx(y.mean())


def test_lasso_small_penalty_near_ols():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(300, 3))
    y = x @ [1.0, 2.0, -1.0] + 0.1 * rng.normal(size=300)
    lasso = train_regressor(LearnerSpec("lasso", {"lam": 1e-6}), Dataset(x, y))
    ols = train_regressor(LearnerSpec("ols"), Dataset(x, y))
    np.testing.assert_allclose(lasso.coef_, ols.coef_, atol=1e-4)


def test_ols_singular_points_to_ridge():
    rng = np.random.default_rng(0)
    a = rng.normal(size=50)
    x = np.column_stack([a, 2 * a + 1])
    with pytest.raises(SingularError, match="ridge"):
        train_regressor(LearnerSpec("ols"), Dataset(x, a))
    train_regressor(LearnerSpec("ridge"), Dataset(x, a))


def test_constant_feature_gets_zero_weight():
    rng = np.random.default_rng(0)
    x = np.column_stack([rng.normal(size=40), np.full(40, 7.0)])
    model = train_regressor(LearnerSpec("ols"), Dataset(x, 3 * x[:, 0]))
    assert model.coef_[1] == 0.0
    assert model.coef_[0] == pytest.approx(3.0)


def test_pca_ols_full_variance_equals_ols():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(200, 3))
    y = x @ [1.0, 2.0, 3.0] + rng.normal(size=200)
    full = train_regressor(LearnerSpec("pca_ols", {"variance": 1.0}), Dataset(x, y))
    ols = train_regressor(LearnerSpec("ols"), Dataset(x, y))
    np.testing.assert_allclose(full.predict(x), ols.predict(x), atol=1e-6)


def test_boosting_loss_non_increasing():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(300, 3))
    y = np.sin(x[:, 0]) * 3 + x[:, 1] ** 2 + rng.normal(size=300)
    model = BoostingRegressor(n_rounds=50).fit(x, y)
    assert np.all(np.diff(model.train_loss_) <= 1e-12)


@pytest.mark.parametrize("name", REGRESSORS)
def test_regressors_learn_and_repeat(name):
    rng = np.random.default_rng(5)
    x = rng.normal(size=(300, 3))
    y = x @ [2.0, -1.0, 0.5] + 0.2 * rng.normal(size=300)
    a = train_regressor(LearnerSpec(name, seed=2), Dataset(x, y))
    b = train_regressor(LearnerSpec(name, seed=2), Dataset(x, y))
    np.testing.assert_array_equal(a.predict(x), b.predict(x))
    assert regression_metrics(a.predict(x), y)["r2"] > 0.7


# -- specs / datasets -------------------------------------------------------------------
def test_spec_validation_and_json():
    with pytest.raises(LearnerError):
        LearnerSpec("svm")
    with pytest.raises(LearnerError):
        LearnerSpec("knn", {"k": 0})
    with pytest.raises(LearnerError):
        LearnerSpec("ridge", {"alpha": 1.0})
    with pytest.raises(LearnerError):
        LearnerSpec("random_forest", {"n_trees": 2.5})
    spec = LearnerSpec("random_forest", {"n_trees": 7}, seed=3)
    assert spec.params["max_depth"] == 12
    back = LearnerSpec.from_json(spec.to_json())
    assert back == spec


def test_dataset_validation():
    with pytest.raises(LearnerError):
        Dataset(np.array([[np.nan]]), np.array([1.0]))
    with pytest.raises(LearnerError):
        Dataset(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(LearnerError):
        train_regressor(LearnerSpec("knn"), Dataset(np.zeros((3, 1)), np.zeros(3)))


# -- metrics ------------------------------------------------------------------------------
def test_classification_metric_examples():
    t = np.array(["synthetic", "real", "synthetic"], dtype=object)
    m = classification_metrics(t, t)
    assert m["accuracy"] == 1 and m["f1"] == 1
    assert classification_metrics(np.array(["real"] * 3, dtype=object), t)["f1"] == 0
    truth = ["synthetic"] * 5 + ["real"] * 5
    pred = ["synthetic"] * 4 + ["real"] + ["synthetic"] + ["real"] * 4
    m = classification_metrics(pred, truth)
    assert m["precision"] == pytest.approx(0.8) and m["recall"] == pytest.approx(0.8)
    assert m["f1"] == pytest.approx(0.8)
    with pytest.raises(MetricError):
        classification_metrics([], [])


def test_regression_metric_examples():
    t = np.array([1.0, 2.0, 4.0])
    m = regression_metrics(t, t)
    assert m == {"mae": 0.0, "rmse": 0.0, "r2": 1.0}
    assert regression_metrics(np.full(3, t.mean()), t)["r2"] == pytest.approx(0.0, abs=1e-15)
    assert mae([3.0, -3.0], [0.0, 0.0]) == 3 and rmse([3.0, -3.0], [0.0, 0.0]) == 3
    with pytest.raises(MetricError, match="zero-variance"):
        regression_metrics([3.0, -3.0], [0.0, 0.0])
    with pytest.raises(MetricError):
        regression_metrics([], [])


def test_rmse_at_least_mae():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = rng.integers(1, 30)
        p, t = rng.normal(size=n), rng.normal(size=n)
        t[0] += 1.0
        if np.var(t) == 0:
            continue
        m = regression_metrics(p, t)
        assert m["rmse"] >= m["mae"]

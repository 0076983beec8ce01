import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from natid.classify import (
    ALL_KINDS,
    ClassifierError,
    CvReport,
    ModelKind,
    RESULTS_HEADER,
    cross_validate,
    decision_scores,
    hyperparams_for,
    load_model,
    micro_accuracy,
    predict,
    results_table,
    save_model,
    stratified_kfold,
    train,
)
from natid.features import Family, FeatureMatrix
from natid.model import StanceLabel

PI, AI = StanceLabel.PI, StanceLabel.AI


def matrix(X, y, family=Family.BEHAVIORAL):
    X = np.asarray(X, dtype=float)
    return FeatureMatrix(family, tuple(f"r{i:04d}" for i in range(len(X))),
                         tuple(f"c{j}" for j in range(X.shape[1])), X, tuple(y))


def clouds(seed, n=100, gap=6.0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0, 1, (n // 2, 2)) + gap / 2, rng.normal(0, 1, (n // 2, 2)) - gap / 2])
    return matrix(X, [PI] * (n // 2) + [AI] * (n // 2))


def accuracy(model, m):
    return np.mean([p is t for p, t in zip(predict(model, m), m.labels)])


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_separable_clouds(kind):
    for seed in range(5):
        m = clouds(seed)
        assert accuracy(train(kind, m, seed=seed), m) >= 0.99


def test_maxent_cannot_fit_xor():
    m = matrix([[0, 0], [1, 1], [0, 1], [1, 0]], [PI, PI, AI, AI])
    assert accuracy(train(ModelKind.MAX_ENT, m), m) <= 0.75


def test_bernoulli_nb_hand_posterior():
    m = matrix([[1, 0], [1, 1], [0, 0], [0, 1]], [PI, PI, AI, AI], Family.NETWORK)
    model = train("NB", m)
    assert model.parameters["variant"] == "bernoulli"
    q = matrix([[1, 0]], [None], Family.NETWORK)
    assert predict(model, q) == [PI]
    # Laplace alpha=1: P(x1|PI)=3/4, P(x1|AI)=1/4, x2 terms equal and priors equal
    assert decision_scores(model, q)[0] == pytest.approx(np.log(3))
    assert predict(model, m) == list(m.labels)


def test_predict_edge_cases():
    m = clouds(0)
    model = train("ME", m)
    assert predict(model, m.values[:0]) == []
    assert predict(model, m) == predict(model, m)
    with pytest.raises(ClassifierError):
        predict(model, np.zeros((2, 3)))


def test_train_errors():
    with pytest.raises(ClassifierError):
        train("ME", matrix([[0], [1]], [PI, PI]))
    with pytest.raises(ClassifierError):
        train("ME", matrix([[0]], [PI]))
    with pytest.raises(ValueError):
        hyperparams_for("SV", {"gamma": 1})
    with pytest.raises(ValueError):
        ModelKind.parse("kNN")


def test_kind_short_names():
    assert [k.short for k in ALL_KINDS] == list(RESULTS_HEADER[2:])
    assert ModelKind.parse("rf") is ModelKind.RANDOM_FOREST


def test_maxent_matches_sklearn():
    sk = pytest.importorskip("sklearn.linear_model")
    rng = np.random.default_rng(3)
    X = rng.normal(size=(80, 4))
    y = (X @ [1.0, -2.0, 0.5, 0.0] + rng.normal(size=80) > 0)
    m = matrix(X, [PI if v else AI for v in y])
    ours = train("ME", m, hyperparams={"tol": 1e-9, "max_epochs": 5000})
    ref = sk.LogisticRegression(C=1.0, tol=1e-10, max_iter=10000).fit(X, y.astype(int))
    np.testing.assert_allclose(ours.parameters["w"], ref.coef_[0], atol=1e-5)
    assert ours.parameters["b"] == pytest.approx(ref.intercept_[0], abs=1e-5)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_row_permutation_invariance(kind):
    m = clouds(1, gap=2.0)
    model = train(kind, m, seed=4)
    perm = np.random.default_rng(0).permutation(len(m.row_ids))
    base = predict(model, m.values)
    assert predict(model, m.values[perm]) == [base[i] for i in perm]


def test_nb_duplication_invariance():
    m = clouds(2, gap=1.5)
    doubled = matrix(np.vstack([m.values, m.values]), m.labels + m.labels)
    probe = np.random.default_rng(9).normal(size=(200, 2)) * 2
    assert predict(train("NB", m), probe) == predict(train("NB", doubled), probe)


def test_single_tree_memorizes():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(60, 3))
    m = matrix(X, [PI if v else AI for v in rng.random(60) < 0.5])
    hp = {"n_trees": 1, "max_depth": None, "bootstrap": False, "max_features": 3}
    assert predict(train("RF", m, hyperparams=hp), m) == list(m.labels)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_model_round_trip(tmp_path, kind):
    m = clouds(3, gap=2.0)
    model = train(kind, m, seed=1)
    save_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert back.kind is kind and back.column_count == 2 and back.training_seed == 1
    np.testing.assert_array_equal(decision_scores(back, m), decision_scores(model, m))


def _per_fold(labels, folds):
    return [(sum(labels[i] is PI for i in f), sum(labels[i] is AI for i in f)) for f in folds]


def test_kfold_divisible():
    labels = [PI] * 60 + [AI] * 40
    folds = stratified_kfold(labels, 10, seed=0)
    assert _per_fold(labels, folds) == [(6, 4)] * 10
    assert sorted(np.concatenate(folds).tolist()) == list(range(100))


def test_kfold_remainders():
    labels = [PI] * 13 + [AI] * 7
    counts = _per_fold(labels, stratified_kfold(labels, 5, seed=1))
    assert all(p in (2, 3) and a in (1, 2) for p, a in counts)
    assert sorted(p + a for p, a in counts) == [4] * 5


def test_kfold_errors():
    with pytest.raises(ClassifierError):
        stratified_kfold([PI] * 10 + [AI] * 3, 5)
    with pytest.raises(ClassifierError):
        stratified_kfold([PI, AI] * 5, 1)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 10), st.integers(0, 60), st.integers(0, 60), st.integers(0, 2**31))
def test_kfold_proportionality(k, extra_pi, extra_ai, seed):
    n_pi, n_ai = k + extra_pi, k + extra_ai
    labels = [PI] * n_pi + [AI] * n_ai
    folds = stratified_kfold(labels, k, seed)
    assert sorted(np.concatenate(folds).tolist()) == list(range(n_pi + n_ai))
    for p, a in _per_fold(labels, folds):
        assert abs(p - n_pi / k) < 1 and abs(a - n_ai / k) < 1


def test_micro_accuracy_pooled():
    assert micro_accuracy([(9, 10)] * 10) == 0.9
    assert micro_accuracy([(1, 1), (0, 3)]) == 0.25


def test_cv_separable_and_recomputable():
    for seed in range(5):
        r = cross_validate(clouds(seed), "ME", k=10, seed=seed)
        assert r.micro_accuracy >= 0.99
        assert r.micro_accuracy == r.correct / r.total and r.total == 100


def test_cv_constant_features_near_majority():
    labels = [PI] * 70 + [AI] * 30
    m = matrix(np.ones((100, 3)), labels)
    for kind in ALL_KINDS:
        assert abs(cross_validate(m, kind, k=10).micro_accuracy - 0.7) <= 0.05


def test_results_table_layout():
    r = CvReport("Catalonia", "Network", ModelKind.MAX_ENT, ((9, 10),), 0.9, 10, 0)
    lines = results_table([r]).splitlines()
    assert lines[0] == ",".join(RESULTS_HEADER)
    assert lines[1] == "Catalonia,Network,,,,0.9000"


def naive_averaged_pegasos(X, y, lam, epochs, seed):
    """Dense Pegasos storing every iterate explicitly."""
    rng = np.random.default_rng(seed)
    Z = np.hstack([X, np.ones((len(X), 1))])
    sign = np.where(y == 1, 1.0, -1.0)
    w = np.zeros(Z.shape[1])
    kept = []
    t = 0
    for epoch in range(epochs):
        for i in rng.permutation(len(X)):
            t += 1
            eta = 1.0 / (lam * t)
            hit = sign[i] * (w @ Z[i]) < 1.0
            w = (1 - eta * lam) * w + (eta * sign[i] * Z[i] if hit else 0.0)
            if epoch >= 1 or epochs == 1:
                kept.append(w)
    return np.mean(kept, axis=0)


@pytest.mark.parametrize("epochs", [1, 3])
def test_svm_lazy_average_matches_naive(epochs):
    m = clouds(4, n=40, gap=1.0)
    y = np.array([l is PI for l in m.labels], dtype=int)
    model = train("SV", m, hyperparams={"lambda": 0.01, "epochs": epochs}, seed=7)
    ref = naive_averaged_pegasos(m.values, y, 0.01, epochs, 7)
    np.testing.assert_allclose(model.parameters["w"], ref[:-1], rtol=1e-9, atol=1e-12)
    assert model.parameters["b"] == pytest.approx(ref[-1], rel=1e-9, abs=1e-12)

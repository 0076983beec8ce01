"""Stance classifiers and the stratified cross-validation harness.

Four model kinds:

* ``NaiveBayes``: Gaussian likelihoods, or Bernoulli with Laplace
  smoothing for the binary network family; computed in log space.
* ``LinearSVM``: hinge loss trained with Pegasos SGD.
* ``RandomForest``: Gini-impurity trees on bootstrap samples, sqrt(d)
  candidate features per split, hard majority vote.
* ``MaxEnt``: L2-regularised binary logistic regression fitted by
  accelerated gradient descent.

Sparse matrices are used as-is wherever the algorithm allows. Labels are
encoded PI = 1, AI = 0; every tie (equal posteriors, zero margin, split
votes) resolves to PI.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .features import FeatureMatrix, Family
from .model import StanceLabel

MODEL_FORMAT_VERSION = 1


class ClassifierError(ValueError):
    pass


class ModelKind(str, enum.Enum):
    NAIVE_BAYES = "NaiveBayes"
    LINEAR_SVM = "LinearSVM"
    RANDOM_FOREST = "RandomForest"
    MAX_ENT = "MaxEnt"

    @property
    def short(self) -> str:
        return _SHORT[self]

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, ModelKind):
            return value
        text = str(value).lower()
        for k in cls:
            if text in (k.value.lower(), _SHORT[k].lower()):
                return k
        raise ValueError(f"unknown classifier {value!r}")


_SHORT = {
    ModelKind.NAIVE_BAYES: "NB",
    ModelKind.LINEAR_SVM: "SV",
    ModelKind.RANDOM_FOREST: "RF",
    ModelKind.MAX_ENT: "ME",
}
ALL_KINDS = tuple(ModelKind)

DEFAULT_HYPERPARAMS = {
    ModelKind.NAIVE_BAYES: {"variant": "auto", "alpha": 1.0, "var_smoothing": 1e-9},
    ModelKind.LINEAR_SVM: {"lambda": 1e-4, "epochs": 20},
    ModelKind.RANDOM_FOREST: {"n_trees": 100, "max_depth": 16, "max_features": "sqrt",
                              "bootstrap": True, "min_samples_split": 2},
    ModelKind.MAX_ENT: {"l2": 1.0, "tol": 1e-6, "max_epochs": 500},
}


def hyperparams_for(kind, overrides: Optional[Mapping] = None) -> dict:
    kind = ModelKind.parse(kind)
    params = dict(DEFAULT_HYPERPARAMS[kind])
    for key, value in (overrides or {}).items():
        if key not in params:
            raise ClassifierError(f"unknown hyperparameter {key!r} for {kind.value}")
        params[key] = value
    return params


@dataclass
class TrainedModel:
    kind: ModelKind
    parameters: dict
    column_count: int
    training_seed: int
    hyperparams: dict = field(default_factory=dict)


def encode_labels(labels: Sequence) -> np.ndarray:
    y = np.array([StanceLabel.parse(l) is StanceLabel.PI for l in labels], dtype=np.int64)
    if any(StanceLabel.parse(l) is None for l in labels):
        raise ClassifierError("unlabeled rows cannot be used for training")
    return y


def decode_labels(y: np.ndarray) -> list[StanceLabel]:
    return [StanceLabel.PI if v else StanceLabel.AI for v in y]


def _as_matrix(X):
    if isinstance(X, FeatureMatrix):
        X = X.values
    if sp.issparse(X):
        return sp.csr_matrix(X, dtype=float)
    return np.asarray(X, dtype=float)


# -- naive Bayes -------------------------------------------------------------------

def _train_nb(X, y, hp, family):
    variant = hp["variant"]
    if variant == "auto":
        variant = "bernoulli" if family is Family.NETWORK else "gaussian"
    n_c = np.array([(y == 0).sum(), (y == 1).sum()], dtype=float)
    log_prior = np.log(n_c / n_c.sum())
    if variant == "bernoulli":
        a = float(hp["alpha"])
        Xb = (X > 0).astype(float) if sp.issparse(X) else (X > 0).astype(float)
        counts = np.vstack([np.asarray(Xb[y == c].sum(axis=0)).ravel() for c in (0, 1)])
        p = (counts + a) / (n_c[:, None] + 2 * a)
        return {"variant": "bernoulli", "log_prior": log_prior,
                "w": np.log(p) - np.log1p(-p), "b": np.log1p(-p).sum(axis=1)}
    if variant != "gaussian":
        raise ClassifierError(f"unknown naive Bayes variant {variant!r}")
    means, variances = [], []
    for c in (0, 1):
        Xc = X[y == c]
        mu = np.asarray(Xc.mean(axis=0)).ravel()
        sq = Xc.multiply(Xc).mean(axis=0) if sp.issparse(Xc) else (Xc * Xc).mean(axis=0)
        means.append(mu)
        variances.append(np.maximum(np.asarray(sq).ravel() - mu * mu, 0.0))
    means, variances = np.vstack(means), np.vstack(variances)
    if sp.issparse(X):
        all_var = np.asarray(X.multiply(X).mean(axis=0)).ravel() - np.asarray(X.mean(axis=0)).ravel() ** 2
    else:
        all_var = X.var(axis=0)
    vmax = float(all_var.max()) if all_var.size else 0.0
    eps = float(hp["var_smoothing"]) * (vmax if vmax > 0 else 1.0)
    variances = variances + eps
    return {"variant": "gaussian", "log_prior": log_prior, "mean": means, "var": variances}


def _nb_log_posterior(params, X) -> np.ndarray:
    if params["variant"] == "bernoulli":
        Xb = (X > 0).astype(float)
        ll = np.column_stack([Xb @ params["w"][c] for c in (0, 1)]) + params["b"]
        return ll + params["log_prior"]
    mean, var = params["mean"], params["var"]
    X2 = X.multiply(X) if sp.issparse(X) else X * X
    cols = []
    for c in (0, 1):
        const = -0.5 * np.log(2 * np.pi * var[c]).sum() - (mean[c] ** 2 / (2 * var[c])).sum()
        cols.append(X2 @ (-0.5 / var[c]) + X @ (mean[c] / var[c]) + const)
    return np.column_stack([np.asarray(c).ravel() for c in cols]) + params["log_prior"]


# -- linear SVM (Pegasos) ---------------------------------------------------------------

def _train_svm(X, y, hp, rng):
    """Pegasos with an averaged iterate.

    The last iterate of Pegasos swings by ``1/(lambda*t)`` per step, which is
    large for small lambda, so the returned weights are the mean of the
    iterates after the first epoch. ``w = s * v`` keeps the shrink step O(1);
    the running sum is kept lazily per coordinate through the cumulative sum
    of ``s``, so a step costs O(nnz of the row).
    """
    lam = float(hp["lambda"])
    epochs = int(hp["epochs"])
    Xs = sp.csr_matrix(X)
    indptr, indices, data = Xs.indptr, Xs.indices, Xs.data
    n, d = Xs.shape
    sign = np.where(y == 1, 1.0, -1.0)
    v = np.zeros(d + 1)  # last slot is the constant feature, regularised with the rest
    s = 1.0
    total = np.zeros(d + 1)  # sum of iterates, valid up to each coordinate's mark
    mark = np.zeros(d + 1)
    csum = 0.0
    steps = 0
    averaging = epochs == 1
    t = 0
    for epoch in range(epochs):
        if epoch == 1:
            averaging = True
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            lo, hi = indptr[i], indptr[i + 1]
            idx = np.append(indices[lo:hi], d)
            val = np.append(data[lo:hi], 1.0)
            margin = sign[i] * s * (v[idx] @ val)
            s *= 1.0 - eta * lam
            if s <= 0.0 or s < 1e-9:
                total += v * (csum - mark)
                mark[:] = csum
                v *= max(s, 0.0)
                s = 1.0
            if margin < 1.0:
                total[idx] += v[idx] * (csum - mark[idx])
                mark[idx] = csum
                v[idx] += (eta * sign[i] / s) * val
            if averaging:
                csum += s
                steps += 1
    total += v * (csum - mark)
    w = total / steps
    return {"w": w[:d], "b": float(w[d])}


# -- logistic regression ------------------------------------------------------------------

def _logistic_objective(w, b, X, ysign, l2):
    z = ysign * (X @ w + b)
    loss = np.logaddexp(0.0, -z).sum() + 0.5 * l2 * (w @ w)
    coef = -ysign * 0.5 * (1.0 - np.tanh(0.5 * z))  # d loss / d margin-score
    gw = X.T @ coef + l2 * w
    gb = coef.sum()
    return loss, np.asarray(gw).ravel(), float(gb)


def _train_maxent(X, y, hp):
    """Minimise sum(log-loss) + l2/2 * ||w||^2 (intercept unpenalised)."""
    l2 = float(hp["l2"])
    tol = float(hp["tol"])
    max_epochs = int(hp["max_epochs"])
    ysign = np.where(y == 1, 1.0, -1.0)
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    yw, yb = w.copy(), b
    step_t = 1.0
    # crude Lipschitz start; backtracking fixes it up
    sq = X.multiply(X).sum() if sp.issparse(X) else float((X * X).sum())
    L = max(1e-8, 0.25 * (float(sq) / max(d, 1) + n) + l2)
    for _ in range(max_epochs):
        f_y, gw, gb = _logistic_objective(yw, yb, X, ysign, l2)
        gnorm2 = gw @ gw + gb * gb
        if math.sqrt(gnorm2) <= tol:
            w, b = yw, yb
            break
        while True:
            nw, nb = yw - gw / L, yb - gb / L
            f_new = _logistic_objective(nw, nb, X, ysign, l2)[0]
            if f_new <= f_y - 0.5 * gnorm2 / L + 1e-12 * abs(f_y):
                break
            L *= 2.0
        next_t = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * step_t * step_t))
        mom = (step_t - 1.0) / next_t
        # restart momentum when the objective goes up
        f_prev = _logistic_objective(w, b, X, ysign, l2)[0]
        if f_new > f_prev:
            next_t, mom = 1.0, 0.0
        yw, yb = nw + mom * (nw - w), nb + mom * (nb - b)
        w, b = nw, nb
        step_t = next_t
    return {"w": w, "b": b}


# -- random forest ------------------------------------------------------------------------

class _ColumnSource:
    """Row/column block access for dense or sparse training data."""

    def __init__(self, X):
        if sp.issparse(X):
            n, d = X.shape
            if n * d <= 20_000_000:
                self.dense, self.csc = X.toarray(), None
            else:
                self.dense, self.csc = None, sp.csc_matrix(X)
        else:
            self.dense, self.csc = X, None

    def block(self, rows, cols) -> np.ndarray:
        if self.dense is not None:
            return self.dense[np.ix_(rows, cols)]
        return self.csc[:, cols][rows].toarray()


def _best_split(block, yn):
    """Best Gini split over the columns of ``block``; None if no column varies."""
    m = yn.size
    order = np.argsort(block, axis=0, kind="stable")
    xs = np.take_along_axis(block, order, axis=0)
    ys = yn[order]
    left_n = np.arange(1, m, dtype=float)[:, None]
    right_n = m - left_n
    left_pos = np.cumsum(ys, axis=0)[:-1]
    right_pos = ys.sum(axis=0)[None, :] - left_pos
    pl, pr = left_pos / left_n, right_pos / right_n
    gini = left_n * 2 * pl * (1 - pl) + right_n * 2 * pr * (1 - pr)
    valid = xs[1:] != xs[:-1]
    if not valid.any():
        return None
    gini = np.where(valid, gini, np.inf)
    flat = int(np.argmin(gini))
    i, j = divmod(flat, gini.shape[1])
    return j, 0.5 * (xs[i, j] + xs[i + 1, j]), gini[i, j]


def _grow_tree(source, y, rows, hp, rng, d):
    max_depth = hp["max_depth"]
    max_depth = math.inf if max_depth is None else int(max_depth)
    k = _max_features(hp["max_features"], d)
    min_split = int(hp["min_samples_split"])
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(rows_):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[rows_].mean()))
        return len(feature) - 1

    root = new_node(rows)
    stack = [(root, rows, 0)]
    while stack:
        node, idx, depth = stack.pop()
        yn = y[idx]
        pos = yn.sum()
        if depth >= max_depth or idx.size < min_split or pos == 0 or pos == idx.size:
            continue
        perm = rng.permutation(d)
        split = None
        # draw further candidates only when none of the first k can split
        for start in range(0, d, k):
            cols = perm[start:start + k]
            found = _best_split(source.block(idx, cols), yn)
            if found is not None:
                j, thr, _ = found
                split = (int(cols[j]), thr)
                break
        if split is None:
            continue
        f, thr = split
        xcol = source.block(idx, [f])[:, 0]
        li, ri = idx[xcol <= thr], idx[xcol > thr]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return {
        "feature": np.array(feature, dtype=np.int64),
        "threshold": np.array(threshold),
        "left": np.array(left, dtype=np.int64),
        "right": np.array(right, dtype=np.int64),
        "value": np.array(value),
    }


def _max_features(setting, d) -> int:
    if setting in (None, "all"):
        return d
    if setting == "sqrt":
        return max(1, math.isqrt(d))
    k = int(setting)
    if not 1 <= k <= d:
        raise ClassifierError(f"max_features={k} outside [1, {d}]")
    return k


def _train_forest(X, y, hp, rng):
    n, d = X.shape
    source = _ColumnSource(X)
    trees = []
    for _ in range(int(hp["n_trees"])):
        rows = rng.integers(0, n, n) if hp["bootstrap"] else np.arange(n)
        trees.append(_grow_tree(source, y, rows, hp, rng, d))
    return {"trees": trees}


def _tree_predict(tree, X) -> np.ndarray:
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    feat, thr, left, right = tree["feature"], tree["threshold"], tree["left"], tree["right"]
    active = feat[node] >= 0
    while active.any():
        rows = np.nonzero(active)[0]
        f = feat[node[rows]]
        if sp.issparse(X):
            x = np.asarray(X[rows, f]).ravel()
        else:
            x = X[rows, f]
        node[rows] = np.where(x <= thr[node[rows]], left[node[rows]], right[node[rows]])
        active = feat[node] >= 0
    return (tree["value"][node] >= 0.5).astype(np.int64)


# -- public API ------------------------------------------------------------------------------

def train(kind, matrix, labels=None, hyperparams: Optional[Mapping] = None, seed: int = 0) -> TrainedModel:
    """Fit a classifier on a labeled FeatureMatrix (or an array plus ``labels``)."""
    kind = ModelKind.parse(kind)
    family = matrix.family if isinstance(matrix, FeatureMatrix) else None
    if labels is None:
        if not isinstance(matrix, FeatureMatrix) or matrix.labels is None:
            raise ClassifierError("training needs labels")
        labels = matrix.labels
    X = _as_matrix(matrix)
    y = encode_labels(labels)
    if X.shape[0] < 2 or X.shape[0] != y.size:
        raise ClassifierError("training needs at least two labeled rows")
    if y.min() == y.max():
        raise ClassifierError("training needs both PI and AI rows")
    hp = hyperparams_for(kind, hyperparams)
    rng = np.random.default_rng(seed)
    d = X.shape[1]
    if kind is ModelKind.NAIVE_BAYES:
        params = _train_nb(X, y, hp, family)
    elif kind is ModelKind.LINEAR_SVM:
        params = _train_svm(X, y, hp, rng)
    elif kind is ModelKind.RANDOM_FOREST:
        _max_features(hp["max_features"], d)
        params = _train_forest(X, y, hp, rng)
    else:
        params = _train_maxent(X, y, hp)
    return TrainedModel(kind, params, d, seed, hp)


def decision_scores(model: TrainedModel, matrix) -> np.ndarray:
    """Score per row; ``>= 0`` means PI."""
    X = _as_matrix(matrix)
    if X.shape[1] != model.column_count:
        raise ClassifierError(f"matrix has {X.shape[1]} columns, model expects {model.column_count}")
    if X.shape[0] == 0:
        return np.zeros(0)
    p = model.parameters
    if model.kind is ModelKind.NAIVE_BAYES:
        lp = _nb_log_posterior(p, X)
        return lp[:, 1] - lp[:, 0]
    if model.kind in (ModelKind.LINEAR_SVM, ModelKind.MAX_ENT):
        return np.asarray(X @ p["w"]).ravel() + p["b"]
    votes = np.sum([_tree_predict(t, X) for t in p["trees"]], axis=0)
    return votes - len(p["trees"]) / 2.0


def predict(model: TrainedModel, matrix) -> list[StanceLabel]:
    return decode_labels(decision_scores(model, matrix) >= 0)


# -- persistence ------------------------------------------------------------------------------

def _to_json(obj):
    if isinstance(obj, np.ndarray):
        return {"__array__": obj.tolist(), "dtype": str(obj.dtype)}
    if isinstance(obj, dict):
        return {k: _to_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_json(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _from_json(obj):
    if isinstance(obj, dict):
        if "__array__" in obj:
            return np.array(obj["__array__"], dtype=obj["dtype"])
        return {k: _from_json(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_from_json(v) for v in obj]
    return obj


def save_model(model: TrainedModel, path) -> None:
    payload = {
        "format": "natid-model",
        "version": MODEL_FORMAT_VERSION,
        "kind": model.kind.value,
        "column_count": model.column_count,
        "training_seed": model.training_seed,
        "hyperparams": model.hyperparams,
        "parameters": _to_json(model.parameters),
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_model(path) -> TrainedModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != "natid-model":
        raise ClassifierError(f"{path}: not a saved model")
    if payload.get("version") != MODEL_FORMAT_VERSION:
        raise ClassifierError(f"{path}: unsupported model version {payload.get('version')}")
    return TrainedModel(ModelKind.parse(payload["kind"]), _from_json(payload["parameters"]),
                        int(payload["column_count"]), int(payload["training_seed"]),
                        payload.get("hyperparams") or {})


# -- cross-validation ------------------------------------------------------------------------

def stratified_kfold(labels: Sequence, k: int, seed: int = 0) -> list[np.ndarray]:
    """Split indices into ``k`` folds preserving class proportions.

    Each class is shuffled and dealt round-robin, the deal continuing where
    the previous class stopped, so per-fold class counts are within one of
    proportional and fold sizes within one of each other.
    """
    if k < 2:
        raise ClassifierError("k must be at least 2")
    labels = [StanceLabel.parse(l) for l in labels]
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for cls in (StanceLabel.PI, StanceLabel.AI):
        members = np.array([i for i, l in enumerate(labels) if l is cls], dtype=np.int64)
        if members.size == 0:
            continue
        if members.size < k:
            raise ClassifierError(f"class {cls.value} has {members.size} members, fewer than k={k}")
        for pos, i in enumerate(rng.permutation(members)):
            folds[(offset + pos) % k].append(int(i))
        offset = (offset + members.size) % k
    if any(l is None for l in labels):
        raise ClassifierError("stratified_kfold needs every row labeled")
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


@dataclass(frozen=True)
class CvReport:
    territory: str
    family: str
    kind: ModelKind
    folds: tuple[tuple[int, int], ...]  # (correct, total) per fold
    micro_accuracy: float
    k: int
    seed: int
    hyperparams: Mapping = field(default_factory=dict)

    @property
    def correct(self) -> int:
        return sum(c for c, _ in self.folds)

    @property
    def total(self) -> int:
        return sum(t for _, t in self.folds)


def micro_accuracy(folds: Sequence[tuple[int, int]]) -> float:
    total = sum(t for _, t in folds)
    if total == 0:
        raise ClassifierError("no test rows")
    return sum(c for c, _ in folds) / total


def cross_validate(
    matrix: FeatureMatrix,
    kind,
    k: int = 10,
    seed: int = 0,
    hyperparams: Optional[Mapping] = None,
    territory: str = "",
    refit: Optional[Callable[[Sequence[str]], FeatureMatrix]] = None,
) -> CvReport:
    """Stratified k-fold CV with micro-averaged (pooled) accuracy.

    Unlabeled rows are skipped. ``refit``, if given, is called with each
    fold's training user ids and must return a matrix over the same rows;
    this rebuilds vocabulary-based families strictly per fold.
    """
    kind = ModelKind.parse(kind)
    if matrix.labels is None:
        raise ClassifierError("cross-validation needs a labeled matrix")
    keep = [i for i, l in enumerate(matrix.labels) if l is not None]
    data = matrix.take(keep)
    folds = stratified_kfold(data.labels, k, seed)
    fold_seeds = np.random.SeedSequence(seed).generate_state(k)
    results = []
    for f, test in enumerate(folds):
        mask = np.ones(len(data.row_ids), dtype=bool)
        mask[test] = False
        train_idx = np.nonzero(mask)[0]
        current = data
        if refit is not None:
            rebuilt = refit([data.row_ids[i] for i in train_idx])
            pos = {u: i for i, u in enumerate(rebuilt.row_ids)}
            current = rebuilt.take([pos[u] for u in data.row_ids])
        model = train(kind, current.take(train_idx), hyperparams=hyperparams, seed=int(fold_seeds[f]))
        pred = predict(model, current.take(test))
        truth = [data.labels[i] for i in test]
        correct = sum(p is t for p, t in zip(pred, truth))
        results.append((int(correct), int(len(test))))
    return CvReport(
        territory=territory,
        family=matrix.family.value,
        kind=kind,
        folds=tuple(results),
        micro_accuracy=micro_accuracy(results),
        k=k,
        seed=seed,
        hyperparams=hyperparams_for(kind, hyperparams),
    )


RESULTS_HEADER = ("territory", "family", "NB", "SV", "RF", "ME")


def results_table(reports: Sequence[CvReport]) -> str:
    """CSV with one row per (territory, family) and one column per classifier."""
    cells: dict[tuple[str, str], dict[str, str]] = {}
    order: list[tuple[str, str]] = []
    for r in reports:
        key = (r.territory, r.family)
        if key not in cells:
            cells[key] = {}
            order.append(key)
        cells[key][r.kind.short] = f"{r.micro_accuracy:.4f}"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULTS_HEADER)
    for key in order:
        w.writerow(key + tuple(cells[key].get(c, "") for c in RESULTS_HEADER[2:]))
    return buf.getvalue()


def folds_table(reports: Sequence[CvReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("territory", "family", "classifier", "fold", "correct", "total"))
    for r in reports:
        for i, (c, t) in enumerate(r.folds):
            w.writerow((r.territory, r.family, r.kind.short, i, c, t))
    return buf.getvalue()

"""Maneuver classifiers: naive Bayes over per-feature mixtures, random
forest, and a single-hidden-layer perceptron, plus grid-search
hyperparameter optimization.

Training data is balanced upstream, so the naive Bayes uses uniform
class priors and accuracy metrics assign each sample to the argmax
class.  Only the perceptron works on scaled features.
"""

from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import metrics
from .core import MANEUVERS
from .gmm import GmmModel, fit_gmm

#: operating points used for the final models
DEFAULT_MLP_PARAMS = {"alpha": 0.02, "n_hidden": 27, "n_iter": 800}
DEFAULT_RF_PARAMS = {"n_trees": 128, "max_splits": 16, "min_samples_split": 100}
DEFAULT_GNB_PARAMS = {"k_max": 3, "n_init": 1, "max_rows": 4000}

#: per-feature log-likelihood floor; keeps a single far-out-of-support
#: feature value from zeroing out every class posterior
GNB_LOGLIK_FLOOR = -50.0


class TrainingError(Exception):
    pass


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"]), np.asarray(d["std"]))


def fit_scaler(X: np.ndarray) -> Scaler:
    """Per-feature standardization; constant features pass through."""
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    constant = std == 0.0
    if constant.any():
        warnings.warn(f"{int(constant.sum())} constant feature(s) left unscaled")
        mean = np.where(constant, 0.0, mean)
        std = np.where(constant, 1.0, std)
    return Scaler(mean=mean, std=std)


def apply_scaler(scaler: Scaler, X: np.ndarray) -> np.ndarray:
    return (X - scaler.mean) / scaler.std


def identity_scaler(n_features: int) -> Scaler:
    return Scaler(mean=np.zeros(n_features), std=np.ones(n_features))


# ---------------------------------------------------------------- GNB

@dataclass
class GnbModel:
    algo = "gnb"
    feature_ids: list[str]
    class_feature_models: list[list[GmmModel]]   # [class][feature] 1-D mixtures
    params: dict = field(default_factory=dict)

    def feature_logliks(self, X: np.ndarray) -> np.ndarray:
        """(n, n_features, 3) floored per-feature log densities."""
        n, f = X.shape
        out = np.empty((n, f, 3))
        for c in range(3):
            for j in range(f):
                out[:, j, c] = self.class_feature_models[c][j].logpdf(X[:, [j]])
        return np.maximum(out, GNB_LOGLIK_FLOOR)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return proba_from_feature_logliks(self.feature_logliks(X))

    def to_dict(self):
        return {
            "algo": "gnb",
            "feature_ids": self.feature_ids,
            "params": self.params,
            "class_feature_models": [
                [m.to_dict() for m in row] for row in self.class_feature_models
            ],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            feature_ids=list(d["feature_ids"]),
            class_feature_models=[
                [GmmModel.from_dict(m) for m in row] for row in d["class_feature_models"]
            ],
            params=dict(d.get("params", {})),
        )


def proba_from_feature_logliks(logliks: np.ndarray,
                               subset: list[int] | None = None) -> np.ndarray:
    """Posterior over classes from additive per-feature log densities.

    Uniform class priors; ``subset`` restricts the evaluated features,
    which makes backward-elimination scoring a single subtraction per
    candidate.
    """
    chosen = logliks if subset is None else logliks[:, subset, :]
    score = chosen.sum(axis=1)
    score -= score.max(axis=1, keepdims=True)
    p = np.exp(score)
    return p / p.sum(axis=1, keepdims=True)


def fit_gnb(feature_ids: list[str], X: np.ndarray, y: np.ndarray,
            params: dict | None = None, seed: int = 0) -> GnbModel:
    """One variational 1-D mixture per class and feature."""
    opts = dict(DEFAULT_GNB_PARAMS)
    opts.update(params or {})
    rng = np.random.default_rng((seed, 5001))
    per_class = []
    for c, maneuver in enumerate(MANEUVERS):
        rows = X[y == maneuver.value]
        if len(rows) == 0:
            raise TrainingError(f"no training rows for class {maneuver.name}")
        if opts["max_rows"] and len(rows) > opts["max_rows"]:
            keep = rng.choice(len(rows), size=opts["max_rows"], replace=False)
            rows = rows[np.sort(keep)]
        models = []
        for j, fid in enumerate(feature_ids):
            col = rows[:, [j]]
            if np.all(col == col[0]):
                # degenerate feature: single flat kernel around the constant
                models.append(GmmModel(dims=[fid], weights=np.array([1.0]),
                                       means=np.array([[float(col[0, 0])]]),
                                       covariances=np.array([[[1.0]]])))
                continue
            models.append(fit_gmm(col, [fid], k_max=opts["k_max"], seed=int(rng.integers(2 ** 31)),
                                  n_init=opts["n_init"]))
        per_class.append(models)
    return GnbModel(feature_ids=list(feature_ids), class_feature_models=per_class,
                    params=opts)


# ---------------------------------------------------------------- RF

@dataclass
class TreeNodes:
    feature: np.ndarray      # int, -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    class_frac: np.ndarray   # (n_nodes, 3)


def _gini(counts: np.ndarray) -> np.ndarray:
    total = counts.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = counts / total
    return 1.0 - np.nan_to_num((p ** 2).sum(axis=-1), nan=0.0)


def _best_split(X, y, idx, feats):
    """Best (gain, feature, threshold) over the candidate features."""
    n = len(idx)
    labels = y[idx]
    counts = np.bincount(labels, minlength=3).astype(float)
    parent = float(_gini(counts))
    best = (0.0, -1, 0.0)
    for f in feats:
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sy = labels[order]
        cut = np.nonzero(sv[:-1] < sv[1:])[0]
        if len(cut) == 0:
            continue
        onehot = np.zeros((n, 3))
        onehot[np.arange(n), sy] = 1.0
        prefix = np.cumsum(onehot, axis=0)
        left = prefix[cut]
        right = counts[None] - left
        nl = left.sum(axis=1)
        nr = n - nl
        gain = parent - (nl * _gini(left) + nr * _gini(right)) / n
        j = int(np.argmax(gain))
        if gain[j] > best[0] + 1e-15:
            # split at the observed left value (rule x <= thr): strictly
            # monotone feature transforms then relabel every split point
            # without rerouting any sample
            best = (float(gain[j]), int(f), float(sv[cut[j]]))
    return best


def _grow_tree(X, y, rng, max_splits, min_samples_split, n_candidates):
    n = len(y)
    boot = np.sort(rng.integers(n, size=n))
    nodes = {"feature": [], "threshold": [], "left": [], "right": [], "frac": []}

    def new_node(idx):
        nodes["feature"].append(-1)
        nodes["threshold"].append(0.0)
        nodes["left"].append(-1)
        nodes["right"].append(-1)
        counts = np.bincount(y[idx], minlength=3).astype(float)
        nodes["frac"].append(counts / counts.sum())
        return len(nodes["feature"]) - 1

    root_idx = boot
    root = new_node(root_idx)
    heap = []
    counter = 0

    def consider(node_id, idx):
        nonlocal counter
        if len(idx) < min_samples_split or len(np.unique(y[idx])) == 1:
            return
        feats = rng.choice(X.shape[1], size=n_candidates, replace=False)
        gain, f, thr = _best_split(X, y, idx, np.sort(feats))
        if f >= 0:
            heapq.heappush(heap, (-gain, counter, node_id, f, thr, idx))
            counter += 1

    consider(root, root_idx)
    splits = 0
    while heap and splits < max_splits:
        _, _, node_id, f, thr, idx = heapq.heappop(heap)
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        if len(li) == 0 or len(ri) == 0:
            continue
        nodes["feature"][node_id] = f
        nodes["threshold"][node_id] = thr
        left_id, right_id = new_node(li), new_node(ri)
        nodes["left"][node_id] = left_id
        nodes["right"][node_id] = right_id
        splits += 1
        consider(left_id, li)
        consider(right_id, ri)

    return TreeNodes(
        feature=np.asarray(nodes["feature"], dtype=np.int64),
        threshold=np.asarray(nodes["threshold"]),
        left=np.asarray(nodes["left"], dtype=np.int64),
        right=np.asarray(nodes["right"], dtype=np.int64),
        class_frac=np.asarray(nodes["frac"]),
    )


@dataclass
class RfModel:
    algo = "rf"
    feature_ids: list[str]
    trees: list[TreeNodes]
    params: dict = field(default_factory=dict)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        n = len(X)
        acc = np.zeros((n, 3))
        for tree in self.trees:
            node = np.zeros(n, dtype=np.int64)
            while True:
                feat = tree.feature[node]
                internal = feat >= 0
                if not internal.any():
                    break
                go_left = np.zeros(n, dtype=bool)
                rows = np.nonzero(internal)[0]
                go_left[rows] = X[rows, feat[rows]] <= tree.threshold[node[rows]]
                node = np.where(internal, np.where(go_left, tree.left[node], tree.right[node]),
                                node)
            acc += tree.class_frac[node]
        return acc / len(self.trees)

    def to_dict(self):
        return {
            "algo": "rf",
            "feature_ids": self.feature_ids,
            "params": self.params,
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "class_frac": t.class_frac.tolist(),
                }
                for t in self.trees
            ],
        }

    @classmethod
    def from_dict(cls, d):
        trees = [
            TreeNodes(
                feature=np.asarray(t["feature"], dtype=np.int64),
                threshold=np.asarray(t["threshold"]),
                left=np.asarray(t["left"], dtype=np.int64),
                right=np.asarray(t["right"], dtype=np.int64),
                class_frac=np.asarray(t["class_frac"]),
            )
            for t in d["trees"]
        ]
        return cls(feature_ids=list(d["feature_ids"]), trees=trees,
                   params=dict(d.get("params", {})))


def fit_rf(feature_ids: list[str], X: np.ndarray, y: np.ndarray,
           params: dict | None = None, seed: int = 0) -> RfModel:
    """Bootstrap forest, Gini splits, sqrt-many candidate features per
    node, a total split budget per tree (best-first by impurity
    decrease) and a minimum node size for splitting."""
    opts = dict(DEFAULT_RF_PARAMS)
    opts.update(params or {})
    n_candidates = max(1, int(np.sqrt(len(feature_ids))))
    trees = []
    for i in range(opts["n_trees"]):
        rng = np.random.default_rng((seed, 5407, i))
        trees.append(_grow_tree(X, np.asarray(y, dtype=np.int64), rng,
                                opts["max_splits"], opts["min_samples_split"],
                                n_candidates))
    return RfModel(feature_ids=list(feature_ids), trees=trees, params=opts)


# ---------------------------------------------------------------- MLP

@dataclass
class MlpModel:
    algo = "mlp"
    feature_ids: list[str]
    scaler: Scaler
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    params: dict = field(default_factory=dict)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        hidden = _sigmoid(apply_scaler(self.scaler, X) @ self.w1 + self.b1)
        return _softmax(hidden @ self.w2 + self.b2)

    def to_dict(self):
        return {
            "algo": "mlp",
            "feature_ids": self.feature_ids,
            "params": self.params,
            "scaler": self.scaler.to_dict(),
            "w1": self.w1.tolist(), "b1": self.b1.tolist(),
            "w2": self.w2.tolist(), "b2": self.b2.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(feature_ids=list(d["feature_ids"]),
                   scaler=Scaler.from_dict(d["scaler"]),
                   w1=np.asarray(d["w1"]), b1=np.asarray(d["b1"]),
                   w2=np.asarray(d["w2"]), b2=np.asarray(d["b2"]),
                   params=dict(d.get("params", {})))


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def mlp_loss_and_grads(w1, b1, w2, b2, X, onehot):
    """Mean cross-entropy and its exact gradients for one full batch."""
    hidden = _sigmoid(X @ w1 + b1)
    probs = _softmax(hidden @ w2 + b2)
    n = len(X)
    loss = float(-np.sum(onehot * np.log(np.maximum(probs, 1e-300))) / n)
    dz2 = (probs - onehot) / n
    dw2 = hidden.T @ dz2
    db2 = dz2.sum(axis=0)
    dh = dz2 @ w2.T
    dz1 = dh * hidden * (1.0 - hidden)
    dw1 = X.T @ dz1
    db1 = dz1.sum(axis=0)
    return loss, (dw1, db1, dw2, db2)


def fit_mlp(feature_ids: list[str], X: np.ndarray, y: np.ndarray,
            params: dict | None = None, seed: int = 0) -> MlpModel:
    """Standardized inputs, one logistic hidden layer, softmax output,
    plain full-batch gradient descent."""
    opts = dict(DEFAULT_MLP_PARAMS)
    opts.update(params or {})
    scaler = fit_scaler(X)
    Xs = apply_scaler(scaler, X)
    n_in, n_hid = X.shape[1], int(opts["n_hidden"])
    rng = np.random.default_rng((seed, 5501))
    w1 = rng.uniform(-0.1, 0.1, size=(n_in, n_hid))
    b1 = rng.uniform(-0.1, 0.1, size=n_hid)
    w2 = rng.uniform(-0.1, 0.1, size=(n_hid, 3))
    b2 = rng.uniform(-0.1, 0.1, size=3)
    onehot = np.zeros((len(y), 3))
    onehot[np.arange(len(y)), np.asarray(y, dtype=int)] = 1.0
    alpha = float(opts["alpha"])
    for epoch in range(int(opts["n_iter"])):
        loss, (dw1, db1, dw2, db2) = mlp_loss_and_grads(w1, b1, w2, b2, Xs, onehot)
        if not np.isfinite(loss):
            raise TrainingError(f"loss became non-finite at epoch {epoch}")
        w1 -= alpha * dw1
        b1 -= alpha * db1
        w2 -= alpha * dw2
        b2 -= alpha * db2
    return MlpModel(feature_ids=list(feature_ids), scaler=scaler,
                    w1=w1, b1=b1, w2=w2, b2=b2, params=opts)


# ---------------------------------------------------------------- common

def fit_classifier(algo: str, params: dict | None, feature_ids: list[str],
                   X: np.ndarray, y: np.ndarray, seed: int = 0):
    if algo == "gnb":
        return fit_gnb(feature_ids, X, y, params, seed)
    if algo == "rf":
        return fit_rf(feature_ids, X, y, params, seed)
    if algo == "mlp":
        return fit_mlp(feature_ids, X, y, params, seed)
    raise ValueError(f"unknown classifier algorithm {algo!r}")


def model_from_dict(d: dict):
    algo = d["algo"]
    if algo == "gnb":
        return GnbModel.from_dict(d)
    if algo == "rf":
        return RfModel.from_dict(d)
    if algo == "mlp":
        return MlpModel.from_dict(d)
    raise ValueError(f"unknown classifier algorithm {algo!r}")


def predict_proba(model, features: dict[str, float] | np.ndarray,
                  feature_ids: list[str] | None = None) -> np.ndarray:
    """Probability triple(s) over (LCL, FLW, LCR).

    Accepts a single feature mapping, or a matrix whose columns are
    named by ``feature_ids`` and cover the model's feature set.
    """
    if isinstance(features, dict):
        missing = [f for f in model.feature_ids if f not in features]
        if missing:
            raise KeyError(f"missing feature ids {missing}")
        row = np.array([[features[f] for f in model.feature_ids]])
        return model.predict_proba(row)[0]
    if feature_ids is None:
        raise ValueError("feature_ids required for matrix input")
    columns = []
    for f in model.feature_ids:
        if f not in feature_ids:
            raise KeyError(f"missing feature id {f!r}")
        columns.append(feature_ids.index(f))
    return model.predict_proba(np.asarray(features)[:, columns])


def grid_cells(grid: dict[str, list]) -> list[dict]:
    keys = sorted(grid)
    return [dict(zip(keys, combo)) for combo in product(*(grid[k] for k in keys))]


def _model_size_key(algo: str, params: dict) -> tuple:
    if algo == "rf":
        return (params["n_trees"], params["max_splits"], -params["min_samples_split"])
    if algo == "mlp":
        return (params["n_hidden"], params["n_iter"], params["alpha"])
    return ()


def grid_search(algo: str, grid: dict[str, list], fold_data: list[tuple[np.ndarray, np.ndarray]],
                feature_ids: list[str], seed: int = 0) -> dict:
    """Mean validation balanced accuracy over rotating fold holdouts;
    ties go to the smaller model."""
    cells = grid_cells(grid)
    if len(cells) == 1:
        return cells[0]
    results = []
    for ci, cell in enumerate(cells):
        scores = []
        for v in range(len(fold_data)):
            train_x = np.vstack([fold_data[i][0] for i in range(len(fold_data)) if i != v])
            train_y = np.concatenate([fold_data[i][1] for i in range(len(fold_data)) if i != v])
            model = fit_classifier(algo, cell, feature_ids, train_x, train_y, seed=seed)
            pred = np.argmax(model.predict_proba(fold_data[v][0]), axis=1)
            scores.append(metrics.bacc(metrics.confusion_matrix(fold_data[v][1], pred)))
        results.append((float(np.mean(scores)), _model_size_key(algo, cell), ci, cell))
    results.sort(key=lambda r: (-r[0], r[1], r[2]))
    return results[0][3]

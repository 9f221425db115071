"""Random forests grown from scratch, regression error metrics and the
train-on-synthetic / test-on-real protocol."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numba
import numpy as np

from .dataset import Categorical, Continuous, DomainError, Schema, Table

MAX_DEPTH = 16
MIN_SAMPLES_LEAF = 2
# R^2 when the true values are constant and predictions miss them
R2_CONSTANT_TARGET = -1.0e9


# --------------------------------------------------------------------------- error metrics


def _pair(y, yhat):
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.size != yhat.size:
        raise DomainError(f"length mismatch: {y.size} vs {yhat.size}")
    if y.size == 0:
        raise DomainError("empty inputs")
    return y, yhat


def mse(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.mean((y - yhat) ** 2))


def mae(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def r2(y, yhat) -> float:
    """1 - RSS/TSS. A constant ``y`` gives 1 on an exact fit and
    ``R2_CONSTANT_TARGET`` otherwise."""
    y, yhat = _pair(y, yhat)
    rss = float(np.sum((y - yhat) ** 2))
    tss = float(np.sum((y - y.mean()) ** 2))
    if tss == 0.0:
        return 1.0 if rss == 0.0 else R2_CONSTANT_TARGET
    return 1.0 - rss / tss


def accuracy(y, yhat) -> float:
    y = np.asarray(y)
    return float(np.mean(y == np.asarray(yhat)))


# --------------------------------------------------------------------------- trees


@numba.njit(cache=True)
def _impurity(counts, total, classification):
    # classification: counts holds class counts -> Gini * total
    # regression: counts = [sum, sumsq] -> SSE
    if classification:
        s = 0.0
        for c in counts:
            s += c * c
        return total - s / total
    return counts[1] - counts[0] * counts[0] / total


@numba.njit(cache=True)
def _grow_tree(X, y_cls, y_reg, n_classes, groups, max_features, max_depth, min_leaf, seed, classification,
               bootstrap):
    np.random.seed(seed)
    n, d = X.shape
    n_groups = groups.shape[0]
    width = n_classes if classification else 2
    boot = np.random.randint(0, n, n) if bootstrap else np.arange(n)

    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros((cap, max(n_classes, 1)))
    n_nodes = 1

    # stack of (node, start, stop, depth) over the index buffer
    idx = boot.copy()
    st_node = np.empty(cap, np.int64)
    st_a = np.empty(cap, np.int64)
    st_b = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    top = 0
    st_node[0], st_a[0], st_b[0], st_depth[0] = 0, 0, n, 0
    top = 1
    order = np.arange(n_groups)
    while top > 0:
        top -= 1
        node, a, b, depth = st_node[top], st_a[top], st_b[top], st_depth[top]
        m = b - a
        rows = idx[a:b]
        tot = np.zeros(width)
        for r in rows:
            if classification:
                tot[y_cls[r]] += 1.0
            else:
                tot[0] += y_reg[r]
                tot[1] += y_reg[r] * y_reg[r]
        if classification:
            for c in range(n_classes):
                value[node, c] = tot[c] / m
        else:
            value[node, 0] = tot[0] / m
        parent_imp = _impurity(tot, float(m), classification)
        if depth >= max_depth or m < 2 * min_leaf or parent_imp <= 1e-12:
            continue

        for i in range(n_groups - 1, 0, -1):
            j = np.random.randint(0, i + 1)
            order[i], order[j] = order[j], order[i]
        # impure nodes split even at zero gain (XOR-like interactions)
        best_gain = -1e-9
        best_f = -1
        best_t = 0.0
        tried = 0
        for gi in range(n_groups):
            if tried >= max_features and best_f >= 0:
                break
            tried += 1
            g = order[gi]
            for f in range(groups[g, 0], groups[g, 1]):
                vals = X[rows, f]
                srt = np.argsort(vals, kind="mergesort")
                lcount = np.zeros(width)
                for p in range(m - 1):
                    r = rows[srt[p]]
                    if classification:
                        lcount[y_cls[r]] += 1.0
                    else:
                        lcount[0] += y_reg[r]
                        lcount[1] += y_reg[r] * y_reg[r]
                    nl = p + 1
                    v0 = vals[srt[p]]
                    v1 = vals[srt[p + 1]]
                    if v0 == v1 or nl < min_leaf or m - nl < min_leaf:
                        continue
                    rcount = tot - lcount
                    gain = parent_imp - _impurity(lcount, float(nl), classification) - _impurity(
                        rcount, float(m - nl), classification
                    )
                    if gain > best_gain:
                        best_gain = gain
                        best_f = f
                        best_t = 0.5 * (v0 + v1)
        if best_f < 0:
            continue
        # partition rows in place: <= threshold to the left
        buf = rows.copy()
        lo = a
        hi = b - 1
        for r in buf:
            if X[r, best_f] <= best_t:
                idx[lo] = r
                lo += 1
            else:
                idx[hi] = r
                hi -= 1
        feature[node] = best_f
        threshold[node] = best_t
        left[node] = n_nodes
        right[node] = n_nodes + 1
        n_nodes += 2
        st_node[top], st_a[top], st_b[top], st_depth[top] = right[node], lo, b, depth + 1
        top += 1
        st_node[top], st_a[top], st_b[top], st_depth[top] = left[node], a, lo, depth + 1
        top += 1
    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@numba.njit(cache=True)
def _apply_tree(X, feature, threshold, left, right):
    out = np.empty(X.shape[0], np.int64)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@dataclass
class DecisionTree:
    """Flat node arrays; ``feature == -1`` marks a leaf. ``value`` holds class
    frequencies (classification) or the mean target in column 0."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    classification: bool

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaves(self, X: np.ndarray) -> np.ndarray:
        return _apply_tree(np.ascontiguousarray(X, dtype=np.float64), self.feature, self.threshold, self.left, self.right)

    def predict(self, X: np.ndarray) -> np.ndarray:
        v = self.value[self.leaves(X)]
        if self.classification:
            return np.argmax(v, axis=1)
        return v[:, 0]


@dataclass
class FeatureMap:
    """Table -> tree feature matrix; categorical columns become one indicator
    per level (so a split on one is a one-vs-rest split)."""

    schema: Schema
    features: tuple[str, ...]

    @classmethod
    def excluding(cls, schema: Schema, target: str) -> "FeatureMap":
        return cls(schema, tuple(n for n in schema.names if n != target))

    def groups(self) -> np.ndarray:
        out, start = [], 0
        for name in self.features:
            kind = self.schema.kind(name)
            w = len(kind.levels) if isinstance(kind, Categorical) else 1
            out.append((start, start + w))
            start += w
        return np.array(out, dtype=np.int64).reshape(-1, 2)

    def matrix(self, table: Table) -> np.ndarray:
        blocks = []
        for name in self.features:
            kind = self.schema.kind(name)
            if isinstance(kind, Categorical):
                oh = np.zeros((table.n_rows, len(kind.levels)))
                oh[np.arange(table.n_rows), table[name]] = 1.0
                blocks.append(oh)
            else:
                blocks.append(np.asarray(table[name], dtype=np.float64)[:, None])
        return np.ascontiguousarray(np.hstack(blocks))


@dataclass
class RandomForest:
    trees: list[DecisionTree]
    classification: bool
    n_classes: int
    seed: int
    feature_map: Optional[FeatureMap] = None
    target: Optional[str] = None

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if self.classification:
            votes = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
            rows = np.arange(X.shape[0])
            for t in self.trees:
                votes[rows, t.predict(X)] += 1
            return np.argmax(votes, axis=1)  # ties -> lowest class index
        return np.mean([t.predict(X) for t in self.trees], axis=0)

    def predict(self, table: Table) -> np.ndarray:
        return self.predict_matrix(self.feature_map.matrix(table))


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    classification: bool,
    n_trees: int,
    seed: int,
    groups: Optional[np.ndarray] = None,
    n_classes: Optional[int] = None,
    max_features: Optional[int] = None,
    max_depth: int = MAX_DEPTH,
    min_samples_leaf: int = MIN_SAMPLES_LEAF,
    bootstrap: bool = True,
) -> RandomForest:
    """Bagged trees on matrix data. Tree ``i`` uses seed ``seed + i``; each split
    draws ``max_features`` candidate feature groups (default sqrt(p) for
    classification, p/3 for regression). ``bootstrap=False`` grows every tree
    on all rows."""
    if n_trees < 1:
        raise DomainError("n_trees must be >= 1")
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise DomainError("cannot fit a forest on no rows")
    if groups is None:
        groups = np.column_stack([np.arange(X.shape[1]), np.arange(1, X.shape[1] + 1)])
    groups = np.ascontiguousarray(groups, dtype=np.int64)
    p = groups.shape[0]
    if max_features is None:
        max_features = int(math.sqrt(p)) if classification else p // 3
    max_features = max(1, min(p, max_features))
    if classification:
        y_cls = np.ascontiguousarray(y, dtype=np.int64)
        n_classes = int(n_classes if n_classes is not None else y_cls.max() + 1)
        y_reg = np.zeros(1)
    else:
        y_reg = np.ascontiguousarray(y, dtype=np.float64)
        y_cls = np.zeros(1, dtype=np.int64)
        n_classes = 1
    trees = []
    for i in range(n_trees):
        arrs = _grow_tree(
            X, y_cls, y_reg, n_classes, groups, max_features, max_depth, min_samples_leaf,
            (seed + i) % (2**32), classification, bootstrap,
        )
        trees.append(DecisionTree(*arrs, classification=classification))
    return RandomForest(trees, classification, n_classes, seed)


def rf_fit_classify(train: Table, target: str, n_trees: int = 200, seed: int = 0, **kw) -> RandomForest:
    kind = train.schema.kind(target)
    if not isinstance(kind, Categorical):
        raise DomainError(f"classification target {target!r} must be categorical")
    fmap = FeatureMap.excluding(train.schema, target)
    forest = fit_forest(
        fmap.matrix(train), train[target], True, n_trees, seed, fmap.groups(), len(kind.levels), **kw
    )
    forest.feature_map, forest.target = fmap, target
    return forest


def rf_fit_regress(train: Table, target: str, n_trees: int = 300, seed: int = 0, **kw) -> RandomForest:
    if not isinstance(train.schema.kind(target), Continuous):
        raise DomainError(f"regression target {target!r} must be continuous")
    fmap = FeatureMap.excluding(train.schema, target)
    forest = fit_forest(fmap.matrix(train), train[target], False, n_trees, seed, fmap.groups(), **kw)
    forest.feature_map, forest.target = fmap, target
    return forest


# --------------------------------------------------------------------------- TSTR


def split_holdout(real: Table, class_target: str, test_fraction: float = 0.30, seed: int = 0):
    """Seeded split stratified on ``class_target``; per-class test counts use
    largest remainders so the total is round(test_fraction * n)."""
    n = real.n_rows
    if n < 10:
        raise DomainError("need at least 10 rows for a holdout split")
    if not 0.0 < test_fraction < 1.0:
        raise DomainError("test_fraction must lie in (0, 1)")
    codes = real[class_target]
    n_lv = len(real.schema.kind(class_target).levels)
    counts = np.bincount(codes, minlength=n_lv)
    if np.any((counts > 0) & (counts < 2)):
        raise DomainError("every present class needs at least 2 rows")
    ideal = counts * test_fraction
    alloc = np.floor(ideal).astype(np.int64)
    short = int(round(n * test_fraction)) - int(alloc.sum())
    order = np.argsort(-(ideal - alloc), kind="stable")
    for c in order[: max(short, 0)]:
        alloc[c] += 1
    rng = np.random.default_rng(seed)
    test_idx = []
    for c in range(n_lv):
        rows = np.flatnonzero(codes == c)
        if len(rows):
            take = min(alloc[c], len(rows) - 1) if len(rows) > 1 else 0
            test_idx.append(rng.permutation(rows)[:take])
    test_mask = np.zeros(n, dtype=bool)
    test_mask[np.concatenate(test_idx)] = True
    return real.take(np.flatnonzero(~test_mask)), real.take(np.flatnonzero(test_mask))


@dataclass
class UtilityScores:
    classification_accuracy: float
    regression_r2: float
    regression_mae: float
    regression_mse: float
    ml_utility: float


@dataclass
class TSTRResult(UtilityScores):
    train_on_real_baseline: Optional[UtilityScores] = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TSTRResult":
        base = d.get("train_on_real_baseline")
        fields = {k: v for k, v in d.items() if k != "train_on_real_baseline"}
        return cls(**fields, train_on_real_baseline=UtilityScores(**base) if base else None)


def ml_utility(acc: float, r2_value: float) -> float:
    return 0.5 * (acc + max(0.0, r2_value))


def utility_scores(
    train: Table,
    test: Table,
    class_target: str,
    regression_target: str,
    seed: int = 0,
    n_trees_classifier: int = 200,
    n_trees_regressor: int = 300,
) -> UtilityScores:
    clf = rf_fit_classify(train, class_target, n_trees_classifier, seed)
    acc = accuracy(test[class_target], clf.predict(test))
    reg = rf_fit_regress(train, regression_target, n_trees_regressor, seed + 1_000_003)
    pred = reg.predict(test)
    y = test[regression_target]
    r2v = r2(y, pred)
    return UtilityScores(acc, r2v, mae(y, pred), mse(y, pred), ml_utility(acc, r2v))


def tstr(
    synth: Table,
    real: Table,
    class_target: Optional[str] = None,
    regression_target: Optional[str] = None,
    seed: int = 0,
    test_fraction: float = 0.30,
    holdout: Optional[tuple[Table, Table]] = None,
    baseline: Optional[UtilityScores] = None,
    n_trees_classifier: int = 200,
    n_trees_regressor: int = 300,
) -> TSTRResult:
    """Train forests on ``synth`` only and score them on the real holdout.

    ``holdout`` (train, test) and ``baseline`` can be passed in to reuse one
    split and one train-on-real result across several synthetic tables.
    """
    if synth.schema.columns != real.schema.columns:
        raise DomainError("synthetic and real schemas differ")
    class_target = class_target or real.schema.class_target
    regression_target = regression_target or real.schema.regression_target
    train, test = holdout if holdout is not None else split_holdout(real, class_target, test_fraction, seed)
    kw = dict(seed=seed, n_trees_classifier=n_trees_classifier, n_trees_regressor=n_trees_regressor)
    if baseline is None:
        baseline = utility_scores(train, test, class_target, regression_target, **kw)
    scores = utility_scores(synth, test, class_target, regression_target, **kw)
    return TSTRResult(**asdict(scores), train_on_real_baseline=baseline)

"""Classical resamplers: SMOTE for mixed nominal/continuous data, pooled
bootstrap and random oversampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Categorical, DomainError, Table

METHODS = ("smote", "bootstrap", "oversample")


class ConfigError(ValueError):
    """Raised for resampler settings the data cannot support."""


@dataclass(frozen=True)
class ResampleConfig:
    method: str = "smote"
    k_neighbors: int = 5
    n_bootstrap_replicates: int = 100
    target_rows: int = 10000
    seed: int = 42

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown resampling method {self.method!r}")
        if self.k_neighbors < 1:
            raise ConfigError("k_neighbors must be >= 1")
        if self.target_rows < 1:
            raise ConfigError("target_rows must be >= 1")
        if self.n_bootstrap_replicates < 1:
            raise ConfigError("n_bootstrap_replicates must be >= 1")


def _class_indices(table: Table, target: str) -> list[np.ndarray]:
    if not isinstance(table.schema.kind(target), Categorical):
        raise ConfigError(f"target {target!r} must be categorical")
    if table.n_rows == 0:
        raise DomainError("cannot resample an empty table")
    codes = table[target]
    n_levels = len(table.schema.kind(target).levels)
    return [np.flatnonzero(codes == c) for c in range(n_levels)]


def _subsample(table: Table, n: int, rng: np.random.Generator) -> Table:
    idx = np.sort(rng.choice(table.n_rows, size=n, replace=False))
    return table.take(idx)


# --------------------------------------------------------------------------- SMOTE


class _SmoteClass:
    """Neighbour structure for one class, built once per call."""

    def __init__(self, table: Table, target: str, rows: np.ndarray, k: int):
        schema = table.schema
        self.rows = rows
        self.cont = [n for n in schema.continuous_names if n != target]
        self.cat = [n for n in schema.categorical_names if n != target]
        full_cont = np.column_stack([table[n] for n in self.cont]) if self.cont else np.zeros((table.n_rows, 0))
        mu = full_cont.mean(axis=0)
        sd = full_cont.std(axis=0)
        sd[sd == 0] = 1.0
        z = (full_cont[rows] - mu) / sd
        self.x_cont = full_cont[rows]
        self.x_cat = (
            np.column_stack([table[n][rows] for n in self.cat]) if self.cat else np.zeros((len(rows), 0), int)
        )
        penalty = float(np.median(z.std(axis=0))) if z.shape[1] else 1.0
        m = len(rows)
        self.neighbors = np.empty((m, k), dtype=np.int64)
        for s in range(0, m, 128):
            zs, cs = z[s : s + 128], self.x_cat[s : s + 128]
            d2 = ((zs[:, None, :] - z[None, :, :]) ** 2).sum(axis=2)
            d2 += (cs[:, None, :] != self.x_cat[None, :, :]).sum(axis=2) * penalty**2
            d2[np.arange(len(zs)), s + np.arange(len(zs))] = np.inf
            # stable sort: equal distances resolve to the lower row index
            self.neighbors[s : s + 128] = np.argsort(d2, axis=1, kind="stable")[:, :k]
        self.n_levels = [len(schema.kind(n).levels) for n in self.cat]

    def synthesize(self, n: int, rng: np.random.Generator, start: int = 0):
        base = (start + np.arange(n)) % len(self.rows)
        pick = rng.integers(0, self.neighbors.shape[1], size=n)
        nb = self.neighbors[base, pick]
        lam = rng.random(n)
        cont = self.x_cont[base] + lam[:, None] * (self.x_cont[nb] - self.x_cont[base])
        cat = np.empty((n, len(self.cat)), dtype=np.int64)
        for j, n_lv in enumerate(self.n_levels):
            votes = self.x_cat[self.neighbors[base], j]
            counts = np.stack([(votes == c).sum(axis=1) for c in range(n_lv)], axis=1)
            cat[:, j] = np.argmax(counts, axis=1)  # ties -> lowest level index
        return cont, cat


def smote(table: Table, target: str, cfg: ResampleConfig) -> Table:
    """Balance every class of ``target`` to the majority count by SMOTE-NC
    interpolation, then resize to ``cfg.target_rows``.

    Continuous cells of synthetic rows are convex combinations of a real row
    and one of its ``k`` nearest same-class neighbours, left unrounded; nominal
    cells take the most frequent value among the ``k`` neighbours. Distances are
    Euclidean over standardized continuous columns plus the squared median
    in-class standard deviation for every nominal mismatch.
    """
    k = cfg.k_neighbors
    classes = _class_indices(table, target)
    for c, rows in enumerate(classes):
        if 0 < len(rows) <= k:
            level = table.schema.kind(target).levels[c]
            raise ConfigError(
                f"class {level!r} of {target!r} has {len(rows)} rows, need more than k_neighbors={k}"
            )
    present = [c for c, rows in enumerate(classes) if len(rows)]
    majority = max(len(classes[c]) for c in present)
    rng = np.random.default_rng(cfg.seed)
    models: dict[int, _SmoteClass] = {}
    counters = {c: 0 for c in present}

    def make(c: int, n: int) -> Table:
        if c not in models:
            models[c] = _SmoteClass(table, target, classes[c], k)
        m = models[c]
        cont, cat = m.synthesize(n, rng, counters[c])
        counters[c] += n
        data = {target: np.full(n, c, dtype=np.int64)}
        for j, name in enumerate(m.cont):
            data[name] = cont[:, j]
        for j, name in enumerate(m.cat):
            data[name] = cat[:, j]
        return Table(table.schema, data, strict=False)

    parts = [table]
    for c in present:
        need = majority - len(classes[c])
        if need:
            parts.append(make(c, need))
    balanced = Table.concat(parts)
    total = balanced.n_rows
    if total >= cfg.target_rows:
        return _subsample(balanced, cfg.target_rows, rng)
    # keep generating round-robin over classes until the requested size
    extra = cfg.target_rows - total
    per = [extra // len(present) + (1 if i < extra % len(present) else 0) for i in range(len(present))]
    more = [make(c, n) for c, n in zip(present, per) if n]
    return Table.concat([balanced] + more)


# --------------------------------------------------------------------------- bootstrap


def bootstrap_replicates(table: Table, cfg: ResampleConfig, rng=None) -> np.ndarray:
    """Row indices of ``cfg.n_bootstrap_replicates`` with-replacement resamples,
    each the size of ``table``; shape (replicates, n_rows)."""
    if table.n_rows == 0:
        raise DomainError("cannot bootstrap an empty table")
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    return rng.integers(0, table.n_rows, size=(cfg.n_bootstrap_replicates, table.n_rows))


def bootstrap(table: Table, cfg: ResampleConfig) -> Table:
    """Uniform draw of ``cfg.target_rows`` rows from the pooled replicates."""
    rng = np.random.default_rng(cfg.seed)
    pool = bootstrap_replicates(table, cfg, rng).ravel()
    pick = rng.integers(0, pool.size, size=cfg.target_rows)
    return table.take(pool[pick])


# --------------------------------------------------------------------------- oversampling


def random_oversample(table: Table, target: str, cfg: ResampleConfig) -> Table:
    """Duplicate rows of smaller classes up to the majority count, then resize
    like :func:`smote`. Every output row is a copy of an input row."""
    classes = _class_indices(table, target)
    present = [c for c, rows in enumerate(classes) if len(rows)]
    majority = max(len(classes[c]) for c in present)
    rng = np.random.default_rng(cfg.seed)
    idx = [np.arange(table.n_rows)]
    for c in present:
        need = majority - len(classes[c])
        if need:
            idx.append(rng.choice(classes[c], size=need, replace=True))
    idx = np.concatenate(idx)
    if len(idx) >= cfg.target_rows:
        keep = np.sort(rng.choice(len(idx), size=cfg.target_rows, replace=False))
        return table.take(idx[keep])
    extra = cfg.target_rows - len(idx)
    more = [
        rng.choice(classes[c], size=extra // len(present) + (1 if i < extra % len(present) else 0))
        for i, c in enumerate(present)
    ]
    return table.take(np.concatenate([idx] + more))


def resample(table: Table, target: str, cfg: ResampleConfig) -> Table:
    if cfg.method == "smote":
        return smote(table, target, cfg)
    if cfg.method == "bootstrap":
        return bootstrap(table, cfg)
    return random_oversample(table, target, cfg)

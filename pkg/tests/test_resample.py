from collections import Counter

import numpy as np
import pytest

from edusynth.dataset import Categorical, Continuous, DomainError, Schema, Table, seed_dataset
from edusynth.metrics import dcr_score
from edusynth.resample import (
    ConfigError,
    ResampleConfig,
    bootstrap,
    bootstrap_replicates,
    random_oversample,
    resample,
    smote,
)
from oracles import convex_residuals


def _two_class(n_a, n_c, seed=0):
    schema = Schema(
        (
            ("cls", Categorical(("A", "C"))),
            ("tag", Categorical(("u", "v", "w"))),
            ("x", Continuous(0, 100)),
            ("y", Continuous(0, 100)),
        ),
        "cls",
        "x",
    )
    r = np.random.default_rng(seed)
    recs = [
        (c, str(r.choice(["u", "v", "w"])), float(r.uniform(0, 100)), float(r.uniform(0, 100)))
        for c in ["A"] * n_a + ["C"] * n_c
    ]
    return Table.from_records(schema, recs)


def _keys(t):
    return Counter(map(tuple, t.row_keys()))


def test_config_validation():
    with pytest.raises(ConfigError):
        ResampleConfig(method="adasyn")
    with pytest.raises(ConfigError):
        ResampleConfig(k_neighbors=0)
    with pytest.raises(ConfigError):
        ResampleConfig(target_rows=0)


def test_smote_balances_before_resizing():
    t = _two_class(100, 320)
    out = smote(t, "cls", ResampleConfig(target_rows=640, seed=1))
    assert Counter(out.labels("cls")) == {"A": 320, "C": 320}


def test_smote_segment_interpolation():
    schema = Schema((("cls", Categorical(("m", "M"))), ("x", Continuous(0, 10)), ("y", Continuous(0, 10))), "cls", "x")
    recs = [("m", 0.0, 0.0), ("m", 10.0, 10.0)] + [("M", float(i % 10), float((3 * i) % 10)) for i in range(12)]
    t = Table.from_records(schema, recs)
    out = smote(t, "cls", ResampleConfig(k_neighbors=1, target_rows=24, seed=3))
    minority = out.labels("cls") == "m"
    x, y = out["x"][minority], out["y"][minority]
    assert minority.sum() == 12
    np.testing.assert_array_equal(x, y)
    assert x.min() >= 0 and x.max() <= 10


def test_smote_convex_combinations():
    t = _two_class(30, 60, seed=2)
    out = smote(t, "cls", ResampleConfig(target_rows=120, seed=4))
    cols = ["x", "y"]
    res = convex_residuals(
        np.column_stack([out[c] for c in cols]), out["cls"], np.column_stack([t[c] for c in cols]), t["cls"]
    )
    assert res.max() < 1e-9


def test_smote_nominal_is_neighbour_mode():
    # every minority row shares tag "v", so every synthetic row must too
    t = _two_class(0, 40, seed=5)
    schema = t.schema
    recs = [("A", "v", float(i), float(i)) for i in range(10)] + list(t.records())
    t = Table.from_records(schema, recs)
    out = smote(t, "cls", ResampleConfig(target_rows=80, seed=0))
    assert set(out.labels("tag")[out.labels("cls") == "A"]) == {"v"}


def test_smote_small_class_rejected():
    t = _two_class(5, 30)
    with pytest.raises(ConfigError, match="'A'"):
        smote(t, "cls", ResampleConfig(k_neighbors=5))


def test_smote_resizes_both_ways():
    t = _two_class(40, 60)
    assert smote(t, "cls", ResampleConfig(target_rows=50, seed=1)).n_rows == 50
    big = smote(t, "cls", ResampleConfig(target_rows=301, seed=1))
    assert big.n_rows == 301
    counts = Counter(big.labels("cls"))
    assert abs(counts["A"] - counts["C"]) <= 1


def test_smote_deterministic():
    t = _two_class(40, 60)
    cfg = ResampleConfig(target_rows=150, seed=9)
    assert smote(t, "cls", cfg) == smote(t, "cls", cfg)


def test_bootstrap_copies():
    t = _two_class(2, 1)
    out = bootstrap(t, ResampleConfig(method="bootstrap", target_rows=3, seed=0))
    assert set(_keys(out)) <= set(_keys(t))


def test_bootstrap_exclusion_fraction():
    t = seed_dataset(10000, 1)
    idx = bootstrap_replicates(t, ResampleConfig(method="bootstrap", seed=3))
    absent = [1 - len(np.unique(rep)) / t.n_rows for rep in idx[:10]]
    assert abs(np.mean(absent) - np.exp(-1)) <= 0.02
    assert idx.shape == (100, 10000)


def test_bootstrap_empty_rejected():
    t = _two_class(3, 3).take(np.array([], dtype=int))
    with pytest.raises(DomainError):
        bootstrap(t, ResampleConfig(method="bootstrap"))


def test_oversample_balances_race():
    t = seed_dataset(1000, 4)
    majority = max(Counter(t.labels("race_ethnicity")).values())
    out = random_oversample(t, "race_ethnicity", ResampleConfig(method="oversample", target_rows=5 * majority))
    assert set(Counter(out.labels("race_ethnicity")).values()) == {majority}
    assert set(_keys(out)) <= set(_keys(t))


@pytest.mark.parametrize("method", ["bootstrap", "oversample"])
def test_copy_methods_have_zero_dcr(method):
    t = seed_dataset(400, 6)
    out = resample(t, "race_ethnicity", ResampleConfig(method=method, target_rows=700, seed=2))
    assert out.n_rows == 700
    assert dcr_score(t, out) == 0.0


def test_resample_deterministic():
    t = seed_dataset(300, 6)
    for m in ("smote", "bootstrap", "oversample"):
        cfg = ResampleConfig(method=m, target_rows=400, seed=5)
        assert resample(t, "race_ethnicity", cfg) == resample(t, "race_ethnicity", cfg)

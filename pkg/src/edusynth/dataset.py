"""Tabular data model, CSV I/O, one-hot/standardization encoding and a stand-in
student-performance dataset."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, Union

import numpy as np


class SchemaError(ValueError):
    """Raised when a schema or a CSV header is inconsistent."""


class DomainError(ValueError):
    """Raised when an operation receives inputs outside its domain."""


@dataclass(frozen=True)
class Categorical:
    levels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))
        if not self.levels:
            raise SchemaError("categorical column needs at least one level")
        if len(set(self.levels)) != len(self.levels):
            raise SchemaError(f"duplicate categorical levels: {self.levels}")

    @property
    def binary(self) -> bool:
        # 0/1 indicator columns are kept as a single encoded column
        return self.levels == ("0", "1")


@dataclass(frozen=True)
class Continuous:
    min: float
    max: float
    integer_valued: bool = False

    def __post_init__(self):
        object.__setattr__(self, "min", float(self.min))
        object.__setattr__(self, "max", float(self.max))
        if not self.min < self.max:
            raise SchemaError(f"continuous column needs min < max, got [{self.min}, {self.max}]")


ColumnKind = Union[Categorical, Continuous]


@dataclass(frozen=True)
class Schema:
    columns: tuple[tuple[str, ColumnKind], ...]
    class_target: str
    regression_target: str

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple((str(n), k) for n, k in self.columns))
        names = self.names
        if len(set(names)) != len(names):
            raise SchemaError("column names must be unique")
        kinds = dict(self.columns)
        if not isinstance(kinds.get(self.class_target), Categorical):
            raise SchemaError(f"class target {self.class_target!r} must be a categorical column")
        if not isinstance(kinds.get(self.regression_target), Continuous):
            raise SchemaError(
                f"regression target {self.regression_target!r} must be a continuous column"
            )

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.columns]

    def kind(self, name: str) -> ColumnKind:
        for n, k in self.columns:
            if n == name:
                return k
        raise SchemaError(f"unknown column {name!r}")

    @property
    def categorical_names(self) -> list[str]:
        return [n for n, k in self.columns if isinstance(k, Categorical)]

    @property
    def continuous_names(self) -> list[str]:
        return [n for n, k in self.columns if isinstance(k, Continuous)]

    def with_targets(self, class_target: str | None = None, regression_target: str | None = None):
        return Schema(
            self.columns,
            class_target or self.class_target,
            regression_target or self.regression_target,
        )

    def to_dict(self) -> dict:
        cols = []
        for name, kind in self.columns:
            if isinstance(kind, Categorical):
                cols.append({"name": name, "kind": "categorical", "levels": list(kind.levels)})
            else:
                cols.append(
                    {
                        "name": name,
                        "kind": "continuous",
                        "min": kind.min,
                        "max": kind.max,
                        "integer": kind.integer_valued,
                    }
                )
        return {
            "class_target": self.class_target,
            "regression_target": self.regression_target,
            "columns": cols,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        try:
            cols = []
            for c in d["columns"]:
                if c["kind"] == "categorical":
                    cols.append((c["name"], Categorical(tuple(c["levels"]))))
                elif c["kind"] == "continuous":
                    cols.append(
                        (c["name"], Continuous(c["min"], c["max"], bool(c.get("integer", False))))
                    )
                else:
                    raise SchemaError(f"unknown column kind {c['kind']!r}")
            return cls(tuple(cols), d["class_target"], d["regression_target"])
        except KeyError as exc:
            raise SchemaError(f"schema is missing key {exc}") from None


GENDER = ("Male", "Female")
RACE = ("A", "B", "C", "D", "E")
PARENTAL_EDUCATION = (
    "Some High School",
    "High School",
    "Some College",
    "Associate's",
    "Bachelor's",
    "Master's",
)
SUBJECTS = ("math", "reading", "writing", "science")


def student_schema() -> Schema:
    """Default schema of the student-performance dataset."""
    score = Continuous(0, 100, integer_valued=True)
    return Schema(
        (
            ("gender", Categorical(GENDER)),
            ("race_ethnicity", Categorical(RACE)),
            ("parental_education", Categorical(PARENTAL_EDUCATION)),
            ("lunch", Categorical(("0", "1"))),
            ("test_prep", Categorical(("0", "1"))),
            ("math", score),
            ("reading", score),
            ("writing", score),
            ("science", score),
            ("total_score", Continuous(0, 400, integer_valued=True)),
        ),
        class_target="race_ethnicity",
        regression_target="total_score",
    )


def _check_column(kind: ColumnKind, name: str, values: np.ndarray, strict: bool) -> np.ndarray:
    if isinstance(kind, Categorical):
        codes = np.asarray(values, dtype=np.int64)
        if codes.size and (codes.min() < 0 or codes.max() >= len(kind.levels)):
            raise DomainError(f"column {name!r} has level codes outside its levels")
        return codes
    vals = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise DomainError(f"column {name!r} has non-finite values")
    if strict and vals.size and (vals.min() < kind.min or vals.max() > kind.max):
        raise DomainError(f"column {name!r} has values outside [{kind.min}, {kind.max}]")
    if strict and kind.integer_valued and not np.all(vals == np.round(vals)):
        raise DomainError(f"integer-valued column {name!r} has fractional values")
    return vals


@dataclass(frozen=True, eq=False)
class Table:
    """Column-oriented table.

    Categorical columns hold int64 level codes into ``schema.kind(name).levels``;
    continuous columns hold float64 values. Arrays are read-only.

    ``strict=False`` lets integer-valued columns carry fractional values, which
    interpolating resamplers need, and admits out-of-bounds values from an
    unclamped decode.
    """

    schema: Schema
    data: dict[str, np.ndarray]
    strict: bool = field(default=True)

    def __post_init__(self):
        if set(self.data) != set(self.schema.names):
            raise SchemaError("table columns do not match schema")
        lengths = {len(v) for v in self.data.values()}
        if len(lengths) > 1:
            raise DomainError("table columns have different lengths")
        checked = {}
        for name, kind in self.schema.columns:
            arr = _check_column(kind, name, self.data[name], self.strict).copy()
            arr.setflags(write=False)
            checked[name] = arr
        object.__setattr__(self, "data", checked)

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.data.values()))) if self.data else 0

    def __len__(self) -> int:
        return self.n_rows

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[name]

    def labels(self, name: str) -> np.ndarray:
        """Categorical column as an array of level strings."""
        levels = np.array(self.schema.kind(name).levels, dtype=object)
        return levels[self.data[name]]

    def take(self, idx) -> "Table":
        idx = np.asarray(idx, dtype=np.int64)
        return Table(self.schema, {k: v[idx] for k, v in self.data.items()}, self.strict)

    def records(self) -> Iterator[tuple]:
        cols = []
        for name, kind in self.schema.columns:
            if isinstance(kind, Categorical):
                cols.append(self.labels(name))
            else:
                cols.append(self.data[name])
        for i in range(self.n_rows):
            yield tuple(c[i] if isinstance(c[i], str) else float(c[i]) for c in cols)

    def row_keys(self) -> np.ndarray:
        """Rows as a structured array, for multiset/equality checks."""
        dtype = [
            (n, np.int64 if isinstance(k, Categorical) else np.float64) for n, k in self.schema.columns
        ]
        out = np.empty(self.n_rows, dtype=dtype)
        for n in self.schema.names:
            out[n] = self.data[n]
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, Table) or other.schema != self.schema:
            return NotImplemented if not isinstance(other, Table) else False
        return other.n_rows == self.n_rows and all(
            np.array_equal(self.data[n], other.data[n]) for n in self.schema.names
        )

    __hash__ = None

    @classmethod
    def from_records(cls, schema: Schema, records: Iterable[Sequence], strict: bool = True) -> "Table":
        records = list(records)
        data = {}
        for j, (name, kind) in enumerate(schema.columns):
            col = [r[j] for r in records]
            if isinstance(kind, Categorical):
                index = {lv: i for i, lv in enumerate(kind.levels)}
                try:
                    data[name] = np.array([index[str(v)] for v in col], dtype=np.int64)
                except KeyError as exc:
                    raise DomainError(f"column {name!r}: unknown level {exc}") from None
            else:
                data[name] = np.array(col, dtype=np.float64)
        return cls(schema, data, strict)

    @classmethod
    def concat(cls, tables: Sequence["Table"]) -> "Table":
        schema = tables[0].schema
        strict = all(t.strict for t in tables)
        return cls(
            schema, {n: np.concatenate([t.data[n] for t in tables]) for n in schema.names}, strict
        )


@dataclass(frozen=True)
class LoadReport:
    rows_read: int
    dropped_missing: int
    dropped_invalid: int
    dropped_duplicates: int

    @property
    def dropped(self) -> int:
        return self.dropped_missing + self.dropped_invalid + self.dropped_duplicates


def _parse_cell(kind: ColumnKind, raw: str):
    """Parse one CSV cell; None means missing, DomainError means invalid."""
    raw = raw.strip()
    if raw == "" or raw.lower() in ("na", "nan", "null", "none"):
        return None
    if isinstance(kind, Categorical):
        if raw in kind.levels:
            return raw
        # tolerate "1.0" for 0/1 indicator levels
        try:
            f = float(raw)
        except ValueError:
            raise DomainError(raw) from None
        if f.is_integer() and str(int(f)) in kind.levels:
            return str(int(f))
        raise DomainError(raw)
    try:
        v = float(raw)
    except ValueError:
        return None
    if not math.isfinite(v):
        return None
    if v < kind.min or v > kind.max:
        raise DomainError(raw)
    if kind.integer_valued and not v.is_integer():
        raise DomainError(raw)
    return v


def load_csv(path: Union[str, os.PathLike], schema: Schema) -> tuple[Table, LoadReport]:
    """Read a CSV whose header matches ``schema`` column names.

    Rows with missing or unparseable cells, out-of-domain values and exact
    duplicates are dropped and counted in the returned report.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        if header != schema.names:
            raise SchemaError(f"{path}: header {header} does not match schema {schema.names}")
        kinds = [k for _, k in schema.columns]
        seen: set[tuple] = set()
        records = []
        n_read = missing = invalid = dups = 0
        for row in reader:
            if not row:
                continue
            n_read += 1
            if len(row) != len(kinds):
                missing += 1
                continue
            try:
                parsed = tuple(_parse_cell(k, c) for k, c in zip(kinds, row))
            except DomainError:
                invalid += 1
                continue
            if any(v is None for v in parsed):
                missing += 1
                continue
            if parsed in seen:
                dups += 1
                continue
            seen.add(parsed)
            records.append(parsed)
    table = Table.from_records(schema, records)
    return table, LoadReport(n_read, missing, invalid, dups)


def _format_number(v: float, integer_valued: bool) -> str:
    if integer_valued and float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def to_csv(table: Table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.schema.names)
    cols = []
    for name, kind in table.schema.columns:
        if isinstance(kind, Categorical):
            cols.append(list(table.labels(name)))
        else:
            cols.append([_format_number(v, kind.integer_valued) for v in table[name]])
    for row in zip(*cols):
        writer.writerow(row)
    return buf.getvalue()


def write_csv(table: Table, path: Union[str, os.PathLike]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(to_csv(table))


# --------------------------------------------------------------------------- encoding


@dataclass(frozen=True)
class ColumnEncoding:
    name: str
    kind: ColumnKind
    start: int
    width: int
    mean: float = 0.0
    std: float = 1.0

    @property
    def stop(self) -> int:
        return self.start + self.width


@dataclass(frozen=True)
class Encoding:
    """Per-column encoding map: one-hot ranges and standardization pairs."""

    schema: Schema
    columns: tuple[ColumnEncoding, ...]

    @property
    def width(self) -> int:
        return self.columns[-1].stop if self.columns else 0

    def column(self, name: str) -> ColumnEncoding:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def groups(self) -> list[tuple[int, int]]:
        """(start, stop) of every categorical block; width-1 blocks are binary."""
        return [(c.start, c.stop) for c in self.columns if isinstance(c.kind, Categorical)]

    def continuous_indices(self) -> list[int]:
        return [c.start for c in self.columns if isinstance(c.kind, Continuous)]

    def transform(self, table: Table) -> np.ndarray:
        if table.schema.names != self.schema.names:
            raise SchemaError("table schema does not match encoding")
        out = np.zeros((table.n_rows, self.width))
        for c in self.columns:
            col = table[c.name]
            if isinstance(c.kind, Categorical):
                if c.width == 1:
                    out[:, c.start] = col
                else:
                    out[np.arange(table.n_rows), c.start + col] = 1.0
            else:
                out[:, c.start] = (col - c.mean) / c.std
        return out

    def inverse(self, data: np.ndarray, clamp: bool = False, round_integers: bool = False) -> Table:
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[1] != self.width:
            raise DomainError(f"matrix has shape {data.shape}, encoding expects width {self.width}")
        cols = {}
        strict = True
        for c in self.columns:
            block = data[:, c.start : c.stop]
            if isinstance(c.kind, Categorical):
                if c.width == 1:
                    cols[c.name] = (block[:, 0] >= 0.5).astype(np.int64)
                else:
                    cols[c.name] = np.argmax(block, axis=1).astype(np.int64)
                continue
            z = block[:, 0]
            x = _destandardize(z, c.mean, c.std)
            if c.kind.integer_valued:
                near = np.round(x)
                snap = np.abs(x - near) <= 1e-9 * np.maximum(1.0, np.abs(near))
                x = np.where(snap, near, x)
            if clamp:
                x = np.clip(x, c.kind.min, c.kind.max)
            if round_integers and c.kind.integer_valued:
                x = np.where(x >= 0, np.floor(x + 0.5), np.ceil(x - 0.5))
            if c.kind.integer_valued and not np.all(x == np.round(x)):
                strict = False
            if x.size and (x.min() < c.kind.min or x.max() > c.kind.max):
                strict = False
            cols[c.name] = x + 0.0
        return Table(self.schema, cols, strict=strict)


def _destandardize(z: np.ndarray, mean: float, std: float) -> np.ndarray:
    """Invert (x - mean) / std so that re-encoding gives back ``z`` bit-for-bit.

    Several floats can share one standardized value; the shortest decimal among
    them is preferred so that CSV-sourced values come back unchanged.
    """
    x0 = z * std + mean
    x = x0.copy()
    todo = np.ones(z.shape, dtype=bool)
    for places in range(16):
        cand = np.round(x0, places)
        ok = todo & ((cand - mean) / std == z)
        x[ok] = cand[ok]
        todo &= ~ok
        if not todo.any():
            return x
    # otherwise nudge by a few ulps
    for i in np.flatnonzero(todo & ((x0 - mean) / std != z)):
        lo = hi = x0[i]
        for _ in range(4):
            lo = np.nextafter(lo, -np.inf)
            hi = np.nextafter(hi, np.inf)
            hit = [v for v in (lo, hi) if (v - mean) / std == z[i]]
            if hit:
                x[i] = hit[0]
                break
    return x


@dataclass(frozen=True, eq=False)
class EncodedMatrix:
    data: np.ndarray
    encoding: Encoding

    @property
    def source_schema(self) -> Schema:
        return self.encoding.schema

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


def fit_encoding(table: Table) -> EncodedMatrix:
    """One-hot categoricals (0/1 indicators stay single columns) and standardize
    continuous columns with the table's own population mean/stddev."""
    if table.n_rows == 0:
        raise DomainError("cannot fit an encoding on an empty table")
    cols = []
    start = 0
    for name, kind in table.schema.columns:
        if isinstance(kind, Categorical):
            width = 1 if kind.binary else len(kind.levels)
            cols.append(ColumnEncoding(name, kind, start, width))
        else:
            vals = table[name]
            mean = float(vals.mean())
            std = float(vals.std())
            if std == 0.0:
                std = 1.0
            cols.append(ColumnEncoding(name, kind, start, 1, mean, std))
            width = 1
        start += width
    enc = Encoding(table.schema, tuple(cols))
    return EncodedMatrix(enc.transform(table), enc)


def encode(table: Table, encoding: Encoding) -> EncodedMatrix:
    return EncodedMatrix(encoding.transform(table), encoding)


def decode(matrix: EncodedMatrix, clamp: bool = False, round_integers: bool = False) -> Table:
    """Invert an encoding: argmax one-hot groups (ties to the lowest index),
    de-standardize, optionally clip to schema bounds and round integer columns
    half away from zero."""
    return matrix.encoding.inverse(matrix.data, clamp=clamp, round_integers=round_integers)


# --------------------------------------------------------------------------- stand-in data

RACE_PROBS = (0.07, 0.19, 0.32, 0.26, 0.16)
EDUCATION_PROBS = (0.18, 0.20, 0.22, 0.22, 0.12, 0.06)
LUNCH_STANDARD_P = 0.64  # lunch == "1" is the standard lunch
TEST_PREP_COMPLETED_P = 0.33

# mean score profile (math, reading, writing, science) per race group
_RACE_PROFILE = np.array(
    [
        [40.0, 70.0, 55.0, 45.0],
        [55.0, 45.0, 70.0, 60.0],
        [70.0, 60.0, 45.0, 75.0],
        [50.0, 80.0, 75.0, 40.0],
        [80.0, 50.0, 60.0, 55.0],
    ]
)


def seed_dataset(n_rows: int, seed: int, total_is_sum: bool = True) -> Table:
    """Deterministic stand-in for the student-performance data.

    Categorical marginals follow the published proportions; the four subject
    scores share a latent ability term, shift with race group, lunch, test
    preparation and parental education, and are truncated to [0, 100] by
    redrawing. ``total_score`` is the sum of the four subjects unless
    ``total_is_sum`` is False, in which case it is drawn around that sum.
    """
    if n_rows < 1:
        raise DomainError("n_rows must be >= 1")
    rng = np.random.default_rng(seed)
    gender = rng.integers(0, 2, n_rows)
    race = rng.choice(5, size=n_rows, p=RACE_PROBS)
    edu = rng.choice(6, size=n_rows, p=EDUCATION_PROBS)
    lunch = (rng.random(n_rows) < LUNCH_STANDARD_P).astype(np.int64)
    prep = (rng.random(n_rows) < TEST_PREP_COMPLETED_P).astype(np.int64)
    ability = rng.normal(0.0, 6.0, n_rows)

    mean = _RACE_PROFILE[race] + (ability + 3.0 * lunch + 4.0 * prep + 1.0 * edu)[:, None]
    mean += np.where(gender == 1, 2.0, -2.0)[:, None] * np.array([-1.0, 1.0, 1.0, -1.0])
    scores = np.rint(mean + rng.normal(0.0, 5.0, mean.shape))
    bad = (scores < 0) | (scores > 100)
    while bad.any():
        scores[bad] = np.rint(mean[bad] + rng.normal(0.0, 5.0, int(bad.sum())))
        bad = (scores < 0) | (scores > 100)

    total = scores.sum(axis=1)
    if not total_is_sum:
        total = np.clip(np.rint(total + rng.normal(0.0, 20.0, n_rows)), 0, 400)

    schema = student_schema()
    data = {
        "gender": gender,
        "race_ethnicity": race,
        "parental_education": edu,
        "lunch": lunch,
        "test_prep": prep,
        "total_score": total,
    }
    for j, s in enumerate(SUBJECTS):
        data[s] = scores[:, j]
    return Table(schema, data)

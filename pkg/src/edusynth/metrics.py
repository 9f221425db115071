"""Distributional-fidelity and privacy metrics for real/synthetic table pairs."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .dataset import Categorical, DomainError, Schema, Table

# below this n*m the two-sample KS p-value is computed exactly
EXACT_KS_MAX_NM = 10000
JSD_BINS = 20


def _sample(x, name: str = "sample") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.size == 0:
        raise DomainError(f"{name} is empty")
    return arr


@dataclass(frozen=True)
class EmpiricalCDF:
    values: np.ndarray

    @classmethod
    def of(cls, x) -> "EmpiricalCDF":
        return cls(np.sort(_sample(x)))

    @property
    def n(self) -> int:
        return self.values.size

    def __call__(self, x) -> np.ndarray:
        return np.searchsorted(self.values, x, side="right") / self.n


# --------------------------------------------------------------------------- KS


def kolmogorov_sf(lam: float, tol: float = 1e-12) -> float:
    """Asymptotic Kolmogorov survival function 2 * sum (-1)^(k-1) exp(-2 k^2 lam^2)."""
    if lam <= 0.0:
        return 1.0
    total = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        total += term if k % 2 else -term
        if term < tol:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


def _ks_exact_sf(n: int, m: int, d: float) -> float:
    """P(D >= d) for continuous samples, by counting monotone lattice paths that
    stay strictly inside |i/n - j/m| < d."""
    # probabilities of reaching (i, j) along a uniformly random path, kept bounded
    d = d - 1e-12
    row = np.zeros(m + 1)
    row[0] = 1.0
    j = np.arange(m + 1)
    inside = np.abs(0 / n - j / m) < d
    for jj in range(1, m + 1):
        row[jj] = row[jj - 1] * (m - jj + 1) / (n + m - jj + 1) if inside[jj] else 0.0
    row[~inside] = 0.0
    for i in range(1, n + 1):
        new = np.zeros(m + 1)
        ok = np.abs(i / n - j / m) < d
        # step from (i-1, j) uses weight of choosing an x next; from (i, j-1) a y next
        for jj in range(m + 1):
            if not ok[jj]:
                continue
            remaining = n + m - (i - 1) - jj
            v = row[jj] * (n - i + 1) / remaining
            if jj:
                rem2 = n + m - i - (jj - 1)
                v += new[jj - 1] * (m - jj + 1) / rem2
            new[jj] = v
        row = new
    return min(1.0, max(0.0, 1.0 - row[m]))


def ks_test(real_col, synth_col) -> tuple[float, float]:
    """Two-sample KS statistic D = sup |F_n - G_m| and its two-sided p-value.

    D is evaluated at every pooled sample point, so it is exact. The p-value is
    exact (lattice-path count) when ``n * m <= EXACT_KS_MAX_NM`` and otherwise
    comes from the asymptotic Kolmogorov distribution at
    ``lam = D * sqrt(n m / (n + m))``.
    """
    a = np.sort(_sample(real_col, "real sample"))
    b = np.sort(_sample(synth_col, "synthetic sample"))
    n, m = a.size, b.size
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / n
    fb = np.searchsorted(b, pooled, side="right") / m
    d = float(np.max(np.abs(fa - fb)))
    if d == 0.0:
        return 0.0, 1.0
    if n * m <= EXACT_KS_MAX_NM:
        return d, _ks_exact_sf(n, m, d)
    return d, kolmogorov_sf(d * math.sqrt(n * m / (n + m)))


# --------------------------------------------------------------------------- JSD


@dataclass(frozen=True)
class Histogram:
    edges: Optional[np.ndarray]
    p: np.ndarray
    q: np.ndarray


def shared_histogram(real_col, synth_col, bins: int = JSD_BINS, categorical: bool = False) -> Histogram:
    a = _sample(real_col, "real sample")
    b = _sample(synth_col, "synthetic sample")
    if categorical:
        cats = np.union1d(a, b)
        p = np.array([(a == c).sum() for c in cats], dtype=np.float64) / a.size
        q = np.array([(b == c).sum() for c in cats], dtype=np.float64) / b.size
        return Histogram(None, p, q)
    if bins < 2:
        raise DomainError("need at least 2 bins")
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi == lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    p = np.histogram(a, bins=edges)[0] / a.size
    q = np.histogram(b, bins=edges)[0] / b.size
    return Histogram(edges, p, q)


def jsd_masses(p, q) -> float:
    """Base-2 Jensen-Shannon divergence of two probability vectors."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    mix = 0.5 * (p + q)

    def kl(x):
        pos = x > 0
        return float(np.sum(x[pos] * np.log2(x[pos] / mix[pos])))

    return float(min(1.0, max(0.0, 0.5 * kl(p) + 0.5 * kl(q))))


def js_divergence(real_col, synth_col, bins: int = JSD_BINS, categorical: bool = False) -> float:
    """JSD over shared equal-width bins (continuous) or category masses."""
    h = shared_histogram(real_col, synth_col, bins, categorical)
    return jsd_masses(h.p, h.q)


# --------------------------------------------------------------------------- Wasserstein


def wasserstein1(real_col, synth_col) -> float:
    """1-D Wasserstein-1 distance: integral of |F_n - G_m| over the merged support."""
    a = np.sort(_sample(real_col, "real sample"))
    b = np.sort(_sample(synth_col, "synthetic sample"))
    pooled = np.sort(np.concatenate([a, b]))
    widths = np.diff(pooled)
    fa = np.searchsorted(a, pooled[:-1], side="right") / a.size
    fb = np.searchsorted(b, pooled[:-1], side="right") / b.size
    return float(np.sum(np.abs(fa - fb) * widths))


# --------------------------------------------------------------------------- table-level


def _check_schemas(real: Table, synth: Table) -> Schema:
    if real.schema.columns != synth.schema.columns:
        raise DomainError("real and synthetic tables have different schemas")
    if real.n_rows == 0 or synth.n_rows == 0:
        raise DomainError("tables must be non-empty")
    return real.schema


def categorical_fidelity(real: Table, synth: Table) -> float:
    """Mean over categorical columns of 1 - total variation distance."""
    schema = _check_schemas(real, synth)
    scores = []
    for name in schema.categorical_names:
        n_lv = len(schema.kind(name).levels)
        p = np.bincount(real[name], minlength=n_lv) / real.n_rows
        q = np.bincount(synth[name], minlength=n_lv) / synth.n_rows
        scores.append(1.0 - 0.5 * float(np.abs(p - q).sum()))
    return float(np.mean(scores)) if scores else 1.0


def _dcr_features(table: Table, lo: dict, span: dict) -> np.ndarray:
    blocks = []
    for name, kind in table.schema.columns:
        if isinstance(kind, Categorical):
            onehot = np.zeros((table.n_rows, len(kind.levels)))
            onehot[np.arange(table.n_rows), table[name]] = 1.0 / math.sqrt(2.0)
            blocks.append(onehot)
        else:
            blocks.append(((table[name] - lo[name]) / span[name])[:, None])
    return np.hstack(blocks)


def nearest_distances(query: np.ndarray, ref: np.ndarray, exclude_self: bool = False, chunk: int = 512):
    """Euclidean distance from every query row to its nearest reference row."""
    ref_sq = (ref * ref).sum(axis=1)
    out = np.empty(len(query))
    for s in range(0, len(query), chunk):
        q = query[s : s + chunk]
        d2 = (q * q).sum(axis=1)[:, None] + ref_sq[None, :] - 2.0 * q @ ref.T
        if exclude_self:
            d2[np.arange(len(q)), s + np.arange(len(q))] = np.inf
        best = np.argmin(d2, axis=1)
        # recompute the winner directly so exact copies give exactly 0
        diff = q - ref[best]
        out[s : s + chunk] = np.sqrt((diff * diff).sum(axis=1))
    return out


def dcr_score(real: Table, synth: Table) -> float:
    """Mean distance-to-closest-real-record, normalised by the mean
    nearest-other-record distance inside the real table and capped at 1.

    Continuous columns are min-max scaled by the real data; categorical columns
    are one-hot scaled by 1/sqrt(2), so one category mismatch costs 1.
    """
    schema = _check_schemas(real, synth)
    lo, span = {}, {}
    for name in schema.continuous_names:
        lo[name] = float(real[name].min())
        rng = float(real[name].max()) - lo[name]
        span[name] = rng if rng > 0 else 1.0
    xr = _dcr_features(real, lo, span)
    xs = _dcr_features(synth, lo, span)
    raw = float(nearest_distances(xs, xr).mean())
    if real.n_rows < 2:
        return 0.0 if raw == 0.0 else 1.0
    ref = float(nearest_distances(xr, xr, exclude_self=True).mean())
    if ref == 0.0:
        return 0.0 if raw == 0.0 else 1.0
    return float(min(1.0, raw / ref))


@dataclass
class ColumnFidelity:
    jsd: float
    ks: Optional[float] = None
    ks_pvalue: Optional[float] = None
    wasserstein: Optional[float] = None


@dataclass
class FidelityReport:
    columns: dict[str, ColumnFidelity] = field(default_factory=dict)
    mean_ks: float = 0.0
    mean_wasserstein: float = 0.0
    mean_jsd: float = 0.0
    categorical_fidelity: float = 1.0
    dcr_score: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FidelityReport":
        cols = {k: ColumnFidelity(**v) for k, v in d["columns"].items()}
        return cls(cols, **{k: v for k, v in d.items() if k != "columns"})


def fidelity_report(real: Table, synth: Table, bins: int = JSD_BINS) -> FidelityReport:
    """Per-column KS/JSD/Wasserstein plus aggregates. KS and Wasserstein average
    over continuous columns (original units); JSD over all columns."""
    schema = _check_schemas(real, synth)
    cols: dict[str, ColumnFidelity] = {}
    for name, kind in schema.columns:
        if isinstance(kind, Categorical):
            cols[name] = ColumnFidelity(js_divergence(real[name], synth[name], categorical=True))
        else:
            d, p = ks_test(real[name], synth[name])
            cols[name] = ColumnFidelity(
                js_divergence(real[name], synth[name], bins=bins),
                d,
                p,
                wasserstein1(real[name], synth[name]),
            )
    cont = [cols[n] for n in schema.continuous_names]
    return FidelityReport(
        columns=cols,
        mean_ks=float(np.mean([c.ks for c in cont])) if cont else 0.0,
        mean_wasserstein=float(np.mean([c.wasserstein for c in cont])) if cont else 0.0,
        mean_jsd=float(np.mean([c.jsd for c in cols.values()])),
        categorical_fidelity=categorical_fidelity(real, synth),
        dcr_score=dcr_score(real, synth),
    )

"""Derived tables from the files written by :func:`experiment.run`."""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..analysis import (AnalysisError, PeriodDistribution, TimeSeries, ensemble_stats,
                        period_lengths, variance_vs_delta)
from ..lineage import AncestorCensusSeries, CensusTooShort, classify_decay
from .experiment import SWEEP_AXES
from .io import REQUIRED_TIMESERIES, SchemaError, read_table, write_table

MODES = ("extremum_gap", "peak_to_peak")


@dataclass(frozen=True)
class AnalysisSpec:
    window: int = 40
    period_column: str = "live_fraction"
    census_cutoff: float = 100.0
    census_threshold: float = 0.9

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be positive")


@dataclass
class Source:
    name: str
    path: Path
    sweep_index: int = -1
    delta: Optional[float] = None


def discover(inputs) -> list:
    """Resolve inputs (run directories, manifests or timeseries CSVs) to sources."""
    sources = []
    for item in inputs:
        item = Path(item)
        manifest = item / "manifest.json" if item.is_dir() else item
        if manifest.suffix == ".json":
            if not manifest.exists():
                raise FileNotFoundError(manifest)
            m = json.loads(manifest.read_text(encoding="utf-8"))
            base = m["spec"]["base"]
            deltas = m["spec"].get("sweep", {}).get("delta")
            for r in m["runs"]:
                ts = [f for f in r["files"] if f.endswith("_timeseries.csv")][0]
                delta = base["delta"]
                if deltas:
                    delta = _point_delta(m["spec"], r["sweep_index"])
                sources.append(Source(ts, manifest.parent / ts, r["sweep_index"], float(delta)))
        else:
            if not item.exists():
                raise FileNotFoundError(item)
            sources.append(Source(item.name, item))
    if not sources:
        raise AnalysisError("no timeseries inputs found")
    return sources


def _point_delta(spec: dict, sweep_index: int) -> float:
    # mirrors ExperimentSpec.points(): cartesian product, last axis fastest
    axes = [a for a in SWEEP_AXES if a in spec["sweep"]]
    sizes = [len(spec["sweep"][a]) for a in axes]
    idx = sweep_index
    pick = {}
    for a, n in zip(reversed(axes), reversed(sizes)):
        pick[a] = spec["sweep"][a][idx % n]
        idx //= n
    return float(pick["delta"])


def _series(table, column, source) -> TimeSeries:
    if column not in table:
        raise SchemaError(source.path, column)
    try:
        return TimeSeries(table["t"], table[column])
    except ValueError as e:
        raise AnalysisError(f"{source.path}: {e}") from None


def analyze(inputs, out, spec: AnalysisSpec = AnalysisSpec()) -> list:
    """Write periods.csv, census_fit.csv, ensemble_stats.csv and, for Δ
    sweeps, variance_vs_delta.csv. Returns the written file names."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    sources = discover(inputs)
    tables = [read_table(s.path, REQUIRED_TIMESERIES + ("distinct_labels",)) for s in sources]

    period_rows = []
    pooled = {mode: {} for mode in MODES}
    for src, table in zip(sources, tables):
        raw = _series(table, spec.period_column, src)
        for mode in MODES:
            dist = period_lengths(raw, spec.window, mode)
            for i, length in enumerate(dist.lengths):
                period_rows.append([src.name, mode, "period", i, length, "", "", "", ""])
            period_rows.append([src.name, mode, "summary", "", "", len(dist), dist.mean,
                                dist.variance, dist.skewness])
            pooled[mode].setdefault(src.delta, []).append(dist.lengths)
    write_table(out / "periods.csv",
                ["source", "mode", "kind", "index", "length", "count", "mean", "variance",
                 "skewness"], period_rows)
    written = ["periods.csv"]

    census_rows = []
    for src, table in zip(sources, tables):
        census = AncestorCensusSeries(table["t"], table["distinct_labels"])
        try:
            fit = classify_decay(census, spec.census_cutoff, spec.census_threshold)
            census_rows.append([src.name, fit.form, fit.exponent_or_rate, fit.fit_quality])
        except CensusTooShort:
            census_rows.append([src.name, "too_short", float("nan"), float("nan")])
    write_table(out / "census_fit.csv", ["source", "form", "exponent_or_rate", "fit_quality"],
                census_rows)
    written.append("census_fit.csv")

    groups = {}
    for src, table in zip(sources, tables):
        groups.setdefault(src.sweep_index, []).append(table)
    stat_rows = []
    for idx in sorted(groups):
        for col in ("live_fraction", "mean_price", "unsatisfied_demand"):
            vals = []
            for table in groups[idx]:
                x = table[col][np.isfinite(table[col])]
                vals.append(float(x.mean()) if x.size else math.nan)
            if len(vals) >= 2:
                st = ensemble_stats(vals)
                stat_rows.append([idx, col, st.n, st.mean, st.std, st.standard_error])
            else:
                stat_rows.append([idx, col, 1, vals[0], math.nan, math.nan])
    write_table(out / "ensemble_stats.csv",
                ["sweep_index", "column", "n", "mean", "std", "standard_error"], stat_rows)
    written.append("ensemble_stats.csv")

    deltas = {s.delta for s in sources}
    if None not in deltas and len(deltas) > 1:
        rows = []
        for mode in MODES:
            dists = {d: PeriodDistribution(np.concatenate(v), mode)
                     for d, v in pooled[mode].items()}
            rows += [[mode, d, var] for d, var in variance_vs_delta(dists)]
        write_table(out / "variance_vs_delta.csv", ["mode", "delta", "variance"], rows)
        written.append("variance_vs_delta.csv")
    return written

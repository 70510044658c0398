"""Time-series post-processing: smoothing, cycle periods, histograms, ensembles."""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class AnalysisError(ValueError):
    """An analysis precondition failed (series too short, too few cycles...)."""


class InsufficientCycles(AnalysisError):
    pass


@dataclass(frozen=True)
class TimeSeries:
    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("t and values must be 1-d and of equal length")
        if t.size > 1 and not np.all(np.diff(t) == 1.0):
            raise ValueError("t must increase in unit steps without gaps")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, values, t0: float = 0.0) -> "TimeSeries":
        values = np.asarray(values, dtype=np.float64)
        return cls(t0 + np.arange(values.size, dtype=np.float64), values)

    def __len__(self):
        return self.values.size


def moving_average(series: TimeSeries, window: int) -> TimeSeries:
    """Centered moving average, ``len(series) - window + 1`` points.

    Each output is stamped with the time of the window centre, rounded down
    for even windows. Averages are taken as offsets from the window's first
    sample and clipped to the window's range, so a constant input comes back
    bit-for-bit and no output leaves [min, max] through rounding.
    """
    if window < 1:
        raise ValueError("window must be positive")
    if len(series) < window:
        raise AnalysisError(f"series of length {len(series)} is shorter than window {window}")
    win = sliding_window_view(series.values, window)
    ref = win[:, 0]
    avg = ref + (win - ref[:, None]).sum(axis=1) / window
    avg = np.clip(avg, win.min(axis=1), win.max(axis=1))
    start = (window - 1) // 2
    return TimeSeries(series.t[start:start + avg.size], avg)


def _extrema(values: np.ndarray):
    """Positions (sample units) and kinds (+1 max, -1 min) of derivative zeros."""
    d = np.diff(values)
    nz = np.flatnonzero(d)
    if nz.size < 2:
        return np.empty(0), np.empty(0, dtype=np.int64)
    sign = np.sign(d[nz])
    change = np.flatnonzero(sign[:-1] != sign[1:])
    a = nz[change]      # last nonzero difference before the turn
    b = nz[change + 1]  # first nonzero difference after it
    # samples a+1 .. b form the (possibly one-sample) plateau at the turn
    pos = (a + 1 + b) / 2.0
    kind = np.where(sign[change] > 0, 1, -1)
    return pos, kind


def extrema_positions(series: TimeSeries) -> np.ndarray:
    """Times at which the first difference changes sign.

    A flat run between a rise and a fall (or fall and rise) counts once, at
    its midpoint; flat runs inside a monotone stretch are not extrema.
    """
    if len(series) < 3:
        raise AnalysisError("need at least 3 samples")
    pos, _ = _extrema(series.values)
    return series.t[0] + pos


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    density: np.ndarray
    stderr: Optional[np.ndarray] = None

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


@dataclass(frozen=True)
class PeriodDistribution:
    lengths: np.ndarray
    mode: str = "extremum_gap"
    mean: float = field(init=False)
    variance: float = field(init=False)
    skewness: float = field(init=False)

    def __post_init__(self):
        x = np.asarray(self.lengths, dtype=np.float64)
        object.__setattr__(self, "lengths", x)
        object.__setattr__(self, "mean", float(x.mean()))
        object.__setattr__(self, "variance", float(x.var(ddof=1)) if x.size > 1 else 0.0)
        object.__setattr__(self, "skewness", sample_skewness(x))

    def __len__(self):
        return self.lengths.size

    def histogram(self, bin_width: float = 10.0) -> Histogram:
        top = self.lengths.max()
        edges = np.arange(0.0, top + bin_width, bin_width)
        if edges[-1] <= top:
            edges = np.append(edges, edges[-1] + bin_width)
        counts, _ = np.histogram(self.lengths, bins=edges)
        return Histogram(edges, counts / (counts.sum() * bin_width))


def sample_skewness(x) -> float:
    """Moment coefficient g1 = m3 / m2**1.5 (0 for a degenerate sample)."""
    x = np.asarray(x, dtype=np.float64)
    dev = x - x.mean()
    m2 = (dev ** 2).mean()
    if m2 == 0.0:
        return 0.0
    return float((dev ** 3).mean() / m2 ** 1.5)


def period_lengths(raw: TimeSeries, window: int = 40,
                   mode: str = "extremum_gap") -> PeriodDistribution:
    """Cycle lengths from a raw series: smooth, find turning points, difference.

    ``extremum_gap`` gives the distance between consecutive turning points
    (max to min or min to max); ``peak_to_peak`` gives the distance between
    consecutive maxima.
    """
    if mode not in ("extremum_gap", "peak_to_peak"):
        raise ValueError(f"unknown mode {mode!r}")
    smooth = moving_average(raw, window)
    if len(smooth) < 3:
        raise InsufficientCycles("smoothed series has fewer than 3 samples")
    pos, kind = _extrema(smooth.values)
    if pos.size < 3:
        raise InsufficientCycles(f"found {pos.size} turning points, need at least 3")
    if mode == "extremum_gap":
        lengths = np.diff(pos)
    else:
        lengths = np.diff(pos[kind > 0])
        if lengths.size == 0:
            raise InsufficientCycles("fewer than two maxima")
    return PeriodDistribution(lengths, mode)


def upswing_downswing(series: TimeSeries, window: int = 40) -> tuple:
    """Mean rise time (min to next max) and mean fall time (max to next min)."""
    smooth = moving_average(series, window)
    pos, kind = _extrema(smooth.values)
    gaps = np.diff(pos)
    rising = kind[:-1] < 0
    if not rising.any() or rising.all():
        raise InsufficientCycles("need at least one rise and one fall")
    return float(gaps[rising].mean()), float(gaps[~rising].mean())


def _price_density(prices: np.ndarray, bin_width: float, n_bins: int) -> np.ndarray:
    if prices.size == 0:
        raise AnalysisError("snapshot has no live sellers")
    k = np.floor(prices / bin_width).astype(np.int64)
    counts = np.bincount(k, minlength=n_bins)[:n_bins]
    return counts / (prices.size * bin_width)


def _prices_of(snapshot) -> np.ndarray:
    if hasattr(snapshot, "live_prices"):
        return snapshot.live_prices()
    return np.asarray(snapshot, dtype=np.float64)


def price_histogram(snapshots, bin_width: float = 0.02, time_average: bool = False,
                    stride: int = 1) -> Histogram:
    """Probability density of live-seller prices in bins [k*w, (k+1)*w).

    ``snapshots`` holds MarketStates or arrays of live prices. Without
    ``time_average`` all prices are pooled into one density. With it, every
    ``stride``-th snapshot gets its own density and the result is the per-bin
    mean with its standard error across snapshots.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if hasattr(snapshots, "live_prices") or (
            isinstance(snapshots, np.ndarray) and snapshots.ndim == 1):
        snapshots = [snapshots]
    prices = [_prices_of(s) for s in snapshots]
    if not prices or all(p.size == 0 for p in prices):
        raise AnalysisError("need at least one snapshot with a live seller")
    top = max(p.max() for p in prices if p.size)
    n_bins = int(np.floor(top / bin_width)) + 1
    edges = np.arange(n_bins + 1) * bin_width
    if not time_average:
        return Histogram(edges, _price_density(np.concatenate(prices), bin_width, n_bins))
    dens = np.array([_price_density(p, bin_width, n_bins) for p in prices[::stride]])
    if dens.shape[0] > 1:
        se = dens.std(axis=0, ddof=1) / np.sqrt(dens.shape[0])
    else:
        se = np.full(n_bins, np.nan)
    return Histogram(edges, dens.mean(axis=0), se)


@dataclass(frozen=True)
class EnsembleStats:
    mean: float
    std: float
    standard_error: float
    n: int


def ensemble_stats(values: Sequence[float]) -> EnsembleStats:
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        raise AnalysisError("need at least two values")
    std = float(x.std(ddof=1))
    return EnsembleStats(float(x.mean()), std, std / np.sqrt(x.size), int(x.size))


def variance_vs_delta(results) -> list:
    """``[(delta, variance), ...]`` sorted by delta from {delta: PeriodDistribution}."""
    items = results.items() if hasattr(results, "items") else results
    return sorted((float(d), float(dist.variance)) for d, dist in items)


def capacity_correlation(live_fraction, mean_price) -> float:
    """Pearson correlation of live fraction with mean_price / 2.

    A soft diagnostic: demand at mean price P supports about P/2 sellers.
    """
    lf = np.asarray(live_fraction, dtype=np.float64)
    mp = np.asarray(mean_price, dtype=np.float64)
    ok = np.isfinite(lf) & np.isfinite(mp)
    if ok.sum() < 3:
        return float("nan")
    return float(np.corrcoef(lf[ok], mp[ok] / 2.0)[0, 1])

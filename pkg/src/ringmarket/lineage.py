"""Franchise (ancestry label) census.

Every seller gets label ``i`` at site ``i`` when the market starts and
newcomers inherit the label of the seller they copied, so a label identifies
a franchise: all live sellers descended from one founder.
"""

from dataclasses import dataclass

import numpy as np

from .market import MarketState


class CensusTooShort(ValueError):
    """The census series does not satisfy the fit preconditions."""


@dataclass(frozen=True)
class FranchiseRecord:
    label: int
    size_fraction: float  # members / N
    mean_price: float


@dataclass(frozen=True)
class AncestorCensusSeries:
    t: np.ndarray
    count: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        c = np.asarray(self.count, dtype=np.float64)
        if t.shape != c.shape or t.ndim != 1:
            raise ValueError("t and count must be 1-d arrays of equal length")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "count", c)


@dataclass(frozen=True)
class DecayFit:
    form: str  # "exponential", "power_law" or "indeterminate"
    exponent_or_rate: float
    fit_quality: float  # R^2 of the better of the two fits


def ancestor_census(state: MarketState) -> int:
    return int(np.unique(state.label[state.live_mask]).size)


def franchise_table(state: MarketState) -> list:
    """One record per live label, largest franchise first (ties by label)."""
    mask = state.live_mask
    labels = state.label[mask]
    if labels.size == 0:
        return []
    uniq, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    price_sum = np.bincount(inverse, weights=state.price[mask])
    order = np.lexsort((uniq, -counts))
    return [FranchiseRecord(int(uniq[i]), counts[i] / state.n, price_sum[i] / counts[i])
            for i in order]


def _r2(y, resid_ss):
    total = float(((y - y.mean()) ** 2).sum())
    if total == 0.0:
        return 0.0
    return 1.0 - resid_ss / total


def _linfit(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float((resid ** 2).sum())


def classify_decay(census: AncestorCensusSeries, cutoff: float = 100,
                   threshold: float = 0.9, min_points: int = 20) -> DecayFit:
    """Decide whether the distinct-ancestor count decays exponentially or as a power law.

    Both ``log(count) ~ t`` and ``log(count) ~ log(t)`` are least-squares fitted
    over ``t >= cutoff``; the one with the smaller residual sum of squares wins.
    The reported parameter is the decay rate (exponential) or the positive
    exponent (power law). When neither fit reaches R^2 ``threshold`` the form
    is ``indeterminate``.
    """
    t, c = census.t, census.count
    w = (t >= cutoff) & (t > 0) & (c > 0)
    t, c = t[w], c[w]
    if t.size < min_points:
        raise CensusTooShort(f"{t.size} usable points after t >= {cutoff}, need {min_points}")
    if t.max() < 10 * t.min():
        raise CensusTooShort(f"window [{t.min()}, {t.max()}] spans less than one decade")
    y = np.log(c)
    exp_slope, exp_rss = _linfit(t, y)
    pl_slope, pl_rss = _linfit(np.log(t), y)
    if pl_rss <= exp_rss:
        form, param, r2 = "power_law", -pl_slope, _r2(y, pl_rss)
    else:
        form, param, r2 = "exponential", -exp_slope, _r2(y, exp_rss)
    if r2 < threshold:
        return DecayFit("indeterminate", param, r2)
    return DecayFit(form, param, r2)

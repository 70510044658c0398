"""Ring market state and the continuous-time timestep.

``N`` seller sites sit on a ring with a buyer between each neighbouring pair;
buyer ``i`` sees sites ``i`` and ``(i + 1) % N``. A continuous timestep is N
micro-iterations (one overhead draw, one purchase) followed by bankruptcy,
repopulation and the price-history update.

The heavy lifting happens in :mod:`ringmarket._kernel`; the functions here
wrap the same compiled helpers so that stepping by hand with
:func:`overhead_draw` / :func:`resolve_purchase` / :func:`bankruptcy_phase`
consumes random numbers exactly like :func:`run_timestep`.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from . import _kernel as K
from .params import BERTRAND_PRICE, ModelParams, OverheadPool, PricePolicy, Scheme
from .rng import seed_state, uniform01

COLUMNS = K.COLUMNS


@njit(cache=True)
def _initial_prices(rng, out, p_max):
    for i in range(out.shape[0]):
        out[i] = p_max * uniform01(rng)


@dataclass(frozen=True)
class SellerSite:
    live: bool
    price: float
    capital: float
    label: int
    history: tuple

    @property
    def occupancy(self) -> str:
        return "live" if self.live else "vacant"


@dataclass(frozen=True)
class Ledger:
    overheads_paid: int
    revenue: float
    sales: int
    unsatisfied: int
    births: int
    deaths: int
    write_off: float  # sum of the (negative) capitals removed by bankruptcy


@dataclass(frozen=True)
class StepMetrics:
    """One row of the per-timestep series.

    ``mean_price`` and ``mean_capital`` are None when no seller is live.
    """

    t: int
    live_fraction: float
    mean_price: Optional[float]
    mean_capital: Optional[float]
    unsatisfied_demand: float
    births: int
    deaths: int
    revenue: float
    overheads_paid_total: float
    sales: int
    overheads_paid: int
    write_off: float
    distinct_labels: int

    @property
    def defined(self) -> bool:
        return self.mean_price is not None

    @classmethod
    def from_row(cls, row) -> "StepMetrics":
        r = dict(zip(COLUMNS, (float(x) for x in row)))

        def opt(x):
            return None if math.isnan(x) else x

        return cls(
            t=int(r["t"]), live_fraction=r["live_fraction"],
            mean_price=opt(r["mean_price"]), mean_capital=opt(r["mean_capital"]),
            unsatisfied_demand=r["unsatisfied_demand"], births=int(r["births"]),
            deaths=int(r["deaths"]), revenue=r["revenue"],
            overheads_paid_total=r["overheads"], sales=int(r["sales"]),
            overheads_paid=int(r["overhead_count"]), write_off=r["write_off"],
            distinct_labels=int(r["distinct_labels"]))


class SaleOutcome:
    """Result of one purchase attempt: ``site``/``price`` are None when unsatisfied."""

    __slots__ = ("site", "price")

    def __init__(self, site=None, price=None):
        self.site = site
        self.price = price

    @property
    def sold(self) -> bool:
        return self.site is not None

    def __eq__(self, other):
        return isinstance(other, SaleOutcome) and (self.site, self.price) == (other.site, other.price)

    def __repr__(self):
        if self.sold:
            return f"SaleOutcome(sold site={self.site} price={self.price})"
        return "SaleOutcome(unsatisfied)"


class MarketState:
    """Seller sites, RNG stream, timestep counter and per-step ledger.

    Site data lives in parallel numpy arrays. ``hist`` holds each site's price
    history as a ring buffer of ``memory_length`` slots; it belongs to the site
    and survives turnover of the occupant.
    """

    def __init__(self, params, live, price, capital, label, hist, hist_len,
                 hist_next, rng, t=0):
        self.params = params
        self.live = live
        self.price = price
        self.capital = capital
        self.label = label
        self.hist = hist
        self.hist_len = hist_len
        self.hist_next = hist_next
        self.rng = rng
        self.t = t
        self.ledger_i = np.zeros(5, dtype=np.int64)
        self.ledger_f = np.zeros(2, dtype=np.float64)

    @property
    def n(self) -> int:
        return self.live.shape[0]

    @property
    def live_mask(self) -> np.ndarray:
        return self.live.astype(bool)

    @property
    def n_live(self) -> int:
        return int(self.live.sum())

    def live_prices(self) -> np.ndarray:
        return self.price[self.live_mask]

    def total_capital(self) -> float:
        return float(self.capital[self.live_mask].sum())

    def history_of(self, site: int) -> tuple:
        """Recorded prices of ``site``, oldest first."""
        m = self.hist.shape[1]
        k = int(self.hist_len[site])
        if k < m:
            return tuple(float(x) for x in self.hist[site, :k])
        nxt = int(self.hist_next[site])
        return tuple(float(x) for x in np.roll(self.hist[site], -nxt))

    def site(self, i: int) -> SellerSite:
        return SellerSite(bool(self.live[i]), float(self.price[i]),
                          float(self.capital[i]), int(self.label[i]),
                          self.history_of(i))

    @property
    def sites(self) -> list:
        return [self.site(i) for i in range(self.n)]

    @property
    def ledger(self) -> Ledger:
        li, lf = self.ledger_i, self.ledger_f
        return Ledger(int(li[K.OVERHEADS]), float(lf[K.REVENUE]), int(li[K.SALES]),
                      int(li[K.UNSATISFIED]), int(li[K.BIRTHS]), int(li[K.DEATHS]),
                      float(lf[K.WRITE_OFF]))

    def reset_ledger(self):
        self.ledger_i[:] = 0
        self.ledger_f[:] = 0.0

    def copy(self) -> "MarketState":
        out = MarketState(self.params, self.live.copy(), self.price.copy(),
                          self.capital.copy(), self.label.copy(), self.hist.copy(),
                          self.hist_len.copy(), self.hist_next.copy(),
                          self.rng.copy(), self.t)
        out.ledger_i[:] = self.ledger_i
        out.ledger_f[:] = self.ledger_f
        return out

    def arrays(self) -> dict:
        return {"live": self.live, "price": self.price, "capital": self.capital,
                "label": self.label, "hist": self.hist, "hist_len": self.hist_len,
                "hist_next": self.hist_next, "rng": self.rng}

    def equals(self, other: "MarketState") -> bool:
        """Bit-identical comparison of all state, RNG included."""
        if self.t != other.t or self.params != other.params:
            return False
        a, b = self.arrays(), other.arrays()
        return all(a[k].tobytes() == b[k].tobytes() for k in a)


def init_state(params: ModelParams) -> MarketState:
    """Fresh market: every site live at capital 0, label = site index.

    Prices are uniform on [0, p_max), drawn for sites 0..N-1 in order, or all
    1.0 under the fixed Bertrand policy (no draws consumed then).
    """
    if not isinstance(params, ModelParams):
        raise TypeError("params must be a ModelParams")
    n = params.n_sellers
    m = params.memory_length
    rng = seed_state(params.seed)
    price = np.empty(n, dtype=np.float64)
    if params.price_policy is PricePolicy.BERTRAND_FIXED:
        price[:] = BERTRAND_PRICE
    else:
        _initial_prices(rng, price, float(params.p_max))
    hist = np.zeros((n, m), dtype=np.float64)
    hist[:, 0] = price
    return MarketState(
        params,
        live=np.ones(n, dtype=np.uint8),
        price=price,
        capital=np.zeros(n, dtype=np.float64),
        label=np.arange(n, dtype=np.int64),
        hist=hist,
        hist_len=np.ones(n, dtype=np.int64),
        hist_next=np.full(n, 1 % m, dtype=np.int64),
        rng=rng,
    )


def _pool_mode(params):
    return K.POOL_LIVE if params.overhead_pool is OverheadPool.LIVE else K.POOL_SITES


def overhead_draw(state: MarketState, live_list=None) -> Optional[int]:
    """Charge one overhead. Returns the paying site, or None for a vacant draw.

    With ``overhead_pool="live"`` the payer is drawn from ``live_list``
    (defaults to the currently live sites).
    """
    mode = _pool_mode(state.params)
    if mode == K.POOL_LIVE and live_list is None:
        live_list = np.flatnonzero(state.live).astype(np.int64)
    if live_list is None:
        live_list = np.empty(0, dtype=np.int64)
    j = K.overhead_draw(state.rng, state.live, state.capital,
                        float(state.params.overhead), state.ledger_i,
                        live_list, len(live_list), mode)
    return None if j < 0 else int(j)


def resolve_purchase(state: MarketState, buyer_index: int) -> SaleOutcome:
    if not 0 <= buyer_index < state.n:
        raise IndexError(f"buyer_index {buyer_index} outside [0, {state.n})")
    k = K.resolve_purchase(state.rng, state.live, state.price, state.capital,
                           int(buyer_index), state.ledger_i, state.ledger_f)
    if k < 0:
        return SaleOutcome()
    return SaleOutcome(int(k), float(state.price[k]))


def mutate_price(rng, parent_price: float, delta: float) -> float:
    """Copy a price with mutation dp ~ U[-min(delta, parent), delta].

    ``rng`` is a MarketState or a raw generator state array.
    """
    if parent_price < 0 or delta < 0:
        raise ValueError("parent_price and delta must be nonnegative")
    s = rng.rng if isinstance(rng, MarketState) else rng
    return float(K.mutate_price(s, float(parent_price), float(delta)))


def repopulate(state: MarketState, fresh=None) -> int:
    """Refill vacant sites in ascending order; returns the number of births.

    ``fresh`` marks sites vacated in the current timestep. They are skipped
    unless ``immediate_refill`` is set.
    """
    p = state.params
    n = state.n
    if fresh is None:
        fresh = np.zeros(n, dtype=np.uint8)
    return int(K.repopulate(
        state.rng, state.live, state.price, state.capital, state.label,
        state.hist, state.hist_len, float(p.gamma), float(p.delta),
        p.island_count, float(p.coupling), p.memory_length,
        p.price_policy is PricePolicy.BERTRAND_FIXED, BERTRAND_PRICE,
        p.immediate_refill, fresh, np.empty(n, dtype=np.int64),
        np.empty(p.island_count + 1, dtype=np.int64),
        np.empty(2, dtype=np.int64), state.ledger_i))


def bankruptcy_phase(state: MarketState) -> tuple:
    """Vacate every live site with capital < 0, then repopulate.

    Returns ``(deaths, births)``.
    """
    fresh = np.zeros(state.n, dtype=np.uint8)
    deaths = int(K.vacate_bankrupt(state.live, state.capital, fresh,
                                   state.ledger_i, state.ledger_f))
    births = repopulate(state, fresh)
    return deaths, births


def record_history(state: MarketState):
    K.record_history(state.live, state.price, state.hist, state.hist_len,
                     state.hist_next)


def snapshot_metrics(state: MarketState) -> StepMetrics:
    row = np.empty(K.NCOL)
    island_row = np.empty(state.params.island_count)
    K.fill_metrics(state.t, state.live, state.price, state.capital, state.label,
                   float(state.params.overhead), state.ledger_i, state.ledger_f,
                   np.zeros(state.n, dtype=np.int64), state.params.island_count,
                   row, island_row)
    return StepMetrics.from_row(row)


class Trajectory:
    """Metrics rows for a run of timesteps plus per-island mean prices."""

    def __init__(self, table: np.ndarray, island_mean_price: np.ndarray):
        self.table = table
        self.island_mean_price = island_mean_price

    def __len__(self):
        return self.table.shape[0]

    def __getitem__(self, column: str) -> np.ndarray:
        return self.table[:, COLUMNS.index(column)]

    def rows(self):
        return [StepMetrics.from_row(r) for r in self.table]

    @classmethod
    def concat(cls, parts) -> "Trajectory":
        parts = list(parts)
        return cls(np.concatenate([p.table for p in parts]),
                   np.concatenate([p.island_mean_price for p in parts]))


def advance(state: MarketState, n_steps: int) -> Trajectory:
    """Run ``n_steps`` timesteps of the state's scheme in compiled code."""
    p = state.params
    out = np.empty((n_steps, K.NCOL))
    island_out = np.empty((n_steps, p.island_count))
    K.run_steps(state.rng, state.live, state.price, state.capital, state.label,
                state.hist, state.hist_len, state.hist_next, state.t, n_steps,
                p.scheme is Scheme.DISCRETE, float(p.gamma), float(p.delta),
                float(p.overhead), p.island_count, float(p.coupling),
                p.memory_length, p.price_policy is PricePolicy.BERTRAND_FIXED,
                BERTRAND_PRICE, _pool_mode(p), p.immediate_refill,
                out, island_out, state.ledger_i, state.ledger_f)
    state.t += n_steps
    return Trajectory(out, island_out)


def run_timestep(state: MarketState) -> StepMetrics:
    """One continuous-time timestep; see the module docstring for its phases."""
    if state.params.scheme is not Scheme.CONTINUOUS:
        raise ValueError("run_timestep needs scheme=continuous; use discrete_timestep")
    return advance(state, 1).rows()[0]

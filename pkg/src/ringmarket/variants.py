"""Policies that alter the base dynamics.

* islands: the ring is cut into ``M`` equal contiguous blocks. Buyers ignore
  the cuts; a newcomer copies from the whole market with probability
  ``coupling`` and from its own block otherwise.
* price memory: each site keeps its last ``m`` recorded prices and a
  newcomer copies a uniformly chosen entry of its source's memory.
* discrete scheme: every live seller pays the overhead once, then every
  buyer shops once in a fresh random order.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernel as K
from .market import MarketState, StepMetrics, advance
from .params import ModelParams, Scheme


@dataclass(frozen=True)
class IslandPolicy:
    island_count: int = 1
    coupling: float = 1.0

    @classmethod
    def from_params(cls, params: ModelParams) -> "IslandPolicy":
        return cls(params.island_count, params.coupling)

    def island_of(self, site_index: int, n_sellers: int) -> int:
        return island_of(site_index, n_sellers, self.island_count)

    def bounds(self, island: int, n_sellers: int) -> tuple:
        block = n_sellers // self.island_count
        return island * block, (island + 1) * block


@dataclass(frozen=True)
class MemoryPolicy:
    memory_length: int = 1


def island_of(site_index: int, n_sellers: int, island_count: int) -> int:
    return site_index * island_count // n_sellers


def select_source_pool(state: MarketState, vacant_site_index: int) -> np.ndarray:
    """Sites a newcomer at ``vacant_site_index`` may copy from.

    Consumes one Bernoulli(coupling) draw when there is more than one island.
    The pool is the set of currently live sellers, globally or in the home
    island; an empty result means the birth fails.
    """
    p = state.params
    pool = np.empty(state.n, dtype=np.int64)
    island_lo = np.empty(p.island_count + 1, dtype=np.int64)
    bounds = np.empty(2, dtype=np.int64)
    n_pool = K.build_pools(state.live, p.island_count, pool, island_lo)
    K.pool_range(state.rng, int(vacant_site_index), state.n, n_pool, island_lo,
                 p.island_count, float(p.coupling), bounds)
    return pool[bounds[0]:bounds[1]].copy()


def sample_copy_price(state: MarketState, source_site: int) -> float:
    """Uniform pick from the recorded history of ``source_site``.

    With memory_length 1 this is the source's current price and no random
    number is consumed.
    """
    if not state.live[source_site]:
        raise ValueError(f"source site {source_site} is vacant")
    return float(K.sample_copy_price(state.rng, state.hist, state.hist_len,
                                     int(source_site), state.params.memory_length))


def discrete_timestep(state: MarketState) -> StepMetrics:
    if state.params.scheme is not Scheme.DISCRETE:
        raise ValueError("discrete_timestep needs scheme=discrete")
    return advance(state, 1).rows()[0]

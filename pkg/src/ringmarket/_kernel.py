"""Compiled inner loops of the ring market.

Everything here works on flat arrays so numba can compile it in nopython
mode. The draw order is part of the replay contract:

* continuous micro-iteration: seller index, buyer index, tie coin (ties only);
* repopulation, per vacant site in ascending index: Bernoulli(gamma), then
  Bernoulli(coupling) only when there are several islands, then source index,
  then history slot only when memory_length > 1, then the mutation draw
  (skipped under the fixed Bertrand price);
* discrete step: one Fisher-Yates shuffle of the buyers, tie coins as needed,
  then repopulation as above.

Each site's history is a ring buffer of ``memory_length`` slots; the k-th
price recorded at a site (counting from 0) lands in slot ``k % m``. A memory
draw picks a slot uniformly among the filled ones.
"""

import numpy as np
from numba import njit

from .rng import bernoulli, randbelow, uniform01, uniform_closed

# ledger_i slots
OVERHEADS = 0
SALES = 1
UNSATISFIED = 2
BIRTHS = 3
DEATHS = 4
# ledger_f slots
REVENUE = 0
WRITE_OFF = 1

POOL_SITES = 0
POOL_LIVE = 1

COLUMNS = ("t", "live_fraction", "mean_price", "mean_capital",
           "unsatisfied_demand", "births", "deaths", "revenue", "overheads",
           "sales", "overhead_count", "write_off", "distinct_labels")
NCOL = len(COLUMNS)

# Helpers take arrays but never allocate; compiling them without the runtime
# drops per-call refcounting, which otherwise costs ~80ns per micro-iteration.
kernel = njit(_nrt=False, cache=True)


@kernel
def overhead_draw(rng, live, capital, overhead, ledger_i, live_list, n_live, pool_mode):
    """Charge one overhead; returns the drawn site or -1 when nobody pays."""
    n = live.shape[0]
    if pool_mode == POOL_SITES:
        j = randbelow(rng, n)
    else:
        if n_live == 0:
            return -1
        j = live_list[randbelow(rng, n_live)]
    if live[j]:
        capital[j] -= overhead
        ledger_i[OVERHEADS] += 1
        return j
    return -1


@kernel
def resolve_purchase(rng, live, price, capital, buyer, ledger_i, ledger_f):
    """Buyer ``buyer`` sits between sites ``buyer`` and ``buyer + 1``.

    Returns the selling site or -1 if both neighbours are vacant.
    """
    n = live.shape[0]
    a = buyer
    b = buyer + 1
    if b == n:
        b = 0
    if live[a]:
        if live[b]:
            pa = price[a]
            pb = price[b]
            if pa < pb:
                k = a
            elif pb < pa:
                k = b
            elif uniform01(rng) < 0.5:
                k = a
            else:
                k = b
        else:
            k = a
    elif live[b]:
        k = b
    else:
        ledger_i[UNSATISFIED] += 1
        return -1
    p = price[k]
    capital[k] += p
    ledger_i[SALES] += 1
    ledger_f[REVENUE] += p
    return k


@kernel
def mutate_price(rng, parent, delta):
    """parent + dp with dp uniform on [-min(delta, parent), delta]."""
    lo = min(delta, parent)
    dp = -lo + (delta + lo) * uniform_closed(rng)
    return parent + dp


@kernel
def sample_copy_price(rng, hist, hist_len, src, memory_length):
    if memory_length == 1:
        return hist[src, 0]
    return hist[src, randbelow(rng, hist_len[src])]


@kernel
def vacate_bankrupt(live, capital, fresh, ledger_i, ledger_f):
    """Vacate sites with strictly negative capital; ``fresh`` flags them."""
    n = live.shape[0]
    deaths = 0
    write_off = 0.0
    for s in range(n):
        c = capital[s]
        dies = live[s] & (c < 0.0)
        fresh[s] = dies
        live[s] ^= dies
        # adding 0.0 to a sum that started at +0.0 leaves it bit-identical
        write_off += c if dies else 0.0
        deaths += dies
    ledger_f[WRITE_OFF] += write_off
    ledger_i[DEATHS] += deaths
    return deaths


@kernel
def build_pools(live, island_count, pool, island_lo):
    """Ascending list of live sites; island k owns pool[island_lo[k]:island_lo[k+1]]."""
    n = live.shape[0]
    block = n // island_count
    n_pool = 0
    k = 0
    island_lo[0] = 0
    for s in range(n):
        while s >= (k + 1) * block:
            k += 1
            island_lo[k] = n_pool
        if live[s]:
            pool[n_pool] = s
            n_pool += 1
    while k < island_count:
        k += 1
        island_lo[k] = n_pool
    return n_pool


@kernel
def pool_range(rng, site, n_sites, n_pool, island_lo, island_count, coupling, bounds):
    """Write the [lo, hi) pool slice a newcomer at ``site`` copies from.

    Returns True when the global pool was chosen.
    """
    if island_count > 1 and not bernoulli(rng, coupling):
        k = site // (n_sites // island_count)
        bounds[0] = island_lo[k]
        bounds[1] = island_lo[k + 1]
        return False
    bounds[0] = 0
    bounds[1] = n_pool
    return True


@kernel
def repopulate(rng, live, price, capital, label, hist, hist_len,
               gamma, delta, island_count, coupling, memory_length, bertrand,
               bertrand_price, immediate_refill, fresh, pool, island_lo, bounds,
               ledger_i):
    n = live.shape[0]
    n_pool = build_pools(live, island_count, pool, island_lo)
    births = 0
    for s in range(n):
        if live[s] or (fresh[s] and not immediate_refill):
            continue
        if not bernoulli(rng, gamma):
            continue
        pool_range(rng, s, n, n_pool, island_lo, island_count, coupling, bounds)
        lo = bounds[0]
        hi = bounds[1]
        if hi == lo:
            continue
        src = pool[lo + randbelow(rng, hi - lo)]
        if bertrand:
            p = bertrand_price
        else:
            p = mutate_price(rng, sample_copy_price(rng, hist, hist_len, src, memory_length), delta)
        live[s] = 1
        price[s] = p
        capital[s] = 0.0
        label[s] = label[src]
        births += 1
    ledger_i[BIRTHS] += births
    return births


@kernel
def record_history(live, price, hist, hist_len, hist_next):
    n, m = hist.shape
    if m == 1:
        for s in range(n):
            ls = live[s]
            hist[s, 0] = price[s] if ls else hist[s, 0]
            hist_len[s] |= ls
        return
    for s in range(n):
        if live[s]:
            hist[s, hist_next[s]] = price[s]
            nxt = hist_next[s] + 1
            hist_next[s] = 0 if nxt == m else nxt
            if hist_len[s] < m:
                hist_len[s] += 1


@kernel
def fill_metrics(t, live, price, capital, label, overhead, ledger_i, ledger_f,
                 label_count, island_count, row, island_row):
    n = live.shape[0]
    block = n // island_count
    n_live = 0
    sum_p = 0.0
    sum_c = 0.0
    distinct = 0
    for k in range(island_count):
        isum = 0.0
        ilive = 0
        for s in range(k * block, (k + 1) * block):
            ls = live[s]
            ilive += ls
            isum += price[s] if ls else 0.0
            sum_c += capital[s] if ls else 0.0
            if ls:
                lab = label[s]
                if label_count[lab] == 0:
                    distinct += 1
                label_count[lab] += 1
        n_live += ilive
        sum_p += isum
        island_row[k] = isum / ilive if ilive > 0 else np.nan
    for s in range(n):
        if live[s]:
            label_count[label[s]] = 0
    row[0] = t
    row[1] = n_live / n
    row[2] = sum_p / n_live if n_live > 0 else np.nan
    row[3] = sum_c / n_live if n_live > 0 else np.nan
    row[4] = ledger_i[UNSATISFIED] / n
    row[5] = ledger_i[BIRTHS]
    row[6] = ledger_i[DEATHS]
    row[7] = ledger_f[REVENUE]
    row[8] = ledger_i[OVERHEADS] * overhead
    row[9] = ledger_i[SALES]
    row[10] = ledger_i[OVERHEADS]
    row[11] = ledger_f[WRITE_OFF]
    row[12] = distinct


@kernel
def _micro_sites(rng, live, price, capital, overhead, ledger_i, ledger_f):
    """Same draws and results as overhead_draw plus resolve_purchase over all
    sites, written with selects instead of branches on random site states."""
    n = live.shape[0]
    paid = 0
    sales = 0
    revenue = 0.0
    for _ in range(n):
        j = randbelow(rng, n)
        lj = live[j]
        # a vacant site is charged 0.0, which leaves its capital bit-identical
        capital[j] -= overhead * lj
        paid += lj
        a = randbelow(rng, n)
        b = a + 1
        if b == n:
            b = 0
        la = live[a]
        lb = live[b]
        if la & lb:
            pa = price[a]
            pb = price[b]
            if pa == pb:
                pick_a = uniform01(rng) < 0.5
            else:
                pick_a = pa < pb
        else:
            pick_a = la != 0
        k = a if pick_a else b
        sold = (la | lb) != 0
        p = price[k] if sold else 0.0
        capital[k] += p
        sales += sold
        revenue += p
    ledger_i[OVERHEADS] += paid
    ledger_i[SALES] += sales
    ledger_i[UNSATISFIED] += n - sales
    ledger_f[REVENUE] += revenue


@kernel
def micro_iterations(rng, live, price, capital, overhead, pool_mode,
                     live_list, ledger_i, ledger_f):
    n = live.shape[0]
    if pool_mode == POOL_SITES:
        _micro_sites(rng, live, price, capital, overhead, ledger_i, ledger_f)
        return
    n_live = 0
    if pool_mode == POOL_LIVE:
        for s in range(n):
            if live[s]:
                live_list[n_live] = s
                n_live += 1
    for _ in range(n):
        overhead_draw(rng, live, capital, overhead, ledger_i, live_list, n_live, pool_mode)
        resolve_purchase(rng, live, price, capital, randbelow(rng, n),
                         ledger_i, ledger_f)


@kernel
def discrete_trading(rng, live, price, capital, overhead, order, ledger_i, ledger_f):
    n = live.shape[0]
    for s in range(n):
        if live[s]:
            capital[s] -= overhead
            ledger_i[OVERHEADS] += 1
    for i in range(n):
        order[i] = i
    for i in range(n - 1, 0, -1):
        j = randbelow(rng, i + 1)
        tmp = order[i]
        order[i] = order[j]
        order[j] = tmp
    for i in range(n):
        resolve_purchase(rng, live, price, capital, order[i], ledger_i, ledger_f)


@njit(cache=True)
def run_steps(rng, live, price, capital, label, hist, hist_len, hist_next,
              t0, n_steps, discrete, gamma, delta, overhead, island_count,
              coupling, memory_length, bertrand, bertrand_price, pool_mode,
              immediate_refill, out, island_out, ledger_i, ledger_f):
    """Advance ``n_steps`` timesteps, writing one metrics row per step."""
    n = live.shape[0]
    scratch = np.empty(n, dtype=np.int64)
    island_lo = np.empty(island_count + 1, dtype=np.int64)
    bounds = np.empty(2, dtype=np.int64)
    label_count = np.zeros(n, dtype=np.int64)
    fresh = np.zeros(n, dtype=np.uint8)
    for step in range(n_steps):
        ledger_i[:] = 0
        ledger_f[:] = 0.0
        if discrete:
            discrete_trading(rng, live, price, capital, overhead, scratch,
                             ledger_i, ledger_f)
        else:
            micro_iterations(rng, live, price, capital, overhead, pool_mode,
                             scratch, ledger_i, ledger_f)
        vacate_bankrupt(live, capital, fresh, ledger_i, ledger_f)
        repopulate(rng, live, price, capital, label, hist, hist_len, gamma,
                   delta, island_count, coupling, memory_length, bertrand,
                   bertrand_price, immediate_refill, fresh, scratch,
                   island_lo, bounds, ledger_i)
        record_history(live, price, hist, hist_len, hist_next)
        fill_metrics(t0 + step + 1, live, price, capital, label, overhead,
                     ledger_i, ledger_f, label_count, island_count, out[step],
                     island_out[step])

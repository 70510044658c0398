import numpy as np

from ringmarket import ModelParams, init_state


def build_state(prices, live=None, capital=None, labels=None, seed=0, **kw):
    """A state with hand-picked site contents; history holds the given prices."""
    n = len(prices)
    kw.setdefault("gamma", 0.5)
    kw.setdefault("delta", 0.0)
    state = init_state(ModelParams(n_sellers=n, seed=seed, **kw))
    state.price[:] = prices
    state.hist[:, 0] = prices
    if live is not None:
        state.live[:] = np.asarray(live, dtype=np.uint8)
    if capital is not None:
        state.capital[:] = capital
    if labels is not None:
        state.label[:] = labels
    return state

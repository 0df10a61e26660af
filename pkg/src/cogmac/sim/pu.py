"""Primary-user activity traces: alternating exponential on/off renewals."""

from __future__ import annotations

import math

import numpy as np

from ..model import ContractError, PuChannelStats
from .base import as_seed, stream_tree


def _sojourn_means(stats: PuChannelStats):
    mi, ma = stats.mean_idle, stats.mean_active
    if mi is None or ma is None:
        raise ContractError("PU trace generation needs both sojourn means")
    if not (mi > 0.0 and ma > 0.0):
        raise ContractError("sojourn means must be positive")
    return float(mi), float(ma)


def interval_arrays(stats: PuChannelStats, horizon, rng):
    """(bounds, is_idle) arrays of an alternating trace covering [0, horizon].

    bounds has one more entry than is_idle and bounds[-1] >= horizon. The
    initial state is a stationary Bernoulli draw; exponential sojourns are
    memoryless, so the residual first interval keeps the full law.
    """
    mi, ma = _sojourn_means(stats)
    state = bool(rng.random() < stats.p_idle)
    if math.isinf(mi) or math.isinf(ma):
        # an infinite mean makes its state absorbing: walk the few intervals
        bounds, flags = [0.0], []
        t, s = 0.0, state
        while t < horizon:
            mean = mi if s else ma
            d = math.inf if math.isinf(mean) else float(rng.exponential(mean))
            d = min(d, horizon - t)
            flags.append(s)
            t += d
            bounds.append(t)
            s = not s
        return np.asarray(bounds), np.asarray(flags, dtype=bool)

    chunks = []
    total = 0.0
    while total < horizon:
        k = max(16, int((horizon - total) / (mi + ma)) + 8)
        pair = np.empty(2 * k)
        if state:
            pair[0::2] = rng.exponential(mi, k)
            pair[1::2] = rng.exponential(ma, k)
        else:
            pair[0::2] = rng.exponential(ma, k)
            pair[1::2] = rng.exponential(mi, k)
        chunks.append(pair)
        total += float(pair.sum())
    durs = np.concatenate(chunks)
    bounds = np.concatenate(([0.0], np.cumsum(durs)))
    last = int(np.searchsorted(bounds, horizon, side="left"))
    bounds = bounds[: last + 1]
    flags = np.zeros(bounds.size - 1, dtype=bool)
    flags[0::2] = state
    flags[1::2] = not state
    return bounds, flags


class PuTrace:
    """One realized trace with O(log n) idle-time queries over any window."""

    def __init__(self, bounds, is_idle):
        self.bounds = np.asarray(bounds, dtype=float)
        self.is_idle = np.asarray(is_idle, dtype=bool)
        durs = np.diff(self.bounds)
        self._idle_cum = np.concatenate(([0.0], np.cumsum(durs * self.is_idle)))

    def _idle_before(self, t):
        t = np.asarray(t, dtype=float)
        k = np.clip(
            np.searchsorted(self.bounds, t, side="right") - 1,
            0,
            self.is_idle.size - 1,
        )
        return self._idle_cum[k] + self.is_idle[k] * (t - self.bounds[k])

    def idle_between(self, a, b):
        return self._idle_before(b) - self._idle_before(a)

    def idle_at(self, t):
        t = np.asarray(t, dtype=float)
        k = np.clip(
            np.searchsorted(self.bounds, t, side="right") - 1,
            0,
            self.is_idle.size - 1,
        )
        return self.is_idle[k]


def gen_pu_trace(stats: PuChannelStats, horizon, seed):
    """Alternating (is_idle, duration) intervals whose lengths sum to horizon."""
    if horizon <= 0.0:
        raise ContractError("horizon must be positive")
    seed = as_seed(seed)
    rng = stream_tree(seed, {"pu": None})["pu"]
    bounds, flags = interval_arrays(stats, horizon, rng)
    out = []
    t = 0.0
    for j in range(flags.size):
        hi = min(float(bounds[j + 1]), horizon)
        if hi <= t:
            break
        out.append((bool(flags[j]), hi - t))
        t = hi
    return out

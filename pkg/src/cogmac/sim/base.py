"""Seeded stream plumbing and estimate containers for the simulators.

The simulators deliberately share no formula code with the analytic
modules beyond q/q_inv and the MacTiming constants; everything here is
random-number bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..model import ContractError, q_inv

MIN_CYCLES = 10_000
DEFAULT_CYCLES = 100_000

# two-sided 95% normal quantile
_Z95 = q_inv(0.025)


@dataclass(frozen=True)
class RngSeed:
    """64-bit unsigned seed; same seed and scenario give a bit-identical run."""

    seed: int

    def __post_init__(self):
        s = int(self.seed)
        if not 0 <= s < 1 << 64:
            raise ContractError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "seed", s)


def as_seed(seed):
    return seed if isinstance(seed, RngSeed) else RngSeed(seed)


@dataclass(frozen=True)
class SimEstimate:
    """Monte Carlo mean with a normal-approximation 95% half width."""

    mean: float
    half_ci95: float
    cycles: int
    seed: RngSeed

    def __post_init__(self):
        if self.cycles < MIN_CYCLES:
            raise ContractError(
                "estimates need >= %d cycles, got %d" % (MIN_CYCLES, self.cycles)
            )
        if self.half_ci95 < 0.0:
            raise ContractError("half_ci95 must be non-negative")


def check_cycles(cycles):
    cycles = int(cycles)
    if cycles < MIN_CYCLES:
        raise ContractError("cycles must be >= %d, got %d" % (MIN_CYCLES, cycles))
    return cycles


def stream_tree(seed: RngSeed, layout):
    """Named independent Philox streams, split per (name, SU) when asked.

    layout maps a purpose name to None (one stream) or to a count (a list
    with one stream per SU). Spawning from a single SeedSequence keeps the
    purposes decoupled, so e.g. sensing noise does not shift when a backoff
    parameter changes the number of backoff draws.
    """
    root = np.random.SeedSequence(seed.seed)
    children = root.spawn(len(layout))
    out = {}
    for child, (name, count) in zip(children, layout.items()):
        if count is None:
            out[name] = np.random.Generator(np.random.Philox(child))
        else:
            out[name] = [
                np.random.Generator(np.random.Philox(s)) for s in child.spawn(count)
            ]
    return out


def mean_estimate(samples, seed: RngSeed) -> SimEstimate:
    """Per-cycle sample mean with its 95% CI half width."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    mean = float(x.mean())
    half = float(_Z95 * x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return SimEstimate(mean, half, n, seed)


def ratio_estimate(numer, denom, seed: RngSeed) -> SimEstimate:
    """Ratio-of-means estimator for renewal rewards with random cycle length.

    The CI half width comes from the delta method: the variance of
    sum(numer)/sum(denom) is the variance of the residuals
    numer - R * denom scaled by the mean cycle length.
    """
    a = np.asarray(numer, dtype=float)
    b = np.asarray(denom, dtype=float)
    n = a.size
    ratio = float(a.sum() / b.sum())
    resid = a - ratio * b
    half = float(_Z95 * resid.std(ddof=1) / (b.mean() * math.sqrt(n)))
    return SimEstimate(ratio, half, n, seed)

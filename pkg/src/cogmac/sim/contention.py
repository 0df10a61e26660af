"""Slot-level realization of p-persistent channel reservation."""

from __future__ import annotations

import numpy as np

from ..model import ContractError, MacTiming, NumericError
from .base import as_seed, check_cycles, mean_estimate, stream_tree


def draw_reservations(rng, p, n0, slot, t_coll, t_succ, count):
    """Time until one contender wins, realized slot by slot.

    Every slot each of the n0 stations transmits with probability p; an
    empty slot costs `slot`, a pile-up costs t_coll, and the single-winner
    slot ends the race at t_succ. Returns (times, collisions) arrays.
    """
    if not 0.0 < p <= 1.0:
        raise ContractError("p must lie in (0,1]")
    if n0 < 1:
        raise ContractError("n0 must be >= 1")
    if n0 * p * (1.0 - p) ** (n0 - 1) == 0.0:
        raise NumericError("a winner-takes-the-slot race with p=1 never resolves")
    times = np.zeros(count)
    colls = np.zeros(count, dtype=np.int64)
    alive = np.arange(count)
    while alive.size:
        k = rng.binomial(n0, p, alive.size)
        times[alive[k == 0]] += slot
        hit = k >= 2
        times[alive[hit]] += t_coll
        colls[alive[hit]] += 1
        won = alive[k == 1]
        times[won] += t_succ
        alive = alive[(k == 0) | hit]
    return times, colls


def sim_ppersist_contention(p, n0, timing: MacTiming, cycles, seed):
    """Monte Carlo mean of the reservation overhead before one data exchange.

    Counts idle slots, collided reservation attempts, and the winning
    RTS/CTS handshake, mirroring the protocol's timing composition but not
    its closed-form mean.
    """
    cycles = check_cycles(cycles)
    seed = as_seed(seed)
    rng = stream_tree(seed, {"contention": None})["contention"]
    t_succ = timing.difs + timing.rts + timing.cts + 2.0 * timing.pd
    t_coll = timing.rts + timing.difs + timing.pd
    times, _ = draw_reservations(rng, p, n0, timing.slot, t_coll, t_succ, cycles)
    return mean_estimate(times, seed)

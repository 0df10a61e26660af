"""Cycle-level realization of the assigned-channel MAC with backoff.

Each synchronized cycle realizes per-(user, channel) availability, optional
sensing errors, the pick-one-channel rule, and the [0, W-1] backoff race on
shared channels with the quit-on-conflict rule: only a unique minimum draw
wins, and colliding users give the channel up for the rest of the cycle.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..assign import AssignmentState, LinkSensing, availability_matrix
from ..model import ContractError, MacTiming
from .base import (
    RngSeed,
    SimEstimate,
    as_seed,
    check_cycles,
    mean_estimate,
    stream_tree,
)


class AssignSim(NamedTuple):
    per_su: tuple
    total: SimEstimate
    collisions_per_cycle: float


def sim_assign(
    state: AssignmentState,
    p,
    err,
    timing: MacTiming,
    cycles,
    seed,
    *,
    w=None,
    t_sen=0.0,
    t_syn=0.0,
    trace=None,
) -> AssignSim:
    """Per-user Monte Carlo throughput of one channel-assignment state.

    err is a LinkSensing matrix or None for perfect sensing. w is the
    deployed contention window; it is required when the state has common
    channels. An exclusive-channel transmission occupies the whole cycle,
    while a contention win pays the MAC overhead share (mean backoff wait,
    RTS/CTS, three SIFS, plus sensing and synchronization time), matching
    the protocol's accounting of delta.

    The optional trace stream gets one line per cycle: cycle index, count
    of truly available (user, channel) pairs, contender count on common
    channels, number of contention winners, total goodput sample.
    """
    cycles = check_cycles(cycles)
    seed = as_seed(seed)
    p = availability_matrix(p)
    n, m = p.shape
    if len(state.separate) != n or state.n_ch != m:
        raise ContractError("state and availability shapes disagree")
    if timing.cycle <= 0.0:
        raise ContractError("timing.cycle must be positive")
    has_common = any(state.common)
    if has_common and w is None:
        raise ContractError("w is required when the state shares channels")
    if w is None:
        w = 2
    w = int(w)
    if w < 2:
        raise ContractError("w must be >= 2")
    delta = (
        (w - 1) / 2.0 * timing.slot
        + timing.rts
        + timing.cts
        + 3.0 * timing.sifs
        + t_sen
        + t_syn
    ) / timing.cycle

    streams = stream_tree(
        seed, {"avail": n, "sense": n, "choice": n, "backoff": n}
    )
    avail = np.empty((cycles, n, m), dtype=bool)
    indicated = np.empty((cycles, n, m), dtype=bool)
    keys = np.empty((cycles, n, m))
    backoff = np.empty((cycles, n), dtype=np.int64)
    for i in range(n):
        avail[:, i, :] = streams["avail"][i].random((cycles, m)) < p[i]
        if err is None:
            indicated[:, i, :] = avail[:, i, :]
        else:
            pd_i = np.asarray(err.p_d[i])
            pf_i = np.asarray(err.p_f[i])
            u = streams["sense"][i].random((cycles, m))
            indicated[:, i, :] = np.where(avail[:, i, :], u >= pf_i, u < 1.0 - pd_i)
        keys[:, i, :] = streams["choice"][i].random((cycles, m))
        backoff[:, i] = streams["backoff"][i].integers(0, w, cycles)

    sep_mask = np.zeros((n, m), dtype=bool)
    com_mask = np.zeros((n, m), dtype=bool)
    for i in range(n):
        for j in state.separate[i]:
            sep_mask[i, j] = True
        for j in state.common[i]:
            com_mask[i, j] = True

    goodput = np.zeros((cycles, n))

    # exclusive channels first: pick uniformly among the indicated-idle ones
    cand1 = indicated & sep_mask
    any1 = cand1.any(axis=2)
    pick1 = np.where(cand1, keys, -1.0).argmax(axis=2)
    rows, users = np.nonzero(any1)
    goodput[rows, users] = avail[rows, users, pick1[rows, users]]

    # users with every exclusive channel indicated busy fall back to contention
    cand2 = indicated & com_mask & ~any1[:, :, None]
    any2 = cand2.any(axis=2)
    pick2 = np.where(cand2, keys, -1.0).argmax(axis=2)
    contenders = any2.sum(axis=1)
    winners = np.zeros(cycles, dtype=np.int64)
    collisions = np.zeros(cycles, dtype=np.int64)
    shared = sorted(set().union(*state.common)) if has_common else []
    big = np.int64(1 << 40)
    for j in shared:
        on_j = any2 & (pick2 == j)
        cnt = on_j.sum(axis=1)
        live = cnt >= 1
        if not live.any():
            continue
        draws = np.where(on_j, backoff, big)
        mn = draws.min(axis=1)
        at_min = on_j & (draws == mn[:, None])
        n_min = at_min.sum(axis=1)
        won = live & (n_min == 1)
        rows = np.flatnonzero(won)
        if rows.size:
            widx = at_min[rows].argmax(axis=1)
            goodput[rows, widx] += (1.0 - delta) * avail[rows, widx, j]
            winners[rows] += 1
        collisions += (live & (n_min >= 2)).astype(np.int64)

    per_su = tuple(mean_estimate(goodput[:, i], seed) for i in range(n))
    totals = goodput.sum(axis=1)
    total = mean_estimate(totals, seed)
    if trace is not None:
        avail_pairs = avail.sum(axis=(1, 2))
        for c in range(cycles):
            trace.write(
                "%d\t%d\t%d\t%d\t%.9g\n"
                % (c, avail_pairs[c], contenders[c], winners[c], totals[c])
            )
    return AssignSim(per_su, total, float(collisions.mean()))

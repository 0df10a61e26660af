"""Event-level realization of the parallel-sensing MAC cycle.

Per cycle: Bernoulli channel states per link, Gaussian energy statistics
against each link's own threshold, and a slotted DCF contention among the
links whose sensing indicated at least one idle channel. A transmission is
credited only when its whole exchange fits into the remaining cycle time,
which is the event-level counterpart of the analytic floor on whole slots.
"""

from __future__ import annotations

import math

import numpy as np

from ..csma import BASIC, BackoffConfig
from ..hdmac import HdScenario
from ..model import ContractError, q_inv
from .base import as_seed, check_cycles, mean_estimate, stream_tree


def _exchange_times(timing, handshake):
    if handshake == BASIC:
        t_s = (
            timing.header
            + timing.packet
            + timing.sifs
            + 2.0 * timing.pd
            + timing.ack
            + timing.difs
        )
        t_c = timing.header + timing.packet + timing.difs + timing.pd
    else:
        t_s = (
            timing.header
            + timing.packet
            + 3.0 * timing.sifs
            + 2.0 * timing.pd
            + timing.rts
            + timing.cts
            + timing.ack
            + timing.difs
        )
        t_c = timing.header + timing.difs + timing.rts + timing.pd
    return t_s, t_c


def _dcf_batch(rng, l_join, link_ids, m_ch, budget, cfg: BackoffConfig, slot, t_s, t_c):
    """Run one DCF contention per row until the cycle budget is spent.

    All stations start at stage zero with a fresh uniform backoff; counters
    tick down once per generic slot, a collision doubles the window up to
    the stage cap, and a success resets the winner. Returns the summed
    idle-channel fraction credit per row and the first winner's link id.
    """
    n_rows, k = l_join.shape
    credit = np.zeros(n_rows)
    first_w = np.full(n_rows, -1, dtype=np.int64)
    w0 = cfg.w0
    stage = np.zeros((n_rows, k), dtype=np.int64)
    ctr = (rng.random((n_rows, k)) * w0).astype(np.int64)
    time = np.zeros(n_rows)
    alive = np.ones(n_rows, dtype=bool)
    while alive.any():
        tx = (ctr == 0) & alive[:, None]
        ktx = tx.sum(axis=1)
        dur = np.where(ktx == 0, slot, np.where(ktx == 1, t_s, t_c))
        alive &= time + dur <= budget + 1e-12
        ok = alive
        succ = ok & (ktx == 1)
        if succ.any():
            rows = np.flatnonzero(succ)
            wcol = tx[rows].argmax(axis=1)
            credit[rows] += l_join[rows, wcol] / m_ch
            fresh = first_w[rows] < 0
            first_w[rows[fresh]] = link_ids[rows[fresh], wcol[fresh]]
        dec = ok[:, None] & ~tx & (ctr > 0)
        ctr[dec] -= 1
        if succ.any():
            stage[rows, wcol] = 0
            ctr[rows, wcol] = (rng.random(rows.size) * w0).astype(np.int64)
        coll = (ok & (ktx >= 2))[:, None] & tx
        if coll.any():
            stage[coll] = np.minimum(stage[coll] + 1, cfg.m)
            win = w0 * 2.0 ** stage[coll]
            ctr[coll] = (rng.random(int(coll.sum())) * win).astype(np.int64)
        time[ok] += dur[ok]
    return credit, first_w


def sim_hdmac(
    sc: HdScenario,
    tau,
    cfg: BackoffConfig,
    cycles,
    seed,
    *,
    perfect_sensing=False,
    trace=None,
):
    """Monte Carlo normalized throughput of the sensing-then-contend cycle.

    The contention winner transmits one packet per won exchange on every
    channel its own sensing indicated idle, and the model's accounting is
    kept: a packet counts whether or not a primary user actually occupied
    the channel. With perfect_sensing the indications equal the true
    states, which is the analytic P_f=0, P_d=1 limit.

    The optional trace stream receives one tab-separated line per cycle:
    cycle index, number of truly idle (link, channel) pairs, contender
    count, first winning link (-1 when none), goodput sample.
    """
    cycles = check_cycles(cycles)
    seed = as_seed(seed)
    if not 0.0 < tau <= sc.cycle:
        raise ContractError("tau must lie in (0, cycle]")
    n, m_ch = sc.n_su, sc.n_ch
    streams = stream_tree(seed, {"channel": n, "sensing": n, "backoff": None})
    samples_m = tau * sc.f_s

    busy = np.empty((cycles, n, m_ch), dtype=bool)
    indicated_idle = np.empty((cycles, n, m_ch), dtype=bool)
    for i in range(n):
        p_busy = sc.pu[i].p_busy
        busy[:, i, :] = streams["channel"][i].random((cycles, m_ch)) < p_busy
        if perfect_sensing:
            indicated_idle[:, i, :] = ~busy[:, i, :]
            continue
        gamma = sc.snr[i]
        thr = 1.0 + gamma + q_inv(sc.pd_targets[i]) * math.sqrt(
            (2.0 * gamma + 1.0) / samples_m
        )
        sd = np.where(
            busy[:, i, :],
            math.sqrt((2.0 * gamma + 1.0) / samples_m),
            math.sqrt(1.0 / samples_m),
        )
        mean = np.where(busy[:, i, :], 1.0 + gamma, 1.0)
        stat = mean + sd * streams["sensing"][i].standard_normal((cycles, m_ch))
        indicated_idle[:, i, :] = stat < thr

    l_cnt = indicated_idle.sum(axis=2)
    join = l_cnt > 0
    n0 = join.sum(axis=1)

    t_s, t_c = _exchange_times(sc.timing, sc.handshake)
    budget = sc.cycle - tau
    samples = np.zeros(cycles)
    winners = np.full(cycles, -1, dtype=np.int64)
    for k in range(1, n + 1):
        rows = np.flatnonzero(n0 == k)
        if rows.size == 0:
            continue
        picked = join[rows]
        link_ids = np.nonzero(picked)[1].reshape(rows.size, k)
        l_join = np.take_along_axis(l_cnt[rows], link_ids, axis=1).astype(float)
        credit, first_w = _dcf_batch(
            streams["backoff"],
            l_join,
            link_ids,
            m_ch,
            budget,
            cfg,
            sc.timing.slot,
            t_s,
            t_c,
        )
        samples[rows] = credit * sc.timing.packet / sc.cycle
        winners[rows] = first_w

    if trace is not None:
        idle_pairs = (~busy).sum(axis=(1, 2))
        for c in range(cycles):
            trace.write(
                "%d\t%d\t%d\t%d\t%.9g\n"
                % (c, idle_pairs[c], n0[c], winners[c], samples[c])
            )
    return mean_estimate(samples, seed)

"""Event-level realization of semi-distributed cooperative sensing.

Per cycle: Bernoulli channel occupancy, per-pair Gaussian energy votes
against thresholds meeting the fused detection targets, reporting-slot bit
flips per (receiver, sender), a-out-of-b fusion at every receiver, uniform
choice among perceived-idle channels, and whole p-persistent contention
epochs on each chosen channel until the airtime budget runs out. Accesses
on channels a primary user actually occupies deliver zero goodput.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import binom

from ..model import ContractError, q_inv
from ..sdcss import SdcssParams, SensingSets
from .base import as_seed, check_cycles, mean_estimate, stream_tree


def _per_sensor_target(fused_target, a, b):
    """Common per-sensor detection probability hitting the fused target."""
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if binom.sf(a - 1, b, mid) < fused_target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _epoch_counts(rng, k, air, p, timing, size):
    """Whole contention-plus-data epochs fitting into the airtime budget."""
    t_data = timing.packet + 2.0 * timing.sifs + 2.0 * timing.pd + timing.ack
    t_rtscts = timing.difs + timing.rts + timing.cts + 2.0 * timing.pd
    t_coll = timing.rts + timing.difs + timing.pd
    q_all = (1.0 - p) ** k
    p_s = k * p * (1.0 - p) ** (k - 1)
    if p_s == 0.0:
        return np.zeros(size, dtype=np.int64)
    p_busy = 1.0 - q_all
    max_e = int(air / (t_rtscts + t_data)) + 1
    busy = rng.geometric(p_s / p_busy, (size, max_e))
    colls = busy - 1
    idles = rng.negative_binomial(busy, p_busy)
    epoch = (
        idles * timing.slot + colls * t_coll + t_rtscts + t_data
    )
    return (np.cumsum(epoch, axis=1) <= air).sum(axis=1)


def sim_sdcss(sets: SensingSets, params: SdcssParams, errs, cycles, seed, trace=None):
    """Monte Carlo normalized throughput of the cooperative-sensing cycle.

    errs is a ReportErrorMatrix or None for error-free reporting. The
    estimate averages, over the channels, the whole data exchanges carried
    on truly idle chosen channels, normalized by the cycle length, which is
    the quantity the analytic evaluators compute.

    The optional trace stream gets one line per cycle: cycle index, the
    channel idle states as a bit string, accessing-user count, the first
    channel with a completed exchange (-1 when none), goodput sample.
    """
    cycles = check_cycles(cycles)
    seed = as_seed(seed)
    sc = params.scenario
    n, m = sets.n_su, sets.n_ch
    if sc.n_su != n or sc.n_ch != m:
        raise ContractError("sensing sets and scenario shapes disagree")
    t = sc.timing
    t_data = t.packet + 2.0 * t.sifs + 2.0 * t.pd + t.ack
    air = t.cycle - max(math.fsum(row) for row in params.tau) - n * t.report_slot

    streams = stream_tree(
        seed, {"state": None, "sense": n, "report": n, "choice": n, "contention": None}
    )
    p_idle = np.array([st.p_idle for st in sc.pu])
    idle = streams["state"].random((cycles, m)) < p_idle

    sensed = np.zeros((n, m), dtype=bool)
    for i, j in sets.pairs():
        if params.tau[i][j] <= 0.0:
            raise ContractError("sensed pair (%d, %d) needs a positive tau" % (i, j))
        sensed[i, j] = True
    a_vec = np.asarray(sets.a, dtype=np.int64)
    pd_star = np.zeros(m)
    for j in range(m):
        b = sets.b(j)
        if b:
            pd_star[j] = _per_sensor_target(sc.pd_targets[j], a_vec[j], b)

    votes_busy = np.zeros((cycles, n, m), dtype=bool)
    for i in range(n):
        cols = sorted(sets.per_su[i])
        if not cols:
            continue
        gam = np.array([sc.snr.at(i, j) for j in cols])
        mm = np.array([params.tau[i][j] * sc.f_s for j in cols])
        thr = 1.0 + gam + np.array([q_inv(pd_star[j]) for j in cols]) * np.sqrt(
            (2.0 * gam + 1.0) / mm
        )
        mean = np.where(idle[:, cols], 1.0, 1.0 + gam)
        sd = np.sqrt(np.where(idle[:, cols], 1.0, 2.0 * gam + 1.0) / mm)
        stat = mean + sd * streams["sense"][i].standard_normal((cycles, len(cols)))
        votes_busy[:, i, cols] = stat >= thr

    flat = errs.p_err if errs is not None else None
    no_flips = flat is None or not any(any(x > 0.0 for x in row) for row in flat)
    picks = np.full((cycles, n), -1, dtype=np.int64)
    if no_flips:
        busy_cnt = (votes_busy & sensed).sum(axis=1)
        perceived = (busy_cnt < a_vec) & (a_vec > 0)
        for r in range(n):
            keys = streams["choice"][r].random((cycles, m))
            masked = np.where(perceived, keys, -1.0)
            pick = masked.argmax(axis=1)
            picks[:, r] = np.where(perceived.any(axis=1), pick, -1)
    else:
        p_err = np.asarray(flat, dtype=float)
        for r in range(n):
            flips = streams["report"][r].random((cycles, n, m)) < p_err[r][
                None, :, None
            ]
            seen = votes_busy ^ flips
            seen[:, r, :] = votes_busy[:, r, :]
            busy_cnt = (seen & sensed).sum(axis=1)
            perceived = (busy_cnt < a_vec) & (a_vec > 0)
            keys = streams["choice"][r].random((cycles, m))
            masked = np.where(perceived, keys, -1.0)
            pick = masked.argmax(axis=1)
            picks[:, r] = np.where(perceived.any(axis=1), pick, -1)

    n_cj = np.zeros((cycles, m), dtype=np.int64)
    for r in range(n):
        got = picks[:, r] >= 0
        np.add.at(n_cj, (np.flatnonzero(got), picks[got, r]), 1)

    counts = np.zeros((cycles, m), dtype=np.int64)
    if air > 0.0:
        eligible = idle & (n_cj >= 1)
        flat_idx = np.flatnonzero(eligible.ravel())
        k_vals = n_cj.ravel()[flat_idx]
        for k in np.unique(k_vals):
            members = flat_idx[k_vals == k]
            got = _epoch_counts(
                streams["contention"], int(k), air, params.p, t, members.size
            )
            counts.ravel()[members] = got

    samples = counts.sum(axis=1) * t_data / (m * t.cycle)
    if trace is not None:
        contending = (picks >= 0).sum(axis=1)
        first = np.where(
            (counts > 0).any(axis=1), (counts > 0).argmax(axis=1), -1
        )
        for c in range(cycles):
            bits = "".join("1" if idle[c, j] else "0" for j in range(m))
            trace.write(
                "%d\t%s\t%d\t%d\t%.9g\n"
                % (c, bits, contending[c], first[c], samples[c])
            )
    return mean_estimate(samples, seed)

"""Parallel-sensing MAC throughput models and the joint (tau, W) optimizer.

Each cycle of length T starts with a sensing phase of length tau; links whose
sensing indicates an idle channel contend for the rest of the cycle with
window-based CSMA/CA. Throughput is normalized to the cycle and, in the
multi-channel case, to the number of channels.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import erfc

from .csma import BASIC, BackoffConfig, bianchi_fixed_point, generic_slot_stats
from .model import ContractError, MacTiming, PuChannelStats, q_inv
from .sensing import poisson_binomial_pmf

SUBSET_ENUM_MAX_N = 12
PMF_MAX_N = 25


@dataclass(frozen=True)
class HdScenario:
    """N contending links sensing M identical channels for a cycle of length T."""

    n_su: int
    n_ch: int
    pu: tuple            # per-link PuChannelStats
    snr: tuple           # per-link sensing SNR, linear
    pd_targets: tuple    # per-link detection target
    f_s: float
    cycle: float
    timing: MacTiming
    backoff: BackoffConfig
    handshake: str = BASIC

    def __post_init__(self):
        object.__setattr__(self, "pu", tuple(self.pu))
        object.__setattr__(self, "snr", tuple(float(g) for g in self.snr))
        object.__setattr__(
            self, "pd_targets", tuple(float(t) for t in self.pd_targets)
        )
        if not (len(self.pu) == len(self.snr) == len(self.pd_targets) == self.n_su):
            raise ContractError("per-link fields must have n_su entries")
        if self.n_su < 1 or self.n_ch < 1:
            raise ContractError("need at least one link and one channel")
        if any(not 0.0 < t < 1.0 for t in self.pd_targets):
            raise ContractError("detection targets must lie in (0,1)")
        if self.f_s <= 0.0 or self.cycle <= 0.0:
            raise ContractError("f_s and cycle must be positive")

    @property
    def homogeneous(self):
        return (
            len(set(self.snr)) == 1
            and len(set(self.pd_targets)) == 1
            and len({(s.p_idle, s.p_busy) for s in self.pu}) == 1
        )


def join_probability(pf, pd, stats: PuChannelStats):
    """P[sensing reports idle]: correct idle report or missed detection."""
    for x in (pf, pd):
        if not 0.0 <= x <= 1.0:
            raise ValueError("probabilities must lie in [0,1]")
    return (1.0 - pf) * stats.p_idle + (1.0 - pd) * stats.p_busy


def contention_size_pmf(join):
    """Distribution of the number of links whose sensing lets them contend."""
    join = [float(x) for x in join]
    n = len(join)
    if n > PMF_MAX_N:
        raise ContractError("pmf limited to %d links" % PMF_MAX_N)
    if n <= SUBSET_ENUM_MAX_N:
        pmf = np.zeros(n + 1)
        for mask in range(1 << n):
            w = 1.0
            k = 0
            for i in range(n):
                if mask >> i & 1:
                    w *= join[i]
                    k += 1
                else:
                    w *= 1.0 - join[i]
            pmf[k] += w
        return pmf
    return poisson_binomial_pmf(join)


@lru_cache(maxsize=65536)
def _slot_profile(w0, m, n0, timing: MacTiming, handshake):
    """(p_succ, mean slot length) for n0 saturated contenders."""
    phi, _ = bianchi_fixed_point(BackoffConfig(w0, m), n0)
    probs, t_avg = generic_slot_stats(phi, n0, timing, handshake)
    return probs.p_succ, t_avg


def conditional_throughput(tau, cfg: BackoffConfig, n0, sc: HdScenario):
    """Normalized throughput of a cycle given n0 contending links."""
    if not 0.0 < tau <= sc.cycle:
        raise ValueError("tau must lie in (0, cycle]")
    if n0 == 0:
        return 0.0
    p_succ, t_avg = _slot_profile(cfg.w0, cfg.m, n0, sc.timing, sc.handshake)
    slots = math.floor((sc.cycle - tau) / t_avg)
    return slots * p_succ * sc.timing.packet / sc.cycle


def _q_vec(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def _false_alarms(taus, sc: HdScenario):
    """Per-link false alarm probabilities at the detection-target threshold,
    for a vector of sensing times. Shape (n_su, len(taus))."""
    taus = np.asarray(taus, dtype=float)
    out = np.empty((sc.n_su, taus.size))
    root = np.sqrt(taus * sc.f_s)
    for i in range(sc.n_su):
        gamma = sc.snr[i]
        alpha = math.sqrt(2.0 * gamma + 1.0) * q_inv(sc.pd_targets[i])
        out[i] = _q_vec(alpha + root * gamma)
    return out


def _cond_profile(cfg, sc):
    """p_succ and mean slot length for every contention size 1..N."""
    ps = np.zeros(sc.n_su + 1)
    ts = np.ones(sc.n_su + 1)
    for n0 in range(1, sc.n_su + 1):
        ps[n0], ts[n0] = _slot_profile(cfg.w0, cfg.m, n0, sc.timing, sc.handshake)
    return ps, ts


def _pmf_grid(joins):
    """Contention-size pmf for each column of a (n_su, K) join matrix."""
    n, k = joins.shape
    pmf = np.zeros((n + 1, k))
    pmf[0] = 1.0
    for i in range(n):
        p = joins[i]
        upper = pmf[1 : i + 2].copy()
        pmf[1 : i + 2] = upper * (1.0 - p) + pmf[0 : i + 1] * p
        pmf[0] = pmf[0] * (1.0 - p)
    return pmf


def _single_nt_grid(taus, cfg, sc):
    taus = np.asarray(taus, dtype=float)
    pfs = _false_alarms(taus, sc)
    joins = np.empty_like(pfs)
    for i in range(sc.n_su):
        joins[i] = (1.0 - pfs[i]) * sc.pu[i].p_idle + (
            1.0 - sc.pd_targets[i]
        ) * sc.pu[i].p_busy
    pmf = _pmf_grid(joins)
    ps, ts = _cond_profile(cfg, sc)
    nt = np.zeros(taus.size)
    for n0 in range(1, sc.n_su + 1):
        slots = np.floor((sc.cycle - taus) / ts[n0])
        nt += pmf[n0] * slots * ps[n0] * sc.timing.packet / sc.cycle
    return nt


def _multi_nt_grid(taus, cfg, sc):
    if not sc.homogeneous:
        raise ContractError("multi-channel analysis needs a homogeneous scenario")
    taus = np.asarray(taus, dtype=float)
    pf = _false_alarms(taus, sc)[0]
    pd = sc.pd_targets[0]
    stats = sc.pu[0]
    p_busy = pf * stats.p_idle + pd * stats.p_busy
    p_su_busy = p_busy ** sc.n_ch
    join = 1.0 - p_su_busy
    ps, ts = _cond_profile(cfg, sc)
    # mean fraction of indicated-idle channels at a link that contends
    # (a contender has at least one, so the mean is conditioned on l >= 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        idle_frac = np.where(join > 0.0, (1.0 - p_busy) / join, 0.0)
    nt = np.zeros(taus.size)
    n = sc.n_su
    for n0 in range(1, n + 1):
        pr = math.comb(n, n0) * join ** n0 * p_su_busy ** (n - n0)
        slots = np.floor((sc.cycle - taus) / ts[n0])
        nt += pr * slots * ps[n0] * sc.timing.packet / sc.cycle
    return nt * idle_frac


def nt_grid(taus, cfg, sc: HdScenario):
    """Normalized throughput on a vector of sensing times."""
    if sc.n_ch == 1:
        return _single_nt_grid(taus, cfg, sc)
    return _multi_nt_grid(taus, cfg, sc)


def single_channel_nt(tau, cfg: BackoffConfig, sc: HdScenario):
    """Cycle throughput with one shared channel and per-link sensing."""
    if sc.n_ch != 1:
        raise ContractError("scenario must have exactly one channel")
    if not 0.0 < tau <= sc.cycle:
        raise ValueError("tau must lie in (0, cycle]")
    return float(_single_nt_grid([tau], cfg, sc)[0])


def multi_channel_nt(tau, cfg: BackoffConfig, sc: HdScenario):
    """Per-channel cycle throughput for M identical channels.

    The winning link transmits on all channels its sensing indicated idle;
    at M=1 this coincides with single_channel_nt.
    """
    if not 0.0 < tau <= sc.cycle:
        raise ValueError("tau must lie in (0, cycle]")
    return float(_multi_nt_grid([tau], cfg, sc)[0])


class TauOpt(NamedTuple):
    tau: float
    nt: float
    boundary: bool


def optimize_tau(cfg: BackoffConfig, sc: HdScenario, grid_points=2000):
    """Maximize throughput over the sensing time.

    Golden-section search backed by a verification grid plus a micro-scan
    around the grid winner (the floor in the slot count makes the curve a
    micro-sawtooth, so the grid guards the unimodal search). Ties resolve
    to the smaller tau.
    """
    t = sc.cycle
    lo = t * 1e-9

    def f(x):
        return float(nt_grid([x], cfg, sc)[0])

    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, t
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = f(c), f(d)
    best = (c, fc) if fc >= fd else (d, fd)
    while b - a > 1e-6 * t:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = f(c)
            if fc > best[1]:
                best = (c, fc)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = f(d)
            if fd > best[1]:
                best = (d, fd)

    taus = np.linspace(t / grid_points, t, grid_points)
    vals = nt_grid(taus, cfg, sc)
    k = int(np.argmax(vals))
    step = t / grid_points
    micro_lo = max(lo, taus[k] - step)
    micro_hi = min(t, taus[k] + step)
    micro = np.linspace(micro_lo, micro_hi, 401)
    mvals = nt_grid(micro, cfg, sc)
    km = int(np.argmax(mvals))

    candidates = [best, (float(taus[k]), float(vals[k])),
                  (float(micro[km]), float(mvals[km]))]
    top = max(c[1] for c in candidates)
    tau_opt = min(c[0] for c in candidates if c[1] >= top - 1e-12)
    boundary = tau_opt >= t * (1.0 - 2e-5) or tau_opt <= 2.0 * t / grid_points
    return TauOpt(tau=tau_opt, nt=top, boundary=boundary)


class WTauOpt(NamedTuple):
    w: int
    tau: float
    nt: float
    table: tuple


def optimize_w_tau(sc: HdScenario, w_max, grid_points=2000):
    """Best sensing time for every window in [1, w_max], plus the winner."""
    if w_max < 1:
        raise ContractError("w_max must be >= 1")
    rows = []
    best = None
    for w in range(1, w_max + 1):
        cfg = BackoffConfig(w0=w, m=sc.backoff.m)
        r = optimize_tau(cfg, sc, grid_points=grid_points)
        rows.append((w, r.tau, r.nt))
        if best is None or r.nt > best[2]:
            best = (w, r.tau, r.nt)
    return WTauOpt(w=best[0], tau=best[1], nt=best[2], table=tuple(rows))

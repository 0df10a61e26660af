"""Cooperative multi-channel sensing with p-persistent CSMA access.

Throughput evaluators for the synchronized sense/report/contend cycle,
with and without report-channel errors, plus the configuration search
(sensing times, fusion votes, access probability) and the sensing-set
assignment algorithms built on top of it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .csma import ppersist_contention_overhead, ppersist_handshake_times
from .model import ContractError, MacTiming, PuChannelStats, SnrGrid, q_inv
from .sensing import (
    FusionRule,
    ReportErrorMatrix,
    SensorSpec,
    fuse_a_out_of_b,
    pf_for_target_pd,
    poisson_binomial_pmf,
)

NT_ENUM_MAX_CH = 8
ERR_ENUM_MAX_SU = 4
ERR_ENUM_MAX_CH = 3
BRUTE_FORCE_MAX_CELLS = 16
A_VECTOR_CAP = 4096
P_GRID_SIZE = 60
P_GRID_BOUNDS = (1e-4, 0.5)


@dataclass(frozen=True)
class SensingSets:
    """Which SUs sense which channels, plus the per-channel fusion vote.

    per_su[i] holds the channel indices SU i sweeps during the sensing
    phase; a[j] is the busy-vote threshold of the a-out-of-b rule applied
    to the reports on channel j. A channel nobody senses carries a[j] == 0
    and is never indicated idle.
    """

    per_su: tuple[frozenset[int], ...]
    n_ch: int
    a: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.n_ch < 1:
            raise ValueError("n_ch must be >= 1")
        per_su = tuple(frozenset(int(j) for j in s) for s in self.per_su)
        object.__setattr__(self, "per_su", per_su)
        for i, chans in enumerate(per_su):
            for j in chans:
                if not 0 <= j < self.n_ch:
                    raise ValueError("SU %d senses unknown channel %d" % (i, j))
        if self.a is None:
            a = tuple(1 if self.b(j) else 0 for j in range(self.n_ch))
        else:
            a = tuple(int(x) for x in self.a)
        object.__setattr__(self, "a", a)
        if len(a) != self.n_ch:
            raise ValueError("need one fusion parameter per channel")
        for j in range(self.n_ch):
            b = self.b(j)
            if b == 0:
                if a[j] != 0:
                    raise ValueError("channel %d is unsensed, a[%d] must be 0" % (j, j))
            elif not 1 <= a[j] <= b:
                raise ValueError("need 1 <= a[%d] <= %d, got %d" % (j, b, a[j]))

    @classmethod
    def from_pairs(cls, n_su, n_ch, pairs, a=None):
        per_su = [set() for _ in range(n_su)]
        for i, j in pairs:
            per_su[i].add(j)
        return cls(tuple(frozenset(s) for s in per_su), n_ch, a)

    @classmethod
    def from_channel_users(cls, users_per_channel, n_su, a=None):
        users = [frozenset(int(i) for i in us) for us in users_per_channel]
        per_su = [set() for _ in range(n_su)]
        for j, us in enumerate(users):
            for i in us:
                per_su[i].add(j)
        return cls(tuple(frozenset(s) for s in per_su), len(users), a)

    @classmethod
    def full(cls, n_su, n_ch, a=None):
        everything = frozenset(range(n_ch))
        return cls((everything,) * n_su, n_ch, a)

    @property
    def n_su(self):
        return len(self.per_su)

    def users_of(self, j):
        return tuple(i for i, chans in enumerate(self.per_su) if j in chans)

    def b(self, j):
        return sum(1 for chans in self.per_su if j in chans)

    def pairs(self):
        return tuple(
            (i, j) for i in range(self.n_su) for j in sorted(self.per_su[i])
        )

    def missing_pairs(self):
        return tuple(
            (i, j)
            for i in range(self.n_su)
            for j in range(self.n_ch)
            if j not in self.per_su[i]
        )

    def with_pair(self, i, j):
        """New sets with channel j added to SU i's sweep (vote kept valid)."""
        if j in self.per_su[i]:
            raise ValueError("SU %d already senses channel %d" % (i, j))
        per_su = list(self.per_su)
        per_su[i] = per_su[i] | {j}
        a = list(self.a)
        if a[j] == 0:
            a[j] = 1
        return SensingSets(tuple(per_su), self.n_ch, tuple(a))

    def with_a(self, a):
        return SensingSets(self.per_su, self.n_ch, tuple(a))


@dataclass(frozen=True)
class SdScenario:
    """Static description of the cooperative-sensing network."""

    pu: tuple[PuChannelStats, ...]
    snr: SnrGrid
    pd_targets: tuple[float, ...]
    f_s: float
    timing: MacTiming

    def __post_init__(self):
        object.__setattr__(self, "pu", tuple(self.pu))
        object.__setattr__(self, "pd_targets", tuple(float(x) for x in self.pd_targets))
        if len(self.pu) != self.snr.n_ch or len(self.pd_targets) != self.snr.n_ch:
            raise ValueError("pu and pd_targets must cover every channel")
        for x in self.pd_targets:
            if not 0.0 < x < 1.0:
                raise ValueError("detection targets must lie strictly in (0,1)")
        if self.f_s <= 0.0:
            raise ValueError("sampling frequency must be positive")
        if self.timing.cycle <= 0.0:
            raise ValueError("timing.cycle must be positive")

    @property
    def n_su(self):
        return self.snr.n_su

    @property
    def n_ch(self):
        return self.snr.n_ch


@dataclass(frozen=True)
class SdcssParams:
    """One operating point: per-pair sensing times and the access probability."""

    scenario: SdScenario
    tau: tuple[tuple[float, ...], ...]
    p: float

    def __post_init__(self):
        tau = tuple(tuple(float(x) for x in row) for row in self.tau)
        object.__setattr__(self, "tau", tau)
        if len(tau) != self.scenario.n_su or any(
            len(row) != self.scenario.n_ch for row in tau
        ):
            raise ValueError("tau must be an (n_su, n_ch) matrix")
        for row in tau:
            for x in row:
                if not math.isfinite(x) or x < 0.0:
                    raise ValueError("sensing times must be finite and non-negative")
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must lie in (0,1]")

    @classmethod
    def with_uniform_tau(cls, scenario, sets, tau_value, p):
        tau = [[0.0] * scenario.n_ch for _ in range(scenario.n_su)]
        for i, j in sets.pairs():
            tau[i][j] = float(tau_value)
        return cls(scenario, tuple(tuple(row) for row in tau), p)

    @property
    def pu(self):
        return self.scenario.pu

    @property
    def snr(self):
        return self.scenario.snr

    @property
    def pd_targets(self):
        return self.scenario.pd_targets

    @property
    def f_s(self):
        return self.scenario.f_s

    @property
    def timing(self):
        return self.scenario.timing

    def total_sense_time(self):
        """Length of the sensing phase: slowest SU's sequential sweep."""
        return max(math.fsum(row) for row in self.tau)

    def report_time(self):
        return self.scenario.n_su * self.timing.report_slot


def _check_compat(sets, scenario):
    if sets.n_ch != scenario.n_ch or sets.n_su != scenario.n_su:
        raise ValueError(
            "sensing sets are %dx%d but the scenario is %dx%d"
            % (sets.n_su, sets.n_ch, scenario.n_su, scenario.n_ch)
        )


@lru_cache(maxsize=None)
def equal_sensor_pd(target, a, b):
    """Per-sensor detection probability whose a-out-of-b fusion hits target."""
    if not 0.0 < target < 1.0:
        raise ValueError("fused detection target must lie strictly in (0,1)")
    if not 1 <= a <= b:
        raise ValueError("need 1 <= a <= b, got a=%d b=%d" % (a, b))
    if b == 1:
        return target

    def fused(x):
        return sum(
            math.comb(b, l) * x**l * (1.0 - x) ** (b - l) for l in range(a, b + 1)
        )

    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if fused(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)


def fused_channel_probs(sets, params):
    """Fused (false alarm, detection) probabilities per channel.

    Every SU sensing a channel runs at the common per-sensor detection
    value that makes the fused detection probability meet the channel
    target exactly; unsensed channels report busy with certainty.
    """
    _check_compat(sets, params.scenario)
    sc = params.scenario
    pf_out, pd_out = [], []
    for j in range(sets.n_ch):
        users = sets.users_of(j)
        if not users:
            pf_out.append(1.0)
            pd_out.append(1.0)
            continue
        rule = FusionRule(sets.a[j], len(users))
        pd_star = equal_sensor_pd(sc.pd_targets[j], rule.a, rule.b)
        pfs = []
        for i in users:
            t = params.tau[i][j]
            if t <= 0.0:
                raise ValueError(
                    "sensing time must be positive on assigned pair (%d, %d)" % (i, j)
                )
            sensor = SensorSpec(snr=sc.snr.at(i, j), sample_rate=sc.f_s, sense_time=t)
            pfs.append(pf_for_target_pd(pd_star, sensor))
        pf_out.append(float(fuse_a_out_of_b(pfs, rule)))
        pd_out.append(float(fuse_a_out_of_b([pd_star] * rule.b, rule)))
    return tuple(pf_out), tuple(pd_out)


@lru_cache(maxsize=65536)
def _contention_overhead(p, n0, timing):
    return ppersist_contention_overhead(p, n0, timing)


def channel_cond_throughput(n_j, params):
    """Throughput share of one indicated-idle channel with n_j contenders.

    Counts the whole contention-plus-transmission epochs that fit into the
    cycle time left after sensing and reporting, normalized by the cycle.
    """
    if n_j < 1:
        raise ValueError("n_j must be >= 1")
    t = params.timing
    air = t.cycle - params.total_sense_time() - params.report_time()
    if air <= 0.0:
        return 0.0
    t_cont = _contention_overhead(params.p, int(n_j), t)
    if math.isinf(t_cont):
        return 0.0
    t_data, _, _ = ppersist_handshake_times(t)
    return math.floor(air / (t_cont + t_data)) * t_data / t.cycle


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def access_vector_pmf_ne(k_e, n):
    """PMF of per-channel contender counts when n SUs pick uniformly.

    Returns a dict over all compositions of n into k_e ordered parts; the
    weights are multinomial(n; parts) / k_e**n and sum to one.
    """
    if k_e < 1:
        raise ValueError("k_e must be >= 1")
    if n < 0:
        raise ValueError("n must be >= 0")
    scale = float(k_e) ** n
    out = {}
    for comp in _compositions(n, k_e):
        coeff = math.factorial(n)
        for part in comp:
            coeff //= math.factorial(part)
        out[comp] = coeff / scale
    return out


def _epoch_table(params, n_max):
    """Per-channel conditional throughput for 0..n_max contenders."""
    table = [0.0]
    for n in range(1, n_max + 1):
        table.append(channel_cond_throughput(n, params))
    return table


def _access_mix(t_table, n, k):
    """Mean epoch throughput of one of k picked channels, n SUs choosing."""
    if k < 1:
        return 0.0
    q_in = 1.0 / k
    return math.fsum(
        math.comb(n, i) * q_in**i * (1.0 - q_in) ** (n - i) * t_table[i]
        for i in range(n + 1)
    )


def _nt_from_uv(u, v, h0, mix, m):
    """Expected throughput from per-channel indicated-idle probabilities.

    coeff[ca][cb] accumulates the probability that exactly ca truly idle
    and cb truly busy channels end up indicated idle; expanding the
    per-channel product this way is identical to the nested enumeration
    over idle sets, correctly sensed sets, and misdetected sets.
    """
    coeff = [[0.0] * (m + 1) for _ in range(m + 1)]
    coeff[0][0] = 1.0
    for j in range(m):
        w_hit = h0[j] * u[j]
        w_ghost = (1.0 - h0[j]) * v[j]
        w_none = 1.0 - w_hit - w_ghost
        new = [[0.0] * (m + 1) for _ in range(m + 1)]
        for ca in range(j + 1):
            row = coeff[ca]
            for cb in range(j + 1 - ca):
                c = row[cb]
                if c == 0.0:
                    continue
                new[ca][cb] += c * w_none
                new[ca + 1][cb] += c * w_hit
                new[ca][cb + 1] += c * w_ghost
        coeff = new
    nt = 0.0
    for ca in range(1, m + 1):
        for cb in range(m + 1 - ca):
            c = coeff[ca][cb]
            if c:
                nt += c * (ca / m) * mix[ca + cb]
    return nt


def sdcss_nt_no_err(sets, params):
    """Normalized per-channel throughput with error-free report exchange.

    Averages the conditional access throughput over true channel states,
    fused false alarms on idle channels, and missed detections on busy
    ones; only genuinely idle channels count toward goodput.
    """
    _check_compat(sets, params.scenario)
    m = sets.n_ch
    if m > NT_ENUM_MAX_CH:
        raise ContractError(
            "%d channels exceed the enumeration cap of %d" % (m, NT_ENUM_MAX_CH)
        )
    pf, pd = fused_channel_probs(sets, params)
    u = [1.0 - x for x in pf]
    v = [1.0 - x for x in pd]
    n = params.scenario.n_su
    t_table = _epoch_table(params, n)
    mix = [0.0] + [_access_mix(t_table, n, k) for k in range(1, m + 1)]
    h0 = [st.p_idle for st in params.pu]
    return _nt_from_uv(u, v, h0, mix, m)


def nt_vacancy_profile(sets, params, h0_values):
    """Throughput at several common channel-idle probabilities in one pass.

    The fused sensing probabilities and the epoch table do not depend on
    the idle probability, so sweeping it (as the assignment studies do)
    only needs the final mixture redone per value.
    """
    _check_compat(sets, params.scenario)
    m = sets.n_ch
    if m > NT_ENUM_MAX_CH:
        raise ContractError(
            "%d channels exceed the enumeration cap of %d" % (m, NT_ENUM_MAX_CH)
        )
    for h0 in h0_values:
        if not 0.0 <= h0 <= 1.0:
            raise ValueError("idle probabilities must lie in [0,1]")
    pf, pd = fused_channel_probs(sets, params)
    u = [1.0 - x for x in pf]
    v = [1.0 - x for x in pd]
    n = params.scenario.n_su
    t_table = _epoch_table(params, n)
    mix = [0.0] + [_access_mix(t_table, n, k) for k in range(1, m + 1)]
    return tuple(
        _nt_from_uv(u, v, [h0] * m, mix, m) for h0 in h0_values
    )


class OptimizedConfig(NamedTuple):
    tau: tuple[tuple[float, ...], ...]
    a: tuple[int, ...]
    p: float
    nt: float


def _golden_max(f, lo, hi, xtol, seeds=()):
    """Golden-section maximum returning the best point actually evaluated."""
    best = [lo, -math.inf]

    def g(x):
        fx = f(x)
        if fx > best[1]:
            best[0], best[1] = x, fx
        return fx

    for x in (lo, hi, *seeds):
        g(x)
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - inv * (b - a)
    x2 = a + inv * (b - a)
    f1, f2 = g(x1), g(x2)
    while b - a > xtol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv * (b - a)
            f2 = g(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv * (b - a)
            f1 = g(x1)
    return best[0], best[1]


def _grid_golden_max(f, lo, hi, xtol, n_grid=48, seeds=()):
    """Coarse log-grid scan, then golden refinement in the best bracket.

    The objectives here are sawtooths (whole epochs stop fitting at
    discrete points), so one golden section over the full interval can
    settle on the wrong tooth; the grid pass locates the right one first.
    """
    if hi <= lo:
        raise ValueError("need lo < hi")
    xs = [float(x) for x in np.geomspace(lo, hi, n_grid)]
    best_i, best_f = 0, -math.inf
    for i, x in enumerate(xs):
        fx = f(x)
        if fx > best_f:
            best_i, best_f = i, fx
    b_lo = xs[max(0, best_i - 1)]
    b_hi = xs[min(len(xs) - 1, best_i + 1)]
    if b_hi <= b_lo:
        b_lo, b_hi = lo, hi
    x, fx = _golden_max(f, b_lo, b_hi, xtol, seeds=(xs[best_i], *seeds))
    if best_f > fx:
        return xs[best_i], best_f
    return x, fx


def _named_a_vectors(sets):
    """Fusion vectors for the OR, AND, and majority rules (deduplicated)."""
    bs = [sets.b(j) for j in range(sets.n_ch)]
    vecs = []
    for pick in (lambda b: 1, lambda b: b, lambda b: (b + 1) // 2):
        vec = tuple(pick(b) if b else 0 for b in bs)
        if vec not in vecs:
            vecs.append(vec)
    return vecs


def _a_vectors(sets, mode, cap):
    if mode == "named":
        return _named_a_vectors(sets)
    if mode != "full":
        raise ValueError("a_mode must be 'full' or 'named', got %r" % (mode,))
    bs = [sets.b(j) for j in range(sets.n_ch)]
    count = 1
    for b in bs:
        count *= max(b, 1)
    if count > cap:
        return _named_a_vectors(sets)
    ranges = [range(1, b + 1) if b else (0,) for b in bs]
    return [tuple(vec) for vec in itertools.product(*ranges)]


class _DescentState:
    """Incremental throughput evaluation during the sensing-time descent.

    A coordinate move on pair (i, j) only touches channel j's fused false
    alarm and SU i's sweep length, so everything else is cached; a common
    scale move recomputes all channels. The full evaluator is rerun on the
    final point, the cache never leaves this class.
    """

    def __init__(self, sets, scenario, a_vec, p, tau_map):
        self.scenario = scenario
        self.a_vec = a_vec
        self.p = p
        self.tau = dict(tau_map)
        sc = scenario
        t = sc.timing
        self.n, self.m = sc.n_su, sc.n_ch
        self.budget = t.cycle - self.n * t.report_slot
        self.t_data = ppersist_handshake_times(t)[0]
        self.h0 = [st.p_idle for st in sc.pu]
        self.users = [sets.users_of(j) for j in range(self.m)]
        self.pd_star = [
            equal_sensor_pd(sc.pd_targets[j], a_vec[j], len(us)) if us else None
            for j, us in enumerate(self.users)
        ]
        self.v = []
        for j, us in enumerate(self.users):
            if not us:
                self.v.append(0.0)
                continue
            rule = FusionRule(a_vec[j], len(us))
            miss = 1.0 - fuse_a_out_of_b([self.pd_star[j]] * rule.b, rule)
            self.v.append(float(miss))
        self.rows = [
            math.fsum(x for (i2, _), x in self.tau.items() if i2 == i)
            for i in range(self.n)
        ]
        self.u = [self._u_channel(j) for j in range(self.m)]

    def _u_channel(self, j):
        us = self.users[j]
        if not us:
            return 0.0
        sc = self.scenario
        rule = FusionRule(self.a_vec[j], len(us))
        pfs = [
            pf_for_target_pd(
                self.pd_star[j],
                SensorSpec(
                    snr=sc.snr.at(i, j), sample_rate=sc.f_s, sense_time=self.tau[(i, j)]
                ),
            )
            for i in us
        ]
        return 1.0 - float(fuse_a_out_of_b(pfs, rule))

    def nt(self):
        air = self.budget - max(self.rows)
        table = [0.0]
        for k in range(1, self.n + 1):
            if air <= 0.0:
                table.append(0.0)
                continue
            t_cont = _contention_overhead(self.p, k, self.scenario.timing)
            if math.isinf(t_cont):
                table.append(0.0)
                continue
            epochs = math.floor(air / (t_cont + self.t_data))
            table.append(epochs * self.t_data / self.scenario.timing.cycle)
        mix = [0.0] + [_access_mix(table, self.n, k) for k in range(1, self.m + 1)]
        return _nt_from_uv(self.u, self.v, self.h0, mix, self.m)

    def set_pair(self, i, j, x):
        old = self.tau[(i, j)]
        self.tau[(i, j)] = x
        self.rows[i] += x - old
        self.u[j] = self._u_channel(j)

    def scale(self, s):
        for pair in self.tau:
            self.tau[pair] *= s
        self.rows = [r * s for r in self.rows]
        self.u = [self._u_channel(j) for j in range(self.m)]


def optimize_sense_access(
    sets,
    scenario,
    *,
    p_grid=None,
    a_mode="full",
    a_cap=A_VECTOR_CAP,
    nt_tol=1e-6,
    tau_tol=None,
    max_sweeps=30,
):
    """Search sensing times, fusion votes, and the access probability.

    For every fusion vector and every grid value of p, coordinate descent
    maximizes throughput over one sensing time at a time (golden section
    per coordinate), plus a common-scale move per sweep: the sensing phase
    ends with the slowest SU, so once sweep lengths tie, only scaling all
    times together can shorten the phase. Descent stops when a full sweep
    improves by less than nt_tol; the overall argmax is returned. Epoch
    counts quantize the throughput, which leaves wide exact ties along the
    p grid; among tied maxima (on the first maximal fusion vector) the
    median p is returned, since the plateau center is robust while its
    edges are grid artifacts. Restarts are deterministic.
    """
    _check_compat(sets, scenario)
    pairs = sets.pairs()
    if not pairs:
        raise ContractError("no (SU, channel) pair is assigned for sensing")
    t = scenario.timing
    budget = t.cycle - scenario.n_su * t.report_slot
    if budget <= 0.0:
        raise ContractError("reporting slots leave no air time in the cycle")
    if p_grid is None:
        p_grid = np.geomspace(P_GRID_BOUNDS[0], P_GRID_BOUNDS[1], P_GRID_SIZE)
    p_values = [float(x) for x in p_grid]
    for p in p_values:
        if not 0.0 < p <= 1.0:
            raise ValueError("p grid values must lie in (0,1]")
    if tau_tol is None:
        tau_tol = 1e-5 * t.cycle
    tau_floor = 1.0 / scenario.f_s
    loads = [max(1, len(s)) for s in sets.per_su]

    candidates = []
    for a_vec in _a_vectors(sets, a_mode, a_cap):
        trial = sets.with_a(a_vec)
        for p in p_values:
            tau_map = {
                (i, j): min(0.02 * t.cycle, budget / (2.0 * loads[i]))
                for (i, j) in pairs
            }
            state = _DescentState(trial, scenario, a_vec, p, tau_map)
            current = state.nt()
            for _ in range(max_sweeps):
                for i, j in pairs:
                    hi = budget - (state.rows[i] - state.tau[(i, j)]) - tau_floor
                    if hi <= tau_floor:
                        continue

                    def coord(x, _i=i, _j=j):
                        state.set_pair(_i, _j, x)
                        return state.nt()

                    x, _ = _grid_golden_max(
                        coord, tau_floor, hi, tau_tol, seeds=(state.tau[(i, j)],)
                    )
                    state.set_pair(i, j, x)
                s_hi = 0.999 * budget / max(state.rows)
                s_lo = tau_floor / min(state.tau.values())
                if s_lo < s_hi:
                    applied = [1.0]

                    def scaled(s):
                        state.scale(s / applied[0])
                        applied[0] = s
                        return state.nt()

                    s, _ = _grid_golden_max(
                        scaled, s_lo, s_hi, tau_tol / t.cycle, seeds=(1.0,)
                    )
                    if applied[0] != s:
                        state.scale(s / applied[0])
                swept = state.nt()
                if swept - current < nt_tol:
                    break
                current = swept
            tau = [[0.0] * scenario.n_ch for _ in range(scenario.n_su)]
            for (i, j), x in state.tau.items():
                tau[i][j] = x
            params = SdcssParams(scenario, tuple(tuple(row) for row in tau), p)
            nt = sdcss_nt_no_err(trial, params)
            candidates.append(OptimizedConfig(tau=params.tau, a=tuple(a_vec), p=p, nt=nt))
    best_nt = max(c.nt for c in candidates)
    tie_eps = 1e-12 * max(1.0, abs(best_nt))
    tied = [c for c in candidates if c.nt >= best_nt - tie_eps]
    a_star = tied[0].a
    tied = sorted((c for c in tied if c.a == a_star), key=lambda c: c.p)
    return tied[len(tied) // 2]


def hungarian_min_cost(cost):
    """Min-cost one-to-one matching; returns sorted (row, column) pairs.

    Rectangular inputs match every index of the shorter side, the same
    outcome as padding with a large sentinel cost and discarding the
    padded pairs afterwards.
    """
    m = np.asarray(cost, dtype=float)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("cost must be a non-empty 2-D matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("cost entries must be finite")
    rows, cols = linear_sum_assignment(m)
    return tuple(sorted(zip(rows.tolist(), cols.tolist())))


def required_sensing_time(snr, f_s, pd_target, pf_target=0.1):
    """Single-sensor sensing time meeting (pd_target, pf_target) exactly.

    Returns 0.0 when the SNR is strong enough that any positive sensing
    time already beats the false-alarm target.
    """
    if snr <= 0.0:
        raise ValueError("snr must be a positive linear ratio")
    if f_s <= 0.0:
        raise ValueError("sampling frequency must be positive")
    for name, x in (("pd_target", pd_target), ("pf_target", pf_target)):
        if not 0.0 < x < 1.0:
            raise ValueError("%s must lie strictly in (0,1)" % name)
    x = (q_inv(pf_target) - math.sqrt(2.0 * snr + 1.0) * q_inv(pd_target)) / snr
    if x <= 0.0:
        return 0.0
    return x * x / f_s


class SetsSearchResult(NamedTuple):
    sets: SensingSets
    config: OptimizedConfig
    nt: float


def greedy_sensing_sets(
    scenario, delta_stop=None, *, optimize=None, seed_cost=None, pf_ref=0.1
):
    """Grow sensing sets one (SU, channel) pair at a time while worthwhile.

    Seeds one SU per channel with a min-sensing-time matching, then keeps
    committing the single additional pair whose re-optimized configuration
    gains the most throughput, until the best gain drops to delta_stop
    (default: 1e-3 of the current throughput). Ties prefer the lowest SU
    index, then the lowest channel index.
    """
    if delta_stop is not None and delta_stop <= 0.0:
        raise ValueError("delta_stop must be positive")
    if optimize is None:
        def optimize(s):
            return optimize_sense_access(s, scenario)
    n, m = scenario.n_su, scenario.n_ch
    if seed_cost is None:
        seed_cost = [
            [
                required_sensing_time(
                    scenario.snr.at(i, j), scenario.f_s, scenario.pd_targets[j], pf_ref
                )
                for j in range(m)
            ]
            for i in range(n)
        ]
    sets = SensingSets.from_pairs(n, m, hungarian_min_cost(seed_cost))
    config = optimize(sets)
    nt = config.nt
    for _ in range(n * m):
        best = None
        for i, j in sets.missing_pairs():
            cand_sets = sets.with_pair(i, j)
            cand_cfg = optimize(cand_sets)
            key = (-(cand_cfg.nt - nt), i, j)
            if best is None or key < best[0]:
                best = (key, cand_sets, cand_cfg)
        threshold = delta_stop if delta_stop is not None else 1e-3 * nt
        if best is None or -best[0][0] <= threshold:
            break
        sets, config = best[1], best[2]
        nt = config.nt
    return SetsSearchResult(sets, config, nt)


def all_sensing_allocations(n_su, n_ch):
    """Yield every sensing-set allocation with at least one SU per channel.

    Channels draw independently from the non-empty SU subsets, enumerated
    by increasing bitmask with the last channel varying fastest.
    """
    subsets = [
        frozenset(i for i in range(n_su) if mask >> i & 1)
        for mask in range(1, 2**n_su)
    ]
    for combo in itertools.product(subsets, repeat=n_ch):
        yield SensingSets.from_channel_users(combo, n_su)


def brute_force_sensing_sets(scenario, *, optimize=None, max_cells=BRUTE_FORCE_MAX_CELLS):
    """Score every sensing-set allocation and keep the best.

    Exact but exponential: (2**N - 1)**M allocations, each scored by the
    configuration search. Ties keep the earliest allocation in enumeration
    order.
    """
    n, m = scenario.n_su, scenario.n_ch
    if n * m > max_cells:
        raise ContractError(
            "%d assignment cells exceed the brute-force cap of %d" % (n * m, max_cells)
        )
    if optimize is None:
        def optimize(s):
            return optimize_sense_access(s, scenario)
    best = None
    for sets in all_sensing_allocations(n, m):
        cfg = optimize(sets)
        if best is None or cfg.nt > best.nt:
            best = SetsSearchResult(sets, cfg, cfg.nt)
    return best


def sdcss_nt_with_err(sets, params, errs: ReportErrorMatrix):
    """Normalized throughput when report bits can flip between SUs.

    Enumerates the raw per-sensor outcomes channel by channel; conditioned
    on those, every receiver fuses an independently corrupted copy of the
    reports, picks uniformly among the channels it perceives as idle, and
    the per-channel contender counts follow from independence across SUs.
    Sensor-level detection values stay on the error-free equal split, so
    the evaluator reduces exactly to the error-free one at zero error.
    """
    _check_compat(sets, params.scenario)
    sc = params.scenario
    n, m = sc.n_su, sets.n_ch
    if n > ERR_ENUM_MAX_SU or m > ERR_ENUM_MAX_CH:
        raise ContractError(
            "reporting-error enumeration is capped at %d SUs x %d channels; "
            "use the cycle simulator beyond that" % (ERR_ENUM_MAX_SU, ERR_ENUM_MAX_CH)
        )
    err = errs.p_err
    if err.shape != (n, n):
        raise ValueError("error matrix must be %dx%d, got %r" % (n, n, err.shape))

    t_table = _epoch_table(params, n)
    h0s = [st.p_idle for st in params.pu]

    # Per channel: every pattern of idle-voting sensors, its probability
    # under both true states, and each receiver's chance of perceiving the
    # channel idle after report corruption.
    per_channel = []
    for j in range(m):
        users = sets.users_of(j)
        a_j = sets.a[j]
        if not users:
            per_channel.append([(1.0, 1.0, (0.0,) * n)])
            continue
        pd_star = equal_sensor_pd(sc.pd_targets[j], a_j, len(users))
        pfs = {}
        for i in users:
            t = params.tau[i][j]
            if t <= 0.0:
                raise ValueError(
                    "sensing time must be positive on assigned pair (%d, %d)" % (i, j)
                )
            sensor = SensorSpec(snr=sc.snr.at(i, j), sample_rate=sc.f_s, sense_time=t)
            pfs[i] = pf_for_target_pd(pd_star, sensor)
        entries = []
        for idle_mask in range(2 ** len(users)):
            idle_set = {u for k, u in enumerate(users) if idle_mask >> k & 1}
            w_idle = 1.0
            w_busy = 1.0
            for u in users:
                if u in idle_set:
                    w_idle *= 1.0 - pfs[u]
                    w_busy *= 1.0 - pd_star
                else:
                    w_idle *= pfs[u]
                    w_busy *= pd_star
            q = []
            for r in range(n):
                got_busy = [
                    err[r][u] if u in idle_set else 1.0 - err[r][u] for u in users
                ]
                pmf = poisson_binomial_pmf(got_busy)
                q.append(float(pmf[:a_j].sum()))
            entries.append((w_idle, w_busy, tuple(q)))
        per_channel.append(entries)

    total = 0.0
    for combo in itertools.product(*per_channel):
        # chance that SU r picks channel j: perceives j idle, then chooses
        # uniformly among all channels it perceives idle
        pick = [[0.0] * m for _ in range(n)]
        for r in range(n):
            q_row = [combo[j][2][r] for j in range(m)]
            for j in range(m):
                if q_row[j] == 0.0:
                    continue
                others = q_row[:j] + q_row[j + 1 :]
                pmf = poisson_binomial_pmf(others)
                share = math.fsum(pmf[k] / (k + 1.0) for k in range(len(pmf)))
                pick[r][j] = q_row[j] * share
        weights_idle = [h0s[j] * combo[j][0] for j in range(m)]
        weights_any = [
            weights_idle[j] + (1.0 - h0s[j]) * combo[j][1] for j in range(m)
        ]
        for j in range(m):
            w = weights_idle[j]
            if w == 0.0:
                continue
            for j2 in range(m):
                if j2 != j:
                    w *= weights_any[j2]
            if w == 0.0:
                continue
            pmf_n = poisson_binomial_pmf([pick[r][j] for r in range(n)])
            gain = math.fsum(pmf_n[k] * t_table[k] for k in range(len(pmf_n)))
            total += w * gain / m
    return total

"""Multi-user channel assignment with overlapping channel sharing.

Users get "separate" channels for their exclusive use plus "common" channels
shared with others through a contention phase. Availability of channel j at
user i is an independent Bernoulli with probability p[i][j]. The module
evaluates per-user throughput exactly, sizes the contention window for a
target first-collision probability, and provides greedy sum-throughput and
max-min assignment algorithms plus a brute-force reference search.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .model import ContractError, MacTiming, NumericError
from .sensing import poisson_binomial_pmf

W_MIN = 2
W_CAP = 1 << 16

# Cycle timing for the overhead fraction: 20 us backoff slots, RTS/CTS
# handshake, 3 ms cycles. The packet field is unused by the cycle-overhead
# model and only set to satisfy the timing contract.
CH4_TIMING = MacTiming(
    slot=20e-6, sifs=28e-6, difs=0.0, pd=0.0, ack=0.0,
    rts=48e-6, cts=40e-6, packet=1.0, cycle=3e-3,
)


def availability_matrix(rows):
    """Validate and return an (n_su, n_ch) availability matrix as ndarray."""
    p = np.asarray(rows, dtype=float)
    if p.ndim != 2 or p.size == 0:
        raise ContractError("availability matrix must be 2-D and non-empty")
    if np.any(p < 0.0) or np.any(p > 1.0) or not np.all(np.isfinite(p)):
        raise ContractError("availability entries must lie in [0,1]")
    return p


@dataclass(frozen=True)
class LinkSensing:
    """Per-(user, channel) detection and false alarm probabilities."""

    p_d: tuple
    p_f: tuple

    def __post_init__(self):
        pd = tuple(tuple(float(x) for x in row) for row in self.p_d)
        pf = tuple(tuple(float(x) for x in row) for row in self.p_f)
        object.__setattr__(self, "p_d", pd)
        object.__setattr__(self, "p_f", pf)
        shapes = {tuple(len(r) for r in m) for m in (pd, pf)}
        if len(shapes) != 1:
            raise ContractError("p_d and p_f must have the same shape")
        for m in (pd, pf):
            for row in m:
                for x in row:
                    if not 0.0 <= x <= 1.0:
                        raise ContractError("probabilities must lie in [0,1]")

    @classmethod
    def perfect(cls, n_su, n_ch):
        return cls.uniform(n_su, n_ch, 1.0, 0.0)

    @classmethod
    def uniform(cls, n_su, n_ch, p_d, p_f):
        return cls(
            tuple(tuple(p_d for _ in range(n_ch)) for _ in range(n_su)),
            tuple(tuple(p_f for _ in range(n_ch)) for _ in range(n_su)),
        )

    def idle_indication(self, p):
        """P[sensing says idle]: (1-P_f) p + (1-P_d)(1-p), per (user, channel)."""
        p = availability_matrix(p)
        pd = np.asarray(self.p_d, dtype=float)
        pf = np.asarray(self.p_f, dtype=float)
        if pd.shape != p.shape:
            raise ContractError("sensing matrices must match availability shape")
        return (1.0 - pf) * p + (1.0 - pd) * (1.0 - p)


@dataclass(frozen=True)
class AssignmentState:
    """Separate (exclusive) and common (shared) channel sets per user.

    A channel sits in at most one separate set and in no common set, or in
    two or more common sets and no separate set.
    """

    separate: tuple
    common: tuple
    n_ch: int

    def __post_init__(self):
        sep = tuple(frozenset(int(j) for j in s) for s in self.separate)
        com = tuple(frozenset(int(j) for j in c) for c in self.common)
        object.__setattr__(self, "separate", sep)
        object.__setattr__(self, "common", com)
        if len(sep) != len(com) or not sep:
            raise ContractError("separate and common need one set per user")
        counts = {}
        for group in (sep, com):
            for s in group:
                for j in s:
                    if not 0 <= j < self.n_ch:
                        raise ContractError("channel index out of range")
        seen = set()
        for s in sep:
            if s & seen:
                raise ContractError("separate sets must be pairwise disjoint")
            seen |= s
        for s, c in zip(sep, com):
            if s & c:
                raise ContractError("channel cannot be separate and common for one user")
        for c in com:
            for j in c:
                counts[j] = counts.get(j, 0) + 1
        for j, cnt in counts.items():
            if j in seen:
                raise ContractError("shared channel also appears in a separate set")
            if cnt < 2:
                raise ContractError("a common channel needs at least two sharers")

    @classmethod
    def empty(cls, n_su, n_ch):
        return cls(
            tuple(frozenset() for _ in range(n_su)),
            tuple(frozenset() for _ in range(n_su)),
            n_ch,
        )

    @property
    def n_su(self):
        return len(self.separate)

    def users_of(self, j):
        """All users holding channel j, whether separately or in common."""
        out = set()
        for i, (s, c) in enumerate(zip(self.separate, self.common)):
            if j in s or j in c:
                out.add(i)
        return frozenset(out)

    def assigned(self):
        out = set()
        for s in self.separate:
            out |= s
        for c in self.common:
            out |= c
        return frozenset(out)

    def with_separate(self, i, j):
        if j in self.assigned():
            raise ContractError("channel already assigned")
        sep = list(self.separate)
        sep[i] = sep[i] | {j}
        return AssignmentState(tuple(sep), self.common, self.n_ch)

    def share_many(self, j, users):
        """Give channel j to extra users, converting it to a common channel."""
        users = [int(u) for u in users]
        holders = self.users_of(j)
        if not holders:
            raise ContractError("cannot share an unassigned channel")
        if any(u in holders for u in users) or len(set(users)) != len(users):
            raise ContractError("new sharers must be distinct non-holders")
        sep = list(self.separate)
        com = list(self.common)
        for o in holders:
            if j in sep[o]:
                sep[o] = sep[o] - {j}
                com[o] = com[o] | {j}
        for u in users:
            com[u] = com[u] | {j}
        return AssignmentState(tuple(sep), tuple(com), self.n_ch)

    def share(self, j, user):
        return self.share_many(j, (user,))


def user_throughput_nonoverlap(channels, p_row):
    """P[at least one of the user's own channels is available]."""
    miss = 1.0
    for j in channels:
        miss *= 1.0 - p_row[j]
    return 1.0 - miss


def _prod(values):
    out = 1.0
    for v in values:
        out *= v
    return out


def _subsets(seq):
    for k in range(len(seq) + 1):
        yield from itertools.combinations(seq, k)


def _pick_channel_prob(idle_row, sep, com_wo_j, j):
    """P[a sharer lands on channel j]: j looks idle, all separate channels look
    busy, and a uniform pick among the looks-idle common channels hits j."""
    base = idle_row[j] * _prod(1.0 - idle_row[l] for l in sep)
    if base == 0.0:
        return 0.0
    total = 0.0
    for q in _subsets(tuple(com_wo_j)):
        w = _prod(idle_row[h] for h in q)
        w *= _prod(1.0 - idle_row[h] for h in com_wo_j if h not in q)
        total += w / (len(q) + 1.0)
    return base * total


def _win_given_pick(i, j, state, idle):
    """E[1/(1+A)] where A counts other sharers of j that also pick j."""
    probs = []
    for m in sorted(state.users_of(j) - {i}):
        com_wo_j = sorted(state.common[m] - {j})
        probs.append(
            _pick_channel_prob(idle[m], sorted(state.separate[m]), com_wo_j, j)
        )
    pmf = poisson_binomial_pmf(probs)
    return sum(pmf[k] / (k + 1.0) for k in range(len(pmf)))


@dataclass(frozen=True)
class ThroughputResult:
    total: float
    per_su: tuple


def exact_throughput(state, p, delta):
    """Per-user and total expected throughput under perfect sensing.

    A user transmits on an available separate channel when it has one;
    otherwise it picks uniformly among its available common channels and
    wins the contention against the other sharers that picked the same
    channel with probability 1/(1+A).
    """
    p = availability_matrix(p)
    if not 0.0 <= delta <= 1.0:
        raise ContractError("delta must lie in [0,1]")
    per = []
    win = {}
    for i in range(state.n_su):
        row = p[i]
        sep = sorted(state.separate[i])
        com = sorted(state.common[i])
        case1 = 1.0 - _prod(1.0 - row[j] for j in sep)
        case2 = 0.0
        if com:
            prefix = _prod(1.0 - row[j] for j in sep)
            for psi in _subsets(com):
                if not psi:
                    continue
                w = _prod(row[j] for j in psi)
                w *= _prod(1.0 - row[j] for j in com if j not in psi)
                s = 0.0
                for j in psi:
                    if (i, j) not in win:
                        win[i, j] = _win_given_pick(i, j, state, p)
                    s += win[i, j]
                case2 += w * s / len(psi)
            case2 *= (1.0 - delta) * prefix
        per.append(case1 + case2)
    return ThroughputResult(total=float(sum(per)), per_su=tuple(per))


def exact_throughput_imperfect(state, p, sensing, delta):
    """Per-user and total throughput when sensing can err.

    Only transmissions on truly idle channels count. Competing sharers are
    modelled through their unconditional idle-indication probabilities.
    """
    p = availability_matrix(p)
    if not 0.0 <= delta <= 1.0:
        raise ContractError("delta must lie in [0,1]")
    idle = sensing.idle_indication(p)
    pd = np.asarray(sensing.p_d, dtype=float)
    pf = np.asarray(sensing.p_f, dtype=float)
    per = []
    win = {}
    for i in range(state.n_su):
        row = p[i]
        sep = sorted(state.separate[i])
        com = sorted(state.common[i])

        case1 = 0.0
        for l1 in _subsets(sep):
            if not l1:
                continue
            w1 = _prod(row[j] for j in l1)
            w1 *= _prod(1.0 - row[j] for j in sep if j not in l1)
            busy = [j for j in sep if j not in l1]
            for l2 in _subsets(l1):
                if not l2:
                    continue
                w2 = _prod(1.0 - pf[i][j] for j in l2)
                w2 *= _prod(pf[i][j] for j in l1 if j not in l2)
                for l3 in _subsets(busy):
                    w3 = _prod(1.0 - pd[i][j] for j in l3)
                    w3 *= _prod(pd[i][j] for j in busy if j not in l3)
                    case1 += w1 * w2 * w3 * len(l2) / (len(l2) + len(l3))

        case2 = 0.0
        if com:
            # all separate channels must look busy before the user contends
            prefix = _prod(1.0 - idle[i][j] for j in sep)
            for psi in _subsets(com):
                if not psi:
                    continue
                w = _prod(row[j] for j in psi)
                w *= _prod(1.0 - row[j] for j in com if j not in psi)
                busy = [j for j in com if j not in psi]
                for g1 in _subsets(psi):
                    if not g1:
                        continue
                    w1 = _prod(1.0 - pf[i][j] for j in g1)
                    w1 *= _prod(pf[i][j] for j in psi if j not in g1)
                    for g2 in _subsets(busy):
                        w2 = _prod(1.0 - pd[i][j] for j in g2)
                        w2 *= _prod(pd[i][j] for j in busy if j not in g2)
                        k = len(g1) + len(g2)
                        s = 0.0
                        for j in g1:
                            if (i, j) not in win:
                                win[i, j] = _win_given_pick(i, j, state, idle)
                            s += win[i, j]
                        case2 += w * w1 * w2 * s / k
            case2 *= (1.0 - delta) * prefix
        per.append(case1 + case2)
    return ThroughputResult(total=float(sum(per)), per_su=tuple(per))


def _contend_probs(p, state):
    """P[user joins the contention phase]: own channels all busy, some common
    channel available."""
    out = []
    for i in range(state.n_su):
        row = p[i]
        sep_busy = _prod(1.0 - row[j] for j in state.separate[i])
        com_any = 1.0 - _prod(1.0 - row[j] for j in state.common[i])
        out.append(sep_busy * com_any if state.common[i] else 0.0)
    return out


def first_collision_probability(w, p, state):
    """P[the lowest backoff value is drawn by two or more contenders]."""
    if w < W_MIN:
        raise ValueError("w must be >= %d" % W_MIN)
    p = availability_matrix(p)
    pcon = _contend_probs(p, state)
    pm = poisson_binomial_pmf(pcon)
    v = np.arange(1, w, dtype=float) / w
    out = 0.0
    for m in range(2, len(pcon) + 1):
        if pm[m] == 0.0:
            continue
        pcm = 0.0
        for j in range(2, m + 1):
            pcm += math.comb(m, j) * w ** (-j) * float(np.sum(v ** (m - j)))
        out += pcm * pm[m]
    return out


def contention_window_for(eps_p, p, state):
    """Smallest window with first-collision probability at most eps_p."""
    if not 0.0 < eps_p <= 1.0:
        raise ContractError("eps_p must lie in (0,1]")
    if first_collision_probability(W_MIN, p, state) <= eps_p:
        return W_MIN
    lo, hi = W_MIN, W_MIN
    while first_collision_probability(hi, p, state) > eps_p:
        lo, hi = hi, hi * 2
        if hi > W_CAP:
            raise NumericError("no window up to 2^16 meets the collision target")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if first_collision_probability(mid, p, state) <= eps_p:
            hi = mid
        else:
            lo = mid
    return hi


def mac_overhead(w, timing: MacTiming, t_sen=0.0, t_syn=0.0):
    """Per-cycle overhead fraction: mean backoff, handshake, sensing, sync."""
    if timing.cycle <= 0.0:
        raise ContractError("timing.cycle must be positive")
    num = (
        (w - 1) * timing.slot / 2.0
        + timing.rts + timing.cts + 3.0 * timing.sifs
        + t_sen + t_syn
    )
    return num / timing.cycle


def estimate_overlap_gain(i, j, state, p, delta):
    """Estimated throughput gain for user i if it joins channel j.

    Counts the dominant events where the current sharers leave channel j
    unused: one sharer sees it busy, or every sharer has a separate channel
    of its own available.
    """
    p = availability_matrix(p)
    users = sorted(state.users_of(j))
    if i in users:
        raise ContractError("user already holds channel j")
    ms = len(users)
    if ms == 0:
        raise ContractError("channel j has no current user")
    row = p[i]
    pbar_sep = _prod(1.0 - row[h] for h in state.separate[i])
    pbar_com = _prod(1.0 - row[h] for h in state.common[i])
    base = (1.0 - delta) * row[j] * pbar_sep
    all_avail = _prod(p[m][j] for m in users)
    busy_elsewhere = _prod(
        1.0 - _prod(1.0 - p[m][h] for h in state.separate[m]) for m in users
    )
    one_blocked = sum(
        (1.0 - p[m][j]) * _prod(p[q][j] for q in users if q != m) for m in users
    )
    del1 = (1.0 - 1.0 / ms) * base * (1.0 - pbar_com) * one_blocked
    del2 = base * pbar_com * all_avail * busy_elsewhere
    del3 = (1.0 - 1.0 / ms) * base * (1.0 - pbar_com) * all_avail * busy_elsewhere
    return del1 + del2 + del3


def greedy_nonoverlap(p):
    """Assign every channel exclusively, greedy on the throughput increase."""
    p = availability_matrix(p)
    n_su, n_ch = p.shape
    state = AssignmentState.empty(n_su, n_ch)
    unassigned = set(range(n_ch))
    while unassigned:
        best = None
        for i in range(n_su):
            pbar = _prod(1.0 - p[i][h] for h in state.separate[i])
            for j in sorted(unassigned):
                gain = p[i][j] * pbar
                if best is None or gain > best[0]:
                    best = (gain, i, j)
        _, i, j = best
        state = state.with_separate(i, j)
        unassigned.remove(j)
    return state


def maxmin_greedy_nonoverlap(p):
    """Exclusive assignment that always serves a currently-worst user next."""
    p = availability_matrix(p)
    n_su, n_ch = p.shape
    state = AssignmentState.empty(n_su, n_ch)
    unassigned = set(range(n_ch))
    while unassigned:
        t = [
            user_throughput_nonoverlap(sorted(state.separate[i]), p[i])
            for i in range(n_su)
        ]
        tmin = min(t)
        best = None
        for i in range(n_su):
            if t[i] > tmin:
                continue
            pbar = _prod(1.0 - p[i][h] for h in state.separate[i])
            for j in sorted(unassigned):
                gain = p[i][j] * pbar
                if best is None or gain > best[0]:
                    best = (gain, i, j)
        _, i, j = best
        state = state.with_separate(i, j)
        unassigned.remove(j)
    return state


def greedy_overlap(p, eps=None, eps_delta=0.01, *, eps_p=0.03,
                   timing=None, t_sen=0.0, t_syn=0.0):
    """Grow channel sharing greedily while tracking the contention overhead.

    Starts from the exclusive assignment, then repeatedly shares the channel
    with the largest estimated gain, re-deriving the contention window and
    overhead fraction whenever the overhead moves by more than eps_delta.
    When eps is None the stopping threshold is 1e-3 of the current total
    throughput. Returns (state, w, delta).
    """
    if timing is None:
        timing = CH4_TIMING
    p = availability_matrix(p)
    n_su = p.shape[0]
    state = greedy_nonoverlap(p)
    w = contention_window_for(eps_p, p, state)
    delta0 = mac_overhead(w, timing, t_sen, t_syn)
    upd = False
    h = 1
    for _ in range(10000):
        if h > n_su:
            break
        group = [j for j in sorted(state.assigned())
                 if len(state.users_of(j)) == h]
        best = None
        for j in group:
            users = state.users_of(j)
            owner = next(iter(users)) if h == 1 else None
            if h == 1 and len(state.separate[owner]) <= 1:
                # keep at least one exclusive channel per user
                continue
            for l in range(n_su):
                if l in users:
                    continue
                gain = estimate_overlap_gain(l, j, state, p, delta0)
                if best is None or gain > best[0]:
                    best = (gain, l, j)
        if eps is None:
            eps_cur = 1e-3 * exact_throughput(state, p, delta0).total
        else:
            eps_cur = eps
        if best is None or best[0] <= eps_cur:
            if upd:
                break
            h += 1
            continue
        _, l, j = best
        temp = state.share(j, l)
        w_t = contention_window_for(eps_p, p, temp)
        d_t = mac_overhead(w_t, timing, t_sen, t_syn)
        if abs(d_t - delta0) > eps_delta:
            # overhead moved too much: re-estimate gains before committing
            upd = True
            delta0 = d_t
            continue
        state, w, delta0 = temp, w_t, d_t
        upd = False
    else:
        raise NumericError("channel sharing loop did not settle")
    w = contention_window_for(eps_p, p, state)
    delta0 = mac_overhead(w, timing, t_sen, t_syn)
    return state, w, delta0


def maxmin_overlap(p, *, eps_p=0.03, timing=None, t_sen=0.0, t_syn=0.0,
                   max_rounds=200):
    """Max-min assignment: repeatedly lift the worst user by channel sharing.

    Each round scans every way to hand one more channel to the worst user,
    alone or alongside extra sharers, and commits the move that leaves the
    highest worst-case throughput among the users it touches. Returns
    (state, w, delta).
    """
    if timing is None:
        timing = CH4_TIMING
    p = availability_matrix(p)
    n_su = p.shape[0]
    state = maxmin_greedy_nonoverlap(p)
    w = contention_window_for(eps_p, p, state)
    delta = mac_overhead(w, timing, t_sen, t_syn)
    for _ in range(max_rounds):
        res = exact_throughput(state, p, delta)
        tmin = min(res.per_su)
        istar = res.per_su.index(tmin)
        best = None

        def consider(cand, j):
            nonlocal best
            affected = cand.users_of(j)
            r = exact_throughput(cand, p, delta)
            worst = min(r.per_su[u] for u in affected)
            if worst > tmin + 1e-12 and (best is None or worst > best[0]):
                best = (worst, cand)

        for ip in range(n_su):
            if ip == istar:
                continue
            others = [m for m in range(n_su) if m not in (istar, ip)]
            for j in sorted(state.separate[ip]):
                for l in range(len(others) + 1):
                    for extra in itertools.combinations(others, l):
                        consider(state.share_many(j, (istar,) + extra), j)
        shared = sorted(
            {j for c in state.common for j in c} - state.common[istar]
        )
        for j in shared:
            others = [
                m for m in range(n_su)
                if m != istar and m not in state.users_of(j)
            ]
            for l in range(len(others) + 1):
                for extra in itertools.combinations(others, l):
                    consider(state.share_many(j, (istar,) + extra), j)
        if best is None:
            break
        state = best[1]
        w = contention_window_for(eps_p, p, state)
        delta = mac_overhead(w, timing, t_sen, t_syn)
    else:
        raise NumericError("max-min improvement did not settle")
    return state, w, delta


def brute_force_assignment(p, objective="sum", delta=0.0):
    """Search every way to hand each channel to any subset of users.

    Returns (state, value) maximizing total ("sum") or worst-user ("maxmin")
    throughput at a fixed overhead fraction. State count is 2**(n_su*n_ch),
    so the product is capped at 18.
    """
    p = availability_matrix(p)
    n_su, n_ch = p.shape
    if n_su * n_ch > 18:
        raise ContractError("state space too large for brute force")
    if objective not in ("sum", "maxmin"):
        raise ContractError("objective must be 'sum' or 'maxmin'")
    best = None
    for owners in itertools.product(range(1 << n_su), repeat=n_ch):
        sep = [set() for _ in range(n_su)]
        com = [set() for _ in range(n_su)]
        for j, mask in enumerate(owners):
            holders = [i for i in range(n_su) if mask >> i & 1]
            if len(holders) == 1:
                sep[holders[0]].add(j)
            else:
                for i in holders:
                    com[i].add(j)
        state = AssignmentState(tuple(map(frozenset, sep)),
                                tuple(map(frozenset, com)), n_ch)
        r = exact_throughput(state, p, delta)
        val = r.total if objective == "sum" else min(r.per_su)
        if best is None or val > best[0] + 1e-15:
            best = (val, state)
    return best[1], best[0]


def throughput_error_bound(eps_p, p, state):
    """Upper bound on throughput lost to residual contention collisions."""
    p = availability_matrix(p)
    return eps_p * sum(_contend_probs(p, state))

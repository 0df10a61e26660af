"""Classical contention analytics.

Window-based CSMA/CA saturation model (Bianchi fixed point plus generic-slot
accounting) and p-persistent CSMA contention overhead and throughput.
"""

import math
from dataclasses import dataclass

from .model import MacTiming, NumericError

BASIC = "basic"
RTSCTS = "rtscts"


@dataclass(frozen=True)
class BackoffConfig:
    """Binary-exponential backoff: minimum window w0, maximum stage m."""

    w0: int
    m: int

    def __post_init__(self):
        if self.w0 < 1:
            raise ValueError("w0 must be >= 1")
        if self.m < 0:
            raise ValueError("m must be >= 0")


@dataclass(frozen=True)
class SlotOutcomeProbs:
    """Probabilities that a generic slot is a success, idle, or collision."""

    p_succ: float
    p_idle: float
    p_coll: float

    def __post_init__(self):
        if abs(self.p_succ + self.p_idle + self.p_coll - 1.0) > 1e-12:
            raise ValueError("slot outcome probabilities must sum to 1")


def _bianchi_phi(p, cfg: BackoffConfig):
    """Transmission probability for a given conditional collision probability."""
    w, m = cfg.w0, cfg.m
    # Geometric-sum form; the ratio form is 0/0 at p = 1/2.
    if abs(2.0 * p - 1.0) < 1e-9:
        geo = float(m)
    else:
        geo = (1.0 - (2.0 * p) ** m) / (1.0 - 2.0 * p)
    return 2.0 / (1.0 + w + p * w * geo)


def bianchi_fixed_point(cfg: BackoffConfig, n0, method="bisect"):
    """Solve the window-based CSMA fixed point, returning (phi, p_coll).

    The primary method bisects on phi with p = 1-(1-phi)**(n0-1) induced;
    "picard" is an independent damped iteration kept for cross-checking.
    """
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    if n0 == 1:
        return 2.0 / (cfg.w0 + 1.0), 0.0

    if method == "bisect":
        lo, hi = 0.0, 1.0

        def residual(phi):
            p = 1.0 - (1.0 - phi) ** (n0 - 1)
            return phi - _bianchi_phi(p, cfg)

        # residual(0+) < 0 and residual(1-) > 0, so the root is bracketed
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if residual(mid) < 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-14:
                break
        phi = 0.5 * (lo + hi)
    elif method == "picard":
        phi = 0.1
        damp = 0.25
        for _ in range(100000):
            p = 1.0 - (1.0 - phi) ** (n0 - 1)
            nxt = (1.0 - damp) * phi + damp * _bianchi_phi(p, cfg)
            if abs(nxt - phi) < 1e-14:
                phi = nxt
                break
            phi = nxt
        else:
            raise NumericError("picard iteration did not converge")
    else:
        raise ValueError("unknown method %r" % method)

    p = 1.0 - (1.0 - phi) ** (n0 - 1)
    if abs(phi - _bianchi_phi(p, cfg)) > 1e-10:
        raise NumericError("fixed point residual above 1e-10")
    return phi, p


def success_collision_times(timing: MacTiming, handshake):
    """Per-transmission busy durations (T_s, T_c) for the chosen handshake."""
    t = timing
    if handshake == BASIC:
        t_s = t.header + t.packet + t.sifs + 2.0 * t.pd + t.ack + t.difs
        t_c = t.header + t.packet + t.difs + t.pd
    elif handshake == RTSCTS:
        t_s = (
            t.header + t.packet + 3.0 * t.sifs + 2.0 * t.pd
            + t.rts + t.cts + t.ack + t.difs
        )
        t_c = t.header + t.difs + t.rts + t.pd
    else:
        raise ValueError("handshake must be %r or %r" % (BASIC, RTSCTS))
    return t_s, t_c


def generic_slot_stats(phi, n0, timing: MacTiming, handshake=BASIC):
    """Slot outcome probabilities and mean generic slot duration."""
    p_t = 1.0 - (1.0 - phi) ** n0
    if p_t > 0.0:
        p_s = n0 * phi * (1.0 - phi) ** (n0 - 1) / p_t
    else:
        p_s = 0.0
    t_s, t_c = success_collision_times(timing, handshake)
    t_avg = (1.0 - p_t) * timing.slot + p_t * p_s * t_s + p_t * (1.0 - p_s) * t_c
    probs = SlotOutcomeProbs(
        p_succ=p_t * p_s, p_idle=1.0 - p_t, p_coll=p_t * (1.0 - p_s)
    )
    return probs, t_avg


def ppersist_slot_probs(p, n0):
    """Generic-slot outcome probabilities for p-persistent CSMA."""
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    p_s = n0 * p * (1.0 - p) ** (n0 - 1)
    p_i = (1.0 - p) ** n0
    p_c = max(0.0, 1.0 - p_s - p_i)
    return SlotOutcomeProbs(p_succ=p_s, p_idle=p_i, p_coll=p_c)


def ppersist_handshake_times(timing: MacTiming):
    """(T_S, T̄_S, T_C): successful data, RTS/CTS exchange, collision durations."""
    t = timing
    t_data = t.packet + 2.0 * t.sifs + 2.0 * t.pd + t.ack
    t_rtscts = t.difs + t.rts + t.cts + 2.0 * t.pd
    t_coll = t.rts + t.difs + t.pd
    return t_data, t_rtscts, t_coll


def ppersist_contention_overhead(p, n0, timing: MacTiming):
    """Mean time spent on idle slots, collisions, and the winning handshake.

    Returns seconds. Diverges (returns inf) as the success probability of a
    busy slot vanishes, e.g. p -> 1 with n0 >= 2.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0,1]")
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    q_all = (1.0 - p) ** n0
    p_s = n0 * p * (1.0 - p) ** (n0 - 1)
    _, t_rtscts, t_coll = ppersist_handshake_times(timing)
    t_idle = timing.slot * q_all / (1.0 - q_all)
    if p_s == 0.0:
        return math.inf
    n_coll = (1.0 - q_all) / p_s - 1.0
    return n_coll * t_coll + t_idle * (n_coll + 1.0) + t_rtscts


def ppersist_saturation_throughput(p, n0, timing: MacTiming):
    """Saturation throughput T_S / (T̄_cont + T_S) of p-persistent CSMA."""
    t_data, _, _ = ppersist_handshake_times(timing)
    t_cont = ppersist_contention_overhead(p, n0, timing)
    if math.isinf(t_cont):
        return 0.0
    return t_data / (t_cont + t_data)

"""Event-level realization of the full-duplex contention-and-access cycle.

A continuous-time primary-user process runs across consecutive cycles, so
frames with several PU transitions occur with their natural probability
even though the analytic model excludes them. The sensing stage draws the
energy statistic conditioned on the realized PU occupancy of the window,
and bits count as goodput only over the airtime the PU actually left free,
at the stage's own rate: sensing bits at the (possibly self-interfered)
sensing SINR, transmission bits at the data SINR when the decision said
idle. Transmissions overlapping the PU deliver nothing.
"""

from __future__ import annotations

import math

import numpy as np

from ..fdcmac import FdcScenario
from ..model import N0, ContractError, Power, q_inv
from .base import as_seed, check_cycles, ratio_estimate, stream_tree
from .contention import draw_reservations
from .pu import PuTrace, interval_arrays


def sim_fdcmac(sc: FdcScenario, t_s, p_sen: Power, cycles, seed, trace=None):
    """Monte Carlo normalized throughput of the two-stage FD MAC.

    The optional trace stream gets one line per cycle: cycle index, PU
    state at frame start (1 = idle), contender count, 1 when the
    transmission stage ran, bits moved that cycle.
    """
    cycles = check_cycles(cycles)
    seed = as_seed(seed)
    if not 0.0 < t_s <= sc.t_frame:
        raise ContractError("t_s must lie in (0, t_frame]")
    if p_sen.linear > sc.p_max.linear * (1.0 + 1e-12):
        raise ContractError("p_sen exceeds p_max")
    t = sc.timing
    theta, phi = sc.theta, sc.phi
    p_dat = sc.p_max.linear
    # Sensing always happens at the transmitting node, so the detector sees
    # the residual self-interference in both modes; theta gates only the
    # data-path SINRs.
    i_det = sc.si.zeta * p_sen.linear ** sc.si.xi
    i_sen = theta * i_det
    i_dat = theta * sc.si.zeta * p_dat ** sc.si.xi
    r_s1 = phi * math.log2(1.0 + p_sen.linear / (N0 + i_sen))
    r_d1 = phi * math.log2(1.0 + p_dat / (N0 + i_dat))
    gamma_ps = sc.p_pu.linear / (N0 + i_det)
    samples_m = sc.f_s * t_s
    thr = 1.0 + gamma_ps + q_inv(sc.pd_target) * (1.0 + gamma_ps) / math.sqrt(
        samples_m
    )

    streams = stream_tree(seed, {"contention": None, "pu": None, "sensing": None})
    t_succ = t.difs + t.rts + t.sifs + t.cts + 2.0 * t.pd
    t_coll = t.difs + t.rts + t.pd
    t_cont, _ = draw_reservations(
        streams["contention"], sc.p_access, sc.n_su, t.slot, t_coll, t_succ, cycles
    )
    t_ove = t_cont + 2.0 * t.sifs + 2.0 * t.pd + t.ack
    length = t_ove + sc.t_frame
    ends = np.cumsum(length)
    frame0 = ends - sc.t_frame

    bounds, flags = interval_arrays(sc.pu, float(ends[-1]), streams["pu"])
    pu = PuTrace(bounds, flags)
    idle_sen = pu.idle_between(frame0, frame0 + t_s)
    idle_dat = pu.idle_between(frame0 + t_s, ends)

    rho = np.clip(1.0 - idle_sen / t_s, 0.0, 1.0)
    mean = 1.0 + rho * gamma_ps
    var = (rho * (gamma_ps + 1.0) ** 2 + (1.0 - rho)) / samples_m
    stat = mean + np.sqrt(var) * streams["sensing"].standard_normal(cycles)
    said_idle = stat < thr

    bits = idle_sen * r_s1 + said_idle * idle_dat * r_d1
    if trace is not None:
        start_idle = pu.idle_at(frame0)
        for c in range(cycles):
            trace.write(
                "%d\t%d\t%d\t%d\t%.9g\n"
                % (c, int(start_idle[c]), sc.n_su, int(said_idle[c]), bits[c])
            )
    return ratio_estimate(bits, length, seed)

"""Full-duplex cognitive MAC: two-stage data phase and its configuration.

After winning a p-persistent contention, a secondary link runs a data
phase of length T split into an FD sensing stage (transmit at p_sen while
sensing, duration t_s) and a transmission stage (transmit at p_max). The
PU may change state at most once per data phase, which yields three
contributions to the bits moved per cycle: the PU stays idle throughout,
the PU arrives during the transmission stage, and the PU arrives during
the sensing stage. Normalized throughput divides by the reservation
overhead plus T. The critical sensing power separates configurations
where throughput keeps rising with sensing time from those with an
interior optimum, and configure() searches the (t_s, p_sen) plane.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .model import (
    N0,
    ContractError,
    MacTiming,
    NumericError,
    Power,
    PuChannelStats,
)
from .sensing import (
    SelfInterference,
    fd_eps_full_presence,
    fd_pd01,
    fd_pf00,
    self_interference_power,
)

HDTX = "HDTx"
FDTX = "FDTx"

# switch the idle-to-busy contributions to direct quadrature once the
# exponent T/delta_tau is too small for the closed forms' cancellations
CLOSED_FORM_MIN_EXP = 1e-4


@dataclass(frozen=True)
class FdcScenario:
    """Network and protocol constants of one full-duplex MAC deployment.

    t_frame is the data-phase length T and must stay below the channel
    evacuation time t_eva (the slow-PU assumption the single-transition
    model rests on). pu must carry both sojourn means; its p_idle must be
    the stationary ratio of the means whenever both are finite.
    """

    n_su: int
    p_access: float
    timing: MacTiming
    t_frame: float
    t_eva: float
    pu: PuChannelStats
    p_pu: Power
    p_max: Power
    si: SelfInterference
    pd_target: float
    f_s: float
    mode: str = FDTX

    def __post_init__(self):
        if self.n_su < 1:
            raise ValueError("need at least one contending SU")
        if not 0.0 < self.p_access < 1.0:
            raise ValueError("p_access must lie strictly in (0,1)")
        if self.t_frame <= 0.0:
            raise ValueError("t_frame must be positive")
        if self.t_frame >= self.t_eva:
            raise ValueError("t_frame must be below the evacuation time t_eva")
        if self.pu.mean_idle is None or self.pu.mean_active is None:
            raise ValueError("pu must carry mean idle and active sojourn times")
        if math.isfinite(self.pu.mean_idle) and math.isfinite(self.pu.mean_active):
            stationary = self.pu.mean_idle / (self.pu.mean_idle + self.pu.mean_active)
            if abs(self.pu.p_idle - stationary) > 1e-9:
                raise ValueError(
                    "pu.p_idle %.6g is not the stationary ratio %.6g of the means"
                    % (self.pu.p_idle, stationary)
                )
        if not 0.0 < self.pd_target < 1.0:
            raise ValueError("pd_target must lie strictly in (0,1)")
        if self.f_s <= 0.0:
            raise ValueError("sampling frequency must be positive")
        if self.mode not in (HDTX, FDTX):
            raise ValueError("mode must be %r or %r" % (HDTX, FDTX))

    @property
    def theta(self):
        return 1 if self.mode == FDTX else 0

    @property
    def phi(self):
        return 2 if self.mode == FDTX else 1


@dataclass(frozen=True)
class FdcRates:
    """Link SINRs of the two stages, with and without the PU present.

    The stages differ only in transmit power: the sensing stage carries
    data at p_sen, the transmission stage at p_max. In FDTx mode both
    stages run two-way, so each receiver sees the residual
    self-interference of its own transmitter at that stage's power; in
    HDTx mode (theta = 0) both stages are one-way and interference-free.
    """

    gamma_s1: float
    gamma_s2: float
    gamma_d1: float
    gamma_d2: float

    def __post_init__(self):
        for name in ("gamma_s1", "gamma_s2", "gamma_d1", "gamma_d2"):
            if getattr(self, name) < 0.0:
                raise ValueError("%s must be non-negative" % name)
        if self.gamma_s2 > self.gamma_s1 or self.gamma_d2 > self.gamma_d1:
            raise ValueError("PU interference cannot raise a stage SNR")

    @classmethod
    def for_scenario(cls, sc: FdcScenario, p_sen: Power):
        p_dat = sc.p_max.linear
        i_sen = sc.theta * self_interference_power(p_sen.linear, sc.si)
        i_dat = sc.theta * self_interference_power(p_dat, sc.si)
        return cls(
            gamma_s1=p_sen.linear / (N0 + i_sen),
            gamma_s2=p_sen.linear / (N0 + sc.p_pu.linear + i_sen),
            gamma_d1=p_dat / (N0 + i_dat),
            gamma_d2=p_dat / (N0 + sc.p_pu.linear + i_dat),
        )


def t_overhead(sc: FdcScenario):
    """Mean reservation overhead: idle slots, collisions, handshake, ACK.

    The collision count is geometric on busy slots and each gap of idle
    slots is geometric as well; the winning exchange costs
    DIFS+RTS+SIFS+CTS+2PD and a collision costs DIFS+RTS+PD.
    """
    t = sc.timing
    p, n0 = sc.p_access, sc.n_su
    q_all = (1.0 - p) ** n0
    p_succ = n0 * p * (1.0 - p) ** (n0 - 1)
    t_succ = t.difs + t.rts + t.sifs + t.cts + 2.0 * t.pd
    t_coll = t.difs + t.rts + t.pd
    t_idle = t.slot * q_all / (1.0 - q_all)
    n_coll = (1.0 - q_all) / p_succ - 1.0
    t_cont = n_coll * t_coll + t_idle * (n_coll + 1.0) + t_succ
    return t_cont + 2.0 * t.sifs + 2.0 * t.pd + t.ack


def _quad(fn, lo, hi, what):
    val, err = integrate.quad(fn, lo, hi, epsabs=1e-10, limit=200)
    if err > 1e-8:
        raise NumericError(
            "%s quadrature error %.3g over [%.6g, %.6g]" % (what, err, lo, hi)
        )
    return val


def data_bits(sc: FdcScenario, t_s, p_sen: Power):
    """Bits/Hz moved in one data phase, split by PU behaviour.

    Returns (b1, b2, b3): PU idle throughout, PU arriving during the
    transmission stage, PU arriving during the sensing stage. Both stages
    carry payload in the mode's one-way or two-way pattern, so every bit
    term scales with phi and only the stage power (hence SINR) differs.
    The detection threshold is the closed-form one meeting sc.pd_target
    for a PU present through the whole window; false alarms cost only the
    transmission stage, since sensing-stage bits are already on the air
    when the decision lands.
    """
    if not 0.0 < t_s <= sc.t_frame:
        raise ValueError("t_s must lie in (0, t_frame]")
    t_big = sc.t_frame
    t_ove = t_overhead(sc)
    phi = sc.phi
    rates = FdcRates.for_scenario(sc, p_sen)
    # per-stage bit rates, both directions counted
    r_s1 = phi * math.log2(1.0 + rates.gamma_s1)
    r_s2 = phi * math.log2(1.0 + rates.gamma_s2)
    r_d1 = phi * math.log2(1.0 + rates.gamma_d1)
    r_d2 = phi * math.log2(1.0 + rates.gamma_d2)

    eps = fd_eps_full_presence(
        sc.pd_target, t_s, sc.f_s, p_sen.linear, sc.p_pu.linear, sc.si
    )
    pf00 = float(fd_pf00(eps, t_s, sc.f_s, p_sen.linear, sc.si))

    h0 = sc.pu.p_idle
    tau_id, tau_ac = sc.pu.mean_idle, sc.pu.mean_active
    inv_id = 1.0 / tau_id
    inv_dtau = 1.0 / tau_ac - inv_id

    # PU idle for the whole cycle: the idle period must outlast t_ove + T
    b1 = (
        h0
        * math.exp(-(t_ove + t_big) * inv_id)
        * (t_s * r_s1 + (1.0 - pf00) * (t_big - t_s) * r_d1)
    )
    if inv_id == 0.0:
        # transitions never happen inside a finite window
        return float(b1), 0.0, 0.0

    k_e = h0 * math.exp(-(t_ove * inv_id + t_big / tau_ac))
    t_d11 = (t_big - t_s) * r_d2

    if abs(t_big * inv_dtau) >= CLOSED_FORM_MIN_EXP:
        dtau = 1.0 / inv_dtau
        e_t = math.exp(t_big * inv_dtau)
        e_s = math.exp(t_s * inv_dtau)
        b2 = (
            k_e
            * (dtau * inv_id)
            * (
                (e_t - e_s)
                * (t_s * r_s1 - dtau * (1.0 - pf00) * (r_d1 - r_d2))
                + (t_big - t_s)
                * (1.0 - pf00)
                * (e_t * r_d1 - e_s * r_d2)
            )
        )
        b31 = (
            k_e
            * (dtau * inv_id)
            * (
                dtau * ((t_s * inv_dtau - 1.0) * e_s + 1.0) * (r_s1 - r_s2)
                + (e_s - 1.0) * (t_d11 + t_s * r_s2)
            )
        )
    else:
        # 1/delta_tau ~ 0 is a removable singularity of the closed forms

        def arrive_tx(x):
            # PU turns up x into the transmission stage
            rate = t_s * r_s1 + (1.0 - pf00) * (
                (t_big - t_s - x) * r_d2 + x * r_d1
            )
            return rate * inv_id * math.exp((t_s + x) * inv_dtau)

        def arrive_sense(x):
            # PU turns up x into the sensing stage; detection unresolved yet
            rate = x * r_s1 + (t_s - x) * r_s2 + t_d11
            return rate * inv_id * math.exp(x * inv_dtau)

        b2 = k_e * _quad(arrive_tx, 0.0, t_big - t_s, "arrival-in-transmission")
        b31 = k_e * _quad(arrive_sense, 0.0, t_s, "arrival-in-sensing")

    def missed_detection(x):
        pd = fd_pd01(eps, t_s, x, sc.f_s, p_sen.linear, sc.p_pu.linear, sc.si)
        return pd * inv_id * math.exp(x * inv_dtau)

    t_bar_32 = _quad(missed_detection, 0.0, t_s, "detection tail")
    b3 = b31 - k_e * t_d11 * t_bar_32
    return float(b1), float(max(b2, 0.0)), float(max(b3, 0.0))


def fdc_nt(sc: FdcScenario, t_s, p_sen: Power):
    """Normalized throughput (bits/s/Hz) of one contention-and-access cycle."""
    if p_sen.linear > sc.p_max.linear * (1.0 + 1e-12):
        raise ContractError(
            "p_sen %.4g exceeds p_max %.4g" % (p_sen.linear, sc.p_max.linear)
        )
    b1, b2, b3 = data_bits(sc, t_s, p_sen)
    return (b1 + b2 + b3) / (t_overhead(sc) + sc.t_frame)


def critical_psen(sc: FdcScenario):
    """Sensing power above which FDTx throughput keeps rising with t_s."""
    if sc.mode != FDTX:
        raise ContractError("the critical sensing power is an FDTx-mode notion")
    p_dat = sc.p_max.linear
    i_dat = self_interference_power(p_dat, sc.si)
    return Power(N0 * ((1.0 + p_dat / (N0 + i_dat)) ** 2 - 1.0))


class TsOptimum(NamedTuple):
    t_s: float
    nt: float


class ConfigureResult(NamedTuple):
    t_s: float
    p_sen: Power
    nt: float
    table: tuple


def optimize_ts(sc: FdcScenario, p_sen: Power, grid_points=48):
    """Best sensing-stage length for a fixed sensing power.

    The throughput is unimodal in t_s (monotone when the sensing-stage
    rate beats the false-alarm-gated transmission rate), so golden-section
    search converges; a coarse grid and the t_s = T boundary guard
    against quadrature noise. Ties resolve to the smaller t_s.
    """
    t_big = sc.t_frame
    lo = t_big / 2000.0

    def f(x):
        try:
            return fdc_nt(sc, x, p_sen)
        except NumericError:
            return -math.inf

    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, t_big
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = f(c), f(d)
    best = (c, fc) if fc >= fd else (d, fd)
    while b - a > 1e-6 * t_big:
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

    candidates = [best]
    for x in np.linspace(lo, t_big, grid_points):
        candidates.append((float(x), f(float(x))))
    top = max(v for _, v in candidates)
    if top == -math.inf:
        raise NumericError("detection target unreachable at every sensing time")
    t_s = min(x for x, v in candidates if v >= top - 1e-12 * max(1.0, abs(top)))
    return TsOptimum(t_s=t_s, nt=top)


def configure(sc: FdcScenario, p_sen_grid, grid_points=48):
    """Scan sensing powers, tuning the sensing time at each one.

    Returns the winning (t_s, p_sen, nt) plus the full per-power table.
    Ties resolve to the lower sensing power.
    """
    rows = []
    for p_sen in p_sen_grid:
        if p_sen.linear > sc.p_max.linear * (1.0 + 1e-12):
            raise ContractError(
                "grid point %.4g exceeds p_max %.4g"
                % (p_sen.linear, sc.p_max.linear)
            )
        opt = optimize_ts(sc, p_sen, grid_points=grid_points)
        rows.append((p_sen, opt.t_s, opt.nt))
    if not rows:
        raise ValueError("p_sen_grid must contain at least one power")
    best = max(r[2] for r in rows)
    eps = 1e-12 * max(1.0, abs(best))
    winner = min(
        (r for r in rows if r[2] >= best - eps), key=lambda r: r[0].linear
    )
    return ConfigureResult(
        t_s=winner[1], p_sen=winner[0], nt=winner[2], table=tuple(rows)
    )

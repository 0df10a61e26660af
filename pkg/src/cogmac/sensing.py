"""Energy-detection sensing performance and cooperative fusion.

Covers the single-sensor detection/false-alarm probabilities, the
a-out-of-b decision fusion (with and without reporting errors), and the
full-duplex sensing statistics under residual self-interference.
"""

import math
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy import integrate

from .model import N0, ContractError, NumericError, q, q_inv

# explicit subset enumeration is exact but 2^b; switch to the DP above this
FUSION_ENUM_MAX_B = 20


@dataclass(frozen=True)
class SensorSpec:
    """One energy detector: SNR, sampling rate, sensing time, threshold."""

    snr: float
    sample_rate: float
    sense_time: float
    threshold: float | None = None

    def __post_init__(self):
        if self.snr <= 0.0:
            raise ValueError("snr must be positive")
        if self.sample_rate <= 0.0:
            raise ValueError("sample_rate must be positive")
        if self.sense_time <= 0.0:
            raise ValueError("sense_time must be positive")


@dataclass(frozen=True)
class FusionRule:
    """a-out-of-b rule: fused decision is busy when >= a of b votes say busy."""

    a: int
    b: int

    def __post_init__(self):
        if not 1 <= self.a <= self.b:
            raise ValueError("need 1 <= a <= b, got a=%d b=%d" % (self.a, self.b))


@dataclass(frozen=True)
class ReportErrorMatrix:
    """Bit error probability of the report from sender SU to receiver SU."""

    p_err: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.p_err, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("p_err must be a square (receiver, sender) matrix")
        if np.any(np.diag(m) != 0.0):
            raise ValueError("a SU never corrupts its own result: diagonal must be 0")
        if np.any(m < 0.0) or np.any(m > 0.5):
            raise ValueError("report error probabilities must lie in [0, 0.5]")
        object.__setattr__(self, "p_err", m)

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros((n, n)))

    @classmethod
    def uniform(cls, n, p):
        m = np.full((n, n), float(p))
        np.fill_diagonal(m, 0.0)
        return cls(m)


@dataclass(frozen=True)
class SelfInterference:
    """Residual self-interference model I(P) = zeta * P**xi."""

    zeta: float
    xi: float

    def __post_init__(self):
        if self.zeta < 0.0:
            raise ValueError("zeta must be non-negative")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError("xi must lie in [0,1]")


def energy_pd(s: SensorSpec):
    """Detection probability of an energy detector at threshold s.threshold."""
    if s.threshold is None:
        raise ContractError("energy_pd needs an explicit threshold")
    m = s.sense_time * s.sample_rate
    arg = (s.threshold / N0 - s.snr - 1.0) * math.sqrt(m / (2.0 * s.snr + 1.0))
    return q(arg)


def energy_pf(s: SensorSpec):
    """False alarm probability of an energy detector at threshold s.threshold."""
    if s.threshold is None:
        raise ContractError("energy_pf needs an explicit threshold")
    m = s.sense_time * s.sample_rate
    return q((s.threshold / N0 - 1.0) * math.sqrt(m))


def threshold_for_target_pd(pd_target, s: SensorSpec):
    """Threshold at which energy_pd meets pd_target with equality."""
    if not 0.0 < pd_target < 1.0:
        raise ValueError("pd target must lie strictly in (0,1)")
    m = s.sense_time * s.sample_rate
    return N0 * (
        1.0 + s.snr + q_inv(pd_target) * math.sqrt((2.0 * s.snr + 1.0) / m)
    )


def pf_for_target_pd(pd_target, s: SensorSpec):
    """False alarm probability when the detection constraint is met with equality."""
    if not 0.0 < pd_target < 1.0:
        raise ValueError("pd target must lie strictly in (0,1)")
    m = s.sense_time * s.sample_rate
    alpha = math.sqrt(2.0 * s.snr + 1.0) * q_inv(pd_target)
    return q(alpha + math.sqrt(m) * s.snr)


def poisson_binomial_pmf(probs):
    """PMF of the number of successes among independent Bernoulli(probs)."""
    probs = np.asarray(probs, dtype=float)
    pmf = np.zeros(len(probs) + 1)
    pmf[0] = 1.0
    for k, p in enumerate(probs):
        pmf[1 : k + 2] = pmf[1 : k + 2] * (1.0 - p) + pmf[: k + 1] * p
        pmf[0] *= 1.0 - p
    return pmf


def fuse_a_out_of_b(per_sensor, rule: FusionRule):
    """Probability that >= rule.a of the rule.b sensors vote busy."""
    per_sensor = list(per_sensor)
    if len(per_sensor) != rule.b:
        raise ContractError(
            "expected %d per-sensor probabilities, got %d" % (rule.b, len(per_sensor))
        )
    if rule.b > FUSION_ENUM_MAX_B:
        pmf = poisson_binomial_pmf(per_sensor)
        return float(pmf[rule.a :].sum())
    total = 0.0
    for votes in product((0, 1), repeat=rule.b):
        if sum(votes) < rule.a:
            continue
        w = 1.0
        for v, p in zip(votes, per_sensor):
            w *= p if v else (1.0 - p)
        total += w
    return total


def apply_report_errors(p_sender, p_err):
    """Probability the receiver records a busy vote given the sender's P[busy]."""
    for name, v in (("p_sender", p_sender), ("p_err", p_err)):
        if not 0.0 <= v <= 1.0:
            raise ValueError("%s must lie in [0,1]" % name)
    return p_sender * (1.0 - p_err) + (1.0 - p_sender) * p_err


def fuse_with_errors(receiver, senders, per_sensor, errs: ReportErrorMatrix, rule: FusionRule):
    """Fused busy probability at one receiver after report-channel errors.

    senders lists the SU indices of the sensing set, aligned with per_sensor;
    the receiver's own report (if it is in the set) passes through unchanged
    because the error matrix diagonal is zero.
    """
    senders = list(senders)
    per_sensor = list(per_sensor)
    if len(senders) != len(per_sensor) or len(senders) != rule.b:
        raise ContractError("senders/per_sensor size must match rule.b")
    seen = [
        apply_report_errors(p, float(errs.p_err[receiver, s]))
        for s, p in zip(senders, per_sensor)
    ]
    return fuse_a_out_of_b(seen, rule)


def self_interference_power(p_linear, si: SelfInterference):
    """Residual self-interference power I(P) = zeta * P**xi (linear)."""
    if p_linear < 0.0:
        raise ValueError("power must be non-negative")
    if p_linear == 0.0:
        return 0.0 if si.xi > 0.0 else si.zeta
    return si.zeta * p_linear**si.xi


def fd_pf00(eps, t_s, f_s, p_sen, si: SelfInterference):
    """False alarm probability of full-duplex sensing on an idle channel."""
    if t_s <= 0.0:
        raise ValueError("sensing time must be positive")
    noise = N0 + self_interference_power(p_sen, si)
    return q((eps / noise - 1.0) * math.sqrt(f_s * t_s))


def fd_pd01(eps, t_s, t_change, f_s, p_sen, p_pu, si: SelfInterference):
    """Detection probability when the PU arrives t_change into the FD sensing window."""
    if not 0.0 <= t_change <= t_s:
        raise ValueError("t_change must lie in [0, t_s]")
    noise = N0 + self_interference_power(p_sen, si)
    gamma_ps = p_pu / noise
    w = (t_s - t_change) / t_s
    num = (eps / noise - w * gamma_ps - 1.0) * math.sqrt(f_s * t_s)
    den = math.sqrt(w * (gamma_ps + 1.0) ** 2 + t_change / t_s)
    return q(num / den)


def fd_avg_pd(eps, t_s, stats, f_s, p_sen, p_pu, si: SelfInterference):
    """Detection probability averaged over the PU arrival time within the window.

    The arrival point is exponential with mean stats.mean_idle, truncated to
    [0, t_s]; evaluated by adaptive quadrature (absolute tolerance 1e-8).
    """
    if stats.mean_idle is None or stats.mean_idle <= 0.0:
        raise ValueError("fd_avg_pd needs a positive mean idle time")
    tau_id = stats.mean_idle
    norm = 1.0 - math.exp(-t_s / tau_id)

    def integrand(t):
        dens = math.exp(-t / tau_id) / tau_id / norm
        return fd_pd01(eps, t_s, t, f_s, p_sen, p_pu, si) * dens

    val, err = integrate.quad(integrand, 0.0, t_s, epsabs=1e-10, limit=200)
    if err > 1e-8:
        raise NumericError("fd_avg_pd quadrature error %.3g exceeds 1e-8" % err)
    return min(max(val, 0.0), 1.0)


def fd_eps_for_target(pd_target, t_s, stats, f_s, p_sen, p_pu, si: SelfInterference):
    """Threshold at which the averaged FD detection probability hits the target."""
    if not 0.0 < pd_target < 1.0:
        raise ValueError("pd target must lie strictly in (0,1)")
    noise = N0 + self_interference_power(p_sen, si)
    gamma_ps = p_pu / noise
    lo = 1e-3
    hi = 1.0 + gamma_ps + 20.0 / math.sqrt(f_s * t_s)

    def avg(ratio):
        return fd_avg_pd(ratio * noise, t_s, stats, f_s, p_sen, p_pu, si)

    f_lo = avg(lo) - pd_target
    f_hi = avg(hi) - pd_target
    if f_lo < 0.0 or f_hi > 0.0:
        raise NumericError(
            "no threshold bracket for target %.4g: Pd(%.3g)=%.4g, Pd(%.3g)=%.4g"
            % (pd_target, lo, f_lo + pd_target, hi, f_hi + pd_target)
        )
    # averaged Pd is monotone decreasing in the threshold, so bisect
    while (hi - lo) / hi > 1e-12:
        mid = 0.5 * (lo + hi)
        if avg(mid) >= pd_target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi) * noise


def fd_eps_full_presence(pd_target, t_s, f_s, p_sen, p_pu, si: SelfInterference):
    """Threshold meeting the detection target for a PU present all window.

    Closed-form companion to fd_eps_for_target: instead of averaging over
    the arrival time, the constraint is anchored at t_change = 0, where the
    detection statistic is a single Gaussian. Full presence is the
    strongest PU exposure, so this threshold is the largest one compatible
    with the target and gives the lowest false-alarm probability.
    """
    if not 0.0 < pd_target < 1.0:
        raise ValueError("pd target must lie strictly in (0,1)")
    if t_s <= 0.0:
        raise ValueError("sensing time must be positive")
    noise = N0 + self_interference_power(p_sen, si)
    gamma_ps = p_pu / noise
    ratio = 1.0 + gamma_ps + q_inv(pd_target) * (1.0 + gamma_ps) / math.sqrt(f_s * t_s)
    return float(ratio * noise)


def fd_pf_for_target(pd_target, t_s, stats, f_s, p_sen, p_pu, si: SelfInterference):
    """False alarm probability once the FD detection target is met with equality."""
    eps = fd_eps_for_target(pd_target, t_s, stats, f_s, p_sen, p_pu, si)
    return fd_pf00(eps, t_s, f_s, p_sen, si)

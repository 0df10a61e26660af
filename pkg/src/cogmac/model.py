"""Shared domain types, unit conventions, and elementary numeric primitives.

Conventions used across the whole package: time is in seconds, powers are
linear ratios relative to a unit noise power (N0 = 1), probabilities are
plain floats in [0, 1]. dB values exist only at the CLI boundary.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

N0 = 1.0  # noise power, normalized


class ContractError(ValueError):
    """An operation was called outside its documented contract."""


class NumericError(RuntimeError):
    """A numeric procedure (root finding, quadrature) failed to converge."""


def q(x):
    """Gaussian tail probability Q(x) = P[N(0,1) > x]."""
    if not math.isfinite(x):
        raise ValueError("q: argument must be finite, got %r" % x)
    return 0.5 * special.erfc(x / math.sqrt(2.0))


def q_inv(p):
    """Inverse of the Gaussian tail function: q(q_inv(p)) = p."""
    if not 0.0 < p < 1.0:
        raise ValueError("q_inv: argument must lie in (0,1), got %r" % p)
    return math.sqrt(2.0) * special.erfcinv(2.0 * p)


def db_to_linear(db):
    """Convert a dB value to a linear power ratio."""
    return 10.0 ** (db / 10.0)


def linear_to_db(r):
    """Convert a linear power ratio to dB."""
    if r <= 0.0:
        raise ValueError("linear_to_db: ratio must be positive, got %r" % r)
    return 10.0 * math.log10(r)


def slot_count(duration, slot):
    """Express a duration as an integer number of slots (1e-9 s tolerance)."""
    n = duration / slot
    rounded = round(n)
    if abs(duration - rounded * slot) > 1e-9:
        raise ValueError(
            "duration %.12g s is not a whole number of %.12g s slots" % (duration, slot)
        )
    return int(rounded)


def _check_prob(name, value):
    if not 0.0 <= value <= 1.0:
        raise ValueError("%s must be a probability in [0,1], got %r" % (name, value))


@dataclass(frozen=True)
class PuChannelStats:
    """Primary-user activity statistics for one channel.

    p_idle/p_busy are the stationary probabilities that the channel is free
    (H0) or occupied (H1); mean_idle/mean_active are the mean idle and active
    sojourn times (seconds) when the dynamic model is needed.
    """

    p_idle: float
    p_busy: float
    mean_idle: float | None = None
    mean_active: float | None = None

    def __post_init__(self):
        _check_prob("p_idle", self.p_idle)
        _check_prob("p_busy", self.p_busy)
        if abs(self.p_idle + self.p_busy - 1.0) > 1e-12:
            raise ValueError(
                "p_idle + p_busy must equal 1, got %r + %r" % (self.p_idle, self.p_busy)
            )
        for name in ("mean_idle", "mean_active"):
            v = getattr(self, name)
            if v is not None and v <= 0.0:
                raise ValueError("%s must be strictly positive, got %r" % (name, v))

    @classmethod
    def from_p_idle(cls, p_idle, mean_idle=None, mean_active=None):
        return cls(p_idle, 1.0 - p_idle, mean_idle, mean_active)


@dataclass(frozen=True)
class SnrGrid:
    """Per-(SU, channel) linear SNR of the primary signal at the sensor."""

    values: np.ndarray
    n_su: int = field(init=False)
    n_ch: int = field(init=False)

    def __post_init__(self):
        vals = np.atleast_2d(np.asarray(self.values, dtype=float))
        if vals.ndim != 2:
            raise ValueError("SnrGrid expects a 2-D (su, channel) array")
        if not np.all(vals > 0.0):
            raise ValueError("all SNR entries must be positive linear ratios")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "n_su", vals.shape[0])
        object.__setattr__(self, "n_ch", vals.shape[1])

    def at(self, su, ch):
        return float(self.values[su, ch])


@dataclass(frozen=True)
class MacTiming:
    """MAC frame timing, all in seconds.

    header covers the PHY+MAC packet headers (window-based model only);
    report_slot is the per-SU sensing-report slot of the cooperative design.
    """

    slot: float
    sifs: float
    difs: float
    pd: float
    ack: float
    rts: float
    cts: float
    packet: float
    header: float = 0.0
    report_slot: float = 0.0
    cycle: float = 0.0

    def __post_init__(self):
        for name in (
            "slot", "sifs", "difs", "pd", "ack", "rts", "cts",
            "packet", "header", "report_slot", "cycle",
        ):
            if getattr(self, name) < 0.0:
                raise ValueError("%s must be non-negative" % name)
        if self.packet <= 0.0:
            raise ValueError("packet duration must be positive")


@dataclass(frozen=True)
class Power:
    """Transmit or received power as a linear ratio over unit noise."""

    linear: float

    def __post_init__(self):
        if self.linear < 0.0:
            raise ValueError("power must be non-negative, got %r" % self.linear)

    @classmethod
    def from_db(cls, db):
        return cls(db_to_linear(db))

    @property
    def db(self):
        return linear_to_db(self.linear)

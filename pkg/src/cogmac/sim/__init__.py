"""Independent Monte Carlo oracle for the analytic throughput models.

The simulators realize channel occupancy, sensing statistics, and
contention at the event level, sharing nothing with the analytic modules
beyond q/q_inv, the timing records, and the scenario data types.
"""

from .assign import AssignSim, sim_assign
from .base import DEFAULT_CYCLES, MIN_CYCLES, RngSeed, SimEstimate
from .contention import sim_ppersist_contention
from .fdcmac import sim_fdcmac
from .hdmac import sim_hdmac
from .pu import gen_pu_trace
from .sdcss import sim_sdcss

__all__ = [
    "AssignSim",
    "DEFAULT_CYCLES",
    "MIN_CYCLES",
    "RngSeed",
    "SimEstimate",
    "gen_pu_trace",
    "sim_assign",
    "sim_fdcmac",
    "sim_hdmac",
    "sim_ppersist_contention",
    "sim_sdcss",
]

"""Cognitive-radio MAC analysis toolkit.

Analytical throughput models for four MAC designs (parallel-sensing
single/multi-channel, hardware-constrained channel assignment,
semi-distributed cooperative sensing, full-duplex), the sensing and
contention mathematics underneath them, configuration optimizers, and an
independent Monte Carlo simulator for cross-validation.
"""

__version__ = "0.1.0"

"""Transmit covariance optimization and dynamic resource allocation for
spectrum-sharing cognitive radio networks.

Solvers: single-link MIMO covariance optimization under interference
constraints (``p2p``), multi-access weighted sum-rate (``mac``),
broadcast weighted sum-rate and SINR balancing via uplink-downlink
duality (``bc``), interference-channel iterative allocation (``ic``),
and joint scheduling over fading dimensions under average constraints
(``dra``).  ``cli`` is the experiment harness; ``kernels`` holds the
compiled hot loops (set ``CRDRA_NO_NUMBA=1`` for the numpy fallback).
"""

from .model import (
    ConfigurationError,
    DomainError,
    FadingProcess,
    NetworkInstance,
    Role,
    SolveReport,
    generate_instance,
)

__all__ = [
    "ConfigurationError",
    "DomainError",
    "FadingProcess",
    "NetworkInstance",
    "Role",
    "SolveReport",
    "generate_instance",
]

__version__ = "0.1.0"

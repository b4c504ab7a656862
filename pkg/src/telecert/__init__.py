"""Simulation and black-box certification of qubit teleportation statistics."""

from __future__ import annotations

__version__ = "0.1.0"

from .geometry import (
    BlochVector,
    PauliRotation,
    Sector,
    apply_rotation,
    rotation,
    sample_uniform_sphere,
    sector_of,
)
from .protocols import (
    CapabilityError,
    CompensationMode,
    Gisin,
    GisinFrameRandomized,
    GisinHashed,
    Ideal,
    LowFidelity,
    OutcomeDistribution,
    PCrit,
    Protocol,
    TonerBaconActive,
    parse_protocol,
)

__all__ = [
    "BlochVector",
    "CapabilityError",
    "CompensationMode",
    "Gisin",
    "GisinFrameRandomized",
    "GisinHashed",
    "Ideal",
    "LowFidelity",
    "OutcomeDistribution",
    "PCrit",
    "PauliRotation",
    "Protocol",
    "Sector",
    "TonerBaconActive",
    "apply_rotation",
    "parse_protocol",
    "rotation",
    "sample_uniform_sphere",
    "sector_of",
    "__version__",
]

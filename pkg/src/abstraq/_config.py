"""Runtime configuration read from the environment."""

import os

DEFAULT_TOLERANCE = 1e-9
NORMALIZATION_TOLERANCE = 1e-12
ZERO_EVIDENCE = 1e-12

# Constraint enumeration in check_graphical_consistency is capped above this
# many clusters: each role (X, Y, Z, W) then holds at most ROLE_CAP clusters.
FULL_ENUMERATION_MAX_CLUSTERS = 6
ROLE_CAP = 2


def tolerance() -> float:
    """Distribution comparison tolerance, overridable by ``ABSTRAQ_TOLERANCE``."""
    raw = os.environ.get("ABSTRAQ_TOLERANCE")
    if raw is None or raw == "":
        return DEFAULT_TOLERANCE
    value = float(raw)
    if value < 0:
        raise ValueError(f"ABSTRAQ_TOLERANCE must be non-negative, got {raw!r}")
    return value

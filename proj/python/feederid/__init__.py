"""Branch impedance range identification for radial LV feeders.

Thin wrapper over the compiled core: build a RunConfig pointing at feeder,
meter and library files, then call identify / simulate / noise_sweep /
diagnose. Artifacts land under out_dir/<config hash>.
"""

from ._core import (
    DiagnoseOutcome,
    EdgeEnvelope,
    IdentifiabilityReport,
    IdentifyOutcome,
    PartOutcome,
    RangeReport,
    RunConfig,
    SweepCell,
    SweepLevelSummary,
    SweepOutcome,
    config_hash,
    diagnose,
    identify,
    noise_sweep,
    simulate,
)


def config(**kwargs) -> RunConfig:
    """RunConfig from keyword arguments; unknown names raise AttributeError."""
    cfg = RunConfig()
    for name, value in kwargs.items():
        if not hasattr(cfg, name):
            raise AttributeError(f"RunConfig has no field {name!r}")
        setattr(cfg, name, value)
    return cfg


__all__ = [
    "DiagnoseOutcome",
    "EdgeEnvelope",
    "IdentifiabilityReport",
    "IdentifyOutcome",
    "PartOutcome",
    "RangeReport",
    "RunConfig",
    "SweepCell",
    "SweepLevelSummary",
    "SweepOutcome",
    "config",
    "config_hash",
    "diagnose",
    "identify",
    "noise_sweep",
    "simulate",
]

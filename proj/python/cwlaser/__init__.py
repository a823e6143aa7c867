"""Python access to the cwlaser verifier, optimizer and simulator."""

from ._core import (
    Component,
    CwlError,
    OmegaResult,
    ParamFile,
    Pipeline,
    VerifyReport,
    level1_param_file,
    level1_value,
    load_params,
    merging_value,
    optimize_level1,
    optimize_level2_omega,
    parse_params,
    simulate_level2,
)

__all__ = [
    "Component",
    "CwlError",
    "OmegaResult",
    "ParamFile",
    "Pipeline",
    "VerifyReport",
    "level1_param_file",
    "level1_value",
    "load_params",
    "merging_value",
    "optimize_level1",
    "optimize_level2_omega",
    "parse_params",
    "simulate_level2",
    "omega_of",
]


def omega_of(path):
    """Certified omega bound of a parameter file."""
    return Pipeline(load_params(str(path))).omega().omega_bound

"""Transmit-power-minimizing beamforming for full-duplex near-field ISAC.

Typical use::

    from nfisac.config import load_bundled
    from nfisac.experiments import run_scheme
    from nfisac.baselines import Scheme

    cfg = load_bundled("paper_fig5")
    result = run_scheme(cfg, Scheme.FD)
"""
from .ao import AoSettings, InfeasibleScenario, NumericalFailure, run, run_inputs
from .baselines import Scheme
from .channel import ArrayGeometry, PolarPoint, build_channel_set
from .scenario import Scenario

__all__ = ["AoSettings", "ArrayGeometry", "InfeasibleScenario", "NumericalFailure", "PolarPoint", "Scenario",
           "Scheme", "build_channel_set", "run", "run_inputs"]
__version__ = "0.1.0"

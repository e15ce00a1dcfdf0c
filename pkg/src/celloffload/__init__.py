"""Cellular load of hybrid cellular/opportunistic content delivery.

Submodules:

- ``mobility``: synthetic contact graphs and traces, trace files
- ``analytic``: level-occupancy chain, expected load, gain, optimal seeds
- ``sim``: discrete-event simulation of one delivery round
- ``control``: PI controller for the number of seeds
- ``baselines``: multi-round streams, push-and-track, oracle benchmark
- ``metrics``: offload, fairness, signaling, series export
- ``scenarios``, ``experiments``, ``cli``: configurations and experiment drivers
"""

__version__ = "0.1.0"

from .analytic import ChainParams, InjectionStrategy, expected_load, gain, optimal_seed_count
from .control import ControllerConfig, ControllerState, check_stability, step, ziegler_nichols
from .mobility import ContactGraph, ContactTrace, generate_trace, load_trace, sample_graph
from .sim import RoundConfig, RoundResult, run_round

__all__ = [
    "ChainParams",
    "InjectionStrategy",
    "expected_load",
    "gain",
    "optimal_seed_count",
    "ControllerConfig",
    "ControllerState",
    "check_stability",
    "step",
    "ziegler_nichols",
    "ContactGraph",
    "ContactTrace",
    "generate_trace",
    "load_trace",
    "sample_graph",
    "RoundConfig",
    "RoundResult",
    "run_round",
]

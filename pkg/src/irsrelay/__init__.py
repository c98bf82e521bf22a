"""Sum-rate co-design for a multiuser MISO downlink where an intelligent
reflecting surface and a half-duplex decode-and-forward relay coexist.

The package combines a self-contained dense conic interior-point solver, the
three semidefinite-relaxed beamforming subproblems (base station, relay,
reflection), an alternating-optimization orchestrator with four benchmark
schemes, and a Monte-Carlo experiment harness with CSV persistence.
"""

from .ao import AOConfig, AOTrace, RestorationExhausted, Scheme, TrialResult, run_ao, run_scheme
from .channels import ChannelSet, LargeScaleParams, Topology, draw_channels, path_gain, place_users
from .harness import ExperimentConfig, load_config, preset_config, run_sweep, write_results
from .system import BeamformingState, SINRReport, SystemParams, effective_channels, relay_mf_sinr, sinr_report, sum_rate

__version__ = "0.1.0"

__all__ = [
    "AOConfig",
    "AOTrace",
    "BeamformingState",
    "ChannelSet",
    "ExperimentConfig",
    "LargeScaleParams",
    "RestorationExhausted",
    "Scheme",
    "SINRReport",
    "SystemParams",
    "Topology",
    "TrialResult",
    "draw_channels",
    "effective_channels",
    "load_config",
    "path_gain",
    "place_users",
    "preset_config",
    "relay_mf_sinr",
    "run_ao",
    "run_scheme",
    "run_sweep",
    "sinr_report",
    "sum_rate",
    "write_results",
]

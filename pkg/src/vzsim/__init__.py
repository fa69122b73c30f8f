"""Pulse-level simulation of virtual-Z gates on a driven transmon.

Submodules
----------
gates        SU(2) algebra, ZXZXZ decomposition, frame-tracked schedules
clifford     single-qubit Clifford group, RB sequence generation
fitting      RB decay fits and error-per-gate metrics
pulses       pulse families and the AWG / filter / mixer signal chain
device       d-level transmon model, Magnus/Lindblad propagators
calibration  amplitude, DRAG and virtual-Z calibration, ORR correction
rb           randomized benchmarking experiments
config       key = value experiment configuration
cli          ``vzsim`` command-line entry point
"""

from .calibration import (
    CalibrationError,
    calibrate_amplitude,
    calibrate_beta,
    calibrate_gate,
    calibrate_vz_phase,
    coherence_limit_epg,
    leakage_proxy,
    orr_correct,
)
from .clifford import build_clifford_table, interleave, rb_sequence
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .device import (
    CalibratedGate,
    DeviceParams,
    GateChannel,
    IntegrationError,
    simulate_gate,
    superoperator_propagator,
    unitary_propagator,
)
from .fitting import FitResult, epc, epg, fit_rb, interleaved_gate_error, lpg
from .gates import VZ, XP, FrameState, Su2Params, rx, ry, rz, u_from_zxz, zxzxz_decompose, zxzxz_schedule
from .pulses import PulseSpec, SignalChainParams, render_pulse
from .rb import RbConfig, RbResult, expected_leakage_curve, run_rb_experiment

__version__ = "0.1.0"

"""Behavioral simulation of dual-mode organic electrochemical transistors.

The package models the device as a volatile receptor and as a non-volatile
analog synapse, composes the two into 1T1R crossbars, and runs learning
experiments on top: STDP and device-in-the-loop MNIST classification, a
conditioned-reflex circuit, and reservoir computing on 12-lead ECG.
"""

from .crossbar import (Crossbar, CrossbarConfig, ProgramReport, SpikeEvent, load_snapshot, mvm,
                       program_parallel, reflex_step, save_snapshot, stdp_program_mechanistic)
from .devices import (ReceptorParams, ReceptorState, StdpParams, SynapseParams, SynapseState,
                      apply_drift, ideal_ltp_curve, read_conductance, receptor_step,
                      sense_offset, stdp_kernel, transfer_current, write_pulse)
from .presets import Preset, available_presets, load_preset

__version__ = "0.1.0"

__all__ = [
    "Crossbar", "CrossbarConfig", "ProgramReport", "SpikeEvent", "load_snapshot", "mvm",
    "program_parallel", "reflex_step", "save_snapshot", "stdp_program_mechanistic",
    "ReceptorParams", "ReceptorState", "StdpParams", "SynapseParams", "SynapseState",
    "apply_drift", "ideal_ltp_curve", "read_conductance", "receptor_step", "sense_offset",
    "stdp_kernel", "transfer_current", "write_pulse",
    "Preset", "available_presets", "load_preset",
]

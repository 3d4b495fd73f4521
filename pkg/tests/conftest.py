"""Shared fixtures: a fast low-depth configuration and cached echo runs.

The "toy" configuration keeps the real level structure and protocol but at
optical depth 60 and a 30 MHz one-photon detuning, so a full store/recall
cycle takes ~13k steps instead of ~150k.  Full-fidelity desk-scale runs
live in test_acceptance.py only.
"""
import copy
from dataclasses import replace

import pytest

from gemxpm.config_io import bundle_from_config
from gemxpm.dynamics import run_gem_sequence


def toy_doc():
    return {
        "physics": {"gamma_hz": 5.75e6, "optical_depth": 60.0,
                    "control_detuning_hz": 30e6, "broadening_hz": 400e3,
                    "wavelength_nm": 795.0, "i_sat_signal_mw_cm2": 37.32,
                    "signal_optical_depth": None, "state_purity": 1.0},
        "control": {"rabi_hz": 550e3, "on_windows_us": [[2.2, 13.0]]},
        "sequence": {
            "reference": {"t_center_us": 1.0, "width_us": 0.3, "amplitude": 1e-3},
            "write": {"t_center_us": 3.0, "width_us": 0.6, "amplitude": 1e-3},
            "flip_us": 5.5, "storage_us": 5.0, "total_us": 13.0},
        "signal": {"energy_pj": 0.4, "tau_us": 0.65, "detuning_hz": -3e6,
                   "waist_um": 190.0, "t_start_us": 4.82, "z_profile": "uniform"},
        "solver": {"n_z": 48, "dt_ns": 1.0, "trace_tol": 1e-6},
        "output": {"dir": "."},
    }


@pytest.fixture()
def toy_config():
    return copy.deepcopy(toy_doc())


@pytest.fixture(scope="session")
def toy_bundle():
    return bundle_from_config(toy_doc())


def zero_signal(sequence):
    """Same sequence with the signal beam blocked (zero energy)."""
    if sequence.signal is None:
        return sequence
    return replace(sequence, signal=replace(sequence.signal, energy=0.0))


@pytest.fixture(scope="session")
def toy_records(toy_bundle):
    """(signal-off, signal-on) record pair for the toy configuration."""
    b = toy_bundle
    rec0 = run_gem_sequence(b.params, zero_signal(b.sequence), b.control,
                            b.solver, b.purity)
    rec1 = run_gem_sequence(b.params, b.sequence, b.control, b.solver, b.purity)
    return rec0, rec1

"""Configuration files and resolved-snapshot serialization.

Config files are a single JSON document with sections ``physics``,
``control``, ``sequence``, ``signal``, ``solver`` and ``output``.  At this
boundary frequencies are quoted in Hz, energies in pJ, lengths in um and
times in us, matching how the quantities are usually reported; loading
converts once into the internal units (rad/s, J, m, s).

The resolved snapshot written into run manifests uses internal units and
round-trips exactly (field for field) through JSON.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Optional

from .model_core import (
    ConfigError, ControlField, GaussianBeam, GaussianPulse, PhysicalParams,
    PulseSequence, SignalPulse, collect_violations,
    control_from_dict, control_to_dict, params_from_dict, params_to_dict,
    sequence_from_dict, sequence_to_dict,
)
from .dynamics import SolverConfig

TWO_PI = 2.0 * math.pi

#: Required keys; a missing one is a config error naming the key.
REQUIRED_KEYS = (
    ("physics", "gamma_hz"),
    ("physics", "optical_depth"),
    ("physics", "control_detuning_hz"),
    ("physics", "broadening_hz"),
    ("control", "rabi_hz"),
    ("sequence", "write"),
    ("sequence", "flip_us"),
    ("sequence", "total_us"),
    ("sequence", "storage_us"),
)


@dataclass(frozen=True)
class RunBundle:
    """A fully resolved configuration, ready to run."""

    params: PhysicalParams
    control: ControlField
    sequence: PulseSequence
    solver: SolverConfig
    purity: float = 1.0
    output_dir: str = "."

    def violations(self) -> list:
        out = collect_violations(self.params, self.sequence, self.control)
        out.extend(self.solver.violations())
        if not 0.0 <= self.purity <= 1.0:
            out.append("purity outside [0, 1]")
        return out


def default_config() -> dict:
    """Reference configuration reproducing the experiment's regime."""
    return {
        "physics": {
            "gamma_hz": 5.75e6,
            "optical_depth": 450.0,
            "control_detuning_hz": 208e6,
            "broadening_hz": 200e3,
            "wavelength_nm": 795.0,
            "i_sat_signal_mw_cm2": 37.32,
            "signal_optical_depth": None,
            "state_purity": 1.0,
        },
        "control": {
            "rabi_hz": 1.0e6,
            "on_windows_us": [[4.0, 30.0]],
        },
        "sequence": {
            "reference": {"t_center_us": 1.8, "width_us": 0.55, "amplitude": 1e-3},
            "write": {"t_center_us": 6.5, "width_us": 1.0, "amplitude": 1e-3},
            "flip_us": 13.0,
            "storage_us": 13.0,
            "total_us": 30.0,
        },
        "signal": {
            "energy_pj": 3.7,
            "tau_us": 1.0,
            "detuning_hz": -8.7e6,
            "waist_um": 190.0,
            "t_start_us": 9.7,
            "z_profile": "uniform",
        },
        "solver": {
            "n_z": 200,
            "dt_ns": 0.2,
            "integrator": "rk4_fixed",
            "abs_tol": 1e-10,
            "rel_tol": 1e-8,
            "trace_tol": 1e-6,
            "record_stride": 1,
        },
        "output": {"dir": "."},
    }


def _require(doc: dict) -> None:
    missing = []
    for section, key in REQUIRED_KEYS:
        if section not in doc or key not in doc[section]:
            missing.append("missing required key: %s.%s" % (section, key))
    if missing:
        raise ConfigError(missing)


def _pulse_from_cfg(d: Optional[dict]) -> Optional[GaussianPulse]:
    if d is None:
        return None
    carrier = d.get("carrier_offset_hz")
    return GaussianPulse(
        t_center=d["t_center_us"] * 1e-6,
        width=d["width_us"] * 1e-6,
        peak_amplitude=d["amplitude"],
        carrier_offset=None if carrier is None else TWO_PI * carrier,
    )


def bundle_from_config(doc: dict) -> RunBundle:
    """Convert a boundary-unit config document into a validated RunBundle."""
    _require(doc)
    phys = doc["physics"]
    eta = TWO_PI * phys["broadening_hz"]
    params = PhysicalParams(
        gamma_excited=TWO_PI * phys["gamma_hz"],
        optical_depth=float(phys["optical_depth"]),
        control_detuning=TWO_PI * phys["control_detuning_hz"],
        gradient_eta=eta,
        broadening_width=eta,
        wavelength=phys.get("wavelength_nm", 795.0) * 1e-9,
        signal_optical_depth=phys.get("signal_optical_depth"),
        i_sat_signal=phys.get("i_sat_signal_mw_cm2", 37.32) * 10.0,
    )
    ctrl = doc["control"]
    control = ControlField(
        rabi=TWO_PI * ctrl["rabi_hz"],
        on_windows=tuple((w[0] * 1e-6, w[1] * 1e-6)
                         for w in ctrl.get("on_windows_us", [])),
    )
    seqd = doc["sequence"]
    signal = None
    sigd = doc.get("signal")
    if sigd is not None:
        prof = sigd.get("z_profile", "uniform")
        if isinstance(prof, dict):
            prof = GaussianBeam(focus_z=prof["focus_z"],
                                rayleigh_range=prof["rayleigh_range"])
        signal = SignalPulse(
            energy=sigd["energy_pj"] * 1e-12,
            duration_tau=sigd["tau_us"] * 1e-6,
            detuning_delta=TWO_PI * sigd["detuning_hz"],
            waist=sigd["waist_um"] * 1e-6,
            t_start=sigd["t_start_us"] * 1e-6,
            z_profile=prof,
        )
    sequence = PulseSequence(
        write_pulse=_pulse_from_cfg(seqd["write"]),
        reference_pulse=_pulse_from_cfg(seqd.get("reference")),
        gradient_flip_time=seqd["flip_us"] * 1e-6,
        total_time=seqd["total_us"] * 1e-6,
        storage_time=seqd["storage_us"] * 1e-6,
        signal=signal,
    )
    sol = doc.get("solver", {})
    solver = SolverConfig(
        n_z=int(sol.get("n_z", 200)),
        dt=sol.get("dt_ns", 0.2) * 1e-9,
        integrator=sol.get("integrator", "rk4_fixed"),
        abs_tol=sol.get("abs_tol", 1e-10),
        rel_tol=sol.get("rel_tol", 1e-8),
        trace_tol=sol.get("trace_tol", 1e-6),
        record_stride=int(sol.get("record_stride", 1)),
        snapshot_times=tuple(ts * 1e-6 for ts in sol.get("snapshot_times_us", [])),
        field_history_stride=int(sol.get("field_history_stride", 0)),
        backend=sol.get("backend", "auto"),
        use_printed_sqrt3_term=bool(sol.get("use_printed_sqrt3_term", True)),
        printed_delta_on_signal_coherence=bool(
            sol.get("printed_delta_on_signal_coherence", False)),
    )
    bundle = RunBundle(
        params=params, control=control, sequence=sequence, solver=solver,
        purity=float(phys.get("state_purity", 1.0)),
        output_dir=doc.get("output", {}).get("dir", "."),
    )
    bad = bundle.violations()
    if bad:
        raise ConfigError(bad)
    return bundle


def load_config(path: str) -> RunBundle:
    try:
        with open(path) as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise ConfigError(["config file not found: %s" % path])
    except json.JSONDecodeError as exc:
        raise ConfigError(["malformed JSON: %s" % exc])
    return bundle_from_config(doc)


# --- resolved snapshots (internal units, exact round-trip) ------------------

def bundle_to_snapshot(bundle: RunBundle) -> dict:
    sol = bundle.solver
    return {
        "params": params_to_dict(bundle.params),
        "control": control_to_dict(bundle.control),
        "sequence": sequence_to_dict(bundle.sequence),
        "solver": {
            "n_z": sol.n_z, "dt": sol.dt, "integrator": sol.integrator,
            "abs_tol": sol.abs_tol, "rel_tol": sol.rel_tol,
            "trace_tol": sol.trace_tol, "record_stride": sol.record_stride,
            "snapshot_times": list(sol.snapshot_times),
            "field_history_stride": sol.field_history_stride,
            "backend": sol.backend,
            "use_printed_sqrt3_term": sol.use_printed_sqrt3_term,
            "printed_delta_on_signal_coherence":
                sol.printed_delta_on_signal_coherence,
        },
        "purity": bundle.purity,
        "output_dir": bundle.output_dir,
    }


def bundle_from_snapshot(snap: dict) -> RunBundle:
    sol = dict(snap["solver"])
    sol["snapshot_times"] = tuple(sol["snapshot_times"])
    return RunBundle(
        params=params_from_dict(snap["params"]),
        control=control_from_dict(snap["control"]),
        sequence=sequence_from_dict(snap["sequence"]),
        solver=SolverConfig(**sol),
        purity=snap["purity"],
        output_dir=snap["output_dir"],
    )


def config_hash(bundle: RunBundle) -> str:
    """Deterministic short hash of the resolved configuration."""
    canon = json.dumps(bundle_to_snapshot(bundle), sort_keys=True,
                       separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]

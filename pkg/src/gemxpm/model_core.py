"""Domain types, unit policy, and validation shared by the whole toolkit.

Unit policy
-----------
Every frequency-like quantity held by these types is an *angular* frequency
in rad/s.  Times are seconds, energies joules, lengths metres.  The
propagation axis z is dimensionless on [0, 1]; the inhomogeneous broadening
slope ``gradient_eta`` therefore has units rad/s per unit z and equals the
total broadened width across the ensemble.  Human-facing configuration files
quote Hz, pJ and um instead; :mod:`gemxpm.config_io` converts at that
boundary so that 2*pi bookkeeping happens in exactly one place.

All types validate on demand (never silently clamp) and are immutable after
construction, so they can be shared freely between worker processes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional, Union

import numpy as np

TWO_PI = 2.0 * math.pi
PLANCK_H = 6.62607015e-34       # J s
SPEED_OF_LIGHT = 2.99792458e8   # m/s

#: Rb-87 D1 excited-state linewidth, rad/s.  Config-overridable.
DEFAULT_GAMMA = TWO_PI * 5.75e6

#: Effective saturation intensity of the signal transition, W/m^2.
#: Calibrated so that the closed-form phase model reproduces the measured
#: per-photon phase shift (0.07 urad at a 190 um waist, delta = -2pi*8.7 MHz).
#: Equivalent to 37.32 mW/cm^2; exposed in config as a plain constant.
DEFAULT_I_SAT_SIGNAL = 373.2


class ConfigError(ValueError):
    """A configuration failed validation.  Carries every named violation."""

    def __init__(self, violations):
        self.violations = tuple(violations)
        super().__init__("; ".join(self.violations))


class NumericalError(RuntimeError):
    """A simulation aborted on a numerical failure (NaN or trace violation)."""


class FitError(RuntimeError):
    """A least-squares fit failed to converge or had degenerate input."""


def photon_energy(wavelength: float) -> float:
    """Energy of one photon at ``wavelength`` (m), in joules."""
    return PLANCK_H * SPEED_OF_LIGHT / wavelength


@dataclass(frozen=True)
class PhysicalParams:
    """Fixed physical constants and experiment settings.

    ``broadening_width`` is the total inhomogeneous width eta*L across the
    normalized cell; with z on [0, 1] it is redundant with ``gradient_eta``
    and the two must agree to 1e-12 relative.
    """

    gamma_excited: float = DEFAULT_GAMMA       # excited-state linewidth, rad/s
    optical_depth: float = 450.0               # resonant optical depth on the probe line
    control_detuning: float = TWO_PI * 208e6   # one-photon detuning, rad/s
    gradient_eta: float = TWO_PI * 200e3       # broadening slope, rad/s per unit z
    broadening_width: float = TWO_PI * 200e3   # total inhomogeneous width, rad/s
    wavelength: float = 795e-9                 # probe/signal wavelength, m
    ensemble_length_z: float = 1.0             # normalized z extent, fixed
    signal_optical_depth: Optional[float] = None  # defaults to optical_depth
    i_sat_signal: float = DEFAULT_I_SAT_SIGNAL    # W/m^2, signal transition

    def violations(self) -> list:
        out = []
        if not self.gamma_excited > 0:
            out.append("negative linewidth: gamma_excited must be > 0")
        if self.optical_depth < 0:
            out.append("negative optical depth")
        if self.ensemble_length_z != 1.0:
            out.append("ensemble_length_z must be 1.0 (z is normalized to [0, 1])")
        scale = max(abs(self.gradient_eta), abs(self.broadening_width), 1.0)
        if abs(self.broadening_width - self.gradient_eta * 1.0) > 1e-12 * scale:
            out.append("broadening width inconsistent with gradient slope")
        if self.wavelength <= 0:
            out.append("non-positive wavelength")
        if self.i_sat_signal <= 0:
            out.append("non-positive saturation intensity")
        if self.signal_optical_depth is not None and self.signal_optical_depth < 0:
            out.append("negative signal optical depth")
        return out

    @property
    def signal_od(self) -> float:
        """Optical depth seen by the signal field."""
        if self.signal_optical_depth is None:
            return self.optical_depth
        return self.signal_optical_depth


@dataclass(frozen=True)
class ControlField:
    """Control-field Rabi frequency and its on-windows.

    ``on_windows`` are (t_start, t_end) pairs in seconds, sorted and
    non-overlapping.  The control is real and constant inside each window.
    """

    rabi: float
    on_windows: tuple = ()

    def violations(self) -> list:
        out = []
        if self.rabi < 0:
            out.append("negative control rabi")
        prev_end = -math.inf
        for t0, t1 in self.on_windows:
            if t1 <= t0:
                out.append("empty control window (%g, %g)" % (t0, t1))
            if t0 < prev_end:
                out.append("overlapping control windows")
            prev_end = max(prev_end, t1)
        if list(self.on_windows) != sorted(self.on_windows):
            out.append("unsorted control windows")
        return out

    def is_on(self, t: float) -> bool:
        return any(t0 <= t < t1 for t0, t1 in self.on_windows)


@dataclass(frozen=True)
class GaussianBeam:
    """Gaussian-beam focusing geometry mapped onto the normalized cell."""

    focus_z: float = 0.5
    rayleigh_range: float = 100.0   # in units of the normalized cell length


@dataclass(frozen=True)
class SignalPulse:
    """The AC-Stark signal pulse: a square temporal window of duration tau."""

    energy: float                    # J
    duration_tau: float              # s
    detuning_delta: float            # rad/s, laser-minus-transition convention
    waist: float                     # m, 1/e^2 intensity radius
    t_start: float                   # s
    z_profile: Union[str, GaussianBeam] = "uniform"

    def violations(self) -> list:
        out = []
        if self.energy < 0:
            out.append("negative signal energy")
        if not self.duration_tau > 0:
            out.append("signal duration not positive")
        if not self.waist > 0:
            out.append("signal waist not positive")
        if isinstance(self.z_profile, str) and self.z_profile != "uniform":
            out.append("unknown signal z profile %r" % (self.z_profile,))
        return out

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration_tau


@dataclass(frozen=True)
class GaussianPulse:
    """A Gaussian probe pulse entering the cell at z = 0.

    ``width`` is the Gaussian sigma of the field envelope.  ``carrier_offset``
    is an optional two-photon carrier offset in rad/s; when None the engine
    centres the pulse spectrum on the middle of the broadened line (eta/2),
    which maximizes the stored bandwidth.
    """

    t_center: float
    width: float
    peak_amplitude: float
    carrier_offset: Optional[float] = None

    def violations(self) -> list:
        out = []
        if not self.width > 0:
            out.append("pulse width not positive")
        if self.peak_amplitude < 0:
            out.append("negative pulse amplitude")
        return out

    @property
    def t_end(self) -> float:
        # Practical support of the envelope; used for window bookkeeping.
        return self.t_center + 3.0 * self.width


@dataclass(frozen=True)
class PulseSequence:
    """Timed events of one store/recall cycle.

    ``storage_time`` is the input-to-echo delay: the echo rephases
    ``storage_time`` after the write-pulse centroid, so the gradient flip
    sits at ``write_pulse.t_center + storage_time / 2``.
    """

    write_pulse: GaussianPulse
    gradient_flip_time: float
    total_time: float
    storage_time: float
    reference_pulse: Optional[GaussianPulse] = None
    signal: Optional[SignalPulse] = None

    def violations(self) -> list:
        out = []
        out.extend(self.write_pulse.violations())
        if self.reference_pulse is not None:
            out.extend(self.reference_pulse.violations())
        if not self.write_pulse.t_center < self.gradient_flip_time:
            out.append("write pulse after gradient flip")
        if self.total_time <= self.gradient_flip_time:
            out.append("total time does not cover the gradient flip")
        expected_flip = self.write_pulse.t_center + 0.5 * self.storage_time
        if abs(self.gradient_flip_time - expected_flip) > 1e-6 * self.storage_time + 1e-9:
            out.append("storage time inconsistent with flip timing")
        if self.signal is not None:
            out.extend(self.signal.violations())
            if self.signal.t_start < self.write_pulse.t_end or \
                    self.signal.t_end > self.gradient_flip_time:
                out.append("signal outside storage window")
        return out


def validate_params(params: PhysicalParams, seq: PulseSequence,
                    control: Optional[ControlField] = None):
    """Check a configuration; raise :class:`ConfigError` listing every violation.

    Returns the validated (params, seq, control) bundle unchanged on success.
    Use :func:`collect_violations` for a no-raise variant.
    """
    violations = collect_violations(params, seq, control)
    if violations:
        raise ConfigError(violations)
    return params, seq, control


def collect_violations(params: PhysicalParams, seq: PulseSequence,
                       control: Optional[ControlField] = None) -> list:
    out = list(params.violations())
    out.extend(seq.violations())
    if control is not None:
        out.extend(control.violations())
    return out


def photon_number(signal: SignalPulse, wavelength: float) -> float:
    """Number of photons in the signal pulse at the given wavelength (m)."""
    return signal.energy / photon_energy(wavelength)


@dataclass
class AtomicState:
    """Density-matrix slice at one spatial point.

    Stores the four populations and the upper-triangle coherences; the lower
    triangle is defined by Hermiticity (sigma_ji = conj(sigma_ij)) and never
    stored.  Instances double as derivative containers, so invariants are
    checked by :meth:`validate` rather than at construction.
    """

    pop11: float = 0.0
    pop22: float = 0.0
    pop33: float = 0.0
    pop44: float = 0.0
    coh12: complex = 0j
    coh13: complex = 0j
    coh23: complex = 0j
    coh14: complex = 0j
    coh24: complex = 0j
    coh34: complex = 0j

    def trace(self) -> float:
        return self.pop11 + self.pop22 + self.pop33 + self.pop44

    def as_matrix(self) -> np.ndarray:
        """Full 4x4 density matrix, Hermitian by construction."""
        m = np.array(
            [[self.pop11, self.coh12, self.coh13, self.coh14],
             [0, self.pop22, self.coh23, self.coh24],
             [0, 0, self.pop33, self.coh34],
             [0, 0, 0, self.pop44]], dtype=complex)
        return m + np.triu(m, 1).conj().T

    def validate(self, tol: float = 1e-9) -> list:
        out = []
        if abs(self.trace() - 1.0) > tol:
            out.append("trace deviates from 1 by %g" % abs(self.trace() - 1.0))
        for name in ("pop11", "pop22", "pop33", "pop44"):
            p = getattr(self, name)
            if p < -tol or p > 1.0 + tol:
                out.append("%s = %g outside [0, 1]" % (name, p))
        return out


@dataclass(eq=False)
class FieldEnvelope:
    """Slowly-varying complex probe field on the (z, t) grid."""

    values: np.ndarray      # complex, shape (n_z, n_t)
    dz: float
    dt: float

    def validate(self) -> None:
        if self.values.ndim != 2 or self.values.shape[0] < 2:
            raise ValueError("field grid needs n_z >= 2")
        if not np.all(np.isfinite(self.values.view(float))):
            raise NumericalError("non-finite field envelope")


# --- exact (internal-unit) serialization -----------------------------------

def _pulse_to_dict(p: Optional[GaussianPulse]):
    if p is None:
        return None
    return {"t_center": p.t_center, "width": p.width,
            "peak_amplitude": p.peak_amplitude, "carrier_offset": p.carrier_offset}


def _pulse_from_dict(d) -> Optional[GaussianPulse]:
    return None if d is None else GaussianPulse(**d)


def sequence_to_dict(seq: PulseSequence) -> dict:
    sig = None
    if seq.signal is not None:
        s = seq.signal
        prof = s.z_profile if isinstance(s.z_profile, str) else \
            {"focus_z": s.z_profile.focus_z, "rayleigh_range": s.z_profile.rayleigh_range}
        sig = {"energy": s.energy, "duration_tau": s.duration_tau,
               "detuning_delta": s.detuning_delta, "waist": s.waist,
               "t_start": s.t_start, "z_profile": prof}
    return {
        "write_pulse": _pulse_to_dict(seq.write_pulse),
        "reference_pulse": _pulse_to_dict(seq.reference_pulse),
        "gradient_flip_time": seq.gradient_flip_time,
        "total_time": seq.total_time,
        "storage_time": seq.storage_time,
        "signal": sig,
    }


def sequence_from_dict(d: dict) -> PulseSequence:
    sig = d.get("signal")
    signal = None
    if sig is not None:
        prof = sig["z_profile"]
        if not isinstance(prof, str):
            prof = GaussianBeam(**prof)
        signal = SignalPulse(energy=sig["energy"], duration_tau=sig["duration_tau"],
                             detuning_delta=sig["detuning_delta"], waist=sig["waist"],
                             t_start=sig["t_start"], z_profile=prof)
    return PulseSequence(
        write_pulse=_pulse_from_dict(d["write_pulse"]),
        reference_pulse=_pulse_from_dict(d.get("reference_pulse")),
        gradient_flip_time=d["gradient_flip_time"],
        total_time=d["total_time"],
        storage_time=d["storage_time"],
        signal=signal,
    )


def params_to_dict(p: PhysicalParams) -> dict:
    return {f.name: getattr(p, f.name) for f in fields(PhysicalParams)}


def params_from_dict(d: dict) -> PhysicalParams:
    return PhysicalParams(**d)


def control_to_dict(c: ControlField) -> dict:
    return {"rabi": c.rabi, "on_windows": [list(w) for w in c.on_windows]}


def control_from_dict(d: dict) -> ControlField:
    return ControlField(rabi=d["rabi"],
                        on_windows=tuple(tuple(w) for w in d["on_windows"]))

"""Measured quantities: recall efficiency, XPM phase, absorption, heterodyne.

Phase is defined through the power-weighted complex overlap of the recalled
fields of a signal-on and a signal-off run, which is robust against grid
jitter; the same estimator applied over the reference-pulse window must give
~0 and is reported as a validity check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model_core import (
    ControlField, FieldEnvelope, NumericalError, PhysicalParams, PulseSequence,
)


@dataclass(eq=False)
class SimulationRecord:
    """Output of one sequence run on the uniform record grid.

    ``output_field`` is E(z=1, t), ``input_field`` the boundary envelope
    E(z=0, t), both sampled every ``dt``.  ``conservation_max`` is the worst
    |trace - 1| seen anywhere during the run.
    """

    output_field: np.ndarray
    input_field: np.ndarray
    dt: float
    sequence: PulseSequence
    control: ControlField
    params: PhysicalParams
    purity: float
    solver: object
    conservation_max: float
    snapshots: tuple = ()
    field_history: Optional[FieldEnvelope] = None
    signal_on: bool = False
    signal_output: Optional[np.ndarray] = None
    signal_input: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.output_field)) * self.dt

    def validate(self) -> None:
        if len(self.output_field) != len(self.input_field):
            raise ValueError("input/output series lengths differ")
        span = len(self.output_field) * self.dt
        if not (0.0 <= self.sequence.gradient_flip_time <= span):
            raise ValueError("event times outside the record span")


@dataclass
class PhaseMeasurement:
    """Extracted XPM phase plus its reference-pulse sanity check."""

    phase_shift: float
    reference_phase_delta: float
    recall_window: tuple
    valid: bool


def write_window(record: SimulationRecord) -> tuple:
    w = record.sequence.write_pulse
    return (w.t_center - 4.0 * w.width, w.t_center + 4.0 * w.width)


def recall_window(record: SimulationRecord) -> tuple:
    """Default recall window: flip to flip + 2*(flip - write centroid)."""
    flip = record.sequence.gradient_flip_time
    wc = record.sequence.write_pulse.t_center
    return (flip, flip + 2.0 * (flip - wc))


def reference_window(record: SimulationRecord) -> Optional[tuple]:
    ref = record.sequence.reference_pulse
    if ref is None:
        return None
    return (ref.t_center - 4.0 * ref.width, ref.t_center + 4.0 * ref.width)


def _window_mask(t: np.ndarray, window: tuple) -> np.ndarray:
    mask = (t >= window[0]) & (t <= window[1])
    if not mask.any():
        raise ValueError("empty window (%g, %g)" % window)
    return mask


def recall_efficiency(record: SimulationRecord,
                      window: Optional[tuple] = None) -> float:
    """Recalled-echo energy over input write-pulse energy.

    Integrates |E_out|^2 across the recall window and normalizes by
    |E_in|^2 across the write window.
    """
    t = record.times
    rec = _window_mask(t, window or recall_window(record))
    wr = _window_mask(t, write_window(record))
    e_out = np.trapezoid(np.abs(record.output_field[rec]) ** 2, t[rec])
    e_in = np.trapezoid(np.abs(record.input_field[wr]) ** 2, t[wr])
    if e_in <= 0.0:
        raise ValueError("no input energy in the write window")
    return float(e_out / e_in)


def extract_phase(record_with: SimulationRecord,
                  record_without: SimulationRecord,
                  window: Optional[tuple] = None,
                  reference_threshold: float = 0.02,
                  power_floor: float = 1e-10) -> PhaseMeasurement:
    """XPM phase from the recalled fields of a signal-on/off pair.

    phase = arg sum_t E_with conj(E_without) |E_without|^2 over the recall
    window.  The same overlap over the reference-pulse window must stay
    below ``reference_threshold`` (rad) or the measurement is flagged
    invalid.  Raises on mismatched grids or if either recall falls below
    ``power_floor`` times the input energy ("no echo").
    """
    if len(record_with.output_field) != len(record_without.output_field):
        raise ValueError("records have different grids")
    if record_with.dt != record_without.dt:
        raise ValueError("records have different time steps")
    if record_with.sequence.gradient_flip_time != \
            record_without.sequence.gradient_flip_time:
        raise ValueError("records have different event times")

    t = record_without.times
    win = window or recall_window(record_without)
    rec = _window_mask(t, win)
    wr = _window_mask(t, write_window(record_without))
    e_in = np.trapezoid(np.abs(record_without.input_field[wr]) ** 2, t[wr])
    for rec_obj, tag in ((record_with, "signal-on"), (record_without, "signal-off")):
        p = np.trapezoid(np.abs(rec_obj.output_field[rec]) ** 2, t[rec])
        if p < power_floor * e_in:
            raise NumericalError("no echo in %s record" % tag)

    a = record_with.output_field[rec]
    b = record_without.output_field[rec]
    overlap = np.sum(a * np.conj(b) * np.abs(b) ** 2)
    phase = float(np.angle(overlap))

    ref_delta = 0.0
    refwin = reference_window(record_without)
    if refwin is not None:
        mask = _window_mask(t, refwin)
        a, b = record_with.output_field[mask], record_without.output_field[mask]
        ref_delta = float(np.angle(np.sum(a * np.conj(b) * np.abs(b) ** 2)))

    return PhaseMeasurement(phase_shift=phase, reference_phase_delta=ref_delta,
                            recall_window=win,
                            valid=abs(ref_delta) <= reference_threshold)


def absorption_spectrum(purity: float, delta_grid, params: PhysicalParams,
                        method: str = "steady") -> list:
    """Transmitted energy fraction of a weak signal pulse vs detuning.

    ``steady`` evaluates the stationary weak-field solution of the signal
    propagation through the idle ensemble: intensity transmission
    exp(-2 Gamma d_s (1-purity) gamma_s / (delta^2 + gamma_s^2)) with
    gamma_s = Gamma/8 the signal-coherence HWHM.  ``dynamic`` time-steps a
    weak square pulse through :func:`gemxpm.dynamics.run_gem_sequence` with
    no memory operation and integrates the transmitted energy.
    """
    deltas = np.atleast_1d(np.asarray(delta_grid, dtype=float))
    if deltas.size == 0:
        raise ValueError("empty detuning grid")
    if not 0.0 <= purity <= 1.0:
        raise ValueError("purity must lie in [0, 1]")

    if method == "steady":
        g = params.gamma_excited
        gam_s = g / 8.0
        pop2 = 1.0 - purity
        depth = 2.0 * g * params.signal_od * pop2 * gam_s \
            / (deltas ** 2 + gam_s ** 2)
        return [(float(d), float(np.exp(-a))) for d, a in zip(deltas, depth)]

    if method == "dynamic":
        return [(float(d), _dynamic_transmission(purity, float(d), params))
                for d in deltas]

    raise ValueError("unknown method %r" % (method,))


def _dynamic_transmission(purity, delta, params):
    """Kernel-propagated weak-signal transmission at one detuning."""
    from .dynamics import SolverConfig, run_gem_sequence
    from .model_core import GaussianPulse, SignalPulse

    tau = 1.5e-6
    # Weak probe-free sequence: no control, no write amplitude, only the
    # signal window.  Photon-scale energy keeps the response linear.
    seq = PulseSequence(
        write_pulse=GaussianPulse(t_center=0.5e-6, width=0.15e-6,
                                  peak_amplitude=0.0),
        gradient_flip_time=2.8e-6, total_time=3.0e-6, storage_time=4.6e-6,
        signal=SignalPulse(energy=1e-17, duration_tau=tau, detuning_delta=delta,
                           waist=190e-6, t_start=1.0e-6),
    )
    control = ControlField(rabi=0.0, on_windows=())
    solver = SolverConfig(n_z=64, dt=0.25e-9, snapshot_times=())
    rec = run_gem_sequence(params, seq, control, solver, purity=purity)

    t = rec.times
    mask = (t >= 1.0e-6) & (t < 1.0e-6 + tau)
    num = np.trapezoid(np.abs(rec.signal_output[mask]) ** 2, t[mask])
    den = np.trapezoid(np.abs(rec.signal_input[mask]) ** 2, t[mask])
    return float(num / den)


def synthesize_heterodyne(record: SimulationRecord, lo_frequency: float,
                          lo_off_windows=(), noise_rms: float = 0.0,
                          seed: int = 0, lo_amplitude: float = 1.0) -> np.ndarray:
    """Synthetic photodetector trace |E_LO + E(t)|^2 with seeded noise.

    The local oscillator beats at ``lo_frequency`` (rad/s) and is zeroed
    inside ``lo_off_windows``; requires >= 8 samples per beat period.
    """
    if lo_frequency * record.dt > 2.0 * math.pi / 8.0:
        raise ValueError("undersampled beat: need >= 8 samples per period")
    t = record.times
    lo = lo_amplitude * np.exp(1j * lo_frequency * t)
    for t0, t1 in lo_off_windows:
        lo[(t >= t0) & (t < t1)] = 0.0
    trace = np.abs(lo + record.output_field) ** 2
    if noise_rms > 0.0:
        rng = np.random.default_rng(seed)
        trace = trace + rng.normal(0.0, noise_rms, size=trace.shape)
    return trace

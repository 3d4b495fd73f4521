from dataclasses import replace

import numpy as np
import pytest

from conftest import zero_signal
from gemxpm.dynamics import run_gem_sequence
from gemxpm.model_core import (
    ControlField, GaussianPulse, NumericalError, PhysicalParams, PulseSequence,
    TWO_PI,
)
from gemxpm.observables import (
    SimulationRecord, absorption_spectrum, extract_phase, recall_efficiency,
    synthesize_heterodyne,
)

PARAMS = PhysicalParams()


def synthetic_record(output, n=4000, dt=2e-9, amp=1e-3):
    """Hand-built record: write pulse at 2 us, flip at 4 us, echo at 6 us."""
    t = np.arange(n) * dt
    seq = PulseSequence(
        write_pulse=GaussianPulse(t_center=2e-6, width=0.25e-6,
                                  peak_amplitude=amp),
        reference_pulse=GaussianPulse(t_center=0.5e-6, width=0.1e-6,
                                      peak_amplitude=amp),
        gradient_flip_time=4e-6, total_time=n * dt, storage_time=4e-6)
    e_in = amp * np.exp(-(t - 2e-6) ** 2 / (2 * 0.25e-6 ** 2)) + 0j
    e_in += amp * np.exp(-(t - 0.5e-6) ** 2 / (2 * 0.1e-6 ** 2))
    return SimulationRecord(
        output_field=output, input_field=e_in, dt=dt, sequence=seq,
        control=ControlField(rabi=0.0), params=PARAMS, purity=1.0,
        solver=None, conservation_max=0.0)


def echo_record(n=4000, dt=2e-9, amp=1e-3, phase=0.0, echo_amp=None):
    t = np.arange(n) * dt
    echo_amp = amp if echo_amp is None else echo_amp
    out = echo_amp * np.exp(-(t - 6e-6) ** 2 / (2 * 0.25e-6 ** 2)) \
        * np.exp(1j * phase)
    rec = synthetic_record(out.astype(complex), n=n, dt=dt, amp=amp)
    # reference passes through unchanged
    rec.output_field = rec.output_field + amp * np.exp(
        -(t - 0.5e-6) ** 2 / (2 * 0.1e-6 ** 2))
    return rec


class TestRecallEfficiency:
    def test_identical_windows_normalize_to_one(self):
        # write and echo carry the same pulse shape and energy
        rec = echo_record()
        assert recall_efficiency(rec) == pytest.approx(1.0, rel=1e-6)

    def test_empty_medium_recalls_nothing(self, toy_bundle):
        b = toy_bundle
        params = replace(b.params, optical_depth=0.0, signal_optical_depth=0.0)
        rec = run_gem_sequence(params, zero_signal(b.sequence), b.control,
                               b.solver, b.purity)
        assert recall_efficiency(rec) < 1e-6

    def test_invariant_under_global_phase(self):
        rec = echo_record()
        rotated = echo_record(phase=1.234)
        assert recall_efficiency(rotated) == pytest.approx(
            recall_efficiency(rec), rel=1e-12)

    def test_empty_window_rejected(self):
        rec = echo_record()
        with pytest.raises(ValueError, match="empty window"):
            recall_efficiency(rec, window=(1e-3, 2e-3))


class TestExtractPhase:
    def test_identical_records_give_zero(self):
        a, b = echo_record(), echo_record()
        pm = extract_phase(a, b)
        assert pm.phase_shift == 0.0
        assert pm.reference_phase_delta == 0.0
        assert pm.valid

    def test_constructed_rotation_recovered_exactly(self):
        theta = 0.8315
        pm = extract_phase(echo_record(phase=theta), echo_record())
        assert pm.phase_shift == pytest.approx(theta, abs=1e-12)

    def test_antisymmetric_under_swap(self, toy_records):
        rec0, rec1 = toy_records
        a = extract_phase(rec1, rec0).phase_shift
        b = extract_phase(rec0, rec1).phase_shift
        assert a == pytest.approx(-b, abs=2e-4)

    def test_reference_mismatch_flags_invalid(self):
        rec = echo_record()
        bad = echo_record()
        t = bad.times
        refw = (0.5e-6 - 0.4e-6, 0.5e-6 + 0.4e-6)
        m = (t >= refw[0]) & (t <= refw[1])
        bad.output_field = bad.output_field.copy()
        bad.output_field[m] *= np.exp(0.05j)
        pm = extract_phase(bad, rec)
        assert not pm.valid
        assert pm.reference_phase_delta == pytest.approx(0.05, abs=1e-3)

    def test_no_echo_error(self):
        a = echo_record()
        dead = echo_record(echo_amp=0.0)
        with pytest.raises(NumericalError, match="no echo"):
            extract_phase(a, dead)

    def test_mismatched_grids_rejected(self):
        with pytest.raises(ValueError, match="grid"):
            extract_phase(echo_record(n=4000), echo_record(n=2000))


class TestAbsorptionSpectrum:
    grid = TWO_PI * np.linspace(-20e6, 20e6, 21)

    def test_pure_state_is_transparent(self):
        curve = absorption_spectrum(1.0, self.grid, PARAMS)
        assert all(t == pytest.approx(1.0, abs=1e-12) for _, t in curve)

    def test_transmission_ordered_by_purity(self):
        t100 = np.array([t for _, t in absorption_spectrum(1.00, self.grid, PARAMS)])
        t99 = np.array([t for _, t in absorption_spectrum(0.99, self.grid, PARAMS)])
        t98 = np.array([t for _, t in absorption_spectrum(0.98, self.grid, PARAMS)])
        assert np.all(t98 <= t99 + 1e-15)
        assert np.all(t99 <= t100 + 1e-15)

    def test_minimum_at_resonance(self):
        curve = absorption_spectrum(0.98, self.grid, PARAMS)
        trans = np.array([t for _, t in curve])
        assert np.argmin(trans) == 10  # delta = 0 sits mid-grid

    def test_dynamic_propagation_confirms_steady_curve(self):
        # the stationary closed form against the time-stepped kernel
        sub = TWO_PI * np.array([-8.7e6, -4e6, 0.0])
        steady = absorption_spectrum(0.98, sub, PARAMS, method="steady")
        dynamic = absorption_spectrum(0.98, sub, PARAMS, method="dynamic")
        for (_, ts), (_, td) in zip(steady, dynamic):
            assert td == pytest.approx(ts, abs=0.04)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            absorption_spectrum(0.98, [], PARAMS)
        with pytest.raises(ValueError):
            absorption_spectrum(1.5, self.grid, PARAMS)
        with pytest.raises(ValueError):
            absorption_spectrum(0.98, self.grid, PARAMS, method="nope")


class TestSynthesizeHeterodyne:
    def test_lo_only_structure(self):
        rec = echo_record(echo_amp=0.0)
        rec.output_field = np.zeros_like(rec.output_field)
        lo = TWO_PI * 10e6
        off = ((3e-6, 5e-6),)
        trace = synthesize_heterodyne(rec, lo, lo_off_windows=off,
                                      lo_amplitude=0.5)
        t = rec.times
        on = (t < 3e-6) | (t >= 5e-6)
        assert np.allclose(trace[on], 0.25, atol=1e-12)
        assert np.allclose(trace[~on], 0.0, atol=1e-12)

    def test_seeded_noise_is_deterministic(self):
        rec = echo_record()
        a = synthesize_heterodyne(rec, TWO_PI * 10e6, noise_rms=0.05, seed=42)
        b = synthesize_heterodyne(rec, TWO_PI * 10e6, noise_rms=0.05, seed=42)
        assert np.array_equal(a, b)
        c = synthesize_heterodyne(rec, TWO_PI * 10e6, noise_rms=0.05, seed=43)
        assert not np.array_equal(a, c)

    def test_beat_amplitude_linear_in_field(self):
        # |LO + E|^2 = |LO|^2 + |E|^2 + 2 Re(LO* E): the oscillating part
        # doubles when E doubles
        rec1, rec2 = echo_record(), echo_record()
        rec2.output_field = 2.0 * rec2.output_field
        lo = TWO_PI * 25e6

        def beat(rec):
            tr = synthesize_heterodyne(rec, lo)
            base = np.abs(1.0 + 0j) ** 2 + np.abs(rec.output_field) ** 2
            return tr - base

        b1, b2 = beat(rec1), beat(rec2)
        assert np.max(np.abs(b2 - 2 * b1)) < 1e-12

    def test_undersampled_beat_rejected(self):
        rec = echo_record()
        with pytest.raises(ValueError, match="undersampled"):
            synthesize_heterodyne(rec, TWO_PI * 80e6)

"""Acceptance suite: every exit criterion at full desk scale, one line each.

Runs the reference configuration (optical depth 450, 200 kHz broadening,
208 MHz control detuning, 13 us storage, n_z = 200, dt = 0.2 ns).  The
Maxwell-Bloch runs use the compiled kernel when available; the full suite
takes a few minutes.  Run with ``pytest tests/test_acceptance.py -v -s`` to
see the per-criterion lines.
"""
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import zero_signal
from gemxpm.config_io import bundle_from_config, default_config
from gemxpm.dynamics import compiled_kernel_available, run_gem_sequence
from gemxpm.model_core import TWO_PI
from gemxpm.observables import absorption_spectrum, extract_phase, recall_efficiency
from gemxpm.sweeps import SweepSpec, extrapolate_single_photon, fit_impurity, run_sweep
from gemxpm.stark import AnalyticParams, phase_per_photon, rabi_from_pulse, xpm_phase

DELTA = -TWO_PI * 8.7e6
ENERGY_GRID = tuple(e * 1e-12 for e in (0.5, 1.0, 2.3, 5.0, 8.0, 10.0))


def report(num, ok, desc, detail):
    line = "ACCEPTANCE %d [%s] %s: %s" % (num, "PASS" if ok else "FAIL", desc, detail)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def desk():
    return bundle_from_config(default_config())


@pytest.fixture(scope="module")
def desk_1pj(desk):
    sig = replace(desk.sequence.signal, energy=1e-12)
    return replace(desk, sequence=replace(desk.sequence, signal=sig))


@pytest.fixture(scope="module")
def baseline_run(desk):
    b = desk
    t0 = time.time()
    rec = run_gem_sequence(b.params, zero_signal(b.sequence), b.control,
                           b.solver, b.purity)
    rec.meta["wall_s"] = time.time() - t0
    return rec


@pytest.fixture(scope="module")
def one_pj_run(desk_1pj):
    b = desk_1pj
    return run_gem_sequence(b.params, b.sequence, b.control, b.solver, b.purity)


@pytest.fixture(scope="module")
def energy_sweeps(desk):
    out = {}
    for purity in (1.0, 0.98):
        spec = SweepSpec(variable="signal_energy", grid=ENERGY_GRID,
                         base=replace(desk, purity=purity), model="both")
        out[purity] = run_sweep(spec, threads=3)
    return out


def test_criterion_1_closed_form_fidelity():
    val = xpm_phase(1.0, -3.0, 10.0, 1.0)
    odd_exact = all(
        xpm_phase(1.3, -d, 2.0, 5.0) == -xpm_phase(1.3, d, 2.0, 5.0)
        for d in (0.3, 1.0, 8.7e6, 2.08e8))
    ok = abs(val - (-1.5)) <= 1e-12 * 1.5 and odd_exact
    report(1, ok, "closed-form phase fidelity",
           "phase(1,-3,10,1) = %r (want -1.5), oddness exact = %s"
           % (val, odd_exact))


def test_criterion_2_trace_conservation_full_run(baseline_run):
    rec = baseline_run
    wall = rec.meta["wall_s"]
    ok_trace = rec.conservation_max <= 1e-8
    detail = "max|trace-1| = %.2e over 30 us at n_z = 200 in %.1f s (%s kernel)" \
        % (rec.conservation_max, wall, rec.meta["backend"])
    if compiled_kernel_available():
        report(2, ok_trace and wall < 60.0, "trace conservation", detail)
    else:
        report(2, ok_trace, "trace conservation (runtime target needs the "
               "compiled kernel)", detail)


def test_criterion_3_analytic_numeric_agreement(desk_1pj, one_pj_run,
                                                baseline_run):
    b = desk_1pj
    pm = extract_phase(one_pj_run, baseline_run)
    sig = b.sequence.signal
    gamma = AnalyticParams.from_physical(b.params).gamma_hwhm
    want = xpm_phase(rabi_from_pulse(sig, b.params), sig.detuning_delta,
                     sig.duration_tau, gamma)
    rel = abs(pm.phase_shift - want) / abs(want)
    report(3, rel <= 0.10 and pm.valid, "analytic-numeric agreement at 1 pJ",
           "MB %.5f rad vs closed form %.5f rad (%.2f%% apart, ref delta %.1e)"
           % (pm.phase_shift, want, 100 * rel, pm.reference_phase_delta))


def test_criterion_4_saturation_reproduction(energy_sweeps):
    pure = energy_sweeps[1.0]
    impure = energy_sweeps[0.98]

    def ratios(sweep):
        mb = {r.value: r.phase for r in sweep.rows if r.model == "maxwell_bloch"}
        an = {r.value: r.phase for r in sweep.rows if r.model == "analytic"}
        return {v: mb[v] / an[v] for v in mb}

    r_pure = ratios(pure)
    r_impure = ratios(impure)
    pure_linear = all(abs(r - 1.0) <= 0.10 for r in r_pure.values())
    high = [v for v in ENERGY_GRID if v > 5.0e-12]
    impure_below = all(r_impure[v] < 0.9 for v in high)
    seq = [r_impure[v] for v in sorted(r_impure)]
    monotone = all(b <= a + 1e-3 for a, b in zip(seq, seq[1:]))
    ok = pure_linear and impure_below and monotone
    report(4, ok, "saturation reproduction",
           "purity-1 MB/analytic in [%.3f, %.3f]; purity-0.98 ratio at "
           ">5 pJ %s (monotone=%s)"
           % (min(r_pure.values()), max(r_pure.values()),
              ["%.3f" % r_impure[v] for v in high], monotone))


def test_criterion_5_per_photon_extrapolation(desk):
    grid = tuple(e * 1e-12 for e in (0.5, 1.0, 1.8, 2.6, 3.5, 4.5))
    spec = SweepSpec(variable="signal_energy", grid=grid, base=desk,
                     model="analytic")
    sweep = run_sweep(spec)
    phase, sigma = extrapolate_single_photon(sweep, desk.params.wavelength)
    ok = abs(abs(phase) - 0.07e-6) <= 0.02e-6
    report(5, ok, "per-photon extrapolation",
           "|phase| = %.4f urad (want 0.07 +/- 0.02), fit sigma %.1e urad"
           % (abs(phase) * 1e6, sigma * 1e6))


def test_criterion_6_waist_scaling(desk):
    sig = replace(desk.sequence.signal, waist=1e-6)
    phi = phase_per_photon(sig, desk.params)
    rel = abs(abs(phi) - 2.5e-3) / 2.5e-3
    report(6, rel <= 0.05, "waist-scaling consistency",
           "|phase/photon| at w = 1 um: %.4f mrad (want 2.5 +/- 5%%)"
           % (abs(phi) * 1e3))


def test_criterion_7_efficiency_trend(energy_sweeps, desk):
    sweep = energy_sweeps[0.98]
    effs = [r.efficiency for r in sweep.rows if r.model == "maxwell_bloch"]
    vals = [r.value for r in sweep.rows if r.model == "maxwell_bloch"]
    # prepend the zero-energy point from a dedicated baseline at purity 0.98
    b = replace(desk, purity=0.98)
    rec0 = run_gem_sequence(b.params, zero_signal(b.sequence), b.control,
                            b.solver, 0.98)
    effs = [recall_efficiency(rec0)] + effs
    vals = [0.0] + vals
    ok = all(b_ <= a_ + 1e-4 for a_, b_ in zip(effs, effs[1:]))
    report(7, ok, "recall-efficiency trend",
           "efficiency over %s pJ: %s" % ([v * 1e12 for v in vals],
                                          ["%.4f" % e for e in effs]))


def test_criterion_8_absorption_ordering_and_impurity_fit(desk):
    grid = TWO_PI * np.linspace(-20e6, 20e6, 21)
    curves = {p: np.array([t for _, t in absorption_spectrum(p, grid, desk.params)])
              for p in (1.00, 0.99, 0.98)}
    ordered = (np.all(curves[0.98] <= curves[0.99] + 1e-15)
               and np.all(curves[0.99] <= curves[1.00] + 1e-15))
    fit = fit_impurity(list(zip(grid, curves[0.98])), desk.params)
    fit_ok = abs(fit.value - 0.98) <= 0.005
    report(8, ordered and fit_ok, "absorption ordering and impurity fit",
           "pointwise ordering = %s, fitted purity = %.4f +/- %.4f"
           % (ordered, fit.value, fit.sigma))


def test_criterion_9_determinism_and_convergence(desk_1pj, one_pj_run,
                                                  baseline_run):
    b = desk_1pj
    again = run_gem_sequence(b.params, b.sequence, b.control, b.solver, b.purity)
    identical = (np.array_equal(again.output_field, one_pj_run.output_field)
                 and again.conservation_max == one_pj_run.conservation_max)

    fine_solver = replace(b.solver, dt=b.solver.dt / 2, n_z=2 * b.solver.n_z)
    fine = replace(b, solver=fine_solver)
    rec_hi = run_gem_sequence(fine.params, fine.sequence, fine.control,
                              fine.solver, fine.purity)
    rec_hi0 = run_gem_sequence(fine.params, zero_signal(fine.sequence),
                               fine.control, fine.solver, fine.purity)
    phase_lo = extract_phase(one_pj_run, baseline_run).phase_shift
    phase_hi = extract_phase(rec_hi, rec_hi0).phase_shift
    drift = abs(phase_hi - phase_lo) / abs(phase_hi)
    report(9, identical and drift < 0.01, "determinism and convergence",
           "rerun bit-identical = %s; phase %.5f -> %.5f at (dt/2, 2 n_z), "
           "drift %.3f%%" % (identical, phase_lo, phase_hi, 100 * drift))


def test_default_operating_point_phase_scale(energy_sweeps):
    """At the default 3.7 pJ, -8.7 MHz operating point the imparted phase
    is of order 1 rad; interpolate the sweep rows bracketing 3.7 pJ."""
    for purity in (1.0, 0.98):
        rows = {r.value: r.phase for r in energy_sweeps[purity].rows
                if r.model == "maxwell_bloch"}
        e = sorted(rows)
        lo = max(v for v in e if v <= 3.7e-12)
        hi = min(v for v in e if v >= 3.7e-12)
        frac = (3.7e-12 - lo) / (hi - lo)
        phase = rows[lo] + frac * (rows[hi] - rows[lo])
        assert 0.2 <= abs(phase) <= 3.0
        assert phase < 0

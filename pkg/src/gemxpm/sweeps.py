"""Parameter sweeps over signal energy, detuning and purity, plus the fits.

A sweep point is an independent pure computation: the Maxwell-Bloch model
runs a signal-on sequence against a shared signal-off baseline and extracts
phase and recall efficiency; the analytic model evaluates the closed-form
phase.  Points may execute concurrently (the compiled kernel releases the
GIL); results are keyed by grid value so ordering and worker count never
change the output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import t as student_t

from .config_io import RunBundle, config_hash
from .dynamics import run_gem_sequence
from .model_core import FitError, SignalPulse, photon_energy
from .observables import extract_phase, recall_efficiency
from .stark import AnalyticParams, rabi_from_pulse, xpm_phase

VARIABLES = ("signal_energy", "signal_detuning", "purity")
MODELS = ("analytic", "maxwell_bloch", "both")


@dataclass(frozen=True)
class SweepSpec:
    variable: str       # one of VARIABLES
    grid: tuple         # internal units: J, rad/s, or purity fraction
    base: RunBundle
    model: str = "both"

    def violations(self) -> list:
        out = []
        if self.variable not in VARIABLES:
            out.append("unknown sweep variable %r" % (self.variable,))
        if self.model not in MODELS:
            out.append("unknown model %r" % (self.model,))
        if len(self.grid) == 0:
            out.append("empty sweep grid")
        if list(self.grid) != sorted(self.grid):
            out.append("unsorted sweep grid")
        if self.base.sequence.signal is None and self.variable != "purity":
            out.append("sweep variable needs a signal pulse in the base config")
        return out


@dataclass(frozen=True)
class SweepRow:
    value: float
    phase: float
    efficiency: float
    model: str


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    metadata: dict
    failures: tuple = ()

    def column(self, model: str, field: str) -> np.ndarray:
        return np.array([getattr(r, field) for r in self.rows if r.model == model])


def _apply_value(base: RunBundle, variable: str, value: float) -> RunBundle:
    if variable == "purity":
        return replace(base, purity=float(value))
    sig = base.sequence.signal
    if variable == "signal_energy":
        sig = replace(sig, energy=float(value))
    else:
        sig = replace(sig, detuning_delta=float(value))
    return replace(base, sequence=replace(base.sequence, signal=sig))


def _analytic_phase(bundle: RunBundle) -> float:
    sig = bundle.sequence.signal
    gamma = AnalyticParams.from_physical(bundle.params).gamma_hwhm
    return xpm_phase(rabi_from_pulse(sig, bundle.params), sig.detuning_delta,
                     sig.duration_tau, gamma)


def run_sweep(spec: SweepSpec, threads: int = 1) -> SweepResult:
    """Execute the sweep; partial failures become nan rows with markers."""
    bad = spec.violations()
    if bad:
        from .model_core import ConfigError
        raise ConfigError(bad)

    rows = []
    failures = []
    want_analytic = spec.model in ("analytic", "both")
    want_mb = spec.model in ("maxwell_bloch", "both")

    if want_analytic:
        for v in spec.grid:
            b = _apply_value(spec.base, spec.variable, v)
            rows.append(SweepRow(value=float(v), phase=_analytic_phase(b),
                                 efficiency=float("nan"), model="analytic"))

    if want_mb:
        base = spec.base
        baselines = {}

        def baseline_for(purity):
            # Zero-energy signal, not signal=None: the signal detuning fixes
            # the |4>-manifold rotating frame, which the printed decay
            # cross-couplings make weakly observable even with no drive.
            if purity not in baselines:
                seq0 = base.sequence
                if seq0.signal is not None:
                    seq0 = replace(seq0, signal=replace(seq0.signal, energy=0.0))
                baselines[purity] = run_gem_sequence(
                    base.params, seq0, base.control, base.solver, purity)
            return baselines[purity]

        # Shared baseline first so threads reuse it.
        purities = sorted({float(v) for v in spec.grid}) \
            if spec.variable == "purity" else [base.purity]
        for p in purities:
            baseline_for(p)

        def one_point(v):
            b = _apply_value(base, spec.variable, v)
            rec = run_gem_sequence(b.params, b.sequence, b.control,
                                   b.solver, b.purity)
            pm = extract_phase(rec, baseline_for(b.purity))
            return SweepRow(value=float(v), phase=pm.phase_shift,
                            efficiency=recall_efficiency(rec),
                            model="maxwell_bloch")

        def safe_point(v):
            try:
                return one_point(v), None
            except Exception as exc:
                return (SweepRow(value=float(v), phase=float("nan"),
                                 efficiency=float("nan"), model="maxwell_bloch"),
                        (float(v), "maxwell_bloch", str(exc)))

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(safe_point, spec.grid))
        else:
            results = [safe_point(v) for v in spec.grid]
        for row, failure in results:
            rows.append(row)
            if failure is not None:
                failures.append(failure)

    rows.sort(key=lambda r: (r.value, r.model))
    meta = {
        "variable": spec.variable,
        "model": spec.model,
        "config_hash": config_hash(spec.base),
        "solver": {"n_z": spec.base.solver.n_z, "dt": spec.base.solver.dt,
                   "integrator": spec.base.solver.integrator},
    }
    return SweepResult(rows=tuple(rows), metadata=meta, failures=tuple(failures))


@dataclass(frozen=True)
class FitResult:
    value: float
    sigma: float
    physical: bool
    n_points: int
    residual_norm: float


def _lm_fit(residual, x0, x_scale):
    """Damped least squares with numeric Jacobian; returns (result, sigma).

    sigma is the 68.27% confidence half-width of the parameter: the usual
    chi^2/dof-scaled covariance widened by the Student-t factor for the
    residual degrees of freedom, so quoted 1-sigma intervals keep their
    coverage on small samples.
    """
    res = least_squares(residual, x0, method="lm", x_scale=x_scale)
    if not res.success:
        raise FitError("fit did not converge: %s" % res.message)
    n, m = len(res.fun), len(res.x)
    if n > m:
        jtj = res.jac.T @ res.jac
        try:
            cov = np.linalg.inv(jtj) * (2.0 * res.cost / (n - m))
        except np.linalg.LinAlgError:
            raise FitError("singular Jacobian in fit")
        t_factor = float(student_t.ppf(0.5 * (1.0 + 0.6826894921), n - m))
        sigma = t_factor * float(math.sqrt(max(cov[0, 0], 0.0)))
    else:
        sigma = float("nan")
    return res, sigma


def fit_waist(measured, delta: float, params, tau: float = 1e-6) -> FitResult:
    """Least-squares beam waist from (energy J, phase rad) data.

    The closed-form phase scales as energy / waist^2 (tau cancels), so the
    waist is the single free parameter of the model line.
    """
    data = [(float(e), float(p)) for e, p in measured]
    if len(data) < 3:
        raise FitError("need at least 3 points in the linear regime")
    if all(p == 0.0 for _, p in data):
        raise FitError("degenerate fit data: all phases zero")
    energies = np.array([e for e, _ in data])
    phases = np.array([p for _, p in data])
    gamma = AnalyticParams.from_physical(params).gamma_hwhm

    def model(w_um):
        sig = [SignalPulse(energy=e, duration_tau=tau, detuning_delta=delta,
                           waist=w_um * 1e-6, t_start=0.0) for e in energies]
        return np.array([xpm_phase(rabi_from_pulse(s, params), delta, tau, gamma)
                         for s in sig])

    def residual(x):
        # relative residuals: phase data spans a decade in energy and its
        # uncertainty is fractional, so weight each point by the model size
        m = model(x[0])
        return (m - phases) / np.abs(m)

    res, sigma_rel = _lm_fit(residual, [150.0], [100.0])
    w = float(res.x[0]) * 1e-6
    return FitResult(value=w, sigma=sigma_rel * 1e-6, physical=w > 0,
                     n_points=len(data), residual_norm=float(np.sqrt(2 * res.cost)))


def fit_impurity(absorption_data, params) -> FitResult:
    """Least-squares initial-state purity from (detuning, transmission) data.

    Fits the stationary absorption curve with purity free; a best fit
    outside [0, 1] is reported as-is with ``physical=False``, never clamped.
    """
    data = [(float(d), float(t)) for d, t in absorption_data]
    if len(data) < 3:
        raise FitError("need at least 3 detuning points")
    deltas = np.array([d for d, _ in data])
    trans = np.array([t for _, t in data])

    def model(purity):
        return np.array([t for _, t in
                         absorption_spectrum_unclamped(purity, deltas, params)])

    res, sigma = _lm_fit(lambda x: model(x[0]) - trans, [0.97], [0.1])
    purity = float(res.x[0])
    return FitResult(value=purity, sigma=sigma,
                     physical=0.0 <= purity <= 1.0, n_points=len(data),
                     residual_norm=float(np.sqrt(2 * res.cost)))


def absorption_spectrum_unclamped(purity, deltas, params):
    """Stationary absorption curve continued to purity outside [0, 1].

    The fit must be free to wander past the physical range, so this skips
    the domain check of :func:`gemxpm.observables.absorption_spectrum`.
    """
    g = params.gamma_excited
    gam_s = g / 8.0
    depth = 2.0 * g * params.signal_od * (1.0 - purity) * gam_s \
        / (np.asarray(deltas, dtype=float) ** 2 + gam_s ** 2)
    return [(float(d), float(np.exp(-a))) for d, a in zip(deltas, depth)]


def extrapolate_single_photon(sweep: SweepResult, wavelength: float,
                              energy_cutoff: float = 5e-12,
                              model: Optional[str] = None) -> tuple:
    """Per-photon phase from the linear low-energy regime of an energy sweep.

    Fits a line through rows with energy <= ``energy_cutoff`` and multiplies
    the slope by the single-photon energy.  Returns (phase, 1-sigma).
    """
    if sweep.metadata.get("variable") != "signal_energy":
        raise FitError("extrapolation needs a signal_energy sweep")
    if model is None:
        model = "analytic" if any(r.model == "analytic" for r in sweep.rows) \
            else "maxwell_bloch"
    pts = [(r.value, r.phase) for r in sweep.rows
           if r.model == model and r.value <= energy_cutoff
           and np.isfinite(r.phase)]
    if len(pts) < 3:
        raise FitError("insufficient linear-regime points (need >= 3)")
    e = np.array([p[0] for p in pts])
    ph = np.array([p[1] for p in pts])
    coeffs, cov = np.polyfit(e, ph, 1, cov=True)
    slope, slope_sigma = coeffs[0], math.sqrt(abs(cov[0, 0]))
    e_photon = photon_energy(wavelength)
    return float(slope * e_photon), float(slope_sigma * e_photon)

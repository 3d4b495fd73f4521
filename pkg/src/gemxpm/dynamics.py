"""Four-level Maxwell-Bloch integration over the full store/recall sequence.

The equation set evolves one representative atom per z point: populations
sigma_11..sigma_44 and coherences sigma_12, sigma_31, sigma_32, sigma_41,
sigma_42, sigma_43 (the rest by Hermiticity), coupled to the dimensionless
probe field E through d_z E = i sqrt(d) sigma_13 and to the signal coupling
u through d_z u = i Gamma d_s sigma_24.  The inhomogeneous term eta*z flips
sign at the gradient-flip time, rephasing the stored coherence into an echo.

Detuning sign convention: the equations carry transition-minus-laser
detunings (a red-detuned field has positive Delta), so the laser-convention
signal detuning delta of :class:`~gemxpm.model_core.SignalPulse` enters the
stepper as Delta_s = -delta.

Two interchangeable backends implement the stepping loop: a compiled
extension (``gemxpm._mbcore``) and a pure-numpy fallback, selected at import
time.  ``benchmarks/compare_kernels.py`` measures both.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from . import _kernel_py
from .model_core import (
    AtomicState, ControlField, GaussianBeam, NumericalError, PhysicalParams,
    PulseSequence, SignalPulse, validate_params,
)
from .observables import SimulationRecord
from .stark import equation_signal_coupling

try:
    from . import _mbcore as _compiled
except ImportError:          # extension not built; numpy fallback only
    _compiled = None

SQRT3 = math.sqrt(3.0)


def compiled_kernel_available() -> bool:
    return _compiled is not None


@dataclass(frozen=True)
class SolverConfig:
    """Numerical settings for the stepping loop.

    ``dt`` must resolve the one-photon detuning and keep the explicitly
    coupled probe-coherence/field ladder stable; at optical depth 450 the
    stability edge sits near Gamma*d*dt ~ 4, i.e. dt ~ 0.25 ns.  The
    ``rk45_adaptive`` integrator wraps scipy's RK45 around the same
    right-hand side (field slaved self-consistently per evaluation); it is
    meant for cross-checks on small grids, not production runs.
    """

    n_z: int = 200
    dt: float = 0.2e-9
    integrator: str = "rk4_fixed"        # or "rk45_adaptive"
    abs_tol: float = 1e-10               # adaptive integrator only
    rel_tol: float = 1e-8                # adaptive integrator only
    trace_tol: float = 1e-6              # abort threshold on |trace - 1|
    record_stride: int = 1
    snapshot_times: tuple = ()
    field_history_stride: int = 0        # 0 = no (z, t) field history
    backend: str = "auto"                # "auto" | "compiled" | "python"
    use_printed_sqrt3_term: bool = True  # sqrt(3) vs sqrt(d) on the E*sigma43 term
    printed_delta_on_signal_coherence: bool = False  # Delta vs Delta_s on sigma42

    def violations(self) -> list:
        out = []
        if self.n_z < 16:
            out.append("n_z must be >= 16")
        if not self.dt > 0:
            out.append("dt must be > 0")
        if not (self.abs_tol > 0 and self.rel_tol > 0 and self.trace_tol > 0):
            out.append("tolerances must be > 0")
        if self.integrator not in ("rk4_fixed", "rk45_adaptive"):
            out.append("unknown integrator %r" % (self.integrator,))
        if self.backend not in ("auto", "compiled", "python"):
            out.append("unknown backend %r" % (self.backend,))
        return out


@dataclass
class EnsembleState:
    """Atomic state over the z grid plus the instantaneous field slice.

    ``pops`` has shape (4, n_z); ``cohs`` holds the upper-triangle
    coherences in the order (12, 13, 23, 14, 24, 34), shape (6, n_z).
    """

    pops: np.ndarray
    cohs: np.ndarray
    field_slice: np.ndarray

    @property
    def n_z(self) -> int:
        return self.pops.shape[1]

    def atom(self, k: int) -> AtomicState:
        c = self.cohs[:, k]
        return AtomicState(
            pop11=float(self.pops[0, k]), pop22=float(self.pops[1, k]),
            pop33=float(self.pops[2, k]), pop44=float(self.pops[3, k]),
            coh12=complex(c[0]), coh13=complex(c[1]), coh23=complex(c[2]),
            coh14=complex(c[3]), coh24=complex(c[4]), coh34=complex(c[5]))

    def validate(self, tol: float = 1e-8) -> list:
        out = []
        trace = self.pops.sum(axis=0)
        worst = np.abs(trace - 1.0).max()
        if worst > tol:
            out.append("trace deviates by %g" % worst)
        if not np.all(np.isfinite(self.field_slice.view(float))):
            out.append("non-finite field slice")
        return out


def initial_state(purity: float, n_z: int = 200) -> EnsembleState:
    """Ensemble before the memory operation.

    A fraction ``purity`` of the population sits in the probe ground state
    |1>, the remainder in the storage state |2>; every coherence is zero.
    """
    if not 0.0 <= purity <= 1.0:
        raise ValueError("purity must lie in [0, 1]")
    pops = np.zeros((4, n_z))
    pops[0] = purity
    pops[1] = 1.0 - purity
    return EnsembleState(pops=pops, cohs=np.zeros((6, n_z), dtype=complex),
                         field_slice=np.zeros(n_z, dtype=complex))


def signal_profile(signal: SignalPulse, z, params: PhysicalParams) -> np.ndarray:
    """Local signal Rabi frequency (rad/s) along the cell.

    Uniform mode returns the peak Rabi everywhere; gaussian_beam scales it
    by the on-axis amplitude of a beam focused inside the cell,
    1 / sqrt(1 + ((z - focus)/z_R)^2).
    """
    from .stark import rabi_from_pulse

    zv = np.atleast_1d(np.asarray(z, dtype=float))
    rabi = rabi_from_pulse(signal, params)
    return rabi * _geometric_profile(signal, zv)


def _geometric_profile(signal: SignalPulse, zv: np.ndarray) -> np.ndarray:
    if isinstance(signal.z_profile, GaussianBeam):
        beam = signal.z_profile
        return 1.0 / np.sqrt(1.0 + ((zv - beam.focus_z) / beam.rayleigh_range) ** 2)
    return np.ones_like(zv)


def bloch_rhs(state: AtomicState, e_local: complex, omega: complex,
              omega_s: complex, z: float, params: PhysicalParams,
              flip_sign: int = 1, signal_detuning: float = 0.0,
              use_printed_sqrt3_term: bool = True,
              printed_delta_on_signal_coherence: bool = False) -> AtomicState:
    """Single-point time derivative of the density-matrix elements.

    Reference (scalar) implementation against which both stepping kernels
    are tested.  ``omega_s`` is the equation-level signal coupling and
    ``signal_detuning`` the transition-minus-laser signal detuning Delta_s;
    ``flip_sign`` multiplies the gradient term eta*z.
    """
    g = params.gamma_excited
    sd = math.sqrt(params.optical_depth)
    big_d = params.control_detuning
    gz = flip_sign * params.gradient_eta * z
    ds = signal_detuning
    d42 = big_d if printed_delta_on_signal_coherence else ds
    k3 = SQRT3 if use_printed_sqrt3_term else sd

    p1, p2, p3, p4 = state.pop11, state.pop22, state.pop33, state.pop44
    c12 = state.coh12
    c31 = state.coh13.conjugate()
    c32 = state.coh23.conjugate()
    c41 = state.coh14.conjugate()
    c42 = state.coh24.conjugate()
    c43 = state.coh34.conjugate()
    e = complex(e_local)
    om = complex(omega)
    u = complex(omega_s)

    ec31 = e * c31
    oc32 = om * c32
    uc42 = u * c42
    re43 = c43.real

    dp1 = 2.0 * g * sd * ec31.imag + 0.5 * g * p3
    dp2 = (2.0 * oc32.imag + 2.0 * uc42.imag
           + (g / 12.0) * (p3 + 2.0 * SQRT3 * re43 + 3.0 * p4))
    dp3 = (-2.0 * oc32.imag - 2.0 * g * sd * ec31.imag
           - (g / 24.0) * (14.0 * p3 + 2.0 * SQRT3 * re43))
    dp4 = -2.0 * uc42.imag - (g / 24.0) * (2.0 * SQRT3 * re43 + 6.0 * p4)

    dc12 = (1j * (om.conjugate() * c31.conjugate() + u.conjugate() * c41.conjugate()
                  - g * sd * e * c32 - gz * c12)
            - (g / (6.0 * math.sqrt(2.0))) * (SQRT3 * p3 + 3.0 * c43.conjugate()))
    dc31 = (1j * (-om.conjugate() * c12.conjugate() + g * sd * e.conjugate() * (p3 - p1)
                  + (gz - big_d) * c31)
            - (g / 24.0) * (7.0 * c31 + SQRT3 * c41))
    dc32 = (1j * (om.conjugate() * (p3 - p2) - g * sd * e.conjugate() * c12
                  + u.conjugate() * c43.conjugate() - big_d * c32)
            - (g / 24.0) * (7.0 * c32 + SQRT3 * c42))
    dc41 = (1j * (g * k3 * e.conjugate() * c43 - u.conjugate() * c12.conjugate()
                  + (gz - ds) * c41)
            - (g / 24.0) * (SQRT3 * c31 + 3.0 * c41))
    dc42 = (1j * (om.conjugate() * c43 + u.conjugate() * (p4 - p2) - d42 * c42)
            - (g / 24.0) * (SQRT3 * c32 + 3.0 * c42))
    dc43 = (1j * (om * c42 - u.conjugate() * c32.conjugate() + g * sd * e * c41
                  + (big_d - ds) * c43)
            - (g / 24.0) * (SQRT3 * (p3 + p4) + 10.0 * c43))

    return AtomicState(pop11=dp1, pop22=dp2, pop33=dp3, pop44=dp4,
                       coh12=dc12, coh13=dc31.conjugate(), coh23=dc32.conjugate(),
                       coh14=dc41.conjugate(), coh24=dc42.conjugate(),
                       coh34=dc43.conjugate())


def propagate_field(state: EnsembleState, params: PhysicalParams,
                    e_boundary: complex = 0.0) -> np.ndarray:
    """Probe field across the grid from d_z E = i sqrt(d) sigma_13.

    Trapezoid integration of the first-order spatial ODE with the boundary
    value E(z=0) given by the input envelope.
    """
    nz = state.n_z
    dz = 1.0 / (nz - 1)
    s13 = state.cohs[1]   # coh13 = sigma_13
    e = np.empty(nz, dtype=complex)
    e[0] = e_boundary
    incr = 1j * math.sqrt(params.optical_depth) * 0.5 * dz * (s13[:-1] + s13[1:])
    e[1:] = e_boundary + np.cumsum(incr)
    return e


def _pulse_envelope(t, pulse, default_carrier):
    carrier = pulse.carrier_offset if pulse.carrier_offset is not None \
        else default_carrier
    return pulse.peak_amplitude * np.exp(-(t - pulse.t_center) ** 2
                                         / (2.0 * pulse.width ** 2)) \
        * np.exp(-1j * carrier * (t - pulse.t_center))


def _probe_boundary(t, seq: PulseSequence, params: PhysicalParams):
    # Default carrier offset eta/2 centres the pulse spectrum on the middle
    # of the broadened line.
    default_carrier = 0.5 * params.gradient_eta
    e = _pulse_envelope(t, seq.write_pulse, default_carrier)
    if seq.reference_pulse is not None:
        e = e + _pulse_envelope(t, seq.reference_pulse, default_carrier)
    return e


def _kernel_inputs(params, seq, control, solver, purity):
    nt = int(round(seq.total_time / solver.dt))
    dt = solver.dt
    t_edge = np.arange(nt + 1) * dt
    e_in = _probe_boundary(t_edge, seq, params).astype(complex)

    s_in = np.zeros(nt + 1, dtype=complex)
    delta_s = 0.0
    profile = np.ones(solver.n_z)
    z = np.linspace(0.0, 1.0, solver.n_z)
    if seq.signal is not None:
        # The signal laser defines the rotating frame of the |4> manifold
        # even when its amplitude is zero (blocked beam), so a zero-energy
        # run is the correct phase-reference baseline for a signal run.
        delta_s = -seq.signal.detuning_delta
        profile = _geometric_profile(seq.signal, z)
        if seq.signal.energy > 0:
            coupling = equation_signal_coupling(seq.signal, params)
            mask = (t_edge >= seq.signal.t_start) & (t_edge < seq.signal.t_end)
            s_in[mask] = coupling

    t_step = t_edge[:-1]
    omega_t = np.zeros(nt, dtype=complex)
    for t0, t1 in control.on_windows:
        omega_t[(t_step >= t0) & (t_step < t1)] = control.rabi
    grad_t = np.where(t_step < seq.gradient_flip_time,
                      params.gradient_eta, -params.gradient_eta)

    snap_steps = np.asarray(
        sorted(int(round(ts / dt)) for ts in solver.snapshot_times), dtype=np.int64)
    return nt, t_edge, e_in, s_in, delta_s, omega_t, grad_t, z, profile, snap_steps


def _select_backend(solver: SolverConfig):
    if solver.backend == "python":
        return _kernel_py, "python"
    if solver.backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel requested but not built")
        return _compiled, "compiled"
    if _compiled is not None:
        return _compiled, "compiled"
    return _kernel_py, "python"


def _to_user_cohs(C: np.ndarray) -> np.ndarray:
    """Kernel coherence layout (12, 31, 32, 41, 42, 43) -> upper triangle."""
    out = np.empty_like(C)
    out[0] = C[0]
    out[1] = np.conj(C[1])
    out[2] = np.conj(C[2])
    out[3] = np.conj(C[3])
    out[4] = np.conj(C[4])
    out[5] = np.conj(C[5])
    return out


def run_gem_sequence(params: PhysicalParams, seq: PulseSequence,
                     control: ControlField, solver: SolverConfig,
                     purity: float = 1.0) -> SimulationRecord:
    """Integrate the full sequence and return the simulation record.

    The write pulse enters at z=0 with the gradient at +eta; the signal
    coupling drives the ensemble inside its window during storage; at the
    flip time the gradient reverses and the echo forms.  Aborts with
    :class:`NumericalError` on NaN or on a trace violation beyond
    ``solver.trace_tol``.
    """
    validate_params(params, seq, control)
    bad = solver.violations()
    if bad:
        from .model_core import ConfigError
        raise ConfigError(bad)

    if solver.integrator == "rk45_adaptive":
        return _run_adaptive(params, seq, control, solver, purity)

    (nt, t_edge, e_in, s_in, delta_s, omega_t, grad_t, z, profile,
     snap_steps) = _kernel_inputs(params, seq, control, solver, purity)
    kernel, backend = _select_backend(solver)

    state0 = initial_state(purity, solver.n_z)
    dz = z[1] - z[0]
    res = kernel.run_span(
        state0.pops, np.zeros((6, solver.n_z), dtype=complex),
        e_in, s_in, omega_t, grad_t, z, solver.dt, dz,
        params.gamma_excited, math.sqrt(params.optical_depth),
        params.control_detuning, delta_s, params.signal_od,
        SQRT3 if solver.use_printed_sqrt3_term else math.sqrt(params.optical_depth),
        params.control_detuning if solver.printed_delta_on_signal_coherence else delta_s,
        profile, snap_steps, solver.trace_tol, solver.field_history_stride)

    if res["status"] == _kernel_py.TRACE_ABORT:
        raise NumericalError(
            "trace violation %.3e beyond tolerance %.1e at t = %.4g s"
            % (res["max_trace"], solver.trace_tol, res["bad_step"] * solver.dt))
    if res["status"] == _kernel_py.NAN_ABORT:
        raise NumericalError("non-finite field at t = %.4g s"
                             % (res["bad_step"] * solver.dt,))

    stride = solver.record_stride
    snapshots = tuple(
        (step * solver.dt,
         EnsembleState(pops=res["snaps_P"][i].copy(),
                       cohs=_to_user_cohs(res["snaps_C"][i]),
                       field_slice=res["snaps_E"][i].copy()))
        for i, step in enumerate(snap_steps))

    field_history = None
    if res["e_hist"] is not None:
        from .model_core import FieldEnvelope
        field_history = FieldEnvelope(
            values=np.ascontiguousarray(res["e_hist"].T), dz=dz,
            dt=solver.dt * solver.field_history_stride)
        field_history.validate()

    return SimulationRecord(
        output_field=res["e_out"][::stride].copy(),
        input_field=e_in[:nt:stride].copy(),
        dt=solver.dt * stride,
        sequence=seq, control=control, params=params, purity=purity,
        solver=solver, conservation_max=float(res["max_trace"]),
        snapshots=snapshots, field_history=field_history,
        signal_on=bool(seq.signal is not None and seq.signal.energy > 0),
        signal_output=res["u_out"][::stride].copy(),
        signal_input=s_in[:nt:stride].copy(),
        meta={"backend": backend, "n_steps": nt},
    )


def _run_adaptive(params, seq, control, solver, purity):
    """scipy RK45 on the same right-hand side; fields slaved per evaluation."""
    from scipy.integrate import solve_ivp

    nz = solver.n_z
    z = np.linspace(0.0, 1.0, nz)
    dz = z[1] - z[0]
    g = params.gamma_excited
    sd = math.sqrt(params.optical_depth)
    delta_s = -seq.signal.detuning_delta if seq.signal is not None else 0.0
    coupling = 0.0
    profile = np.ones(nz)
    if seq.signal is not None:
        profile = _geometric_profile(seq.signal, z)
        if seq.signal.energy > 0:
            coupling = equation_signal_coupling(seq.signal, params)
    d42 = params.control_detuning if solver.printed_delta_on_signal_coherence \
        else delta_s
    k3 = SQRT3 if solver.use_printed_sqrt3_term else sd

    def unpack(y):
        y = np.ascontiguousarray(y)
        P = y[:4 * nz].reshape(4, nz)
        C = y[4 * nz:].view(complex).reshape(6, nz)
        return P, C

    def fields_at(t, C):
        e_b = complex(_probe_boundary(np.array([t]), seq, params)[0])
        s_b = coupling if (seq.signal is not None
                           and seq.signal.t_start <= t < seq.signal.t_end) else 0.0
        return _kernel_py.propagate_fields(e_b, s_b, C, profile, dz, sd, g,
                                           params.signal_od)

    def rhs(t, y):
        P, C = unpack(y)
        E, u = fields_at(t, C)
        om = control.rabi if control.is_on(t) else 0.0
        eta = params.gradient_eta if t < seq.gradient_flip_time \
            else -params.gradient_eta
        dP, dC = _kernel_py.derivs(P, C, E, profile * u, om, eta * z, g, sd,
                                   params.control_detuning, delta_s, k3, d42)
        return np.concatenate([dP.ravel(), dC.ravel().view(float)])

    state0 = initial_state(purity, nz)
    y0 = np.concatenate([state0.pops.ravel(),
                         np.zeros(6 * nz, dtype=complex).view(float)])
    n_rec = int(round(seq.total_time / (solver.dt * solver.record_stride)))
    t_eval = np.arange(n_rec) * solver.dt * solver.record_stride
    sol = solve_ivp(rhs, (0.0, seq.total_time), y0, method="RK45",
                    t_eval=t_eval, rtol=solver.rel_tol, atol=solver.abs_tol)
    if not sol.success:
        raise NumericalError("adaptive integration failed: %s" % sol.message)

    e_out = np.empty(n_rec, dtype=complex)
    max_trace = 0.0
    for i in range(n_rec):
        P, C = unpack(sol.y[:, i])
        E, _ = fields_at(t_eval[i], C)
        e_out[i] = E[-1]
        max_trace = max(max_trace, float(np.abs(P.sum(axis=0) - 1.0).max()))
    if max_trace > solver.trace_tol:
        raise NumericalError("trace violation %.3e beyond tolerance" % max_trace)

    return SimulationRecord(
        output_field=e_out,
        input_field=_probe_boundary(t_eval, seq, params).astype(complex),
        dt=solver.dt * solver.record_stride,
        sequence=seq, control=control, params=params, purity=purity,
        solver=solver, conservation_max=max_trace, snapshots=(),
        field_history=None,
        signal_on=bool(seq.signal is not None and seq.signal.energy > 0),
        meta={"backend": "scipy_rk45", "n_steps": int(sol.nfev)},
    )

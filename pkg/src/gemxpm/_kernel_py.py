"""Pure-numpy time stepper for the four-level Maxwell-Bloch system.

Fallback backend; the compiled extension ``gemxpm._mbcore`` implements the
same loop and the same call signature.  State layout over the z grid keeps
the coherences the equations are written in:

    C[0] = sigma_12, C[1] = sigma_31, C[2] = sigma_32,
    C[3] = sigma_41, C[4] = sigma_42, C[5] = sigma_43

with the remaining elements defined by Hermitian conjugation.  The probe
field E (dimensionless) and the signal coupling u (rad/s) are slaved to the
atoms through first-order spatial ODEs integrated by the trapezoid rule;
both are held frozen across the four RK4 stages of each time step and
re-propagated once per step.
"""
from __future__ import annotations

import math

import numpy as np

SQRT3 = math.sqrt(3.0)
_C12, _C31, _C32, _C41, _C42, _C43 = range(6)

#: Status codes returned by run_span.
OK, TRACE_ABORT, NAN_ABORT = 0, 1, 2


def derivs(P, C, E, u_drive, omega, gz, gamma, sqrt_d, big_delta, delta_s,
           sqrt3_coeff, delta_on_c42):
    """Time derivatives of populations P (4, nz) and coherences C (6, nz).

    ``u_drive`` is the local signal coupling (geometric profile already
    applied), ``gz`` the signed gradient term eta*z per point.
    """
    p1, p2, p3, p4 = P
    c12, c31, c32, c41, c42, c43 = C
    g = gamma
    oc = np.conj(omega)
    uc = np.conj(u_drive)
    ec = np.conj(E)

    e_c31 = E * c31
    o_c32 = omega * c32
    u_c42 = u_drive * c42
    re_c43 = c43.real

    dP = np.empty_like(P)
    dP[0] = 2.0 * g * sqrt_d * e_c31.imag + 0.5 * g * p3
    dP[1] = (2.0 * o_c32.imag + 2.0 * u_c42.imag
             + (g / 12.0) * (p3 + 2.0 * SQRT3 * re_c43 + 3.0 * p4))
    dP[2] = (-2.0 * o_c32.imag - 2.0 * g * sqrt_d * e_c31.imag
             - (g / 24.0) * (14.0 * p3 + 2.0 * SQRT3 * re_c43))
    dP[3] = -2.0 * u_c42.imag - (g / 24.0) * (2.0 * SQRT3 * re_c43 + 6.0 * p4)

    dC = np.empty_like(C)
    dC[_C12] = (1j * (oc * np.conj(c31) + uc * np.conj(c41)
                      - g * sqrt_d * E * c32 - gz * c12)
                - (g / (6.0 * math.sqrt(2.0))) * (SQRT3 * p3 + 3.0 * np.conj(c43)))
    dC[_C31] = (1j * (-oc * np.conj(c12) + g * sqrt_d * ec * (p3 - p1)
                      + (gz - big_delta) * c31)
                - (g / 24.0) * (7.0 * c31 + SQRT3 * c41))
    dC[_C32] = (1j * (oc * (p3 - p2) - g * sqrt_d * ec * c12
                      + uc * np.conj(c43) - big_delta * c32)
                - (g / 24.0) * (7.0 * c32 + SQRT3 * c42))
    dC[_C41] = (1j * (g * sqrt3_coeff * ec * c43 - uc * np.conj(c12)
                      + (gz - delta_s) * c41)
                - (g / 24.0) * (SQRT3 * c31 + 3.0 * c41))
    dC[_C42] = (1j * (oc * c43 + uc * (p4 - p2) - delta_on_c42 * c42)
                - (g / 24.0) * (SQRT3 * c32 + 3.0 * c42))
    dC[_C43] = (1j * (omega * c42 - uc * np.conj(c32) + g * sqrt_d * E * c41
                      + (big_delta - delta_s) * c43)
                - (g / 24.0) * (SQRT3 * (p3 + p4) + 10.0 * c43))
    return dP, dC


def propagate_fields(e_boundary, s_boundary, C, profile, dz, sqrt_d, gamma, d_sig):
    """Slaved probe and signal fields across the cell (trapezoid in z)."""
    s13 = np.conj(C[_C31])
    incr = (1j * sqrt_d * 0.5 * dz) * (s13[:-1] + s13[1:])
    E = np.empty(C.shape[1], dtype=complex)
    E[0] = e_boundary
    np.cumsum(incr, out=E[1:])
    E[1:] += e_boundary

    s24w = profile * np.conj(C[_C42])
    incr2 = (1j * gamma * d_sig * 0.5 * dz) * (s24w[:-1] + s24w[1:])
    u = np.empty(C.shape[1], dtype=complex)
    u[0] = s_boundary
    np.cumsum(incr2, out=u[1:])
    u[1:] += s_boundary
    return E, u


def run_span(P, C, e_in, s_in, omega_t, grad_t, z, dt, dz,
             gamma, sqrt_d, big_delta, delta_s, d_sig,
             sqrt3_coeff, delta_on_c42, profile,
             snap_steps, trace_tol, hist_stride=0):
    """Advance the ensemble over the whole time span.

    Parameters mirror the compiled kernel: ``P`` (4, nz) float, ``C`` (6, nz)
    complex (modified copies are made internally), boundary series ``e_in``
    and ``s_in`` of length nt+1, per-step control ``omega_t`` and signed
    gradient ``grad_t`` of length nt.  Returns a dict with the output-field
    series, conservation maximum, final state, snapshots and status.
    """
    nt = omega_t.shape[0]
    nz = z.shape[0]
    P = P.astype(float).copy()
    C = C.astype(complex).copy()

    e_out = np.empty(nt, dtype=complex)
    u_out = np.empty(nt, dtype=complex)
    n_snap = len(snap_steps)
    snaps_P = np.empty((n_snap, 4, nz))
    snaps_C = np.empty((n_snap, 6, nz), dtype=complex)
    snaps_E = np.empty((n_snap, nz), dtype=complex)
    n_hist = nt // hist_stride if hist_stride else 0
    e_hist = np.empty((n_hist, nz), dtype=complex) if n_hist else None

    E, u = propagate_fields(e_in[0], s_in[0], C, profile, dz, sqrt_d, gamma, d_sig)
    max_trace = 0.0
    status, bad_step = OK, -1
    isnap = 0
    half = 0.5 * dt
    sixth = dt / 6.0

    for n in range(nt):
        e_out[n] = E[-1]
        u_out[n] = u[-1]
        if hist_stride and n % hist_stride == 0 and n // hist_stride < n_hist:
            e_hist[n // hist_stride] = E

        om = omega_t[n]
        gz = grad_t[n] * z
        u_loc = profile * u
        args = (om, gz, gamma, sqrt_d, big_delta, delta_s, sqrt3_coeff, delta_on_c42)

        kP1, kC1 = derivs(P, C, E, u_loc, *args)
        kP2, kC2 = derivs(P + half * kP1, C + half * kC1, E, u_loc, *args)
        kP3, kC3 = derivs(P + half * kP2, C + half * kC2, E, u_loc, *args)
        kP4, kC4 = derivs(P + dt * kP3, C + dt * kC3, E, u_loc, *args)
        P += sixth * (kP1 + 2.0 * kP2 + 2.0 * kP3 + kP4)
        C += sixth * (kC1 + 2.0 * kC2 + 2.0 * kC3 + kC4)

        E, u = propagate_fields(e_in[n + 1], s_in[n + 1], C, profile, dz,
                                sqrt_d, gamma, d_sig)

        terr = np.abs(P.sum(axis=0) - 1.0).max()
        if terr > max_trace:
            max_trace = terr
        if terr > trace_tol:
            status, bad_step = TRACE_ABORT, n
            break
        if n % 256 == 0 and not (np.isfinite(E[-1].real) and np.isfinite(E[-1].imag)):
            status, bad_step = NAN_ABORT, n
            break
        if isnap < n_snap and n == snap_steps[isnap]:
            snaps_P[isnap] = P
            snaps_C[isnap] = C
            snaps_E[isnap] = E
            isnap += 1

    if status == OK and not np.all(np.isfinite(e_out.view(float))):
        status, bad_step = NAN_ABORT, nt - 1

    return {
        "e_out": e_out, "u_out": u_out, "max_trace": max_trace, "status": status,
        "bad_step": bad_step, "P": P, "C": C, "E": E,
        "snaps_P": snaps_P, "snaps_C": snaps_C, "snaps_E": snaps_E,
        "e_hist": e_hist,
    }

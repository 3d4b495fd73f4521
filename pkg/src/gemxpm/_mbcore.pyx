# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled time stepper for the four-level Maxwell-Bloch system.

Hot loop of the simulator: classic RK4 over the atomic variables with the
probe and signal fields slaved to the coherences and re-propagated across
the z grid once per step.  Mirrors gemxpm._kernel_py.run_span exactly
(same state layout, same call signature, same return dict).
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

OK, TRACE_ABORT, NAN_ABORT = 0, 1, 2

cdef int _OK = 0, _TRACE = 1, _NAN = 2

cdef double SQRT3 = sqrt(3.0)
cdef double SQRT2 = sqrt(2.0)


cdef inline double complex conjc(double complex x) noexcept nogil:
    return x.real - 1j * x.imag


cdef void _derivs(int nz, double[:, ::1] P, double complex[:, ::1] C,
                  double complex[::1] E, double complex[::1] u,
                  double[::1] profile,
                  double complex om, double grad, double[::1] z,
                  double g, double sd, double D, double Ds,
                  double sqrt3_coeff, double d42,
                  double[:, ::1] kP, double complex[:, ::1] kC) noexcept nogil:
    cdef int k
    cdef double complex c12, c31, c32, c41, c42, c43, e, ec, uu, uc, oc
    cdef double complex ec31, oc32, uc42
    cdef double p1, p2, p3, p4, gz, re43
    oc = conjc(om)
    for k in range(nz):
        p1 = P[0, k]; p2 = P[1, k]; p3 = P[2, k]; p4 = P[3, k]
        c12 = C[0, k]; c31 = C[1, k]; c32 = C[2, k]
        c41 = C[3, k]; c42 = C[4, k]; c43 = C[5, k]
        e = E[k]; ec = conjc(e)
        uu = profile[k] * u[k]; uc = conjc(uu)
        gz = grad * z[k]
        re43 = c43.real

        ec31 = e * c31
        oc32 = om * c32
        uc42 = uu * c42

        kP[0, k] = 2.0 * g * sd * ec31.imag + 0.5 * g * p3
        kP[1, k] = (2.0 * oc32.imag + 2.0 * uc42.imag
                    + (g / 12.0) * (p3 + 2.0 * SQRT3 * re43 + 3.0 * p4))
        kP[2, k] = (-2.0 * oc32.imag - 2.0 * g * sd * ec31.imag
                    - (g / 24.0) * (14.0 * p3 + 2.0 * SQRT3 * re43))
        kP[3, k] = -2.0 * uc42.imag - (g / 24.0) * (2.0 * SQRT3 * re43 + 6.0 * p4)

        kC[0, k] = (1j * (oc * conjc(c31) + uc * conjc(c41)
                          - g * sd * e * c32 - gz * c12)
                    - (g / (6.0 * SQRT2)) * (SQRT3 * p3 + 3.0 * conjc(c43)))
        kC[1, k] = (1j * (-oc * conjc(c12) + g * sd * ec * (p3 - p1)
                          + (gz - D) * c31)
                    - (g / 24.0) * (7.0 * c31 + SQRT3 * c41))
        kC[2, k] = (1j * (oc * (p3 - p2) - g * sd * ec * c12
                          + uc * conjc(c43) - D * c32)
                    - (g / 24.0) * (7.0 * c32 + SQRT3 * c42))
        kC[3, k] = (1j * (g * sqrt3_coeff * ec * c43 - uc * conjc(c12)
                          + (gz - Ds) * c41)
                    - (g / 24.0) * (SQRT3 * c31 + 3.0 * c41))
        kC[4, k] = (1j * (oc * c43 + uc * (p4 - p2) - d42 * c42)
                    - (g / 24.0) * (SQRT3 * c32 + 3.0 * c42))
        kC[5, k] = (1j * (om * c42 - uc * conjc(c32) + g * sd * e * c41
                          + (D - Ds) * c43)
                    - (g / 24.0) * (SQRT3 * (p3 + p4) + 10.0 * c43))


cdef void _propagate(int nz, double complex e_b, double complex s_b,
                     double complex[:, ::1] C, double[::1] profile,
                     double dz, double sd, double g, double d_sig,
                     double complex[::1] E, double complex[::1] u) noexcept nogil:
    cdef int k
    cdef double complex half_e = 1j * sd * 0.5 * dz
    cdef double complex half_s = 1j * g * d_sig * 0.5 * dz
    E[0] = e_b
    u[0] = s_b
    for k in range(nz - 1):
        E[k + 1] = E[k] + half_e * (conjc(C[1, k]) + conjc(C[1, k + 1]))
        u[k + 1] = u[k] + half_s * (profile[k] * conjc(C[4, k])
                                    + profile[k + 1] * conjc(C[4, k + 1]))


def run_span(P0, C0, e_in, s_in, omega_t, grad_t, z, double dt, double dz,
             double gamma, double sqrt_d, double big_delta, double delta_s,
             double d_sig, double sqrt3_coeff, double delta_on_c42, profile,
             snap_steps, double trace_tol, int hist_stride=0):
    """Advance the ensemble over the whole span; see _kernel_py.run_span."""
    cdef int nt = omega_t.shape[0]
    cdef int nz = z.shape[0]

    P_arr = np.array(P0, dtype=float, order="C")
    C_arr = np.array(C0, dtype=complex, order="C")
    cdef double[:, ::1] P = P_arr
    cdef double complex[:, ::1] C = C_arr

    cdef double complex[::1] e_in_v = np.ascontiguousarray(e_in, dtype=complex)
    cdef double complex[::1] s_in_v = np.ascontiguousarray(s_in, dtype=complex)
    cdef double complex[::1] om_v = np.ascontiguousarray(omega_t, dtype=complex)
    cdef double[::1] grad_v = np.ascontiguousarray(grad_t, dtype=float)
    cdef double[::1] z_v = np.ascontiguousarray(z, dtype=float)
    cdef double[::1] prof_v = np.ascontiguousarray(profile, dtype=float)
    cdef cnp.int64_t[::1] snap_v = np.ascontiguousarray(snap_steps, dtype=np.int64)
    cdef int n_snap = snap_v.shape[0]

    e_out_arr = np.empty(nt, dtype=complex)
    u_out_arr = np.empty(nt, dtype=complex)
    cdef double complex[::1] e_out = e_out_arr
    cdef double complex[::1] u_out = u_out_arr
    snaps_P_arr = np.empty((n_snap, 4, nz))
    snaps_C_arr = np.empty((n_snap, 6, nz), dtype=complex)
    snaps_E_arr = np.empty((n_snap, nz), dtype=complex)
    cdef double[:, :, ::1] snaps_P = snaps_P_arr
    cdef double complex[:, :, ::1] snaps_C = snaps_C_arr
    cdef double complex[:, ::1] snaps_E = snaps_E_arr

    cdef int n_hist = nt // hist_stride if hist_stride > 0 else 0
    e_hist_arr = np.empty((n_hist, nz), dtype=complex) if n_hist else None
    cdef double complex[:, ::1] e_hist
    if n_hist:
        e_hist = e_hist_arr

    wk = [np.empty((4, nz)) for _ in range(5)]
    wkc = [np.empty((6, nz), dtype=complex) for _ in range(5)]
    cdef double[:, ::1] kP1 = wk[0], kP2 = wk[1], kP3 = wk[2], kP4 = wk[3], Pt = wk[4]
    cdef double complex[:, ::1] kC1 = wkc[0], kC2 = wkc[1], kC3 = wkc[2], \
        kC4 = wkc[3], Ct = wkc[4]
    E_arr = np.empty(nz, dtype=complex)
    u_arr = np.empty(nz, dtype=complex)
    cdef double complex[::1] E = E_arr
    cdef double complex[::1] u = u_arr

    cdef int status = _OK
    cdef int bad_step = -1
    cdef int isnap = 0
    cdef int n, k, j
    cdef double complex om
    cdef double gr, terr, tr, max_trace = 0.0
    cdef double half = 0.5 * dt
    cdef double sixth = dt / 6.0

    with nogil:
        _propagate(nz, e_in_v[0], s_in_v[0], C, prof_v, dz, sqrt_d, gamma,
                   d_sig, E, u)
        for n in range(nt):
            e_out[n] = E[nz - 1]
            u_out[n] = u[nz - 1]
            if hist_stride > 0 and n % hist_stride == 0 and n / hist_stride < n_hist:
                for k in range(nz):
                    e_hist[n / hist_stride, k] = E[k]
            om = om_v[n]
            gr = grad_v[n]

            _derivs(nz, P, C, E, u, prof_v, om, gr, z_v, gamma, sqrt_d,
                    big_delta, delta_s, sqrt3_coeff, delta_on_c42, kP1, kC1)
            for j in range(4):
                for k in range(nz):
                    Pt[j, k] = P[j, k] + half * kP1[j, k]
            for j in range(6):
                for k in range(nz):
                    Ct[j, k] = C[j, k] + half * kC1[j, k]
            _derivs(nz, Pt, Ct, E, u, prof_v, om, gr, z_v, gamma, sqrt_d,
                    big_delta, delta_s, sqrt3_coeff, delta_on_c42, kP2, kC2)
            for j in range(4):
                for k in range(nz):
                    Pt[j, k] = P[j, k] + half * kP2[j, k]
            for j in range(6):
                for k in range(nz):
                    Ct[j, k] = C[j, k] + half * kC2[j, k]
            _derivs(nz, Pt, Ct, E, u, prof_v, om, gr, z_v, gamma, sqrt_d,
                    big_delta, delta_s, sqrt3_coeff, delta_on_c42, kP3, kC3)
            for j in range(4):
                for k in range(nz):
                    Pt[j, k] = P[j, k] + dt * kP3[j, k]
            for j in range(6):
                for k in range(nz):
                    Ct[j, k] = C[j, k] + dt * kC3[j, k]
            _derivs(nz, Pt, Ct, E, u, prof_v, om, gr, z_v, gamma, sqrt_d,
                    big_delta, delta_s, sqrt3_coeff, delta_on_c42, kP4, kC4)
            for j in range(4):
                for k in range(nz):
                    P[j, k] = P[j, k] + sixth * (kP1[j, k] + 2.0 * kP2[j, k]
                                                 + 2.0 * kP3[j, k] + kP4[j, k])
            for j in range(6):
                for k in range(nz):
                    C[j, k] = C[j, k] + sixth * (kC1[j, k] + 2.0 * kC2[j, k]
                                                 + 2.0 * kC3[j, k] + kC4[j, k])

            _propagate(nz, e_in_v[n + 1], s_in_v[n + 1], C, prof_v, dz,
                       sqrt_d, gamma, d_sig, E, u)

            terr = 0.0
            for k in range(nz):
                tr = P[0, k] + P[1, k] + P[2, k] + P[3, k] - 1.0
                if tr < 0.0:
                    tr = -tr
                if tr > terr:
                    terr = tr
            if terr > max_trace:
                max_trace = terr
            if terr > trace_tol:
                status = _TRACE
                bad_step = n
                break
            if n % 256 == 0:
                if not (E[nz - 1].real == E[nz - 1].real
                        and E[nz - 1].imag == E[nz - 1].imag):
                    status = _NAN
                    bad_step = n
                    break
            if isnap < n_snap and n == snap_v[isnap]:
                for j in range(4):
                    for k in range(nz):
                        snaps_P[isnap, j, k] = P[j, k]
                for j in range(6):
                    for k in range(nz):
                        snaps_C[isnap, j, k] = C[j, k]
                for k in range(nz):
                    snaps_E[isnap, k] = E[k]
                isnap += 1

    if status == _OK and not np.all(np.isfinite(e_out_arr.view(float))):
        status = _NAN
        bad_step = nt - 1

    return {
        "e_out": e_out_arr, "u_out": u_out_arr, "max_trace": max_trace, "status": status,
        "bad_step": bad_step, "P": P_arr, "C": C_arr, "E": E_arr,
        "snaps_P": snaps_P_arr, "snaps_C": snaps_C_arr, "snaps_E": snaps_E_arr,
        "e_hist": e_hist_arr,
    }

"""Closed-form AC-Stark cross-phase model and pulse-energy conversions.

The phase imparted on the stored spin wave by a square signal pulse of Rabi
frequency Omega_s, duration tau and detuning delta is

    phi = Omega_s^2 * delta * tau / (2 * (gamma^2 + delta^2))

with gamma the HWHM of the signal optical coherence.  In the four-level
ensemble model that coherence decays at Gamma/8, which is the default here;
the conventional closed two-level value Gamma/2 stays available as a knob.

Rabi frequencies use the standard half-coupling convention, obtained from
the peak intensity of a Gaussian beam via I/I_sat = 2 (Omega/Gamma)^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model_core import PhysicalParams, SignalPulse, photon_energy


@dataclass(frozen=True)
class AnalyticParams:
    """Linewidth parameter of the closed-form phase model."""

    gamma_hwhm: float   # rad/s

    def __post_init__(self):
        if not self.gamma_hwhm > 0:
            raise ValueError("gamma_hwhm must be > 0")

    @classmethod
    def from_physical(cls, params: PhysicalParams,
                      convention: str = "four_level") -> "AnalyticParams":
        """Derive gamma from the excited-state linewidth.

        ``four_level``: Gamma/8, the signal-coherence HWHM of the ensemble
        model.  ``two_level``: Gamma/2, the closed two-level convention.
        """
        if convention == "four_level":
            return cls(params.gamma_excited / 8.0)
        if convention == "two_level":
            return cls(params.gamma_excited / 2.0)
        raise ValueError("unknown linewidth convention %r" % (convention,))


def xpm_phase(rabi_s: float, delta: float, tau: float, gamma: float) -> float:
    """Cross-phase shift (rad) of the stored light, odd in delta."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    return rabi_s * rabi_s * delta * tau / (2.0 * (gamma * gamma + delta * delta))


def rabi_from_pulse(signal: SignalPulse, params: PhysicalParams) -> float:
    """Peak signal Rabi frequency (rad/s) from pulse energy.

    Peak intensity of a Gaussian beam carrying power P = energy / tau is
    I0 = 2 P / (pi w^2); then Omega_s = Gamma * sqrt(I0 / (2 I_sat)).
    """
    if not signal.duration_tau > 0:
        raise ValueError("zero duration")
    power = signal.energy / signal.duration_tau
    peak_intensity = 2.0 * power / (math.pi * signal.waist ** 2)
    return params.gamma_excited * math.sqrt(
        peak_intensity / (2.0 * params.i_sat_signal))


def phase_per_photon(signal_template: SignalPulse, params: PhysicalParams,
                     gamma: float = None) -> float:
    """Phase shift (rad) from a signal pulse containing exactly one photon.

    Equal to the slope of the phase-vs-energy line times the photon energy,
    since the closed-form phase is linear in pulse energy.
    """
    if gamma is None:
        gamma = AnalyticParams.from_physical(params).gamma_hwhm
    one_photon = photon_energy(params.wavelength)
    pulse = SignalPulse(energy=one_photon, duration_tau=signal_template.duration_tau,
                        detuning_delta=signal_template.detuning_delta,
                        waist=signal_template.waist, t_start=signal_template.t_start,
                        z_profile=signal_template.z_profile)
    rabi = rabi_from_pulse(pulse, params)
    return xpm_phase(rabi, pulse.detuning_delta, pulse.duration_tau, gamma)


def phase_vs_detuning(signal_template: SignalPulse, delta_grid,
                      params: PhysicalParams, gamma: float = None) -> list:
    """Tabulate the closed-form phase over a detuning grid.

    Returns [(delta, phase)]; the curve is odd in delta and its magnitude
    peaks at |delta| = gamma.
    """
    deltas = np.asarray(delta_grid, dtype=float)
    if deltas.size == 0:
        raise ValueError("empty detuning grid")
    if gamma is None:
        gamma = AnalyticParams.from_physical(params).gamma_hwhm
    rabi = rabi_from_pulse(signal_template, params)
    return [(float(d), xpm_phase(rabi, float(d), signal_template.duration_tau, gamma))
            for d in deltas]


def equation_signal_coupling(signal: SignalPulse, params: PhysicalParams) -> float:
    """Signal coupling coefficient used inside the Maxwell-Bloch equations.

    The equations carry the signal as a bare coupling (no factor 1/2 on the
    off-diagonal Hamiltonian element), so the small-signal Stark shift they
    produce is twice the standard-convention expression.  Mapping
    Omega_eq = Omega_s / sqrt(2) makes the simulated small-signal phase the
    exact counterpart of :func:`xpm_phase` at gamma = Gamma/8.
    """
    return rabi_from_pulse(signal, params) / math.sqrt(2.0)

"""Laser pulse description and intensity/field unit conversions.

Atomic units throughout (hbar = m_e = e = 1). The pulse is a sin^2
envelope under a cosine carrier,

    eps(t) = F_peak * sin^2(pi t / T_d) * cos(omega t + phi),

defined as exactly zero outside [0, T_d]. The default duration is four
carrier cycles, T_d = 8 pi / omega.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# 1 atomic unit of intensity, W/cm^2
INTENSITY_AU = 3.50944758e16

# 800 nm Ti:sapphire carrier, the conventional strong-field workhorse
DEFAULT_OMEGA = 0.057


def field_from_intensity(intensity_w_cm2: float) -> float:
    """Peak field amplitude (a.u.) for a given intensity in W/cm^2."""
    if intensity_w_cm2 < 0.0:
        raise ValueError("intensity must be non-negative")
    return math.sqrt(intensity_w_cm2 / INTENSITY_AU)


def intensity_from_field(f_peak: float) -> float:
    """Intensity in W/cm^2 for a given peak field amplitude in a.u."""
    if f_peak < 0.0:
        raise ValueError("field amplitude must be non-negative")
    return f_peak * f_peak * INTENSITY_AU


@dataclass(frozen=True)
class FieldParams:
    """Pulse parameters in atomic units.

    T_d defaults to four carrier cycles. `frozen` switches off the time
    dependence entirely: eps(t) = F_peak for all t, which is the static
    field used by the saddle and stability analysis.
    """

    F_peak: float
    omega: float = DEFAULT_OMEGA
    phi: float = 0.0
    T_d: float = field(default=None)  # type: ignore[assignment]
    frozen: bool = False

    def __post_init__(self):
        # a frozen field is the signed constant eps itself
        if self.F_peak < 0.0 and not self.frozen:
            raise ValueError("F_peak must be non-negative")
        if self.omega <= 0.0:
            raise ValueError("omega must be positive")
        if self.T_d is None:
            object.__setattr__(self, "T_d", 8.0 * math.pi / self.omega)
        if self.T_d <= 0.0:
            raise ValueError("T_d must be positive")

    @property
    def n_cycles(self) -> float:
        return self.T_d * self.omega / (2.0 * math.pi)


def envelope(t: float, params: FieldParams) -> float:
    """sin^2 pulse envelope; zero outside [0, T_d]."""
    if params.frozen:
        return 1.0
    if t < 0.0 or t > params.T_d:
        return 0.0
    return math.sin(math.pi * t / params.T_d) ** 2


def effective_field(t: float, params: FieldParams) -> float:
    """eps(t), the field amplitude an electron couples to at time t."""
    if params.frozen:
        return params.F_peak
    if t < 0.0 or t > params.T_d:
        return 0.0
    return (params.F_peak * math.sin(math.pi * t / params.T_d) ** 2
            * math.cos(params.omega * t + params.phi))


def effective_field_rate(t: float, params: FieldParams) -> float:
    """d eps / dt, needed for the work integral dH/dt."""
    if params.frozen:
        return 0.0
    if t < 0.0 or t > params.T_d:
        return 0.0
    carrier = params.omega * t + params.phi
    s = math.sin(math.pi * t / params.T_d)
    denv = (math.pi / params.T_d) * math.sin(2.0 * math.pi * t / params.T_d)
    return params.F_peak * (denv * math.cos(carrier)
                            - s * s * params.omega * math.sin(carrier))


def carrier_extrema(params: FieldParams) -> list:
    """Times in [0, T_d] where the carrier peaks, cos(omega t + phi) = +-1.

    These are the half-cycle field extrema against which saddle-crossing
    times are measured. Returned sorted ascending.
    """
    out = []
    k = math.ceil(params.phi / math.pi)
    while True:
        t = (k * math.pi - params.phi) / params.omega
        if t > params.T_d:
            break
        if t >= 0.0:
            out.append(t)
        k += 1
    return out

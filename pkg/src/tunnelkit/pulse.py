"""Few-cycle laser pulse model and its exact field integrals.

The canonical pulse is linearly polarized along z with a sine-squared
envelope spanning three carrier periods,

    E(t) = E0 sin^2(w (t - t0) / 6) cos(w (t - t0)),   t - t0 in [0, 6 pi / w],

and exactly zero outside that window.  This form is fixed by requiring the
closed-form rotation angle beta(t) (see :func:`beta`) to satisfy
beta'(t) = -E(t)/c, which the test suite verifies by quadrature.  The
envelope maximum coincides with a carrier extremum at t0 + 3 pi / w, where
E = -E0.

All functions are pure and accept scalar or ndarray times.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import ATOMIC, Constants

#: the only supported carrier-envelope model (envelope and carrier phase-locked
#: so that the analytic rotation angle below is the exact field integral)
CEP_MODEL = "sin2-locked"


@dataclass(frozen=True)
class LaserPulse:
    """Sine-squared-envelope pulse, polarization along z, propagation along x."""

    E0: float
    omega: float
    t_start: float = 0.0
    cep_model: str = CEP_MODEL
    constants: Constants = field(default=ATOMIC)

    def __post_init__(self):
        if self.E0 < 0:
            raise ValueError("E0 must be >= 0")
        if self.omega <= 0:
            raise ValueError("omega must be > 0")
        if self.cep_model != CEP_MODEL:
            raise ValueError(f"unsupported cep_model {self.cep_model!r}")

    @property
    def duration(self) -> float:
        return 6.0 * np.pi / self.omega

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration

    @property
    def t_peak(self) -> float:
        """Time of the envelope maximum (also a carrier extremum, E = -E0)."""
        return self.t_start + 3.0 * np.pi / self.omega


def electric_field(pulse: LaserPulse, t):
    """Electric field amplitude along z at time ``t`` (zero outside the pulse)."""
    tau = np.asarray(t, dtype=float) - pulse.t_start
    w = pulse.omega
    inside = (tau >= 0.0) & (tau <= 6.0 * np.pi / w)
    tau_c = np.where(inside, tau, 0.0)
    val = pulse.E0 * np.sin(w * tau_c / 6.0) ** 2 * np.cos(w * tau_c)
    out = np.where(inside, val, 0.0)
    return out if out.ndim else float(out)


def beta(pulse: LaserPulse, t_i):
    """Closed-form rotation angle accumulated between ``t_i`` and detection.

    beta(t) = E0/(16 c w) [6 sin(2wt/3) - 8 sin(wt) + 3 sin(4wt/3)] with
    t measured from pulse start; equal to -(1/c) * integral of E from pulse
    start to t.  Outside the support the boundary value is returned (the
    angle stops accumulating once the field is over), which keeps root
    finders that overshoot the window well behaved.
    """
    tau = np.asarray(t_i, dtype=float) - pulse.t_start
    w = pulse.omega
    tau_c = np.clip(tau, 0.0, 6.0 * np.pi / w)
    c = pulse.constants.c_light
    pref = pulse.E0 / (16.0 * c * w)
    val = pref * (
        6.0 * np.sin(2.0 * w * tau_c / 3.0)
        - 8.0 * np.sin(w * tau_c)
        + 3.0 * np.sin(4.0 * w * tau_c / 3.0)
    )
    return val if val.ndim else float(val)


def field_drift(pulse: LaserPulse, t_i):
    """Integral of E over [t_i, pulse end], via the closed-form antiderivative.

    Equals c * (beta(t_i) - beta(t_end)); both boundary values of beta vanish
    for this pulse, so the full-pulse drift is exactly zero (zero net force
    area).  This is the momentum a free electron born at rest at ``t_i``
    has gained, with opposite sign, by the end of the pulse.
    """
    c = pulse.constants.c_light
    return c * (beta(pulse, t_i) - beta(pulse, pulse.t_end))


def magnetic_field(pulse: LaserPulse, t):
    """Signed y-component of the plane-wave magnetic field, B_y = -E(t)/c.

    Geometry convention shared with the classical integrator: propagation
    along +x, E along z, so the Poynting vector E x B points along +x.
    """
    return -electric_field(pulse, t) / pulse.constants.c_light


def keldysh_gamma(pulse: LaserPulse, ip: float) -> float:
    """Keldysh adiabaticity parameter w sqrt(2 Ip) / E0."""
    return pulse.omega * np.sqrt(2.0 * ip) / pulse.E0

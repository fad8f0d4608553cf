"""Detector-to-exit reconstruction: rotation map, exit-time estimate, round trip.

The closed-form map between exit momenta and detector momenta is the
rotation of the pair (p_z, c - p_rho) by the pulse angle beta(t_i):

    p_z0   = p_z_d cos(beta) + (c - p_rho_d) sin(beta)
    p_rho0 = c - (c - p_rho_d) cos(beta) + p_z_d sin(beta)

The exit time is not observable from two momentum components alone; it is
estimated here by solving the dipole drift relation

    p_z_d = p_z0_prior(t_i) - field_drift(t_i)

for t_i with a deterministic bracketed bisection-then-secant refiner.
The prior for p_z0 is either identically zero ("zero_exit") or an
interpolated table of exit momenta versus time ("qmf_table").  This
closure is this toolkit's construction, not a measured recipe.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .classical import Trajectory, TrajectorySpec, integrate
from .errors import NoRoot
from .potentials import Potential
from .pulse import LaserPulse, beta, field_drift

TIME_TOL = 1e-12


@dataclass(frozen=True)
class DetectorMomentum:
    p_z_d: float
    p_rho_d: float

    def __post_init__(self):
        if not (np.isfinite(self.p_z_d) and np.isfinite(self.p_rho_d)):
            raise ValueError("detector momenta must be finite")


def check_nonrelativistic(det: DetectorMomentum, pulse: LaserPulse) -> None:
    c = pulse.constants.c_light
    p = np.hypot(det.p_z_d, det.p_rho_d)
    if p > 0.1 * c:
        warnings.warn(
            f"detector momentum {p:.3g} exceeds 0.1 c; the nonrelativistic "
            "map is doubtful", stacklevel=2)


def exit_momentum(det: DetectorMomentum, t_i: float, pulse: LaserPulse) -> tuple:
    """Rotate detector momenta back to the exit at t_i (the closed-form map)."""
    check_nonrelativistic(det, pulse)
    c = pulse.constants.c_light
    b = beta(pulse, t_i)
    cb, sb = np.cos(b), np.sin(b)
    p_z0 = det.p_z_d * cb + (c - det.p_rho_d) * sb
    p_rho0 = c - (c - det.p_rho_d) * cb + det.p_z_d * sb
    return float(p_z0), float(p_rho0)


@dataclass(frozen=True)
class ExitTimePrior:
    """p_z0(t_i) prior for the drift relation."""

    model: str = "zero_exit"  # zero_exit | qmf_table
    table_t: tuple = ()
    table_p: tuple = ()

    def __post_init__(self):
        if self.model not in ("zero_exit", "qmf_table"):
            raise ValueError(f"unknown prior model {self.model!r}")
        if self.model == "qmf_table":
            if len(self.table_t) < 1 or len(self.table_t) != len(self.table_p):
                raise ValueError("qmf_table prior needs matching t and p arrays")

    def __call__(self, t):
        if self.model == "zero_exit":
            return np.zeros_like(np.asarray(t, dtype=float)) if np.ndim(t) else 0.0
        return np.interp(t, self.table_t, self.table_p)

    @staticmethod
    def constant(p_z0: float) -> "ExitTimePrior":
        return ExitTimePrior(model="qmf_table", table_t=(0.0, 1.0), table_p=(p_z0, p_z0))


@dataclass
class ExitTimeEstimate:
    t_i: float                  # primary root (nearest the field peak)
    roots: tuple                # all roots found in the window
    multiple: bool
    window: tuple
    prior_model: str
    brackets: tuple             # (lo, hi) bracket per root


def _bisect_then_secant(f, lo, hi, flo, fhi):
    """Deterministic bracketed root refiner to TIME_TOL."""
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (flo < 0) == (fm < 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
        if hi - lo < 1e-6:
            break
    a, fa, b, fb = lo, flo, hi, fhi
    for _ in range(80):
        if fb == fa:
            break
        c = b - fb * (b - a) / (fb - fa)
        if not (lo <= c <= hi):  # secant left the bracket: bisect instead
            c = 0.5 * (lo + hi)
        fc = f(c)
        a, fa, b, fb = b, fb, c, fc
        if fc == 0.0 or abs(b - a) < TIME_TOL:
            return c
        if (flo < 0) == (fc < 0):
            lo, flo = c, fc
        else:
            hi, fhi = c, fc
    return 0.5 * (lo + hi)


def default_window(pulse: LaserPulse) -> tuple:
    """Central half-cycle around the peak, where the drift relation is monotone."""
    w = pulse.omega
    return (pulse.t_start + 2.5 * np.pi / w, pulse.t_start + 3.5 * np.pi / w)


def estimate_exit_time(det: DetectorMomentum, pulse: LaserPulse,
                       prior: ExitTimePrior = ExitTimePrior(),
                       window: Optional[tuple] = None,
                       n_scan: int = 4096) -> ExitTimeEstimate:
    """Solve the drift relation for t_i by bracketed root finding.

    All sign changes over the window are refined and reported; the root
    nearest the field peak is flagged primary.  Raises NoRoot when the
    detector momentum is outside the attainable range over the window.
    """
    if window is None:
        window = default_window(pulse)
    lo, hi = window
    if not (pulse.t_start - 1e-9 <= lo < hi <= pulse.t_end + 1e-9):
        raise ValueError("window must lie inside the pulse support")

    def g(t):
        return prior(t) - field_drift(pulse, t) - det.p_z_d

    ts = np.linspace(lo, hi, n_scan + 1)
    gs = np.asarray([g(t) for t in ts])
    roots = []
    brackets = []
    for k in range(n_scan):
        a, b = ts[k], ts[k + 1]
        fa, fb = gs[k], gs[k + 1]
        if fa == 0.0:
            roots.append(a)
            brackets.append((a, a))
            continue
        if (fa < 0) != (fb < 0):
            r = _bisect_then_secant(g, a, b, fa, fb)
            roots.append(r)
            brackets.append((a, b))
    if gs[-1] == 0.0:
        roots.append(ts[-1])
        brackets.append((ts[-1], ts[-1]))
    # dedup near-identical roots from adjacent brackets
    uniq, uniq_br = [], []
    for r, br in zip(roots, brackets):
        if not uniq or abs(r - uniq[-1]) > 1e-9:
            uniq.append(r)
            uniq_br.append(br)
    if not uniq:
        raise NoRoot(
            f"p_z_d = {det.p_z_d:.6g} outside the drift range over "
            f"[{lo:.4g}, {hi:.4g}]"
        )
    peak = pulse.t_peak
    primary = min(uniq, key=lambda r: abs(r - peak))
    return ExitTimeEstimate(t_i=float(primary), roots=tuple(uniq),
                            multiple=len(uniq) > 1, window=(float(lo), float(hi)),
                            prior_model=prior.model, brackets=tuple(uniq_br))


@dataclass
class ReconstructionRecord:
    detector: DetectorMomentum
    t_i_est: float
    p_z0_rec: float
    p_rho0_rec: float
    estimate: Optional[ExitTimeEstimate] = None
    truth: Optional[TrajectorySpec] = None
    rel_errors: Optional[dict] = None   # name -> (value, is_absolute)

    def __post_init__(self):
        if (self.rel_errors is None) != (self.truth is None):
            raise ValueError("rel_errors present iff truth present")


def reconstruct(det: DetectorMomentum, pulse: LaserPulse,
                prior: ExitTimePrior = ExitTimePrior(),
                window: Optional[tuple] = None) -> ReconstructionRecord:
    """Estimate t_i from the drift relation, then invert the rotation map."""
    est = estimate_exit_time(det, pulse, prior=prior, window=window)
    p_z0, p_rho0 = exit_momentum(det, est.t_i, pulse)
    return ReconstructionRecord(detector=det, t_i_est=est.t_i, p_z0_rec=p_z0,
                                p_rho0_rec=p_rho0, estimate=est)


def _error_entry(rec: float, truth: float) -> tuple:
    """(relative error, False) or (absolute error, True) where truth = 0."""
    if truth == 0.0:
        return abs(rec - truth), True
    return abs(rec - truth) / abs(truth), False


def validate_roundtrip(spec: TrajectorySpec, pulse: LaserPulse,
                       potential: Potential, dt: float = 0.01,
                       prior: Optional[ExitTimePrior] = None,
                       window: Optional[tuple] = None,
                       trajectory: Optional[Trajectory] = None) -> ReconstructionRecord:
    """Forward-integrate per the spec flags, then reconstruct and score.

    The default prior is the spec-consistent constant table p_z0(t) =
    spec.p_z0 (the drift closure assumes the exit-momentum model is
    known; this isolates forward/inverse consistency).  With the magnetic
    term off the inverse map degenerates to undoing the drift, consistent
    with the forward model.
    """
    if prior is None:
        prior = ExitTimePrior.constant(spec.p_z0)
    if trajectory is None:
        trajectory = integrate(spec, pulse, potential, t_end=pulse.t_end, dt=dt)
    p_z_d, p_rho_d = trajectory.final_momentum
    det = DetectorMomentum(p_z_d, p_rho_d)
    est = estimate_exit_time(det, pulse, prior=prior, window=window)
    if spec.magnetic_term:
        p_z0, p_rho0 = exit_momentum(det, est.t_i, pulse)
    else:
        p_z0 = det.p_z_d + field_drift(pulse, est.t_i)
        p_rho0 = det.p_rho_d
    rel = {
        "t_i": _error_entry(est.t_i, spec.t_i),
        "p_z0": _error_entry(p_z0, spec.p_z0),
        "p_rho0": _error_entry(p_rho0, spec.p_rho0),
    }
    return ReconstructionRecord(detector=det, t_i_est=est.t_i, p_z0_rec=p_z0,
                                p_rho0_rec=p_rho0, estimate=est, truth=spec,
                                rel_errors=rel)

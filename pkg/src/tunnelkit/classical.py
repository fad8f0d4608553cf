"""Newton-Lorentz trajectories, tunnel-exit geometry, and QMF seeding.

Geometry: the laser polarization is z, the propagation axis is mapped to a
Cartesian transverse coordinate x (a trajectory leaves the cylindrical
symmetry axis, where rho coordinates are awkward).  The plane-wave fields
are E = E(t) zhat and B = -(E(t)/c) yhat, so the force on the electron,

    dp_x/dt = -p_z E(t)/c
    dp_z/dt = -E(t) (1 - p_x/c)
    (+ optional -grad V with a softened core)

rotates the pair (p_z, c - p_x) by the pulse's closed-form angle beta(t_i)
between birth and detection when the Coulomb force is off.  The detector
momentum components are (p_z, p_x) at the end of the pulse; p_x plays the
paper-facing role of the momentum along the propagation axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import MaskedOut, NoBarrier, StepUnstable
from .grids import WavefunctionGrid
from .phasespace import MomentProfiles, PhaseSpaceMap, transverse_current_velocity
from .potentials import Potential
from .pulse import LaserPulse, electric_field

MODELS = ("simple_man", "qmf_seeded")


@dataclass(frozen=True)
class ClassicalState:
    t: float
    x: float
    z: float
    p_x: float
    p_z: float


@dataclass(frozen=True)
class TrajectorySpec:
    t_i: float
    exit_z: float
    p_z0: float = 0.0
    p_rho0: float = 0.0
    coulomb_force: bool = False
    magnetic_term: bool = True
    model: str = "qmf_seeded"

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown trajectory model {self.model!r}")
        if self.model == "simple_man" and (self.p_z0 != 0.0 or self.p_rho0 != 0.0):
            raise ValueError("simple_man requires zero exit momentum")


@dataclass
class Trajectory:
    spec: TrajectorySpec
    times: np.ndarray            # sampled output times
    states: np.ndarray           # (n, 4): x, z, p_x, p_z
    final_momentum: tuple        # (p_z, p_x) at t_end
    extended_momentum: Optional[tuple] = None  # after post-pulse coast, if requested

    def state_at(self, t: float) -> ClassicalState:
        if t < self.times[0] - 1e-9 or t > self.times[-1] + 1e-9:
            raise MaskedOut(f"time {t} outside trajectory support")
        vals = [float(np.interp(t, self.times, self.states[:, k])) for k in range(4)]
        return ClassicalState(t, *vals)


def exit_point(potential: Potential, pulse: LaserPulse, t_i: float, ip: float) -> float:
    """Signed on-axis tunnel exit: outer root of V(z,0+) + E(t_i) z = -ip.

    The electron exits on the downhill side (where the instantaneous force
    pushes it); the sign of the returned coordinate encodes that side.
    Raises NoBarrier when the barrier is suppressed or the field vanishes.
    """
    e = electric_field(pulse, t_i)
    if e == 0.0:
        raise NoBarrier("zero field at t_i: no downhill side")
    s = -np.sign(e)
    absE = abs(e)

    def f(zeta):
        return potential.on_axis(zeta) - absE * zeta + ip

    # locate the barrier top, then bracket the outer root beyond it
    zeta_hi = (ip + potential.Z + 1.0) / absE
    res = minimize_scalar(lambda q: -f(q), bounds=(1e-12, zeta_hi), method="bounded",
                          options={"xatol": 1e-12})
    zeta_top = float(res.x)
    if f(zeta_top) < 0.0:
        raise NoBarrier(
            f"barrier suppressed: max(V + E z + ip) = {f(zeta_top):.3e} < 0 "
            f"at |E| = {absE:.6g}"
        )
    far = zeta_hi
    while f(far) >= 0.0:
        far *= 2.0
        if far > 1e8:
            raise NoBarrier("combined potential never falls below -ip")
    root = brentq(f, zeta_top, far, xtol=1e-12, rtol=8.9e-16)
    return float(s) * float(root)


def exit_point_inner(potential: Potential, pulse: LaserPulse, t_i: float,
                     ip: float) -> float:
    """Inner barrier crossing (entrance), same conventions as exit_point."""
    e = electric_field(pulse, t_i)
    if e == 0.0:
        raise NoBarrier("zero field at t_i")
    s = -np.sign(e)
    absE = abs(e)

    def f(zeta):
        return potential.on_axis(zeta) - absE * zeta + ip

    zeta_hi = (ip + potential.Z + 1.0) / absE
    res = minimize_scalar(lambda q: -f(q), bounds=(1e-12, zeta_hi), method="bounded",
                          options={"xatol": 1e-12})
    zeta_top = float(res.x)
    if f(zeta_top) < 0.0:
        raise NoBarrier("barrier suppressed")
    lo = 1e-9
    if f(lo) >= 0.0:
        # soft potentials may start above -ip on axis; no inner crossing
        raise NoBarrier("no inner crossing: axis value above -ip at the core")
    root = brentq(f, lo, zeta_top, xtol=1e-12, rtol=8.9e-16)
    return float(s) * float(root)


def seed_from_qmf(mom: MomentProfiles, exit_z: float, transverse_model: str = "zero",
                  wf: Optional[WavefunctionGrid] = None) -> tuple:
    """Exit momentum (p_z0, p_rho0) read off the quantum momentum function.

    p_z0 is the QMF at the masked-in sample nearest exit_z (within 2 dz).
    p_rho0 is zero or, for "current_based", the rho current velocity at
    the exit column (requires the snapshot wavefunction).
    """
    if transverse_model not in ("zero", "current_based"):
        raise ValueError(f"unknown transverse model {transverse_model!r}")
    dz = mom.z[1] - mom.z[0]
    dist = np.abs(mom.z - exit_z)
    order = np.argsort(dist)
    idx = -1
    for k in order[:8]:
        if dist[k] > 2.0 * dz + 1e-12:
            break
        if mom.mask[k]:
            idx = int(k)
            break
    if idx < 0:
        raise MaskedOut(
            f"no masked-in QMF sample within 2 dz of z = {exit_z:.4g}"
        )
    p_z0 = float(mom.qmf[idx])
    if transverse_model == "zero":
        p_rho0 = 0.0
    else:
        if wf is None:
            raise ValueError("current_based transverse model needs the snapshot wavefunction")
        p_rho0 = transverse_current_velocity(wf, exit_z)
    return p_z0, p_rho0


def _force(t, x, z, p_x, p_z, pulse, potential, spec, c, eps2):
    e = electric_field(pulse, t)
    fx = 0.0
    fz = -e
    if spec.magnetic_term and e != 0.0:
        fx = -p_z * e / c
        fz = -e * (1.0 - p_x / c)
    if spec.coulomb_force:
        r2 = x * x + z * z + eps2
        pref = -potential.Z / (r2 * np.sqrt(r2))
        fx += pref * x
        fz += pref * z
    return fx, fz


def integrate(spec: TrajectorySpec, pulse: LaserPulse, potential: Potential,
              t_end: float, dt: float = 0.01, stride: int = 10,
              coulomb_eps: float = 0.1, extend_to: Optional[float] = None,
              energy_guard: float = 0.05) -> Trajectory:
    """Fixed-step RK4 integration of the force law from t_i to t_end.

    Output states are sampled every ``stride`` steps (plus the endpoint).
    With Coulomb on, ``extend_to`` continues the integration past t_end to
    record a late coasting momentum alongside the pulse-end value.  The
    energy_guard is the per-step relative energy-change limit enforced in
    field-free segments (StepUnstable protects against a too-coarse dt).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end <= spec.t_i:
        raise ValueError("t_end must exceed t_i")
    c = pulse.constants.c_light
    eps2 = coulomb_eps * coulomb_eps

    def rhs(t, y):
        x, z, p_x, p_z = y
        fx, fz = _force(t, x, z, p_x, p_z, pulse, potential, spec, c, eps2)
        return np.array([p_x, p_z, fx, fz])

    def energy(t, y):
        x, z, p_x, p_z = y
        val = 0.5 * (p_x * p_x + p_z * p_z)
        if spec.coulomb_force:
            val += -potential.Z / np.sqrt(x * x + z * z + eps2)
        return val

    y = np.array([0.0, spec.exit_z, spec.p_rho0, spec.p_z0])
    t = spec.t_i
    times = [t]
    states = [y.copy()]
    final_momentum = None

    def rk4_to(t_stop):
        nonlocal t, y
        k = 0
        while t < t_stop - 1e-12:
            h = min(dt, t_stop - t)
            field_free = (electric_field(pulse, t) == 0.0
                          and electric_field(pulse, t + h) == 0.0)
            e_before = energy(t, y) if (field_free and spec.coulomb_force) else None
            k1 = rhs(t, y)
            k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
            if not np.isfinite(y).all():
                raise StepUnstable(f"non-finite state at t = {t:.6g}")
            if e_before is not None:
                e_after = energy(t, y)
                scale = max(abs(e_before), 1e-3)
                if abs(e_after - e_before) > energy_guard * scale:
                    raise StepUnstable(
                        f"field-free energy jump {abs(e_after - e_before):.3e} "
                        f"at t = {t:.6g}; reduce dt or raise coulomb_eps"
                    )
            k += 1
            if k % stride == 0:
                times.append(t)
                states.append(y.copy())
        if times[-1] != t:
            times.append(t)
            states.append(y.copy())

    rk4_to(t_end)
    final_momentum = (float(y[3]), float(y[2]))  # (p_z, p_x = p_rho)
    extended = None
    if extend_to is not None and extend_to > t_end:
        rk4_to(extend_to)
        extended = (float(y[3]), float(y[2]))
    return Trajectory(spec=spec, times=np.asarray(times),
                      states=np.asarray(states), final_momentum=final_momentum,
                      extended_momentum=extended)


@dataclass
class QmfDeviation:
    """One snapshot row of a trajectory-vs-QMF comparison."""

    t: float
    z_cl: float
    p_cl: float
    qmf: float
    delta_p: float
    ridge_p: float
    ridge_dist: float
    weight: float  # P0 at z_cl (density weighting for aggregates)


@dataclass
class DeviationReport:
    family: str
    rows: list
    mean_delta_p: float
    weighted_mean_delta_p: float


def _interp_masked(zq, z, vals, mask):
    """Linear interpolation restricted to masked-in samples."""
    if zq < z[0] - 1e-9 or zq > z[-1] + 1e-9:
        raise MaskedOut(f"z = {zq:.4g} outside analysis window")
    zm = z[mask]
    if zm.size < 2 or zq < zm[0] - 1e-9 or zq > zm[-1] + 1e-9:
        raise MaskedOut(f"z = {zq:.4g} outside masked-in QMF support")
    return float(np.interp(zq, zm, vals[mask]))


def _ridge(ps: PhaseSpaceMap, zq: float) -> float:
    """Momentum of the Wigner ridge at the column nearest zq (parabolic refine)."""
    i = int(round((zq - ps.z[0]) / ps.dz))
    i = min(max(i, 0), ps.z.size - 1)
    col = ps.W[i]
    k = int(np.argmax(col))
    if 0 < k < col.size - 1:
        denom = col[k - 1] - 2.0 * col[k] + col[k + 1]
        if denom != 0:
            k_ref = k + 0.5 * (col[k - 1] - col[k + 1]) / denom
            return float(ps.p[0] + k_ref * ps.dp)
    return float(ps.p[k])


def compare_to_qmf(traj: Trajectory, snapshots: list, family: str = "") -> DeviationReport:
    """Deviation of a trajectory from the QMF and the Wigner ridge.

    ``snapshots`` is a list of (t, MomentProfiles, PhaseSpaceMap | None);
    every snapshot time inside the trajectory support produces one row.
    """
    rows = []
    for t_s, mom, ps in snapshots:
        if t_s < traj.times[0] - 1e-9 or t_s > traj.times[-1] + 1e-9:
            continue
        st = traj.state_at(t_s)
        q = _interp_masked(st.z, mom.z, mom.qmf, mom.mask)
        w = _interp_masked(st.z, mom.z, mom.P0, np.ones_like(mom.mask, dtype=bool))
        if ps is not None:
            ridge = _ridge(ps, st.z)
            rdist = abs(st.p_z - ridge)
        else:
            ridge, rdist = float("nan"), float("nan")
        rows.append(QmfDeviation(t=t_s, z_cl=st.z, p_cl=st.p_z, qmf=q,
                                 delta_p=abs(st.p_z - q), ridge_p=ridge,
                                 ridge_dist=rdist, weight=w))
    if not rows:
        raise MaskedOut("no snapshot falls inside the trajectory support")
    dps = np.array([r.delta_p for r in rows])
    ws = np.array([r.weight for r in rows])
    wmean = float((dps * ws).sum() / ws.sum()) if ws.sum() > 0 else float("nan")
    return DeviationReport(family=family, rows=rows,
                           mean_delta_p=float(dps.mean()),
                           weighted_mean_delta_p=wmean)

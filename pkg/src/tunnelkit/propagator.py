"""Real- and imaginary-time propagation of the cylindrical TDSE.

Hamiltonian (atomic units):

    H = -(1/2)(d2/dz2 + d2/drho2 + (1/rho) d/drho) + V(z, rho) + E(t) z

One step of duration dt is the palindromic composition

    Cz(dt/2) Crho(dt/2) P(dt) Crho(dt/2) Cz(dt/2)

where Cz/Crho are Crank-Nicolson (Cayley) factors of the one-dimensional
kinetic operators and P is the diagonal phase of the potential-plus-field
term evaluated at the step midpoint.  Every factor is exactly unitary
under the grid quadrature, so with no absorber the norm is conserved to
round-off; the composition is globally second order in dt (scheme_order
= 2) and second order in dz/drho.

The (1/rho) d/drho term shares the three-point rho stencil; on the
half-offset grid the j = 0 lower coefficient vanishes identically, which
is how the rho = 0 axis is handled (no boundary row).  Outer boundaries
are Dirichlet zero one step outside the stored samples.

The same stepper with a real Cayley coefficient performs imaginary-time
relaxation (see groundstate).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import Aborted
from .grids import CylGrid, WavefunctionGrid, expectation_z, norm
from .potentials import Potential, dv_dz, evaluate_potential
from .pulse import LaserPulse, electric_field


@dataclass(frozen=True)
class AbsorberSpec:
    kind: str = "none"  # none | mask
    width: float = 20.0
    strength: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "mask"):
            raise ValueError(f"unknown absorber kind {self.kind!r}")
        if self.kind == "mask" and self.width <= 0:
            raise ValueError("mask width must be positive")


@dataclass(frozen=True)
class PropagatorConfig:
    dt: float
    t_end: float
    snapshot_times: tuple = ()
    absorber: AbsorberSpec = field(default_factory=AbsorberSpec)
    scheme_order: int = 2

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.scheme_order != 2:
            raise ValueError("only the second-order ADI scheme is implemented")
        for t in self.snapshot_times:
            if not (0.0 <= t <= self.t_end + 1e-12):
                raise ValueError("snapshot times must lie in [0, t_end]")


def absorber_mask(grid: CylGrid, spec: AbsorberSpec) -> Optional[np.ndarray]:
    """Multiplicative cos^(1/8)-type rim mask, or None for kind 'none'."""
    if spec.kind == "none":
        return None
    w = spec.width
    if w >= 0.5 * min(grid.z_max - grid.z_min, grid.rho_max):
        raise ValueError("absorber width must be < half the box size")
    expo = spec.strength / 8.0

    def edge_profile(dist_to_edge):
        s = np.clip((w - dist_to_edge) / w, 0.0, 1.0)
        return np.cos(0.5 * np.pi * s) ** expo

    z = grid.z
    fz = edge_profile(z - grid.z_min) * edge_profile(grid.z_max - z)
    frho = edge_profile(grid.rho_max - grid.rho)
    return fz[:, None] * frho[None, :]


def absorber_region(grid: CylGrid, spec: AbsorberSpec) -> np.ndarray:
    """Boolean (n_z, n_rho) map of the rim the mask acts on."""
    if spec.kind == "none":
        return np.zeros((grid.n_z, grid.n_rho), dtype=bool)
    w = spec.width
    z = grid.z
    inz = (z - grid.z_min < w) | (grid.z_max - z < w)
    inrho = grid.rho_max - grid.rho < w
    return inz[:, None] | inrho[None, :]


class KineticBands:
    """Tridiagonal bands of the 1D kinetic operators on a grid."""

    def __init__(self, grid: CylGrid):
        nz, nr = grid.n_z, grid.n_rho
        dz2, dr2 = grid.dz**2, grid.drho**2
        self.z_lo = np.full(nz, -0.5 / dz2, dtype=np.complex128)
        self.z_d = np.full(nz, 1.0 / dz2, dtype=np.complex128)
        self.z_up = np.full(nz, -0.5 / dz2, dtype=np.complex128)
        rho = grid.rho
        self.r_lo = (-0.5 * (1.0 / dr2 - 1.0 / (2.0 * rho * grid.drho))).astype(np.complex128)
        self.r_d = np.full(nr, 1.0 / dr2, dtype=np.complex128)
        self.r_up = (-0.5 * (1.0 / dr2 + 1.0 / (2.0 * rho * grid.drho))).astype(np.complex128)
        # half-offset grid: the j = 0 lower coefficient is exactly zero
        self.r_lo[0] = 0.0


class Stepper:
    """Workspace holding prefactored sweeps for a fixed (grid, dt) pair."""

    def __init__(self, grid: CylGrid, potential: Potential, pulse: Optional[LaserPulse],
                 dt: float, imag: bool = False,
                 absorber: AbsorberSpec = AbsorberSpec(), backend: str = "auto"):
        self.grid = grid
        self.dt = dt
        self.imag = imag
        self.pulse = pulse
        self.kern = kernels.get_backend(backend)
        self.backend = kernels.backend_name(self.kern)
        bands = KineticBands(grid)
        kap = (0.25 * dt) if imag else (0.25j * dt)  # Cayley coefficient per half-substep
        self._z = self._prepare(bands.z_lo, bands.z_d, bands.z_up, kap)
        self._r = self._prepare(bands.r_lo, bands.r_d, bands.r_up, kap)
        v = evaluate_potential(potential, grid)
        fac = -dt if imag else -1j * dt
        self.pot_phase = np.exp(fac * v)
        self._field_fac = fac
        self.mask = absorber_mask(grid, absorber)

    def _prepare(self, lo, d, up, kap):
        m_lo, m_d, m_up = -kap * lo, 1.0 - kap * d, -kap * up
        p_lo, p_d, p_up = kap * lo, 1.0 + kap * d, kap * up
        w, invden = kernels.thomas_factors(p_lo, p_d, p_up)
        solver = self.kern.make_solver(p_lo, p_d, p_up, w, invden)
        return (m_lo, m_d, m_up, solver)

    def advance(self, psi: np.ndarray, t: float) -> None:
        """One step from t to t + dt, in place."""
        m_lo, m_d, m_up, sol = self._z
        self.kern.sweep_axis0(psi, m_lo, m_d, m_up, sol)
        m_lo, m_d, m_up, sol = self._r
        self.kern.sweep_axis1(psi, m_lo, m_d, m_up, sol)
        psi *= self.pot_phase
        if self.pulse is not None:
            e = electric_field(self.pulse, t + 0.5 * self.dt)
            if e != 0.0:
                psi *= np.exp(self._field_fac * e * self.grid.z)[:, None]
        self.kern.sweep_axis1(psi, m_lo, m_d, m_up, sol)
        m_lo, m_d, m_up, sol = self._z
        self.kern.sweep_axis0(psi, m_lo, m_d, m_up, sol)
        if self.mask is not None:
            psi *= self.mask


def apply_h0(psi: np.ndarray, grid: CylGrid, v: np.ndarray) -> np.ndarray:
    """Field-free Hamiltonian applied with the propagator's stencils."""
    bands = KineticBands(grid)
    out = v * psi
    out += bands.z_d[:, None].real * psi
    out[1:] += bands.z_lo[1:, None].real * psi[:-1]
    out[:-1] += bands.z_up[:-1, None].real * psi[1:]
    out += bands.r_d[None, :].real * psi
    out[:, 1:] += bands.r_lo[None, 1:].real * psi[:, :-1]
    out[:, :-1] += bands.r_up[None, :-1].real * psi[:, 1:]
    return out


_STEPPER_CACHE: dict = {}


def _cached_stepper(grid, potential, pulse, dt, absorber, backend):
    key = (grid, potential, pulse, dt, absorber, backend)
    st = _STEPPER_CACHE.get(key)
    if st is None:
        st = Stepper(grid, potential, pulse, dt, imag=False, absorber=absorber,
                     backend=backend)
        if len(_STEPPER_CACHE) > 8:
            _STEPPER_CACHE.clear()
        _STEPPER_CACHE[key] = st
    return st


def step(wf: WavefunctionGrid, t: float, dt: float, pulse: Optional[LaserPulse],
         potential: Potential, absorber: AbsorberSpec = AbsorberSpec(),
         backend: str = "auto") -> WavefunctionGrid:
    """Advance one step; returns a new WavefunctionGrid at t + dt."""
    st = _cached_stepper(wf.grid, potential, pulse, dt, absorber, backend)
    psi = wf.psi.copy()
    st.advance(psi, t)
    return WavefunctionGrid(wf.grid, psi, t + dt)


@dataclass
class Diagnostics:
    """Per-step time series recorded during propagation."""

    times: np.ndarray
    norms: np.ndarray
    z_mean: np.ndarray
    dvdz_mean: np.ndarray


@dataclass
class PropagationRun:
    initial: WavefunctionGrid
    pulse: Optional[LaserPulse]
    potential: Potential
    config: PropagatorConfig
    snapshots: dict = field(default_factory=dict)
    diagnostics: Optional[Diagnostics] = None
    final: Optional[WavefunctionGrid] = None


def propagate(run: PropagationRun, backend: str = "auto",
              snapshot_sink=None) -> PropagationRun:
    """Run the configured propagation, filling snapshots and diagnostics.

    ``snapshot_sink(t_requested, wf)`` is called for each snapshot when
    given (used for disk spill); otherwise snapshots are kept in memory,
    keyed by the requested time.
    """
    cfg = run.config
    grid = run.initial.grid
    dt = cfg.dt
    n_steps = int(round(cfg.t_end / dt))
    want = {}
    for t_req in cfg.snapshot_times:
        want.setdefault(int(round(t_req / dt)), []).append(t_req)

    st = Stepper(grid, run.potential, run.pulse, dt, imag=False,
                 absorber=cfg.absorber, backend=backend)
    psi = run.initial.psi.copy()
    dvdz = dv_dz(run.potential, grid)
    wrho = grid.rho_weights
    times = np.empty(n_steps + 1)
    norms = np.empty(n_steps + 1)
    z_mean = np.empty(n_steps + 1)
    f_mean = np.empty(n_steps + 1)

    def record(k, t):
        wf_view = WavefunctionGrid(grid, psi, t)
        times[k] = t
        norms[k] = norm(wf_view)
        z_mean[k] = expectation_z(wf_view)
        dens = (psi.real**2 + psi.imag**2)
        f_mean[k] = float(np.sum(dens * dvdz * wrho[None, :]) * grid.dz)

    def take(k, t):
        for t_req in want.get(k, ()):
            wf_snap = WavefunctionGrid(grid, psi.copy(), t)
            if snapshot_sink is not None:
                snapshot_sink(t_req, wf_snap)
            else:
                run.snapshots[t_req] = wf_snap

    record(0, 0.0)
    take(0, 0.0)
    for k in range(1, n_steps + 1):
        st.advance(psi, (k - 1) * dt)
        t = k * dt
        record(k, t)
        if not np.isfinite(norms[k]):
            raise Aborted(f"non-finite wavefunction at t = {t:.6g}")
        take(k, t)

    run.final = WavefunctionGrid(grid, psi, n_steps * dt)
    run.diagnostics = Diagnostics(times, norms, z_mean, f_mean)
    return run

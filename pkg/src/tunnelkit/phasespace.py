"""Reduction along rho, Wigner transform, moments, and tunnel-region geometry.

Conventions
-----------
The 3D state is first reduced to a one-dimensional density matrix over a
z window,

    rho_red(z, z') = integral conj(Psi(z', rho)) Psi(z, rho) 2 pi rho drho,

using the midpoint rho quadrature (mode "density_matrix").  Mode
"amplitude" instead reduces the amplitude itself, f(z) = integral
Psi 2 pi rho drho (renormalized), and analyzes the pure state f; it exists
for comparison and its discrepancy from the default mode is reported by
the pipeline.

The Wigner map of the reduced density is

    W(z, p) = (1/pi) integral dzeta e^{2 i p zeta} rho_red(z - zeta, z + zeta)

with zeta sampled on the z grid spacing (so z +- zeta are grid points,
zero outside the window) and p_k = pi k / (n_zeta dz) for k = -n_zeta/2
.. n_zeta/2 - 1.  With this pairing the p-sum of W dp reproduces the
diagonal density exactly, and |W| <= trace / pi.

Moment quadrature: even powers use all p columns; odd powers give the
unpaired k = -n_zeta/2 (Nyquist) column zero weight, the standard
treatment of the unpaired mode in spectral odd-derivative filters (it
represents +-p_Nyquist simultaneously).  The quantum momentum function is
P1/P0 wherever P0 >= p0_floor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from skimage import measure

from .errors import EmptyRegion, ImagResidue, WindowTooLarge
from .grids import CylGrid, WavefunctionGrid
from .potentials import Potential, evaluate_potential
from .pulse import LaserPulse, electric_field

DEFAULT_MEMORY_BUDGET = 4 << 30  # bytes
DEFAULT_P0_FLOOR = 1e-8
IMAG_RESIDUE_LIMIT = 1e-8


@dataclass
class ReducedDensity:
    z: np.ndarray            # window z samples
    rho_red: np.ndarray      # (n_w, n_w) complex, Hermitian PSD
    dz: float
    window: tuple            # (z_lo, z_hi) actually used
    trace: float             # dz * sum(diag), equals the norm inside the window
    excluded_norm: float     # probability outside the window
    mode: str = "density_matrix"


@dataclass
class PhaseSpaceMap:
    z: np.ndarray
    p: np.ndarray
    W: np.ndarray            # (n_w, n_p) real
    t: float
    dz: float
    dp: float
    imag_residue: float
    window: tuple
    trace: float


@dataclass
class MomentProfiles:
    z: np.ndarray
    P0: np.ndarray
    P1: np.ndarray
    qmf: np.ndarray          # valid only where mask; 0 elsewhere
    mask: np.ndarray         # bool, P0 >= p0_floor
    t: float
    p0_floor: float
    higher: tuple = ()       # P2.. if requested


def window_indices(grid: CylGrid, window: Optional[tuple]) -> tuple:
    """Snap a (z_lo, z_hi) window to grid indices (inclusive)."""
    if window is None:
        return 0, grid.n_z - 1
    z_lo, z_hi = window
    if z_lo >= z_hi:
        raise ValueError("window must satisfy z_lo < z_hi")
    if z_lo < grid.z_min - 1e-9 or z_hi > grid.z_max + 1e-9:
        raise ValueError("window outside grid")
    i_lo = int(np.ceil((z_lo - grid.z_min) / grid.dz - 1e-9))
    i_hi = int(np.floor((z_hi - grid.z_min) / grid.dz + 1e-9))
    return max(i_lo, 0), min(i_hi, grid.n_z - 1)


def reduce_to_z(wf: WavefunctionGrid, window: Optional[tuple] = None,
                mode: str = "density_matrix",
                memory_budget: int = DEFAULT_MEMORY_BUDGET) -> ReducedDensity:
    """Reduce the 3D state to a density matrix over a z window."""
    if mode not in ("density_matrix", "amplitude"):
        raise ValueError(f"unknown reduction mode {mode!r}")
    g = wf.grid
    i_lo, i_hi = window_indices(g, window)
    n_w = i_hi - i_lo + 1
    need = 16 * n_w * n_w
    if need > memory_budget:
        raise WindowTooLarge(
            f"window needs {need} bytes for {n_w}^2 density matrix, "
            f"budget {memory_budget}"
        )
    c = wf.psi[i_lo:i_hi + 1, :]
    wrho = g.rho_weights
    if mode == "density_matrix":
        r = (c * wrho[None, :]) @ c.conj().T
    else:
        f = c @ wrho.astype(np.complex128)
        nrm = float(np.sum(np.abs(f) ** 2) * g.dz)
        if nrm > 0:
            f = f / np.sqrt(nrm)
        r = np.outer(f, f.conj())
    tr = float(np.trace(r).real) * g.dz
    total = float(np.sum((wf.psi.real**2 + wf.psi.imag**2) * wrho[None, :]) * g.dz)
    z = g.z[i_lo:i_hi + 1]
    return ReducedDensity(z=z, rho_red=r, dz=g.dz,
                          window=(float(z[0]), float(z[-1])), trace=tr,
                          excluded_norm=max(total - tr, 0.0) if mode == "density_matrix" else 0.0,
                          mode=mode)


def wigner(rd: ReducedDensity, t: float = 0.0) -> PhaseSpaceMap:
    """Discrete Wigner transform of a reduced density over its window."""
    r = rd.rho_red
    n_w = r.shape[0]
    n_zeta = n_w if n_w % 2 == 0 else n_w + 1
    g = np.zeros((n_w, n_zeta), dtype=np.complex128)
    mm = (n_w - 1) // 2
    for m in range(mm + 1):
        # read both triangles, so a non-Hermitian input shows up as an
        # imaginary residue instead of being silently symmetrized
        rows = np.arange(m, n_w - m)
        g[rows, m] = np.diagonal(r, offset=2 * m)
        if m:
            g[rows, n_zeta - m] = np.diagonal(r, offset=-2 * m)
    wc = (rd.dz / np.pi) * n_zeta * np.fft.ifft(g, axis=1)
    wc = np.fft.fftshift(wc, axes=1)
    residue = float(np.abs(wc.imag).max())
    if residue > IMAG_RESIDUE_LIMIT:
        raise ImagResidue(
            f"imaginary residue {residue:.3e} exceeds {IMAG_RESIDUE_LIMIT:.0e}; "
            "reduced density is not Hermitian"
        )
    kint = np.fft.fftshift(np.fft.fftfreq(n_zeta)) * n_zeta
    p = np.pi * kint / (n_zeta * rd.dz)
    return PhaseSpaceMap(z=rd.z.copy(), p=p, W=np.ascontiguousarray(wc.real), t=t,
                         dz=rd.dz, dp=float(p[1] - p[0]), imag_residue=residue,
                         window=rd.window, trace=rd.trace)


def moments(ps: PhaseSpaceMap, n_max: int = 1,
            p0_floor: float = DEFAULT_P0_FLOOR) -> MomentProfiles:
    """p-quadrature of p^n W for n = 0..n_max; qmf = P1/P0 under the mask."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    dp = ps.dp
    nyquist_unpaired = ps.p.shape[0] % 2 == 0
    prof = []
    for n in range(n_max + 1):
        w = ps.p**n
        if n % 2 == 1 and nyquist_unpaired:
            w = w.copy()
            w[0] = 0.0
        prof.append((ps.W * w[None, :]).sum(axis=1) * dp)
    p0, p1 = prof[0], prof[1]
    mask = p0 >= p0_floor
    qmf = np.zeros_like(p0)
    qmf[mask] = p1[mask] / p0[mask]
    return MomentProfiles(z=ps.z.copy(), P0=p0, P1=p1, qmf=qmf, mask=mask,
                          t=ps.t, p0_floor=p0_floor, higher=tuple(prof[2:]))


def qmf_from_current(wf: WavefunctionGrid, window: Optional[tuple] = None,
                     derivative: str = "spectral",
                     p0_floor: float = DEFAULT_P0_FLOOR):
    """Independent quantum-momentum-function oracle from the 3D field.

    Computes Im(sum_rho conj(Psi) dPsi/dz 2 pi rho drho) / P0 over the
    window.  ``derivative`` selects the z-derivative filter: "spectral"
    (window DFT, unpaired Nyquist zeroed; matches the Wigner moment
    convention) or "central" (three-point).  Returns (z, qmf, P0, mask).
    """
    g = wf.grid
    i_lo, i_hi = window_indices(g, window)
    c = wf.psi[i_lo:i_hi + 1, :]
    n = c.shape[0]
    if derivative == "spectral":
        # zero-pad odd windows to even length: same transform convention
        # (frequency grid and zeroed Nyquist) as the Wigner moments
        n_pad = n if n % 2 == 0 else n + 1
        k = 2.0 * np.pi * np.fft.fftfreq(n_pad, g.dz)
        k[n_pad // 2] = 0.0
        dpsi = np.fft.ifft(1j * k[:, None] * np.fft.fft(c, n=n_pad, axis=0),
                           axis=0)[:n]
    elif derivative == "central":
        dpsi = np.zeros_like(c)
        dpsi[1:-1] = (c[2:] - c[:-2]) / (2.0 * g.dz)
        dpsi[0] = (c[1] - 0.0) / (2.0 * g.dz)
        dpsi[-1] = (0.0 - c[-2]) / (2.0 * g.dz)
    else:
        raise ValueError(f"unknown derivative {derivative!r}")
    wrho = g.rho_weights
    j = (np.conj(c) * dpsi).imag @ wrho
    p0 = (c.real**2 + c.imag**2) @ wrho
    mask = p0 >= p0_floor
    qmf = np.zeros_like(p0)
    qmf[mask] = j[mask] / p0[mask]
    return g.z[i_lo:i_hi + 1], qmf, p0, mask


def transverse_current_velocity(wf: WavefunctionGrid, z_at: float) -> float:
    """rho-component of the current velocity at (z_at, density-weighted rho).

    Used by the "current_based" transverse exit-momentum model: evaluates
    Im(conj(Psi) dPsi/drho)/|Psi|^2 at the rho sample nearest the
    density-weighted mean rho for the z column nearest ``z_at``.
    """
    g = wf.grid
    i = g.index_of_z(z_at)
    i = min(max(i, 0), g.n_z - 1)
    col = wf.psi[i, :]
    dens = col.real**2 + col.imag**2
    wsum = float(np.sum(dens * g.rho_weights))
    if wsum <= 0:
        return 0.0
    rho_mean = float(np.sum(g.rho * dens * g.rho_weights) / wsum)
    j = int(round(rho_mean / g.drho - 0.5))
    j = min(max(j, 1), g.n_rho - 2)
    dcol = (col[j + 1] - col[j - 1]) / (2.0 * g.drho)
    d = dens[j]
    if d <= 0:
        return 0.0
    return float((np.conj(col[j]) * dcol).imag / d)


def tile_windows(z_lo: float, z_hi: float, width: float, overlap: float = 0.1):
    """Cover [z_lo, z_hi] with windows of the given width and fractional overlap."""
    if width <= 0:
        raise ValueError("window width must be positive")
    span = z_hi - z_lo
    if span <= width:
        return [(z_lo, z_hi)]
    stride = width * (1.0 - overlap)
    n = int(np.ceil((span - width) / stride)) + 1
    out = []
    for k in range(n):
        lo = min(z_lo + k * stride, z_hi - width)
        out.append((lo, lo + width))
    return out


def tunnel_region(potential: Potential, pulse: Optional[LaserPulse], t: float,
                  energy_level: float, grid: CylGrid):
    """Contours of V_core(z, rho) + E(t) z = energy_level, by marching squares.

    Returns a list of polylines, each an (n, 2) array of (z, rho) pairs.
    """
    v = evaluate_potential(potential, grid)
    e = electric_field(pulse, t) if pulse is not None else 0.0
    f = v + e * grid.z[:, None] - energy_level
    contours = measure.find_contours(f, 0.0)
    if not contours:
        raise EmptyRegion(
            f"no level crossing at {energy_level:.6g} (field {e:.6g})"
        )
    out = []
    for c in contours:
        zz = grid.z_min + c[:, 0] * grid.dz
        rr = (c[:, 1] + 0.5) * grid.drho
        out.append(np.column_stack([zz, rr]))
    return out

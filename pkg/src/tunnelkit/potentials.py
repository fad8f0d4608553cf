"""Atomic binding potentials sampled on the cylindrical grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import CylGrid

KINDS = ("coulomb", "soft_core")


@dataclass(frozen=True)
class Potential:
    """Attractive core potential; soft_core adds a softening length ``a``.

    coulomb:   V = -Z / sqrt(z^2 + rho^2)
    soft_core: V = -Z / sqrt(z^2 + rho^2 + a^2)

    On the half-offset grid the coulomb kind stays finite: the closest
    sample to the origin sits at rho = drho / 2.
    """

    kind: str = "coulomb"
    Z: float = 1.0
    a: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.Z < 0:
            raise ValueError("Z must be >= 0")
        if self.kind == "soft_core" and self.a <= 0:
            raise ValueError("soft_core requires a > 0")

    @property
    def a2(self) -> float:
        return self.a**2 if self.kind == "soft_core" else 0.0

    def on_axis(self, z):
        """V(z, rho -> 0+); for coulomb this is -Z/|z| (diverges at z = 0)."""
        z = np.asarray(z, dtype=float)
        r2 = z**2 + self.a2
        with np.errstate(divide="ignore"):
            val = -self.Z / np.sqrt(r2)
        return val if val.ndim else float(val)

    def force_on_axis_magnitude(self, zeta):
        """|dV/dz| on the axis at distance ``zeta`` > 0 from the core."""
        zeta = np.asarray(zeta, dtype=float)
        val = self.Z * zeta / (zeta**2 + self.a2) ** 1.5
        return val if val.ndim else float(val)


def evaluate_potential(p: Potential, grid: CylGrid) -> np.ndarray:
    """Sample V at all (z_i, rho_j) grid points; finite everywhere."""
    z = grid.z[:, None]
    rho = grid.rho[None, :]
    return -p.Z / np.sqrt(z**2 + rho**2 + p.a2)


def dv_dz(p: Potential, grid: CylGrid) -> np.ndarray:
    """Analytic dV/dz on the grid (Ehrenfest diagnostics)."""
    z = grid.z[:, None]
    rho = grid.rho[None, :]
    return p.Z * z / (z**2 + rho**2 + p.a2) ** 1.5

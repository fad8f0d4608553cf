import numpy as np
import pytest

from tunnelkit.grids import CylGrid, WavefunctionGrid
from tunnelkit.groundstate import ground_state
from tunnelkit.potentials import Potential


@pytest.fixture(scope="session")
def softcore_small():
    """Relaxed soft-core ground state on a small grid (shared, read-only)."""
    grid = CylGrid(-12.0, 12.0, 161, 10.0, 64)
    pot = Potential("soft_core", Z=1.0, a=1.0)
    wf, e = ground_state(pot, grid, dt_imag=0.02, tol=1e-11)
    return grid, pot, wf, e


@pytest.fixture(scope="session")
def coulomb_small():
    """Relaxed hydrogen-like ground state on a small coarse grid."""
    grid = CylGrid(-12.0, 12.0, 121, 10.0, 50)
    pot = Potential("coulomb", Z=1.0)
    wf, e = ground_state(pot, grid, dt_imag=0.02, tol=1e-11)
    return grid, pot, wf, e


def gaussian_column(grid: CylGrid, psi_z: np.ndarray, sigma_rho: float = 1.3):
    """Separable state psi_z(z) * g(rho) with the rho factor unit-normalized."""
    g_rho = np.exp(-grid.rho**2 / (2.0 * sigma_rho**2))
    nr = float(np.sum(np.abs(g_rho) ** 2 * grid.rho_weights))
    g_rho = g_rho / np.sqrt(nr)
    return WavefunctionGrid(grid, psi_z[:, None] * g_rho[None, :])

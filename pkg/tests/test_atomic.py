import numpy as np
import pytest
from scipy.sparse import diags, eye, kron
from scipy.sparse.linalg import eigsh

from tunnelkit.errors import NonConvergence
from tunnelkit.grids import (CylGrid, WavefunctionGrid, gaussian_seed,
                             inner_product, norm)
from tunnelkit.groundstate import energy_expectation, ground_state
from tunnelkit.potentials import Potential, evaluate_potential
from tunnelkit.propagator import KineticBands, apply_h0


def test_grid_layout():
    g = CylGrid(-10.0, 10.0, 101, 5.0, 25)
    assert g.dz == pytest.approx(0.2)
    assert g.drho == pytest.approx(0.2)
    assert 0.0 in g.z
    assert g.rho[0] == pytest.approx(0.1)  # half-offset: strictly positive
    assert (g.rho > 0).all()


def test_grid_validation():
    with pytest.raises(ValueError):
        CylGrid(-10.0, 10.0, 4, 5.0, 25)          # n_z < 8
    with pytest.raises(ValueError):
        CylGrid(1.0, 10.0, 16, 5.0, 25)           # no z = 0
    with pytest.raises(ValueError):
        CylGrid(-10.1, 10.0, 100, 5.0, 25)        # 0 not on the grid


def test_potential_samples():
    g = CylGrid(-10.0, 10.0, 101, 5.0, 25)
    soft = evaluate_potential(Potential("soft_core", Z=1.0, a=1.0), g)
    iz = g.index_of_z(0.0)
    assert soft[iz, 0] == pytest.approx(-1.0 / np.sqrt(1.0 + (g.drho / 2) ** 2))
    coul = evaluate_potential(Potential("coulomb", Z=1.0), g)
    iz2 = g.index_of_z(2.0)
    assert coul[iz2, 0] == pytest.approx(-1.0 / np.sqrt(4.0 + (g.drho / 2) ** 2))
    assert np.isfinite(coul).all()
    assert (coul < 0).all() and (soft < 0).all()
    # far-corner decay bound
    assert abs(coul[-1, -1]) < 1.0 / min(abs(g.z_max), g.rho_max)


def test_hermiticity_random_states():
    rng = np.random.default_rng(7)
    g = CylGrid(-4.0, 4.0, 33, 3.0, 12)
    v = evaluate_potential(Potential("soft_core", Z=1.0, a=1.0), g)
    w = g.rho_weights

    def ip(a, b):
        return np.sum(np.conj(a) * b * w[None, :]) * g.dz

    for _ in range(5):
        f = rng.normal(size=(33, 12)) + 1j * rng.normal(size=(33, 12))
        h = rng.normal(size=(33, 12)) + 1j * rng.normal(size=(33, 12))
        lhs = ip(f, apply_h0(h, g, v))
        rhs = np.conj(ip(h, apply_h0(f, g, v)))
        assert abs(lhs - rhs) < 1e-10 * max(abs(lhs), 1.0)


def _sparse_h0(grid: CylGrid, pot: Potential):
    """Independent sparse build of the same discretized Hamiltonian,
    symmetrized with the sqrt(rho)-similarity transform for eigsh."""
    b = KineticBands(grid)
    nz, nr = grid.n_z, grid.n_rho
    tz = diags([b.z_lo[1:].real, b.z_d.real, b.z_up[:-1].real], [-1, 0, 1])
    s = np.sqrt(grid.rho)
    lo = b.r_lo[1:].real * s[1:] / s[:-1]
    up = b.r_up[:-1].real * s[:-1] / s[1:]
    trho = diags([lo, b.r_d.real, up], [-1, 0, 1])
    v = evaluate_potential(pot, grid).ravel()
    h = kron(tz, eye(nr)) + kron(eye(nz), trho) + diags(v)
    return h.tocsr()


def test_ground_state_matches_sparse_eigensolver(softcore_small):
    grid, pot, wf, e = softcore_small
    h = _sparse_h0(grid, pot)
    evals = eigsh(h, k=1, which="SA", return_eigenvectors=False, tol=1e-12)
    assert e == pytest.approx(evals[0], abs=1e-4)


def test_ground_state_reported_energy_consistent(softcore_small):
    grid, pot, wf, e = softcore_small
    assert energy_expectation(wf, pot) == pytest.approx(e, abs=1e-12)
    assert norm(wf) == pytest.approx(1.0, abs=1e-6)


def test_ground_state_real_up_to_phase(softcore_small):
    _, _, wf, _ = softcore_small
    phase = np.exp(-1j * np.angle(wf.psi[np.abs(wf.psi).argmax() // wf.psi.shape[1],
                                         np.abs(wf.psi).argmax() % wf.psi.shape[1]]))
    rotated = wf.psi * phase
    assert np.abs(rotated.imag).max() < 1e-8


def test_energy_monotone_along_relaxation():
    grid = CylGrid(-8.0, 8.0, 81, 6.0, 30)
    pot = Potential("soft_core", Z=1.0, a=1.0)
    _, _, history = ground_state(pot, grid, dt_imag=0.02, tol=1e-9,
                                 return_history=True)
    diffs = np.diff(history)
    assert (diffs <= 1e-12).all()


def test_energy_phase_invariance(softcore_small):
    grid, pot, wf, e = softcore_small
    shifted = WavefunctionGrid(grid, wf.psi * np.exp(0.75j), wf.time)
    assert energy_expectation(shifted, pot) == pytest.approx(e, rel=1e-12)


def test_energy_expectation_independent_quadrature():
    # Gaussian trial state: <H> against a dense independent summation of the
    # discrete quadratic form
    grid = CylGrid(-6.0, 6.0, 49, 4.0, 16)
    pot = Potential("soft_core", Z=1.0, a=1.0)
    wf = gaussian_seed(grid, sigma_z=1.2, sigma_rho=0.9)
    h = _sparse_h0(grid, pot)
    s = np.sqrt(grid.rho)
    vec = (wf.psi * s[None, :]).ravel()  # similarity transform of the state
    w_flat = np.tile(2.0 * np.pi * grid.drho, grid.n_z * grid.n_rho)
    quad = np.vdot(vec * np.sqrt(w_flat * grid.dz), (h @ vec) * np.sqrt(w_flat * grid.dz))
    assert energy_expectation(wf, pot) == pytest.approx(quad.real, abs=1e-10)


def test_variational_bound_coulomb(coulomb_small):
    # discrete ground energy stays above the analytic -Z^2/2 minus a
    # documented discretization allowance
    _, _, _, e = coulomb_small
    assert e >= -0.5 - 0.05


def test_nonconvergence_raises():
    grid = CylGrid(-8.0, 8.0, 81, 6.0, 30)
    pot = Potential("soft_core", Z=1.0, a=1.0)
    with pytest.raises(NonConvergence):
        ground_state(pot, grid, dt_imag=0.005, tol=1e-14, max_iters=5)


def test_seed_and_inner_product():
    grid = CylGrid(-8.0, 8.0, 81, 6.0, 30)
    wf = gaussian_seed(grid)
    assert norm(wf) == pytest.approx(1.0, abs=1e-12)
    assert inner_product(wf, wf).real == pytest.approx(1.0, abs=1e-12)

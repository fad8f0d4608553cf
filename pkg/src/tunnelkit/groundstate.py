"""Field-free ground state via imaginary-time relaxation.

The relaxation reuses the propagator's palindromic split with a real
Cayley coefficient (one application approximates exp(-H dt)), followed by
renormalization.  Iteration stops when the energy change per step falls
below ``tol``.  The reported energy is the Rayleigh quotient of the same
discrete Hamiltonian the real-time propagator uses, so downstream
quantities (ionization potential, exit geometry) are self-consistent with
the discretization.
"""

from __future__ import annotations

import numpy as np

from .errors import NonConvergence
from .grids import CylGrid, WavefunctionGrid, gaussian_seed
from .potentials import Potential, evaluate_potential
from .propagator import AbsorberSpec, Stepper, apply_h0

DEFAULT_DT_IMAG = 0.01
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 200_000


def energy_expectation(wf: WavefunctionGrid, p: Potential) -> float:
    """<H0> with the propagator's discrete operators; wf must be normalized."""
    g = wf.grid
    v = evaluate_potential(p, g)
    hpsi = apply_h0(wf.psi, g, v)
    w = g.rho_weights
    val = np.sum(np.conj(wf.psi) * hpsi * w[None, :]) * g.dz
    return float(val.real)


def ground_state(p: Potential, grid: CylGrid, dt_imag: float = DEFAULT_DT_IMAG,
                 tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS,
                 seed: WavefunctionGrid | None = None, backend: str = "auto",
                 return_history: bool = False):
    """Relax to the lowest state; returns (WavefunctionGrid, energy).

    Raises NonConvergence if the per-step energy change does not fall
    below ``tol`` within ``max_iters`` iterations.
    """
    if dt_imag <= 0:
        raise ValueError("dt_imag must be positive")
    if tol <= 0:
        raise ValueError("tol must be positive")
    wf = seed.copy() if seed is not None else gaussian_seed(grid)
    wf.normalize()
    st = Stepper(grid, p, None, dt_imag, imag=True, absorber=AbsorberSpec(),
                 backend=backend)
    v = evaluate_potential(p, grid)
    w = grid.rho_weights
    dz = grid.dz

    def energy(psi):
        hpsi = apply_h0(psi, grid, v)
        return float((np.sum(np.conj(psi) * hpsi * w[None, :]) * dz).real)

    e_prev = energy(wf.psi)
    history = [e_prev]
    for _ in range(max_iters):
        st.advance(wf.psi, 0.0)
        wf.normalize()
        e = energy(wf.psi)
        history.append(e)
        if abs(e - e_prev) < tol:
            wf.time = 0.0
            if return_history:
                return wf, e, np.asarray(history)
            return wf, e
        e_prev = e
    raise NonConvergence(
        f"energy change still {abs(e - e_prev):.3e} after {max_iters} iterations"
    )

"""Strong-field tunnel ionization toolkit.

Simulates a single-active-electron atom in a few-cycle laser pulse on a
cylindrical (z, rho) grid, analyzes the outgoing electron in phase space
(Wigner function, quantum momentum function), integrates classical
Newton-Lorentz trajectories seeded from the quantum momentum function, and
reconstructs tunnel exit time and exit momenta from detector momenta via a
closed-form rotation map.
"""

__version__ = "0.1.0"

"""Exception hierarchy shared across the toolkit."""


class TunnelkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(TunnelkitError):
    """Invalid run configuration. Carries one (path, reason) pair per problem."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{p}: {r}" for p, r in self.problems))


class NonConvergence(TunnelkitError):
    """Iterative relaxation failed to reach tolerance within the iteration cap."""


class SolverSingular(TunnelkitError):
    """A tridiagonal solve hit a zero pivot (bad grid or time step)."""


class Aborted(TunnelkitError):
    """Propagation produced non-finite values; message names the first bad time."""


class WindowTooLarge(TunnelkitError):
    """Requested reduced-density window exceeds the memory budget."""


class ImagResidue(TunnelkitError):
    """Wigner transform returned a non-negligible imaginary part."""


class EmptyRegion(TunnelkitError):
    """No classically forbidden contour found at the requested energy level."""


class NoBarrier(TunnelkitError):
    """Combined potential has no tunnel barrier (over-the-barrier regime)."""


class MaskedOut(TunnelkitError):
    """Requested sample lies outside the valid (masked-in) region."""


class StepUnstable(TunnelkitError):
    """Trajectory integrator exceeded the field-free energy drift guard."""


class NoRoot(TunnelkitError):
    """Exit-time estimation found no root in the search window."""


class MissingProduct(TunnelkitError):
    """A manifest entry or required data product is absent."""


class AxisMismatch(TunnelkitError):
    """A data product lacks the axes an operation requires."""

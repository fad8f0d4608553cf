"""Hartree atomic-unit constants.

Everything in the toolkit is expressed in Hartree atomic units:
hbar = m_e = q_e = 1, c = 137.035999. The speed of light is carried
explicitly so tests can rescale it and watch it propagate through every
formula that references c.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Constants:
    hbar: float = 1.0
    m_e: float = 1.0
    q_e: float = 1.0
    c_light: float = 137.035999

    def __post_init__(self):
        if self.c_light <= 0:
            raise ValueError("c_light must be positive")


ATOMIC = Constants()

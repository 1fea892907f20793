"""Physical constants for the dry compressible atmosphere.

All runs share the same constant set; R = c_p - c_v holds exactly by
construction so the equation-of-state identities are exact in floating point.
"""

from dataclasses import dataclass, field


@dataclass(frozen=True)
class PhysicalConstants:
    c_p: float = 1004.5      # specific heat, constant pressure [J kg^-1 K^-1]
    R: float = 287.0         # ideal gas constant [J kg^-1 K^-1]
    p_0: float = 1.0e5       # reference pressure [Pa]
    g: float = 9.80616       # gravitational acceleration [m s^-2]
    c_v: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "c_v", self.c_p - self.R)
        if min(self.c_p, self.R, self.p_0, self.g, self.c_v) <= 0.0:
            raise ValueError("physical constants must be positive")

    @property
    def kappa(self):
        """R / c_v, the exponent of the Exner equation of state."""
        return self.R / self.c_v


CONST = PhysicalConstants()

"""Prognostic state vectors and the formulation tags.

One State holds the coefficient vectors of a single formulation:

  flux_lorenz_new / flux_lorenz_orig : u in W2, rho, Theta, Pi in W3
  material_lorenz                    : u in W2, rho, theta, Pi in W3
  material_cp                        : u in W2, rho, Pi in W3, theta in Wtheta

The two flux formulations share state layout and residuals; they differ only
in the preconditioner applied to them.
"""

from dataclasses import dataclass

import numpy as np

FLUX_NEW = "flux_lorenz_new"
FLUX_ORIG = "flux_lorenz_orig"
MATERIAL_LORENZ = "material_lorenz"
MATERIAL_CP = "material_cp"
FORMULATIONS = (FLUX_NEW, FLUX_ORIG, MATERIAL_CP, MATERIAL_LORENZ)
FLUX_FORMS = (FLUX_NEW, FLUX_ORIG)


def check_formulation(name):
    if name not in FORMULATIONS:
        raise ValueError(
            f"unknown formulation {name!r}; valid names are "
            + ", ".join(FORMULATIONS))
    return name


@dataclass
class FieldVec:
    """Coefficient vector tagged with its space."""
    space: object
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.dof_count,):
            raise ValueError("coefficient length does not match the space")


@dataclass
class State:
    formulation: str
    u: np.ndarray        # W2 coefficients, eliminated boundary dofs kept at 0
    rho: np.ndarray      # W3
    thermo: np.ndarray   # W3 Theta (flux), W3 theta, or Wtheta theta
    pi: np.ndarray       # W3 Exner pressure

    def __post_init__(self):
        check_formulation(self.formulation)
        for name in ("u", "rho", "thermo", "pi"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))

    @property
    def is_flux_form(self):
        return self.formulation in FLUX_FORMS

    def copy(self):
        return State(self.formulation, self.u.copy(), self.rho.copy(),
                     self.thermo.copy(), self.pi.copy())

    def finite(self):
        return all(np.all(np.isfinite(v))
                   for v in (self.u, self.rho, self.thermo, self.pi))

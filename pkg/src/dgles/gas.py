"""Nondimensional ideal-gas relations, constitutive fluxes and the viscosity law."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, PositivityError


@dataclass(frozen=True)
class GasParameters:
    Ma: float
    Re: float
    Pr: float = 0.7
    gamma: float = 1.4
    alpha: float = 0.7

    def __post_init__(self):
        problems = []
        if not self.Ma > 0:
            problems.append(f"Ma must be positive, got {self.Ma}")
        if not self.Re > 0:
            problems.append(f"Re must be positive, got {self.Re}")
        if not self.Pr > 0:
            problems.append(f"Pr must be positive, got {self.Pr}")
        if not 1.0 < self.gamma <= 5.0 / 3.0:
            problems.append(f"gamma must lie in (1, 5/3], got {self.gamma}")
        if not self.alpha > 0:
            problems.append(f"alpha must be positive, got {self.alpha}")
        if problems:
            raise InvalidParameterError("; ".join(problems))

    @property
    def kappa(self):
        """R / c_p."""
        return (self.gamma - 1.0) / self.gamma

    @property
    def cv(self):
        """Internal energy per unit temperature, (1 - kappa) / kappa."""
        return 1.0 / (self.gamma - 1.0)

    @property
    def gMa2(self):
        return self.gamma * self.Ma**2


@dataclass
class PrimitiveState:
    rho: np.ndarray
    u: np.ndarray  # (..., 3)
    T: np.ndarray
    p: np.ndarray
    e_int: np.ndarray


def primitives_from_conserved(U, params, tau_kk=0.0, check=True):
    """Recover primitives from node values ``U[..., 5]``.

    ``tau_kk`` is the modelled subgrid trace (zero when not modelled).
    """
    U = np.asarray(U, dtype=float)
    rho = U[..., 0]
    if check and not np.all(rho > 0.0):
        raise PositivityError("nonpositive density")
    u = U[..., 1:4] / rho[..., None]
    kin = np.einsum("...i,...i->...", U[..., 1:4], u)
    rho_ei = U[..., 4] - 0.5 * params.gMa2 * (kin + tau_kk)
    T = rho_ei / (params.cv * rho)
    if check and not np.all(T > 0.0):
        raise PositivityError("nonpositive temperature")
    return PrimitiveState(rho, u, T, rho * T, params.cv * T)


def conserved_from_primitives(rho, u, T, params, tau_kk=0.0):
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    m = rho[..., None] * u
    kin = np.einsum("...i,...i->...", m, u)
    rho_e = params.cv * rho * T + 0.5 * params.gMa2 * (kin + tau_kk)
    return np.concatenate([rho[..., None], m, np.asarray(rho_e)[..., None]], axis=-1)


def viscosity(T, alpha=0.7):
    return np.power(T, alpha)


def strain_rate(grad_u):
    """S_ij = du_i/dx_j + du_j/dx_i from ``grad_u[..., i, j] = du_i/dx_j``."""
    return grad_u + np.swapaxes(grad_u, -1, -2)


def deviator(S):
    tr = np.trace(S, axis1=-2, axis2=-1)
    return S - (tr / 3.0)[..., None, None] * np.eye(3)


def strain_magnitude(S):
    """|S| with |S|^2 = S_ij S_ij / 2."""
    return np.sqrt(0.5 * np.einsum("...ij,...ij->...", S, S))


def molecular_fluxes(grad_u, grad_T, mu):
    """Viscous stress ``mu S^d`` and heat flux ``-mu grad T``."""
    Sd = deviator(strain_rate(grad_u))
    mu = np.asarray(mu)
    sigma = mu[..., None, None] * Sd
    q = -mu[..., None] * grad_T
    return sigma, q


@dataclass(frozen=True)
class ReferenceScales:
    """Dimensional reference set for (re)dimensionalisation.

    ``R`` and ``cp`` are the gas constants; ``mu_r`` the reference viscosity.
    """

    rho_r: float
    L_r: float
    V_r: float
    T_r: float
    R: float = 1.0
    cp: float = 1.0
    mu_r: float = 1.0
    Pr: float = 1.0

    def __post_init__(self):
        for name in ("rho_r", "L_r", "V_r", "T_r", "R", "cp", "mu_r", "Pr"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"reference value {name} must be positive")

    def scales(self):
        t_r = self.L_r / self.V_r
        return {
            "rho": self.rho_r,
            "u": self.V_r,
            "T": self.T_r,
            "x": self.L_r,
            "t": t_r,
            "p": self.rho_r * self.R * self.T_r,
            "e": self.R * self.T_r,
            "e_int": self.R * self.T_r,
            "sigma": self.mu_r * self.V_r / self.L_r,
            "q": self.mu_r * self.cp * self.T_r / (self.Pr * self.L_r),
            "f": self.V_r**2 / self.L_r,
            "mu": self.mu_r,
        }

    def mach(self, gamma):
        return self.V_r / np.sqrt(gamma * self.R * self.T_r)

    def reynolds(self):
        return self.rho_r * self.V_r * self.L_r / self.mu_r


def nondimensionalize(quantities, ref):
    """Divide each named dimensional quantity by its reference scale."""
    s = ref.scales()
    return {k: np.asarray(v) / s[k] for k, v in quantities.items()}


def redimensionalize(quantities, ref):
    s = ref.scales()
    return {k: np.asarray(v) * s[k] for k, v in quantities.items()}

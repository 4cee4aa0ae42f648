"""Smagorinsky closure with Van Driest wall damping."""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParameterError
from ..gas import deviator, strain_magnitude


@dataclass(frozen=True)
class SmagorinskyConfig:
    C_S: float = 0.1
    C_I: float = 0.0
    A: float = 25.0
    Pr_sgs: float = 0.9
    damping_enabled: bool = True

    def __post_init__(self):
        if self.C_S < 0 or self.C_I < 0:
            raise InvalidParameterError("C_S and C_I must be nonnegative")
        if not self.A > 0 or not self.Pr_sgs > 0:
            raise InvalidParameterError("A and Pr_sgs must be positive")


def van_driest(y_plus, A=25.0, enabled=True):
    y_plus = np.asarray(y_plus, dtype=float)
    if not enabled:
        return np.ones_like(y_plus)
    return -np.expm1(-y_plus / A)


def eddy_viscosity(rho, S, delta, y_plus, cfg, Re):
    """Eddy viscosity (Re-scaled) and the deviatoric subgrid stress.

    ``S`` is the strain tensor ``grad u + grad u^T`` at each point.
    """
    S_mag = strain_magnitude(S)
    f_D = van_driest(y_plus, cfg.A, cfg.damping_enabled)
    nu = Re * cfg.C_S**2 * np.asarray(delta) ** 2 * S_mag * f_D
    tau_dev = -(np.asarray(rho) * nu / Re)[..., None, None] * deviator(S)
    return nu, tau_dev


def yoshizawa_trace(rho, delta, S_mag, C_I):
    return C_I * np.asarray(rho) * np.asarray(delta) ** 2 * np.asarray(S_mag) ** 2


def sgs_heat_flux(rho, nu, grad_T, Pr, Pr_sgs):
    """Subgrid temperature flux, expressed in heat-flux reference units."""
    return -(Pr / Pr_sgs) * (np.asarray(rho) * np.asarray(nu))[..., None] * grad_T


def sgs_turbulent_diffusion(u, tau, tau_kk):
    """``2 u_k tau_ik + u_i tau_kk`` (triple correlation neglected)."""
    return 2.0 * np.einsum("...ik,...k->...i", tau, u) + u * np.asarray(tau_kk)[..., None]


class SmagorinskyModel:
    """Pointwise Smagorinsky closure as used by the solver.

    ``u_tau`` is the current friction-velocity estimate used for ``y+``; the
    run driver refreshes it from the wall statistics.
    """

    name = "smagorinsky"
    limits_backscatter = False

    def __init__(self, cfg, params, delta, u_tau=0.0):
        self.cfg = cfg
        self.params = params
        self.delta = np.asarray(delta)
        self.u_tau = u_tau

    def prepare(self, vol):
        """No element-level work for this model."""
        return None

    def stress(self, pts, coeffs=None):
        cfg, Re = self.cfg, self.params.Re
        delta = self.delta[pts.elem]
        f_D = van_driest(Re * self.u_tau * pts.wall_distance, cfg.A, cfg.damping_enabled)
        nu = Re * cfg.C_S**2 * delta**2 * pts.S_mag * f_D
        tau = (-pts.rho * nu / Re)[:, None, None] * pts.Sd
        tau_kk = yoshizawa_trace(pts.rho, delta, pts.S_mag, cfg.C_I)
        if cfg.C_I > 0:
            for i in range(3):
                tau[:, i, i] += tau_kk / 3.0
        else:
            tau_kk = np.zeros_like(nu)
        pts.nu_sgs = nu
        return tau, tau_kk

    def prepare_energy(self, vol, coeffs):
        return coeffs

    def energy_flux(self, pts, tau, tau_kk, coeffs=None):
        """SGS energy flux ``Q/kappa + gMa2/2 (J - tau_kk u)``.

        The heat flux is converted from heat-flux units to ``rho u T``
        units by ``1/(Re Pr)``; ``J - tau_kk u`` reduces to ``2 tau u``.
        """
        p = self.params
        c = -(pts.rho * pts.nu_sgs) / (self.cfg.Pr_sgs * p.Re * p.kappa)
        out = c[:, None] * pts.grad_T
        out += p.gMa2 * np.matmul(tau, pts.u[:, :, None])[:, :, 0]
        return out

    def viscosity_bound(self, pts, coeffs=None):
        return pts.nu_sgs / self.params.Re

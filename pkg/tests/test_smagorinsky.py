from types import SimpleNamespace

import numpy as np
import pytest

from dgles.closures.smagorinsky import (
    SmagorinskyConfig, SmagorinskyModel, eddy_viscosity, sgs_heat_flux, sgs_turbulent_diffusion,
    van_driest, yoshizawa_trace,
)
from dgles.errors import InvalidParameterError
from dgles.gas import GasParameters, deviator, strain_magnitude, strain_rate


def _shear(gamma):
    g = np.zeros((3, 3))
    g[0, 1] = gamma
    return strain_rate(g)


def test_van_driest_limits():
    assert van_driest(0.0) == 0.0
    assert van_driest(1e4) == pytest.approx(1.0)
    assert van_driest(25.0) == pytest.approx(1 - np.exp(-1))
    assert np.all(van_driest([0.0, 3.0], enabled=False) == 1.0)


def test_eddy_viscosity_simple_shear():
    cfg = SmagorinskyConfig(C_S=0.1)
    Re, rho, delta, gamma = 1000.0, 1.2, 0.05, 4.0
    nu, tau = eddy_viscosity(rho, _shear(gamma), delta, 1e6, cfg, Re)
    assert nu == pytest.approx(Re * 0.01 * delta**2 * gamma)
    assert tau[0, 1] == pytest.approx(-rho * 0.01 * delta**2 * gamma * gamma)
    assert np.trace(tau) == pytest.approx(0.0)


def test_dissipative_for_random_strain(rng):
    cfg = SmagorinskyConfig()
    S = strain_rate(rng.standard_normal((500, 3, 3)))
    nu, tau = eddy_viscosity(np.ones(500), S, 0.1, rng.uniform(0, 100, 500), cfg, 500.0)
    assert np.all(nu >= 0)
    assert np.all(np.einsum("nij,nij->n", tau, S) <= 1e-15)


def test_yoshizawa_and_fluxes():
    assert yoshizawa_trace(2.0, 0.5, 3.0, 0.01) == pytest.approx(0.01 * 2 * 0.25 * 9)
    q = sgs_heat_flux(1.0, 0.2, np.array([0.0, 1.0, 0.0]), 0.7, 0.9)
    assert np.allclose(q, [0, -0.7 / 0.9 * 0.2, 0])
    u = np.array([1.0, 2.0, 0.0])
    tau = np.diag([1.0, 1.0, 1.0])
    assert np.allclose(sgs_turbulent_diffusion(u, tau, 3.0), 2 * u + 3 * u)


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        SmagorinskyConfig(C_S=-0.1)
    with pytest.raises(InvalidParameterError):
        SmagorinskyConfig(A=0.0)


def _points(rng, n=50):
    S = strain_rate(rng.standard_normal((n, 3, 3)))
    return SimpleNamespace(
        elem=np.zeros(n, dtype=int), rho=rng.uniform(0.8, 1.2, n), S=S, Sd=deviator(S),
        S_mag=strain_magnitude(S), wall_distance=rng.uniform(0, 1, n),
        u=rng.standard_normal((n, 3)), grad_T=rng.standard_normal((n, 3)),
    )


def test_model_stress_and_energy(rng):
    p = GasParameters(0.7, 2795.0)
    cfg = SmagorinskyConfig(C_I=0.005)
    model = SmagorinskyModel(cfg, p, np.array([0.1]), u_tau=0.05)
    pts = _points(rng)
    tau, tau_kk = model.stress(pts)
    nu, tau_dev = eddy_viscosity(pts.rho, pts.S, 0.1, p.Re * 0.05 * pts.wall_distance, cfg, p.Re)
    assert np.allclose(pts.nu_sgs, nu)
    assert np.allclose(deviator(tau), tau_dev)
    assert np.allclose(np.trace(tau, axis1=1, axis2=2), tau_kk)
    assert np.allclose(tau_kk, yoshizawa_trace(pts.rho, 0.1, pts.S_mag, 0.005))
    E = model.energy_flux(pts, tau, tau_kk)
    heat = sgs_heat_flux(pts.rho, nu, pts.grad_T, p.Pr, cfg.Pr_sgs) / (p.Re * p.Pr * p.kappa)
    expected = heat + 0.5 * p.gMa2 * 2 * np.einsum("nik,nk->ni", tau, pts.u)
    assert np.allclose(E, expected)
    assert np.allclose(model.viscosity_bound(pts), nu / p.Re)


def test_damping_off_near_wall(rng):
    p = GasParameters(0.7, 2795.0)
    pts = _points(rng)
    pts.wall_distance[:] = 0.0
    on = SmagorinskyModel(SmagorinskyConfig(), p, np.array([0.1]), u_tau=0.05)
    off = SmagorinskyModel(SmagorinskyConfig(damping_enabled=False), p, np.array([0.1]), u_tau=0.05)
    assert np.all(on.stress(pts)[0] == 0)
    assert np.any(off.stress(pts)[0] != 0)

"""Dynamic anisotropic closure.

Every subgrid flux gets its own element-constant coefficient per component,
obtained from a Germano-type identity between the grid level (P^q) and the
test level (P^q_hat).  Test-level quantities are L2 projections of node data
onto P^q_hat; Favre test quantities are ratios of such projections.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidParameterError
from ..filters import NodalProjector, favre_ratio
from ..gas import strain_magnitude, strain_rate, viscosity
from ..kernels import anisotropic_energy, anisotropic_stress


AVERAGING = ("least_squares", "ratio")


@dataclass(frozen=True)
class AnisotropicConfig:
    q_hat: int = 2
    eps_den: float = 1e-10
    eps_rel: float = 1e-2
    C_clip: float = 10.0
    limiter_enabled: bool = True
    freeze_per_step: bool = False
    trace_guard: float = 0.5
    averaging: str = "least_squares"

    def __post_init__(self):
        if self.averaging not in AVERAGING:
            raise InvalidParameterError(f"averaging must be one of {AVERAGING}")
        if self.q_hat < 0:
            raise InvalidParameterError("q_hat must be nonnegative")
        if not self.eps_den > 0 or not self.C_clip > 0:
            raise InvalidParameterError("eps_den and C_clip must be positive")
        if not 0 <= self.eps_rel < 1:
            raise InvalidParameterError("eps_rel must lie in [0, 1)")
        if not 0 <= self.trace_guard < 1:
            raise InvalidParameterError("trace_guard must lie in [0, 1)")


@dataclass
class TestLevel:
    """Test-filtered state at volume nodes."""

    rho: np.ndarray  # hat(rho), (e, p)
    u: np.ndarray  # Favre test velocity, (e, p, 3)
    grad_u: np.ndarray  # (e, p, 3, 3)
    S: np.ndarray
    S_mag: np.ndarray
    grad_rho: np.ndarray


@dataclass
class Coefficients:
    C: np.ndarray  # (e, 3, 3)
    CQ: np.ndarray = None  # (e, 3)
    CJ: np.ndarray = None  # (e, 3)
    degenerate: dict = field(default_factory=dict)


def element_average(values, weights):
    """Quadrature-weighted mean over the nodes of each element (axis 1)."""
    w = weights / weights.sum(axis=-1, keepdims=True)
    w = w.reshape(w.shape + (1,) * (values.ndim - 2))
    return np.sum(values * w, axis=1)


def rotate(T, a, tensor=True):
    """Components in the frame whose axes are the columns of ``a``:
    ``a_ia T_ij a_jb`` for tensors, ``a_ia T_i`` for vectors."""
    if tensor:
        return np.einsum("ia,...ij,jb->...ab", a, T, a)
    return np.einsum("ia,...i->...a", a, T)


def test_level(rho, m, proj, inv_jacobian):
    """Test-filtered density, Favre velocity and its exact gradient."""
    rho_h = proj(rho)
    m_h = proj(m)
    u_t = favre_ratio(m_h, rho_h)
    g_rho = proj.gradient(rho, inv_jacobian)  # (e, p, 3)
    g_m = proj.gradient(m, inv_jacobian)  # (e, p, 3, 3), [i, j] = d m_i / dx_j
    grad_u = (g_m - u_t[..., :, None] * g_rho[..., None, :]) / rho_h[..., None, None]
    S = strain_rate(grad_u)
    return TestLevel(rho_h, u_t, grad_u, S, strain_magnitude(S), g_rho)


def favre_test_scalar(rho_phi, test, proj, inv_jacobian):
    """Favre test value of a scalar and its gradient from node data ``rho*phi``."""
    rp = proj(rho_phi)
    phi = rp / test.rho
    g = (proj.gradient(rho_phi, inv_jacobian) - phi[..., None] * test.grad_rho) / test.rho[..., None]
    return phi, g


def leonard_momentum(rho, u, test, proj):
    """``hat(rho u_i u_j) - hat(rho) u_i u_j`` with test-level Favre velocity."""
    ruu = rho[..., None, None] * u[..., :, None] * u[..., None, :]
    return proj(ruu) - test.rho[..., None, None] * test.u[..., :, None] * test.u[..., None, :]


def dynamic_ratio(L, D, weights, scale, eps_den=1e-10, clip=10.0, a=None, averaging="least_squares",
                  eps_rel=0.0):
    """Element coefficient per component (optionally in frame ``a``).

    ``least_squares`` gives ``<L D>/<D D>``; ``ratio`` gives ``<L>/<D>``.
    Both return ``C`` exactly when ``L = C D`` at every node.  A component
    is degenerate, and set to zero, when its denominator magnitude
    (``sqrt<D D>`` or ``|<D>|``) falls below ``eps_den * scale`` or below
    ``eps_rel`` times the norm of all components' magnitudes in the element
    (the component then carries too little of the model term to be
    identified).  The result is clipped to ``[-clip, clip]``.  Returns the
    coefficients and the degenerate mask.
    """
    if a is not None:
        tensor = L.ndim == 4
        L, D = rotate(L, a, tensor), rotate(D, a, tensor)
    if averaging == "least_squares":
        num = element_average(L * D, weights)
        den = element_average(D * D, weights)
        size = np.sqrt(den)
    else:
        num = element_average(L, weights)
        den = element_average(D, weights)
        size = np.abs(den)
    scale = np.asarray(scale).reshape(scale.shape + (1,) * (den.ndim - np.ndim(scale)))
    degenerate = size < eps_den * (scale + 1e-300)
    if eps_rel > 0:
        axes = tuple(range(1, size.ndim))
        total = np.sqrt(np.sum(size**2, axis=axes, keepdims=True))
        degenerate |= size < eps_rel * total
    C = np.where(degenerate, 0.0, num / np.where(degenerate, 1.0, den))
    return np.clip(C, -clip, clip), degenerate


def dynamic_C_momentum(rho, S, S_mag, L, test, delta, delta_hat, proj, weights, cfg, a=None):
    """Momentum coefficients ``C_ij`` (e, 3, 3)."""
    d2 = (delta**2)[:, None]
    dh2 = (delta_hat**2)[:, None]
    grid = proj((rho * d2 * S_mag)[..., None, None] * S)
    D = grid - (test.rho * dh2 * test.S_mag)[..., None, None] * test.S
    scale = element_average(rho, weights) * delta**2 * element_average(S_mag, weights) ** 2
    return dynamic_ratio(L, D, weights, scale, cfg.eps_den, cfg.C_clip, a, cfg.averaging, cfg.eps_rel)


def tau_anisotropic(C, rho, delta, S_mag, S):
    """``tau_ij = -rho Delta^2 |S| C_ij S_ij`` (no summation)."""
    return -np.asarray(rho * delta**2 * S_mag)[..., None, None] * C * S


def backscatter_limiter(tau, sigma, S, Re):
    """Scale factor bounding backscatter by molecular dissipation.

    Returns ``beta`` per point; ``beta = 1`` wherever ``tau:S <= 0``.
    """
    tS = np.einsum("...ij,...ij->...", tau, S)
    sS = np.einsum("...ij,...ij->...", sigma, S) / Re
    back = tS > 0.0
    beta = np.ones_like(tS)
    beta[back] = np.minimum(1.0, sS[back] / tS[back])
    return beta


def trace_guard(tau_kk, rho, T_res, params, theta):
    """Scale factor keeping the recovered temperature above ``theta * T_res``.

    ``T_res`` is the temperature without the subgrid trace; only positive
    traces lower the temperature, so only those are bounded.
    """
    bound = (1.0 - theta) * params.cv * rho * T_res / (0.5 * params.gMa2)
    g = np.ones_like(tau_kk)
    big = tau_kk > bound
    g[big] = bound[big] / tau_kk[big]
    return g


def dynamic_vector(grid_flux, test_flux, L, weights, scale, cfg, a=None):
    D = grid_flux - test_flux
    return dynamic_ratio(L, D, weights, scale, cfg.eps_den, cfg.C_clip, a, cfg.averaging, cfg.eps_rel)


def dynamic_Q(rho, u, T, grad_T, S_mag, test, delta, delta_hat, proj, inv_jacobian, weights, cfg, a=None,
              L=None):
    """Temperature-flux coefficients ``C^Q_i`` (e, 3).

    ``L`` overrides the Leonard flux computed from the fields.
    """
    T_t, gT_t = favre_test_scalar(rho * T, test, proj, inv_jacobian)
    if L is None:
        L = proj(rho[..., None] * u * T[..., None]) - (test.rho * T_t)[..., None] * test.u
    d2 = (delta**2)[:, None, None]
    dh2 = (delta_hat**2)[:, None, None]
    grid = proj((rho * S_mag)[..., None] * grad_T * d2)
    tst = (test.rho * test.S_mag)[..., None] * gT_t * dh2
    gmag = element_average(np.linalg.norm(grad_T, axis=-1), weights)
    scale = element_average(rho, weights) * delta**2 * element_average(S_mag, weights) * gmag
    return dynamic_vector(grid, tst, L, weights, scale, cfg, a)


def kinetic_gradient(u, grad_u):
    """Gradient of ``u_k u_k / 2``."""
    return np.einsum("...k,...ki->...i", u, grad_u)


def dynamic_J(rho, u, grad_u, S_mag, test, delta, delta_hat, proj, weights, cfg, a=None, L=None):
    """Triple-correlation coefficients ``C^J_i`` (e, 3).

    ``L`` overrides the Leonard flux computed from the fields.
    """
    if L is None:
        uu = np.einsum("...k,...k->...", u, u)
        tuu = np.einsum("...k,...k->...", test.u, test.u)
        L = proj((rho * uu)[..., None] * u) - (test.rho * tuu)[..., None] * test.u
    gk = kinetic_gradient(u, grad_u)
    gk_t = kinetic_gradient(test.u, test.grad_u)
    d2 = (delta**2)[:, None, None]
    dh2 = (delta_hat**2)[:, None, None]
    grid = proj((rho * S_mag)[..., None] * gk * d2)
    tst = (test.rho * test.S_mag)[..., None] * gk_t * dh2
    gmag = element_average(np.linalg.norm(gk, axis=-1), weights)
    scale = element_average(rho, weights) * delta**2 * element_average(S_mag, weights) * gmag
    return dynamic_vector(grid, tst, L, weights, scale, cfg, a)


def dump_coefficients(path, coeffs, centroids):
    """Write per-element coefficients to CSV."""
    names = [f"C{i}{j}" for i in range(1, 4) for j in range(1, 4)]
    cols = [coeffs.C.reshape(len(coeffs.C), 9)]
    if coeffs.CQ is not None:
        names += [f"CQ{i}" for i in range(1, 4)]
        cols.append(coeffs.CQ)
    if coeffs.CJ is not None:
        names += [f"CJ{i}" for i in range(1, 4)]
        cols.append(coeffs.CJ)
    data = np.concatenate([np.asarray(centroids)] + cols, axis=1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["element", "x", "y", "z"] + names)
        for e, row in enumerate(data):
            w.writerow([e] + [f"{v:.10g}" for v in row])


class AnisotropicModel:
    """Solver-facing wrapper of the dynamic anisotropic closure.

    ``prepare`` computes the momentum coefficients from volume-node data;
    ``prepare_energy`` adds the temperature and triple-correlation ones once
    the temperature is known.
    """

    name = "anisotropic"

    def __init__(self, cfg, params, basis, geometry, delta, delta_hat):
        if not cfg.q_hat < basis.q:
            raise InvalidParameterError(f"q_hat={cfg.q_hat} must be below q={basis.q}")
        self.cfg = cfg
        self.params = params
        self.proj = NodalProjector(basis, cfg.q_hat)
        self.inv_jacobian = geometry.inv_jacobian
        self.weights = geometry.weights
        self.delta = np.asarray(delta)
        self.delta_hat = np.asarray(delta_hat)
        # share of each physical direction in the element's reference-space metric
        g2 = np.sum(self.inv_jacobian**2, axis=1)
        self.direction_weight = g2 / g2.max(axis=1, keepdims=True)
        self.frame = None
        self.frozen = None
        self.beta_saturation = 0.0
        self.guard_fraction = 0.0

    @property
    def limits_backscatter(self):
        return self.cfg.limiter_enabled or self.cfg.trace_guard > 0

    def prepare(self, vol):
        if self.frozen is not None:
            return self.frozen
        test = test_level(vol.rho, vol.m, self.proj, self.inv_jacobian)
        L = leonard_momentum(vol.rho, vol.u, test, self.proj)
        C, deg = dynamic_C_momentum(
            vol.rho, vol.S, vol.S_mag, L, test, self.delta, self.delta_hat,
            self.proj, self.weights, self.cfg, self.frame,
        )
        self._test = test
        return Coefficients(C, degenerate={"C": deg})

    def prepare_energy(self, vol, coeffs):
        if coeffs.CQ is not None:
            return coeffs
        test = self._test
        coeffs.CQ, coeffs.degenerate["CQ"] = dynamic_Q(
            vol.rho, vol.u, vol.T, vol.grad_T, vol.S_mag, test, self.delta, self.delta_hat,
            self.proj, self.inv_jacobian, self.weights, self.cfg, self.frame,
        )
        coeffs.CJ, coeffs.degenerate["CJ"] = dynamic_J(
            vol.rho, vol.u, vol.grad_u, vol.S_mag, test, self.delta, self.delta_hat,
            self.proj, self.weights, self.cfg, self.frame,
        )
        return coeffs

    def stress(self, pts, coeffs):
        """Unlimited stress; the solver follows up with :meth:`limit`."""
        self._coeffs = coeffs
        tau = tau_anisotropic(coeffs.C[pts.elem], pts.rho, self.delta[pts.elem], pts.S_mag, pts.S)
        return tau, np.trace(tau, axis1=-2, axis2=-1)

    def limited_stress(self, pts, coeffs, T0):
        """Stress with the backscatter limiter (viscosity at the resolved
        temperature ``T0``) and the trace guard applied, in one pass."""
        n = len(pts.rho)
        tau = np.empty((n, 3, 3))
        tau_kk = np.empty(n)
        p = self.params
        n_lim, n_guard = anisotropic_stress(
            coeffs.C, pts.elem, pts.rho, self.delta, pts.S_mag, pts.S, pts.Sd, T0,
            p.Re, p.alpha, p.cv, p.gMa2, self.cfg.limiter_enabled, self.cfg.trace_guard,
            tau, tau_kk,
        )
        self.beta_saturation = n_lim / max(n, 1)
        self.guard_fraction = n_guard / max(n, 1)
        return tau, tau_kk

    def limit(self, pts, tau, T0):
        """Backscatter limiter (viscosity at ``T0``) and the trace guard.

        ``T0`` is the resolved temperature, recovered without the subgrid trace.
        """
        self.beta_saturation = 0.0
        self.guard_fraction = 0.0
        if self.cfg.limiter_enabled:
            mu = viscosity(T0, self.params.alpha)
            sigma = mu[..., None, None] * pts.Sd
            beta = backscatter_limiter(tau, sigma, pts.S, self.params.Re)
            self.beta_saturation = float(np.mean(beta < 1.0)) if beta.size else 0.0
            tau = beta[..., None, None] * tau
        tau_kk = np.trace(tau, axis1=-2, axis2=-1)
        if self.cfg.trace_guard > 0:
            g = trace_guard(tau_kk, pts.rho, T0, self.params, self.cfg.trace_guard)
            self.guard_fraction = float(np.mean(g < 1.0)) if g.size else 0.0
            tau = g[..., None, None] * tau
            tau_kk = g * tau_kk
        return tau, tau_kk

    def energy_flux(self, pts, tau, tau_kk, coeffs):
        p = self.params
        out = np.empty((len(pts.rho), 3))
        anisotropic_energy(
            coeffs.CQ, coeffs.CJ, pts.elem, pts.rho, self.delta, pts.S_mag, pts.u, pts.grad_u,
            pts.grad_T, tau, 1.0 / p.kappa, 0.5 * p.gMa2, out,
        )
        return out

    def energy_flux_reference(self, pts, tau, tau_kk, coeffs):
        """Plain numpy evaluation of :meth:`energy_flux`."""
        p = self.params
        c = (pts.rho * self.delta[pts.elem] ** 2 * pts.S_mag)[..., None]
        Q = -c * coeffs.CQ[pts.elem] * pts.grad_T
        tau3 = -c * coeffs.CJ[pts.elem] * kinetic_gradient(pts.u, pts.grad_u)
        # J - tau_kk u = tau3 + 2 u_k tau_ik
        Jm = tau3 + 2.0 * np.einsum("...ik,...k->...i", tau, pts.u)
        return Q / p.kappa + 0.5 * p.gMa2 * Jm

    def element_diffusivity(self, coeffs):
        """Directional coefficient bound per element.

        Column ``d`` of C diffuses along x_d, as does the heat-flux coefficient
        (scaled by gamma once written for T).  Each direction is weighted by
        its share of the element metric, so a large coefficient acting along
        a long element edge costs less than one across a thin one.
        """
        c = np.abs(coeffs.C).max(axis=1)
        if coeffs.CQ is not None:
            c = np.maximum(c, self.params.gamma * np.abs(coeffs.CQ))
        return np.max(c * self.direction_weight, axis=1)

    def viscosity_bound(self, pts, coeffs):
        return self.element_diffusivity(coeffs)[pts.elem] * self.delta[pts.elem] ** 2 * pts.S_mag

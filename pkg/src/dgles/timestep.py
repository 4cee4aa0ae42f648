"""SSPRK(5,4) integrator, step-size control and the bulk-flow controller."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

# Shu-Osher form of the five-stage, fourth-order SSP scheme of Spiteri and Ruuth
_A = (
    (1.0, 0.0, 0.0, 0.0, 0.0),
    (0.444370493651235, 0.555629506348765, 0.0, 0.0, 0.0),
    (0.620101851488403, 0.0, 0.379898148511597, 0.0, 0.0),
    (0.178079954393132, 0.0, 0.0, 0.821920045606868, 0.0),
)
_B = (0.391752226571890, 0.368410593050371, 0.251891774271694, 0.544974750228521)


def ssprk54_step(U, dt, rhs, on_stage=None):
    """Advance ``U`` by ``dt`` for ``dU/dt = rhs(U)``.

    ``on_stage(k)`` is called before the k-th right-hand side evaluation.
    """
    if not dt > 0:
        raise InvalidParameterError(f"time step must be positive, got {dt}")

    def L(k, V):
        if on_stage is not None:
            on_stage(k)
        return rhs(V)

    u0 = U
    u1 = u0 + _B[0] * dt * L(0, u0)
    u2 = _A[1][0] * u0 + _A[1][1] * u1 + _B[1] * dt * L(1, u1)
    u3 = _A[2][0] * u0 + _A[2][2] * u2 + _B[2] * dt * L(2, u2)
    L3 = L(3, u3)
    u4 = _A[3][0] * u0 + _A[3][3] * u3 + _B[3] * dt * L3
    L4 = L(4, u4)
    return (
        0.517231671970585 * u2
        + 0.096059710526147 * u3
        + 0.063692468666290 * dt * L3
        + 0.386708617503269 * u4
        + 0.226007483236906 * dt * L4
    )


@dataclass
class ForcingState:
    """PI controller for the streamwise body force."""

    Q0: float
    I: float = 0.0
    alpha1: float = 0.1
    alpha2: float = 0.5
    rho_b: float = 1.0

    def __post_init__(self):
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise InvalidParameterError("controller gains must be nonnegative")
        if not self.rho_b > 0:
            raise InvalidParameterError("bulk density must be positive")


def flow_rate(solver, U):
    """``Q = (1/Lx) * integral of rho u_x`` over the domain."""
    return float(solver.integrate(U)[1]) / solver.mesh.spec.Lx


def compute_forcing(Q, fs):
    """Streamwise body force from the current flow rate."""
    return -(fs.alpha1 * (Q - fs.Q0) + fs.alpha2 * fs.I) / fs.rho_b


def advance_integral(Q, fs, dt):
    fs.I += dt * (Q - fs.Q0)


def element_length(mesh):
    """Twice the inradius of every element."""
    return 2.0 * mesh.inradius()


def stable_dt(solver, U, CFL=0.3, h=None):
    """Convective and viscous explicit step limits; returns the smaller."""
    if not CFL > 0:
        raise InvalidParameterError("CFL must be positive")
    if h is None:
        h = solver.mesh._cache.get("h")
        if h is None:
            h = solver.mesh._cache["h"] = element_length(solver.mesh)
    k = 2 * solver.q + 1
    speed, nu = solver.element_speed(U)
    nu = nu + solver.last.nu_max
    dt_c = np.min(h / (k * speed))
    with np.errstate(divide="ignore"):
        dt_v = np.min(np.where(nu > 0, h**2 / (k**2 * nu), np.inf))
    return CFL * min(dt_c, dt_v)

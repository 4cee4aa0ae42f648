"""Laminar base flow and the deterministic logistic-map perturbation."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .filters import project_grid
from .gas import conserved_from_primitives


@dataclass(frozen=True)
class PerturbationSpec:
    amplitude: float = 0.1
    r: float = 3.999
    n_iter: int = 20

    def __post_init__(self):
        if self.amplitude < 0:
            raise InvalidParameterError("perturbation amplitude must be nonnegative")
        if not 0 < self.r <= 4:
            raise InvalidParameterError("logistic parameter must lie in (0, 4]")
        if self.n_iter < 1:
            raise InvalidParameterError("need at least one logistic iteration")


def base_velocity(nodes, u_center=0.75):
    u = np.zeros(np.shape(nodes))
    u[..., 0] = u_center * (1.0 - nodes[..., 1] ** 2)
    return u


def base_state(nodes, params, u_center=0.75):
    """Conserved node values of the Poiseuille profile with rho = T = 1."""
    shape = np.shape(nodes)[:-1]
    return conserved_from_primitives(np.ones(shape), base_velocity(nodes, u_center), np.ones(shape), params)


def logistic(xi, r=3.999, n_iter=20):
    xi = np.array(xi, dtype=float)
    for _ in range(n_iter):
        xi = r * xi * (1.0 - xi)
    return xi


def seed_coordinates(nodes, Lx, Lz):
    """Coordinates scaled into the open unit interval."""
    s = np.stack([nodes[..., 0] / Lx, 0.5 * (nodes[..., 1] + 1.0), nodes[..., 2] / Lz], axis=-1)
    eps = np.finfo(float).eps
    return np.clip(s, eps, 1.0 - eps)


def perturbation_nodes(nodes, Lx, Lz, spec):
    """Raw node increments: coordinate i drives velocity component i+1 (cyclic)."""
    xi = logistic(seed_coordinates(nodes, Lx, Lz), spec.r, spec.n_iter)
    du = spec.amplitude * (2.0 * xi - 1.0)
    return np.roll(du, 1, axis=-1)


def perturb_velocity(nodes, Lx, Lz, spec, basis):
    """Modal increments (n_elem, n_modes, 3) of the projected perturbation."""
    return project_grid(perturbation_nodes(nodes, Lx, Lz, spec), basis)


def initial_state(solver, spec=None, u_center=0.75):
    """Modal initial condition: base flow plus projected perturbation."""
    nodes = solver.geom.nodes
    params = solver.params
    u = base_velocity(nodes, u_center)
    if spec is not None and spec.amplitude > 0:
        ms = solver.mesh.spec
        du = perturb_velocity(nodes, ms.Lx, ms.Lz, spec, solver.basis)
        u = u + solver.to_volume(du)
    shape = nodes.shape[:-1]
    U = conserved_from_primitives(np.ones(shape), u, np.ones(shape), params)
    return solver.project(U)


def divergence(solver, U):
    """Velocity divergence at volume nodes, from the LDG gradient."""
    G = solver.to_volume(solver.auxiliary_gradients(U))
    return G[..., 0, 0] + G[..., 1, 1] + G[..., 2, 2]

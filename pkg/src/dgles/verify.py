"""Quick built-in self checks, runnable without pytest (``dgles verify``)."""

from fractions import Fraction
from math import factorial

import numpy as np

from .basis import build_basis, build_quadrature, graded_exponents
from .closures.anisotropic import backscatter_limiter
from .filters import project_grid, test_filter
from .gas import GasParameters, conserved_from_primitives, deviator
from .mesh import ChannelMeshSpec, build_mesh
from .solver import LDGSolver
from .timestep import ssprk54_step


def tet_moment(a, b, c):
    """Exact integral of x^a y^b z^c over the unit reference tetrahedron."""
    return Fraction(factorial(a) * factorial(b) * factorial(c), factorial(a + b + c + 3))


def check_basis(qs=(1, 2, 3, 4)):
    err = 0.0
    for q in qs:
        G = build_basis(q).gram()
        err = max(err, np.abs(G - np.eye(len(G))).max())
    return err < 1e-12, f"max |Gram - I| = {err:.2e}"


def check_quadrature(qs=(1, 2, 3, 4)):
    err = 0.0
    for q in qs:
        quad = build_quadrature(q)
        x, y, z = quad.nodes.T
        for a, b, c in graded_exponents(2 * q):
            exact = float(tet_moment(a, b, c))
            val = np.dot(quad.weights, x**a * y**b * z**c)
            err = max(err, abs(val - exact) / exact)
    return err < 1e-12, f"max relative moment error = {err:.2e}"


def check_filters(q=3, q_hat=1, n_elem=100, seed=0):
    basis = build_basis(q)
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((n_elem, basis.n_modes, 2))
    vals = np.matmul(basis.phi, c)
    c2 = project_grid(vals, basis)
    t1 = test_filter(c, q_hat, basis)
    idem = max(np.abs(c2 - c).max(), np.abs(test_filter(t1, q_hat, basis) - t1).max())
    return idem < 1e-12, f"projection/truncation idempotence error = {idem:.2e}"


def check_limiter(n=10000, seed=1):
    rng = np.random.default_rng(seed)
    tau = rng.standard_normal((n, 3, 3))
    tau = 0.5 * (tau + np.swapaxes(tau, 1, 2))
    g = rng.standard_normal((n, 3, 3))
    S = g + np.swapaxes(g, 1, 2)
    sigma = deviator(S)
    beta = backscatter_limiter(tau, sigma, S, 1.0)
    diss = np.einsum("nij,nij->n", sigma, S) - beta * np.einsum("nij,nij->n", tau, S)
    ok = np.all((beta >= 0) & (beta <= 1)) and diss.min() >= -1e-14
    return ok, f"beta in [{beta.min():.3g}, {beta.max():.3g}], min dissipation {diss.min():.2e}"


def check_ssprk():
    rhs = lambda y: np.array([y[1], -y[0]])
    errs = []
    for n in (20, 40):
        y = np.array([1.0, 0.0])
        dt = 2.0 / n
        for _ in range(n):
            y = ssprk54_step(y, dt, rhs)
        errs.append(np.abs(y - [np.cos(2.0), -np.sin(2.0)]).max())
    order = np.log2(errs[0] / errs[1])
    return order >= 3.9, f"observed order {order:.2f}"


def check_freestream(q=2):
    p = GasParameters(0.5, 100.0)
    mesh = build_mesh(ChannelMeshSpec(2, 2, 2, 2.0, 2.0, omega=0.5, periodic_y=True))
    s = LDGSolver(mesh, q, p)
    nodes = s.geom.nodes
    shape = nodes.shape[:-1]
    U = s.project(conserved_from_primitives(
        np.full(shape, 1.3), np.broadcast_to([0.4, -0.2, 0.1], shape + (3,)), np.full(shape, 0.9), p
    ))
    r = np.abs(s.residual(U)).max()
    return r < 1e-12, f"max |R| = {r:.2e}"


CHECKS = (
    ("basis orthonormality", check_basis),
    ("quadrature moments", check_quadrature),
    ("filter idempotence", check_filters),
    ("backscatter limiter", check_limiter),
    ("SSPRK(5,4) order", check_ssprk),
    ("freestream preservation", check_freestream),
)


def run_checks(out=print):
    """Run every check; returns True when all pass."""
    ok_all = True
    for name, fn in CHECKS:
        ok, detail = fn()
        ok_all &= bool(ok)
        out(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok_all

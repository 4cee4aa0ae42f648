"""Orthonormal modal basis on the reference tetrahedron, quadrature rules and
affine reference-to-physical maps.

The reference tetrahedron has vertices (0,0,0), (1,0,0), (0,1,0), (0,0,1) and
volume 1/6; the reference triangle has vertices (0,0), (1,0), (0,1) and area
1/2.  Modes are orthonormal with respect to the reference volume measure, so
the element mass matrix is ``|det J| * I``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import DegenerateElementError, InvalidParameterError

MAX_DEGREE = 8
REF_VOLUME = 1.0 / 6.0
REF_AREA = 0.5


def n_modes(q):
    return (q + 1) * (q + 2) * (q + 3) // 6


@dataclass(frozen=True)
class Quadrature:
    """Quadrature rule on a reference simplex (tetrahedron or triangle)."""

    nodes: np.ndarray
    weights: np.ndarray
    strength: int

    @property
    def n_points(self):
        return len(self.weights)


def _gauss_jacobi_01(n, alpha):
    # nodes/weights on [0,1] for the weight (1-s)**alpha
    t, w = roots_jacobi(n, alpha, 0.0)
    return 0.5 * (1.0 + t), w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def build_quadrature(q):
    """Collapsed (conical product) Gauss-Jacobi rule on the reference tet,
    exact for polynomials of total degree ``2q``; all weights positive."""
    if not 0 <= q <= MAX_DEGREE:
        raise InvalidParameterError(f"quadrature degree q={q} outside [0, {MAX_DEGREE}]")
    n = q + 1
    a, wa = _gauss_jacobi_01(n, 0.0)
    b, wb = _gauss_jacobi_01(n, 1.0)
    c, wc = _gauss_jacobi_01(n, 2.0)
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    W = wa[:, None, None] * wb[None, :, None] * wc[None, None, :]
    x = A * (1.0 - B) * (1.0 - C)
    y = B * (1.0 - C)
    z = C
    nodes = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    return Quadrature(nodes, W.ravel().copy(), 2 * q)


@lru_cache(maxsize=None)
def build_face_quadrature(q):
    """Collapsed Gauss-Jacobi rule on the reference triangle, exact to degree ``2q``."""
    if not 0 <= q <= MAX_DEGREE:
        raise InvalidParameterError(f"quadrature degree q={q} outside [0, {MAX_DEGREE}]")
    n = q + 1
    a, wa = _gauss_jacobi_01(n, 0.0)
    b, wb = _gauss_jacobi_01(n, 1.0)
    A, B = np.meshgrid(a, b, indexing="ij")
    W = wa[:, None] * wb[None, :]
    nodes = np.stack([(A * (1.0 - B)).ravel(), B.ravel()], axis=1)
    return Quadrature(nodes, W.ravel().copy(), 2 * q)


def graded_exponents(q):
    """Multi-indices (a, b, c) with a+b+c <= q, ordered by total degree."""
    out = []
    for d in range(q + 1):
        for a in range(d, -1, -1):
            for b in range(d - a, -1, -1):
                out.append((a, b, d - a - b))
    return out


def _jacobi_coeffs(n, alpha):
    # P_{n+1} = ((b + c*x) P_n - d P_{n-1}) / a for Jacobi(alpha, 0)
    a = 2.0 * (n + 1) * (n + alpha + 1) * (2 * n + alpha)
    b = (2 * n + alpha + 1) * alpha**2
    c = (2 * n + alpha) * (2 * n + alpha + 1) * (2 * n + alpha + 2)
    d = 2.0 * (n + alpha) * n * (2 * n + alpha + 2)
    return a, b, c, d


def _dubiner(points, q):
    """Unnormalised Dubiner polynomials and gradients at reference points.

    Uses the collapsed-coordinate recurrences written in homogeneous form so
    no division by (1 - z) or (y + z) occurs anywhere on the closed tet.
    """
    pts = np.atleast_2d(points)
    n = len(pts)
    # coordinates on the [-1, 1] tetrahedron
    x, y, z = (2.0 * pts[:, d] - 1.0 for d in range(3))
    one = np.ones(n)
    zero = np.zeros(n)

    def vg(v, g):
        return v, np.stack(g, axis=-1)

    f1 = vg(1.0 + x + 0.5 * (y + z), (one, 0.5 * one, 0.5 * one))
    f2 = vg((0.5 * (y + z)) ** 2, (zero, 0.5 * (y + z), 0.5 * (y + z)))
    f3 = vg(0.5 * (1.0 + 2.0 * y + z), (zero, one, 0.5 * one))
    f4 = vg(0.5 * (1.0 - z), (zero, zero, -0.5 * one))
    f5 = vg(0.25 * (1.0 - z) ** 2, (zero, zero, -0.5 * (1.0 - z)))
    zz = vg(z, (zero, zero, one))

    def mul(u, v):
        return u[0] * v[0], u[0][:, None] * v[1] + v[0][:, None] * u[1]

    def lin(*terms):
        val = sum(c * t[0] for c, t in terms)
        grad = sum(c * t[1] for c, t in terms)
        return val, grad

    unit = (one, np.zeros((n, 3)))
    A = [unit]
    if q >= 1:
        A.append(f1)
    for p in range(1, q):
        a1 = (2 * p + 1) / (p + 1)
        a2 = p / (p + 1)
        A.append(lin((a1, mul(f1, A[p])), (-a2, mul(f2, A[p - 1]))))

    B = {}
    for p in range(q + 1):
        alpha = 2 * p + 1
        B[p, 0] = A[p]
        if p + 1 <= q:
            # t P_1(eta) = ((alpha+2) eta t + alpha t) / 2
            B[p, 1] = mul(A[p], lin((0.5 * (alpha + 2), f3), (0.5 * alpha, f4)))
        for k in range(1, q - p):
            a, b, c, d = _jacobi_coeffs(k, alpha)
            B[p, k + 1] = lin(
                (b / a, mul(f4, B[p, k])),
                (c / a, mul(f3, B[p, k])),
                (-d / a, mul(f5, B[p, k - 1])),
            )

    out = {}
    for (p, k), Bpk in B.items():
        alpha = 2 * p + 2 * k + 2
        out[p, k, 0] = Bpk
        if p + k + 1 <= q:
            P1 = lin((0.5 * (alpha + 2), zz), (0.5 * alpha, unit))
            out[p, k, 1] = mul(Bpk, P1)
            prev, cur = unit, P1
            for r in range(1, q - p - k):
                a, b, c, d = _jacobi_coeffs(r, alpha)
                nxt = lin((b / a, cur), (c / a, mul(zz, cur)), (-d / a, prev))
                out[p, k, r + 1] = mul(Bpk, nxt)
                prev, cur = cur, nxt

    exps = graded_exponents(q)
    val = np.empty((n, len(exps)))
    grad = np.empty((n, len(exps), 3))
    for m, e in enumerate(exps):
        val[:, m] = out[e][0]
        grad[:, m] = 2.0 * out[e][1]
    return val, grad


class Basis:
    """Orthonormal, degree-graded modal basis of P^q on the reference tet.

    Dubiner polynomials are orthogonal already; two Cholesky passes fix the
    normalisation and remove rounding.  The transform is lower triangular,
    so the first ``n_modes(d)`` functions span exactly P^d for every d <= q.
    """

    def __init__(self, q):
        if not 0 <= q <= MAX_DEGREE:
            raise InvalidParameterError(f"basis degree q={q} outside [0, {MAX_DEGREE}]")
        self.q = q
        self.n_modes = n_modes(q)
        self.degrees = np.array([sum(e) for e in graded_exponents(q)])
        self.quadrature = build_quadrature(q)
        quad = self.quadrature
        psi, _ = _dubiner(quad.nodes, q)
        T = np.eye(self.n_modes)
        for _ in range(2):
            phi = psi @ T.T
            gram = phi.T @ (quad.weights[:, None] * phi)
            L = np.linalg.cholesky(gram)
            T = np.linalg.solve(L, T)
        self._transform = T
        self.phi, self.grad_phi = self.evaluate(quad.nodes, gradient=True)

    @property
    def weights(self):
        return self.quadrature.weights

    def n_modes_of_degree(self, d):
        return n_modes(d)

    def evaluate(self, points, gradient=False):
        """Mode values (n_points, n_modes) and optionally reference gradients
        (n_points, n_modes, 3) at reference points."""
        psi, dpsi = _dubiner(points, self.q)
        val = psi @ self._transform.T
        if not gradient:
            return val
        grad = np.einsum("pkd,mk->pmd", dpsi, self._transform)
        return val, grad

    def gram(self):
        return self.phi.T @ (self.weights[:, None] * self.phi)


@lru_cache(maxsize=None)
def build_basis(q):
    return Basis(q)


@dataclass
class ElementGeometry:
    """Affine maps of a batch of tetrahedra.

    ``jacobian[e]`` has columns ``v1-v0, v2-v0, v3-v0``; ``inv_jacobian[e]``
    maps physical to reference directions, so a physical gradient is
    ``inv_jacobian.T @ reference_gradient``.
    """

    vertices: np.ndarray
    jacobian: np.ndarray
    inv_jacobian: np.ndarray
    det: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray

    def physical_gradients(self, ref_grad):
        """Map reference gradients (n_points, n_modes, 3) to physical
        gradients (n_elem, n_points, n_modes, 3)."""
        return np.einsum("pmk,ekd->epmd", ref_grad, self.inv_jacobian)

    def to_reference(self, points):
        """Reference coordinates of physical ``points`` with shape (n_elem, n, 3)."""
        rel = points - self.vertices[:, None, 0, :]
        return np.einsum("ekd,end->enk", self.inv_jacobian, rel)


def map_to_physical(vertices, basis):
    """Geometry of one tet ``(4, 3)`` or a batch ``(n_elem, 4, 3)``."""
    v = np.asarray(vertices, dtype=float)
    if v.ndim == 2:
        v = v[None]
    J = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0], v[:, 3] - v[:, 0]], axis=2)
    det = np.linalg.det(J)
    scale = np.max(np.abs(J), axis=(1, 2)) ** 3
    bad = det <= 1e-14 * scale
    if np.any(bad):
        raise DegenerateElementError(
            f"non-positive Jacobian for element(s) {np.flatnonzero(bad)[:10].tolist()}"
        )
    Jinv = np.linalg.inv(J)
    ref = basis.quadrature.nodes
    nodes = v[:, None, 0, :] + np.einsum("edk,pk->epd", J, ref)
    weights = det[:, None] * basis.weights[None, :]
    return ElementGeometry(v, J, Jinv, det, nodes, weights)

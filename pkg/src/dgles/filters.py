"""Modal fields, the projection (grid) filter, the modal-truncation test filter,
pointwise Favre ratios and the filter widths."""

from dataclasses import dataclass

import numpy as np

from .basis import n_modes
from .errors import InvalidParameterError, PositivityError

CONSERVED = ("rho", "rho_u", "rho_v", "rho_w", "rho_e")
GRADIENTS = tuple(f"d{v}/d{x}" for v in ("u", "v", "w", "T") for x in "xyz")


@dataclass
class ModalField:
    """Per-element modal coefficients, shape (n_elem, n_modes, n_vars)."""

    coeffs: np.ndarray
    names: tuple = CONSERVED

    @property
    def n_modes(self):
        return self.coeffs.shape[1]

    def evaluate(self, table):
        """Values at the points of ``table`` (n_points, n_modes)."""
        return np.matmul(table, self.coeffs)

    def copy(self):
        return ModalField(self.coeffs.copy(), self.names)


def project_grid(samples, basis):
    """L2 projection onto P^q of values sampled at the quadrature nodes.

    ``samples`` has shape (n_elem, n_nodes[, n_vars]); the orthonormal basis
    makes the per-element Gram matrix the identity, so the projection is a
    weighted transpose.
    """
    s = np.asarray(samples, dtype=float)
    squeeze = s.ndim == 2
    if squeeze:
        s = s[..., None]
    coeffs = np.matmul((basis.phi * basis.weights[:, None]).T, s)
    return coeffs[..., 0] if squeeze else coeffs


def test_filter(coeffs, q_hat, basis):
    """Zero the coefficients of modes whose total degree exceeds ``q_hat``."""
    if not 0 <= q_hat < basis.q:
        raise InvalidParameterError(f"test filter degree {q_hat} must satisfy 0 <= q_hat < q={basis.q}")
    c = coeffs.coeffs if isinstance(coeffs, ModalField) else coeffs
    out = np.array(c, dtype=float, copy=True)
    out[:, n_modes(q_hat):] = 0.0
    if isinstance(coeffs, ModalField):
        return ModalField(out, coeffs.names)
    return out


def favre_ratio(rho_phi, rho):
    """Pointwise Favre-filtered value ``rho_phi / rho`` at nodes."""
    rho = np.asarray(rho)
    if np.any(rho <= 0.0) or not np.all(np.isfinite(rho)):
        bad = np.argwhere(~(rho > 0.0))
        raise PositivityError(f"nonpositive density at node index {tuple(bad[0])}")
    rp = np.asarray(rho_phi)
    if rp.ndim > rho.ndim:
        return rp / rho.reshape(rho.shape + (1,) * (rp.ndim - rho.ndim))
    return rp / rho


@dataclass
class FilterScales:
    delta: np.ndarray
    delta_hat: np.ndarray


def lilly_factor(dims):
    """Anisotropy correction for hex dimensions ``dims`` (n, 3)."""
    dims = np.atleast_2d(np.asarray(dims, dtype=float))
    order = np.argsort(-dims, axis=1, kind="stable")
    srt = np.take_along_axis(dims, order, axis=1)
    la = np.log(srt[:, 1] / srt[:, 0])
    lk = np.log(srt[:, 2] / srt[:, 0])
    return np.cosh(np.sqrt(4.0 / 27.0 * (la * la - la * lk + lk * lk)))


def filter_scales(hex_dims, n_q, n_q_hat):
    """Grid and test filter widths per element from the parent hex dimensions."""
    dims = np.atleast_2d(np.asarray(hex_dims, dtype=float))
    if np.any(dims <= 0.0):
        raise InvalidParameterError("hex dimensions must be positive")
    f = lilly_factor(dims)
    vol = np.prod(dims, axis=1)
    return FilterScales(np.cbrt(vol / n_q) * f, np.cbrt(vol / n_q_hat) * f)


class NodalProjector:
    """Projection of node values onto P^d (d <= q) evaluated back at nodes,
    plus the physical gradient of that projection.

    With ``d = q_hat`` this is the test filter applied to arbitrary node data
    (products, Favre quantities), which is how every hatted quantity is formed.
    """

    def __init__(self, basis, degree):
        if not 0 <= degree <= basis.q:
            raise InvalidParameterError(f"projection degree {degree} outside [0, {basis.q}]")
        k = n_modes(degree)
        self.degree = degree
        self.n_modes = k
        phi = basis.phi[:, :k]
        self._to_modes = (phi * basis.weights[:, None]).T  # (k, n_nodes)
        self._values = phi
        self._ref_grad = basis.grad_phi[:, :k, :]
        # (p*3 + k, m) table of reference derivatives
        self._grad_table = np.ascontiguousarray(self._ref_grad.transpose(0, 2, 1).reshape(-1, k))
        self.matrix = phi @ self._to_modes

    def modes(self, nodes):
        return np.matmul(self._to_modes, nodes)

    def __call__(self, nodes):
        """Node values (n_elem, n_nodes, ...) -> projected node values."""
        shape = nodes.shape
        flat = nodes.reshape(shape[0], shape[1], -1)
        return np.matmul(self.matrix, flat).reshape(shape)

    def gradient(self, nodes, inv_jacobian):
        """Physical gradient of the projection, shape (n_elem, n_nodes, ..., 3)."""
        shape = nodes.shape
        flat = nodes.reshape(shape[0], shape[1], -1)
        c = np.matmul(self._to_modes, flat)  # (e, k, v)
        n = shape[1]
        gref = np.matmul(self._grad_table, c).reshape(shape[0], n, 3, -1).transpose(0, 1, 3, 2)
        g = np.matmul(gref, inv_jacobian[:, None])
        return g.reshape(shape + (3,))

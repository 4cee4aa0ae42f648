"""Periodic channel mesh: a tanh-stretched structured hex grid split into
conforming tetrahedra."""

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidParameterError

# minimum stretching parameter; below this the grid is uniform to round-off
OMEGA_MIN = 1e-8

# local faces of a tet, as local vertex triples (face f is opposite vertex f)
TET_FACES = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))


@dataclass
class ChannelMeshSpec:
    Nx: int
    Ny: int
    Nz: int
    Lx: float
    Lz: float
    Ly: float = 2.0
    omega: float = 1.0
    y1_target: float = None
    periodic_y: bool = False

    def __post_init__(self):
        problems = []
        for name in ("Nx", "Ny", "Nz"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                problems.append(f"{name} must be a positive integer, got {v}")
        if not self.Lx > 0 or not self.Lz > 0:
            problems.append("Lx and Lz must be positive")
        if self.Ly != 2.0:
            problems.append("Ly must be 2 (the half height is the reference length)")
        if self.y1_target is None and not self.omega > 0:
            problems.append(f"omega must be positive, got {self.omega}")
        if problems:
            raise InvalidParameterError("; ".join(problems))
        if self.y1_target is not None:
            self.omega = solve_omega(self.y1_target, self.Ny)

    @property
    def volume(self):
        return self.Lx * self.Ly * self.Lz


def stretched_planes(spec_or_omega, Ny=None):
    """y-coordinates of the Ny+1 wall-parallel grid planes.

    Accepts a :class:`ChannelMeshSpec` or ``(omega, Ny)``.
    """
    if isinstance(spec_or_omega, ChannelMeshSpec):
        omega, Ny = spec_or_omega.omega, spec_or_omega.Ny
    else:
        omega = spec_or_omega
    if not omega > 0 or Ny < 1:
        raise InvalidParameterError(f"need omega > 0 and Ny >= 1 (omega={omega}, Ny={Ny})")
    s = 1.0 - 2.0 * np.arange(Ny + 1) / Ny
    if omega < 1e-6:
        # tanh(w s)/tanh(w) = s (1 + w^2 (1 - s^2)/3) + O(w^4)
        y = -s * (1.0 + omega**2 * (1.0 - s**2) / 3.0)
    else:
        y = -np.tanh(omega * s) / np.tanh(omega)
    if not np.all(np.isfinite(y)):
        raise InvalidParameterError(f"non-finite plane coordinates for omega={omega}")
    # exact symmetry and end points
    y = 0.5 * (y - y[::-1])
    y[0], y[-1] = -1.0, 1.0
    return y


def solve_omega(y1_target, Ny):
    """Stretching parameter placing the first off-wall plane at ``y1_target``."""
    uniform = -1.0 + 2.0 / Ny
    if not -1.0 < y1_target <= uniform:
        raise InvalidParameterError(
            f"y1_target={y1_target} infeasible for Ny={Ny}: need -1 < y1 <= {uniform}"
        )
    if y1_target >= uniform - 1e-15:
        return OMEGA_MIN

    def resid(w):
        return stretched_planes(w, Ny)[1] - y1_target

    hi = 1.0
    while resid(hi) > 0:
        hi *= 2.0
        if hi > 700:
            raise InvalidParameterError(f"y1_target={y1_target} requires omega beyond 700")
    return brentq(resid, OMEGA_MIN, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


@dataclass
class ChannelMesh:
    """Tetrahedral channel mesh.

    Interior faces include the periodic ones; ``face_shift[f]`` is the
    translation carrying the face as seen from the left element onto the
    same face as seen from the right element (zero for ordinary interior
    faces).  Boundary faces lie on the walls ``y = -1`` (tag -1) and
    ``y = +1`` (tag +1).
    """

    spec: ChannelMeshSpec
    vertices: np.ndarray
    tets: np.ndarray
    hex_index: np.ndarray
    hex_dims: np.ndarray
    y_planes: np.ndarray
    face_elems: np.ndarray
    face_local: np.ndarray
    face_shift: np.ndarray
    face_periodic: np.ndarray
    bface_elem: np.ndarray
    bface_local: np.ndarray
    bface_tag: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_elements(self):
        return len(self.tets)

    @property
    def n_faces(self):
        return len(self.face_elems)

    def element_vertices(self):
        return self.vertices[self.tets]

    def volumes(self):
        v = self.element_vertices()
        J = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0], v[:, 3] - v[:, 0]], axis=2)
        return np.linalg.det(J) / 6.0

    def face_vertices(self, elem, local):
        """Physical vertex coordinates (n, 3, 3) of local faces of elements."""
        tri = np.asarray(TET_FACES)[local]
        return self.vertices[self.tets[elem[:, None], tri]]

    def inradius(self):
        v = self.element_vertices()
        area = np.zeros(len(v))
        for tri in TET_FACES:
            a, b, c = v[:, tri[0]], v[:, tri[1]], v[:, tri[2]]
            area += 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
        return 3.0 * self.volumes() / area

    def dump(self, path):
        """Plain-text listing: vertices, then tets with their parent hex."""
        with open(path, "w") as fh:
            fh.write(f"# vertices {len(self.vertices)}\n")
            for i, (x, y, z) in enumerate(self.vertices):
                fh.write(f"{i} {x:.17g} {y:.17g} {z:.17g}\n")
            fh.write(f"# tets {len(self.tets)}\n")
            for t, h in zip(self.tets, self.hex_index):
                fh.write(f"{t[0]} {t[1]} {t[2]} {t[3]} {h}\n")


def wall_distance(points):
    """Distance to the nearest channel wall, ``1 - |y|``."""
    return 1.0 - np.abs(np.asarray(points)[..., 1])


def build_mesh(spec):
    Nx, Ny, Nz = int(spec.Nx), int(spec.Ny), int(spec.Nz)
    xs = np.linspace(0.0, spec.Lx, Nx + 1)
    ys = stretched_planes(spec)
    zs = np.linspace(0.0, spec.Lz, Nz + 1)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    vertices = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def vid(i, j, k):
        return (i * (Ny + 1) + j) * (Nz + 1) + k

    # Kuhn split: one tet per path 000 -> 111 through the unit cube; every
    # hex uses the same main diagonal, so shared faces are triangulated alike.
    kuhn = []
    for perm in permutations(range(3)):
        p = np.zeros(3, dtype=int)
        path = [p.copy()]
        for axis in perm:
            p[axis] += 1
            path.append(p.copy())
        kuhn.append(np.array(path))
    kuhn = np.array(kuhn)  # (6, 4, 3)

    I, J, K = np.meshgrid(np.arange(Nx), np.arange(Ny), np.arange(Nz), indexing="ij")
    I, J, K = I.ravel(), J.ravel(), K.ravel()
    n_hex = len(I)
    hex_ids = (I * Ny + J) * Nz + K
    tets = np.empty((n_hex, 6, 4), dtype=np.int64)
    for t in range(6):
        for c in range(4):
            di, dj, dk = kuhn[t, c]
            tets[:, t, c] = vid(I + di, J + dj, K + dk)
    tets = tets.reshape(-1, 4)
    hex_index = np.repeat(hex_ids, 6)
    dims = np.stack(
        [np.full(n_hex, spec.Lx / Nx), ys[J + 1] - ys[J], np.full(n_hex, spec.Lz / Nz)], axis=1
    )
    hex_dims = np.repeat(dims, 6, axis=0)

    # positive orientation
    v = vertices[tets]
    det = np.einsum(
        "ij,ij->i", v[:, 1] - v[:, 0], np.cross(v[:, 2] - v[:, 0], v[:, 3] - v[:, 0])
    )
    neg = det < 0
    tets[neg, 2], tets[neg, 3] = tets[neg, 3].copy(), tets[neg, 2].copy()

    n_el = len(tets)
    tri = np.asarray(TET_FACES)
    fverts = tets[:, tri]  # (n_el, 4, 3)
    ijk = np.stack(np.unravel_index(np.arange(len(vertices)), (Nx + 1, Ny + 1, Nz + 1)), axis=1)
    shape = np.array([Nx + 1, Ny + 1, Nz + 1])

    def face_keys(vert_ijk):
        flat = (vert_ijk[..., 0] * shape[1] + vert_ijk[..., 1]) * shape[2] + vert_ijk[..., 2]
        return np.sort(flat, axis=-1)

    def match(keys):
        order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
        sk = keys[order]
        same = np.all(sk[1:] == sk[:-1], axis=1)
        starts = np.flatnonzero(np.r_[True, ~same])
        counts = np.diff(np.r_[starts, len(sk)])
        if np.any(counts > 2):
            raise RuntimeError("non-manifold face in tetrahedral mesh")
        return order[starts[counts == 2]], order[starts[counts == 2] + 1], order[starts[counts == 1]]

    all_ijk = ijk[fverts].reshape(-1, 3, 3)
    a, b, singles = match(face_keys(all_ijk))
    left, right, shifts = [a], [b], [np.zeros((len(a), 3))]

    periodic_axes = [0, 2] + ([1] if spec.periodic_y else [])
    period = np.array([spec.Lx, spec.Ly, spec.Lz])
    for ax in periodic_axes:
        n_ax = shape[ax] - 1
        s_ijk = all_ijk[singles]
        low = singles[np.all(s_ijk[:, :, ax] == 0, axis=1)]
        high = singles[np.all(s_ijk[:, :, ax] == n_ax, axis=1)]
        moved = all_ijk[high].copy()
        moved[:, :, ax] = 0
        cand = np.concatenate([low, high])
        keys = np.concatenate([face_keys(all_ijk[low]), face_keys(moved)])
        pa, pb, rest = match(keys)
        if len(rest):
            raise RuntimeError("unmatched periodic face")
        lo, hi = cand[np.minimum(pa, pb)], cand[np.maximum(pa, pb)]
        sh = np.zeros((len(lo), 3))
        sh[:, ax] = period[ax]
        left.append(lo)
        right.append(hi)
        shifts.append(sh)
        singles = np.setdiff1d(singles, cand)

    a = np.concatenate(left)
    b = np.concatenate(right)
    face_elems = np.stack([a // 4, b // 4], axis=1)
    face_local = np.stack([a % 4, b % 4], axis=1)
    face_shift = np.concatenate(shifts)
    face_periodic = np.any(face_shift != 0.0, axis=1)

    bface_elem = singles // 4
    bface_local = singles % 4
    by = vertices[fverts[bface_elem, bface_local]][:, :, 1]
    if not np.all(np.abs(np.abs(by) - 1.0) == 0.0):
        raise RuntimeError("boundary face not on a wall")
    bface_tag = np.sign(by[:, 0]).astype(int)

    return ChannelMesh(
        spec=spec,
        vertices=vertices,
        tets=tets,
        hex_index=hex_index,
        hex_dims=hex_dims,
        y_planes=ys,
        face_elems=face_elems,
        face_local=face_local,
        face_shift=face_shift,
        face_periodic=face_periodic,
        bface_elem=bface_elem,
        bface_local=bface_local,
        bface_tag=bface_tag,
    )

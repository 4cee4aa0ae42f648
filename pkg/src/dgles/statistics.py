"""Plane-averaged channel statistics with wall-mirror symmetrisation.

Samples are taken on the wall-parallel element faces (the y-planes of the
structured grid), averaged over the face quadrature and in time.  Stations
are reported for the lower half channel, ``y = -|y|``; quantities that are
odd under ``y -> -y`` (an odd number of wall-normal indices) are folded with
a sign flip so that a snapshot and its mirror image accumulate identically.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .basis import n_modes
from .errors import NotReadyError
from .gas import viscosity
from .mesh import TET_FACES

# (name, parity) of every plane-averaged quantity
QUANTITIES = (
    ("rho", 1), ("u", 1), ("v", -1), ("w", 1), ("T", 1), ("p", 1), ("mu", 1),
    ("rho_u", 1), ("rho_v", -1), ("rho_w", 1), ("rho_T", 1),
    ("rho_uu", 1), ("rho_vv", 1), ("rho_ww", 1), ("rho_uv", -1), ("rho_uw", 1), ("rho_vw", -1),
    ("tau_11", 1), ("tau_22", 1), ("tau_33", 1), ("tau_12", -1), ("tau_13", 1), ("tau_23", -1),
    ("tau_kk", 1), ("dvdy", 1),
)
NAMES = tuple(n for n, _ in QUANTITIES)
PARITY = dict(QUANTITIES)

TABLE2_KEYS = (
    "tau_w", "Re_tau", "u_tau/U_b", "rho_w/rho_b", "U_c/U_b", "rho_c/rho_b", "rho_c/rho_w", "T_c/T_w",
)


class PlaneSampler:
    """Face-quadrature averages over the y-planes of a solver's mesh."""

    def __init__(self, solver):
        self.solver = solver
        mesh = solver.mesh
        ys = mesh.y_planes
        self.y_planes = ys
        self.n_planes = len(ys)
        self.area = mesh.spec.Lx * mesh.spec.Lz
        tri = np.asarray(TET_FACES)
        # interior faces lying on a plane
        fy = mesh.vertices[mesh.tets[mesh.face_elems[:, 0][:, None], tri[mesh.face_local[:, 0]]]][:, :, 1]
        flat = np.all(fy == fy[:, :1], axis=1) & ~mesh.face_periodic
        idx = np.flatnonzero(flat)
        plane = np.searchsorted(ys, fy[idx, 0])
        ok = (plane < len(ys)) & (np.abs(ys[np.minimum(plane, len(ys) - 1)] - fy[idx, 0]) == 0.0)
        self.int_faces = idx[ok]
        self.int_plane = plane[ok]
        if mesh.spec.periodic_y:
            self.wall_faces = np.zeros(0, dtype=int)
            self.wall_plane = np.zeros(0, dtype=int)
        else:
            self.wall_faces = np.arange(len(mesh.bface_elem))
            self.wall_plane = np.where(mesh.bface_tag < 0, 0, len(ys) - 1)
        W = solver.WF[self.int_faces].sum(axis=1)
        WB = solver.WB[self.wall_faces].sum(axis=1) if len(self.wall_faces) else np.zeros(0)
        cover = np.bincount(np.r_[self.int_plane, self.wall_plane], np.r_[W, WB], self.n_planes)
        self.covered = np.abs(cover - self.area) <= 1e-9 * self.area
        self._wall_grad_tables()

    def _wall_grad_tables(self):
        s = self.solver
        if not len(self.wall_faces):
            self.wall_dphi = None
            return
        # physical y-derivative of every mode at the wall points
        mesh = s.mesh
        e = mesh.bface_elem
        xB = s.points[s.sb].reshape(len(e), s.nfq, 3)
        rel = xB - s.geom.vertices[e][:, None, 0, :]
        ref = np.einsum("ekd,end->enk", s.geom.inv_jacobian[e], rel)
        _, g = s.basis.evaluate(ref.reshape(-1, 3), gradient=True)
        g = g.reshape(len(e), s.nfq, s.n_modes, 3)
        self.wall_dphi = np.einsum("epmk,ek->epm", g, s.geom.inv_jacobian[e][:, :, 1])

    def _plane_average(self, values_L, values_R, values_B):
        """values_* are (n_faces, nfq, k); returns (n_planes, k)."""
        s = self.solver
        k = values_L.shape[-1]
        out = np.zeros((self.n_planes, k))
        if len(self.int_faces):
            v = 0.5 * (values_L[self.int_faces] + values_R[self.int_faces])
            contrib = np.einsum("fp,fpk->fk", s.WF[self.int_faces], v)
            np.add.at(out, self.int_plane, contrib)
        if len(self.wall_faces):
            contrib = np.einsum("fp,fpk->fk", s.WB[self.wall_faces], values_B[self.wall_faces])
            np.add.at(out, self.wall_plane, contrib)
        return out / self.area

    def point_quantities(self, st):
        """Stack the sampled quantities at all solver points (P, n_q)."""
        p = self.solver.params
        u = st.u
        rho = st.rho
        T = st.T
        Q = np.empty((len(rho), len(NAMES)))
        cols = {
            "rho": rho, "u": u[:, 0], "v": u[:, 1], "w": u[:, 2], "T": T, "p": rho * T,
            "mu": viscosity(T, p.alpha),
            "rho_u": rho * u[:, 0], "rho_v": rho * u[:, 1], "rho_w": rho * u[:, 2], "rho_T": rho * T,
            "rho_uu": rho * u[:, 0] ** 2, "rho_vv": rho * u[:, 1] ** 2, "rho_ww": rho * u[:, 2] ** 2,
            "rho_uv": rho * u[:, 0] * u[:, 1], "rho_uw": rho * u[:, 0] * u[:, 2],
            "rho_vw": rho * u[:, 1] * u[:, 2],
        }
        tau = getattr(st, "tau", None)
        for (i, j) in ((1, 1), (2, 2), (3, 3), (1, 2), (1, 3), (2, 3)):
            cols[f"tau_{i}{j}"] = 0.0 if tau is None else tau[:, i - 1, j - 1]
        tkk = getattr(st, "tau_kk", None)
        cols["tau_kk"] = 0.0 if tkk is None else tkk
        gu = getattr(st, "grad_u", None)
        cols["dvdy"] = 0.0 if gu is None else gu[:, 1, 1]
        for k, n in enumerate(NAMES):
            Q[:, k] = cols[n]
        return Q

    def sample(self, st):
        """Instantaneous plane averages (n_planes, n_q) from a solver state."""
        s = self.solver
        Q = self.point_quantities(st)
        L = s._face_view(Q, "L")
        R = s._face_view(Q, "R")
        B = s._face_view(Q, "B") if len(s.eB) else np.zeros((0, s.nfq, Q.shape[1]))
        return self._plane_average(L, R, B)

    def wall_sample(self, U):
        """Instantaneous wall quantities from the wall-adjacent polynomials.

        Returns ``(dudy_w, rho_w)``: the wall-normal derivative of the mean
        streamwise velocity (lower-wall orientation) and the wall density.
        """
        s = self.solver
        if self.wall_dphi is None:
            return np.nan, np.nan
        e = s.mesh.bface_elem
        c = U[e]  # (Nb, nm, 5)
        vals = np.matmul(s.phiB, c)  # (Nb, nfq, 5)
        dy = np.matmul(self.wall_dphi, c)  # (Nb, nfq, 5)
        rho = vals[..., 0]
        u = vals[..., 1] / rho
        dudy = (dy[..., 1] - u * dy[..., 0]) / rho
        sign = np.where(s.mesh.bface_tag < 0, 1.0, -1.0)[:, None]
        W = s.WB
        area = 2.0 * self.area
        return float(np.sum(W * sign * dudy) / area), float(np.sum(W * rho) / area)


@dataclass
class ChannelStatistics:
    """Running time-weighted accumulators."""

    n_planes: int
    sums: np.ndarray = None
    wall: np.ndarray = None  # [dudy_w, rho_w, rho_b, rho_u_b]
    weight: float = 0.0
    n_samples: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sums is None:
            self.sums = np.zeros((self.n_planes, len(NAMES)))
        if self.wall is None:
            self.wall = np.zeros(4)

    def accumulate(self, plane_values, weight, wall_values=None):
        """Add one snapshot of plane averages with time weight ``weight``."""
        if not weight > 0:
            raise ValueError("statistics weight must be positive")
        self.sums += weight * np.asarray(plane_values)
        if wall_values is not None:
            self.wall += weight * np.asarray(wall_values, dtype=float)
        self.weight += weight
        self.n_samples += 1

    def means(self):
        if self.weight <= 0:
            raise NotReadyError("no statistics samples accumulated")
        return self.sums / self.weight

    def symmetric(self, y_planes):
        """Mirror-folded station means for the lower half channel.

        Returns ``(y, {name: values})`` with ``y`` ascending from -1 to 0
        (or to the last lower-half plane).
        """
        m = self.means()
        n = len(y_planes) - 1
        lower = np.arange(0, n // 2 + 1)
        upper = n - lower
        y = y_planes[lower]
        out = {}
        for k, name in enumerate(NAMES):
            out[name] = 0.5 * (m[lower, k] + PARITY[name] * m[upper, k])
        return y, out


def collect(solver, sampler, st, U):
    """Plane sample and wall/bulk sample of one state."""
    dudy, rho_w = sampler.wall_sample(U)
    totals = solver.integrate(U)
    vol = solver.mesh.spec.volume
    return sampler.sample(st), (dudy, rho_w, totals[0] / vol, totals[1] / vol)


def derived_profiles(stats, y_planes, u_tau=None, rho_w=None):
    """Mean profiles, density-weighted rms, total TKE and total shear."""
    y, m = stats.symmetric(y_planes)
    rho = m["rho"]
    out = {"y": y, "rho": rho, "u": m["u"], "v": m["v"], "w": m["w"], "T": m["T"], "p": m["p"]}
    tke = np.zeros_like(rho)
    for c in "uvw":
        fav = m[f"rho_{c}"] / rho
        var = m[f"rho_{c}{c}"] / rho - fav**2
        out[f"{c}_favre"] = fav
        out[f"{c}_rms"] = np.sqrt(np.maximum(var, 0.0))
        tke += 0.5 * (m[f"rho_{c}{c}"] - m[f"rho_{c}"] ** 2 / rho)
    out["tke_resolved"] = tke.copy()
    out["tke_total"] = tke + 0.5 * m["tau_kk"]
    shear = m["rho_uv"] - m["rho_u"] * m["rho_v"] / rho + m["tau_12"]
    out["shear_total"] = shear
    if u_tau is not None and rho_w is not None and u_tau > 0:
        out["shear_total_plus"] = shear / (rho_w * u_tau**2)
    out["dvdy"] = m["dvdy"]
    return out


def _center_value(y, values):
    """Value at y = 0 (last station, or linear extrapolation of the last two)."""
    if y[-1] == 0.0 or len(y) < 2:
        return values[-1]
    return values[-1] + (0.0 - y[-1]) * (values[-1] - values[-2]) / (y[-1] - y[-2])


def wall_quantities(stats, y_planes, params, mesh_spec, hex_heights, q, T_wall=1.0):
    """Table-2 style record plus grid spacings in wall units."""
    if stats.weight <= 0:
        raise NotReadyError("no statistics samples accumulated")
    dudy, rho_w, rho_b, rhou_b = stats.wall / stats.weight
    U_b = rhou_b / rho_b
    mu_w = float(viscosity(T_wall, params.alpha))
    tau_w = mu_w * dudy
    Re_tau = np.sqrt(rho_w * params.Re * dudy)
    u_tau = Re_tau / (params.Re * rho_w)
    y, m = stats.symmetric(y_planes)
    U_c = _center_value(y, m["u"])
    rho_c = _center_value(y, m["rho"])
    T_c = _center_value(y, m["T"])
    root = np.cbrt(6.0 * n_modes(q))
    dx = mesh_spec.Lx / (mesh_spec.Nx * root)
    dz = mesh_spec.Lz / (mesh_spec.Nz * root)
    dy = np.asarray(hex_heights) / root
    return {
        "tau_w": tau_w,
        "Re_tau": Re_tau,
        "u_tau/U_b": u_tau / U_b,
        "rho_w/rho_b": rho_w / rho_b,
        "U_c/U_b": U_c / U_b,
        "rho_c/rho_b": rho_c / rho_b,
        "rho_c/rho_w": rho_c / rho_w,
        "T_c/T_w": T_c / T_wall,
        "dx+": dx * Re_tau,
        "dy+_min": dy.min() * Re_tau,
        "dy+_max": dy.max() * Re_tau,
        "dz+": dz * Re_tau,
        "t_av": stats.weight,
        "n_samples": stats.n_samples,
    }


REFERENCE_BLOCK = (
    "# nondimensional: rho/rho_b, u/U_b, T/T_w, lengths/(channel half height), "
    "t U_b/(half height), stresses/(rho_b U_b^2)"
)


def write_profiles_csv(path, profiles):
    keys = list(profiles.keys())
    with open(path, "w", newline="") as fh:
        fh.write(REFERENCE_BLOCK + "\n")
        w = csv.writer(fh)
        w.writerow(keys)
        for i in range(len(profiles["y"])):
            w.writerow([f"{float(profiles[k][i]):.12g}" for k in keys])


def read_profiles_csv(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    keys = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return {k: data[:, i] for i, k in enumerate(keys)}


def format_record(record):
    return "".join(f"{k} = {float(v):.10g}\n" for k, v in record.items())


def parse_record(text):
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        k, v = line.split("=", 1)
        out[k.strip()] = float(v)
    return out

"""Semi-discrete LDG operator for the filtered compressible equations.

All pointwise work (primitive recovery, closures, fluxes) runs on one flat
array of points: volume quadrature nodes of every element, then the left and
right sides of every interior face, then the wall faces.  Element-level work
(the dynamic procedure) uses the volume block reshaped to
(n_elem, n_nodes, ...).
"""

from types import SimpleNamespace

import numpy as np

from .basis import build_basis, build_face_quadrature, map_to_physical
from .errors import InvalidParameterError, NumericalBlowupError, PositivityError
from .gas import viscosity
from .kernels import strain_fields, total_flux
from .mesh import TET_FACES, wall_distance


def rusanov(FnL, FnR, UL, UR, lam):
    """Rusanov flux from normal fluxes ``F(U).n`` of the two states."""
    return 0.5 * (FnL + FnR) - 0.5 * lam[..., None] * (UR - UL)


def convective_flux(U, u, p, params):
    """Inviscid flux (..., 5, 3) from conserved values, velocity and pressure."""
    F = np.empty(U.shape[:-1] + (5, 3))
    F[..., 0, :] = U[..., 1:4]
    F[..., 1:4, :] = U[..., 1:4, None] * u[..., None, :]
    pm = p / params.gMa2
    for i in range(3):
        F[..., 1 + i, i] += pm
    F[..., 4, :] = (U[..., 4] + p)[..., None] * u
    return F


def viscous_flux(u, sigma, grad_T, mu, params):
    """Molecular flux (..., 5, 3); mass row zero."""
    Re = params.Re
    F = np.zeros(u.shape[:-1] + (5, 3))
    F[..., 1:4, :] = sigma / Re
    F[..., 4, :] = (params.gMa2 / Re) * np.einsum("...i,...ij->...j", u, sigma)
    F[..., 4, :] += (mu / (params.kappa * Re * params.Pr))[..., None] * grad_T
    return F


def sound_speed(T, params):
    return np.sqrt(T) / params.Ma


class LDGSolver:
    """Residual operator ``dU/dt = R(U)`` on a channel mesh.

    ``model`` is None or a closure object (Smagorinsky or anisotropic).
    ``viscous=False`` drops molecular and subgrid fluxes (Euler equations).
    """

    def __init__(self, mesh, q, params, model=None, viscous=True, T_wall=1.0):
        if not viscous and model is not None:
            raise InvalidParameterError("a subgrid model requires viscous=True")
        self.mesh = mesh
        self.params = params
        self.model = model
        self.viscous = viscous
        self.T_wall = T_wall
        self.basis = basis = build_basis(q)
        self.q = q
        self.geom = geom = map_to_physical(mesh.element_vertices(), basis)
        self.n_elem = Ne = mesh.n_elements
        self.n_modes = nm = basis.n_modes
        self.nvq = nvq = basis.quadrature.n_points
        self.fquad = build_face_quadrature(q)
        self.nfq = self.fquad.n_points
        self.det = geom.det
        self.inv_det = 1.0 / geom.det
        self.Jinv = geom.inv_jacobian[:, None]
        self.JinvT = np.ascontiguousarray(np.swapaxes(geom.inv_jacobian, 1, 2))[:, None]

        w = basis.weights
        self.phi = basis.phi
        self.phi_w_T = np.ascontiguousarray((basis.phi * w[:, None]).T)  # (nm, nvq)
        # w_p * dphi_m/dxi_k, flattened as (m, p*3 + k)
        self.grad_w = np.ascontiguousarray(
            (basis.grad_phi * w[:, None, None]).transpose(1, 0, 2).reshape(nm, nvq * 3)
        )
        # same table with (m*3 + k, p) ordering for the gradient lift
        self.grad_w_mk = np.ascontiguousarray(
            (basis.grad_phi * w[:, None, None]).transpose(1, 2, 0).reshape(nm * 3, nvq)
        )
        self._build_faces()
        self.forcing = np.zeros(3)
        self._frozen = None
        self._stage = 0
        self.last = SimpleNamespace(nu_max=np.zeros(Ne), beta_saturation=0.0, coeffs=None)

    # ------------------------------------------------------------------ setup
    def _face_side(self, elem, local, shift=None, ref_elem=None):
        mesh, basis, geom = self.mesh, self.basis, self.geom
        tri = np.asarray(TET_FACES)[local]
        V = mesh.vertices[mesh.tets[elem[:, None], tri]]  # (n, 3, 3)
        a = self.fquad.nodes[:, 0][None, :, None]
        b = self.fquad.nodes[:, 1][None, :, None]
        x = V[:, None, 0] + a * (V[:, None, 1] - V[:, None, 0]) + b * (V[:, None, 2] - V[:, None, 0])
        cr = np.cross(V[:, 1] - V[:, 0], V[:, 2] - V[:, 0])
        nrm = np.linalg.norm(cr, axis=1)
        n = cr / nrm[:, None]
        opp = mesh.vertices[mesh.tets[elem, local]]
        n *= np.sign(np.einsum("fd,fd->f", n, V[:, 0] - opp))[:, None]
        W = nrm[:, None] * self.fquad.weights[None, :]  # 2 * area * w
        tables = []
        for e, xs in ((elem, x), (ref_elem, None if shift is None else x + shift[:, None, :])):
            if e is None:
                continue
            rel = xs - geom.vertices[e][:, None, 0, :]
            ref = np.einsum("ekd,end->enk", geom.inv_jacobian[e], rel)
            bary = np.concatenate([ref, 1.0 - ref.sum(-1, keepdims=True)], axis=-1)
            if bary.min() < -1e-9:
                raise RuntimeError("face quadrature point outside its element")
            tables.append(basis.evaluate(ref.reshape(-1, 3)).reshape(len(e), self.nfq, -1))
        return x, n, W, tables

    def _build_faces(self):
        mesh = self.mesh
        Nf, Nb, Ne = mesh.n_faces, len(mesh.bface_elem), self.n_elem
        eL, eR = mesh.face_elems[:, 0], mesh.face_elems[:, 1]
        xL, n, W, (phiL, phiR) = self._face_side(eL, mesh.face_local[:, 0], mesh.face_shift, eR)
        self.eL, self.eR = eL, eR
        self.nF, self.WF = n, W
        self.phiL, self.phiR = phiL, phiR
        self.phiLT = np.ascontiguousarray(np.swapaxes(phiL, 1, 2))
        self.phiRT = np.ascontiguousarray(np.swapaxes(phiR, 1, 2))
        self.eB = mesh.bface_elem
        if Nb:
            xB, nB, WB, (phiB,) = self._face_side(self.eB, mesh.bface_local)
        else:
            xB = np.zeros((0, self.nfq, 3))
            nB = np.zeros((0, 3))
            WB = np.zeros((0, self.nfq))
            phiB = np.zeros((0, self.nfq, self.n_modes))
        self.nB, self.WB, self.phiB = nB, WB, phiB
        self.phiBT = np.ascontiguousarray(np.swapaxes(phiB, 1, 2))

        nv, nf = Ne * self.nvq, Nf * self.nfq
        self.sv = slice(0, nv)
        self.sl = slice(nv, nv + nf)
        self.sr = slice(nv + nf, nv + 2 * nf)
        self.sb = slice(nv + 2 * nf, nv + 2 * nf + Nb * self.nfq)
        self.n_points = nv + 2 * nf + Nb * self.nfq
        self.points = np.concatenate(
            [self.geom.nodes.reshape(-1, 3), xL.reshape(-1, 3), (xL + mesh.face_shift[:, None]).reshape(-1, 3),
             xB.reshape(-1, 3)]
        )
        self.point_elem = np.concatenate(
            [np.repeat(np.arange(Ne), self.nvq), np.repeat(eL, self.nfq), np.repeat(eR, self.nfq),
             np.repeat(self.eB, self.nfq)]
        )
        self.wall_distance = wall_distance(self.points)
        self.is_wall = np.zeros(self.n_points, dtype=bool)
        self.is_wall[self.sb] = True
        if mesh.spec.periodic_y:
            self.wall_distance = np.full(self.n_points, np.inf)

        slot = -np.ones((Ne, 4), dtype=np.int64)
        slot[eL, mesh.face_local[:, 0]] = np.arange(Nf)
        slot[eR, mesh.face_local[:, 1]] = Nf + np.arange(Nf)
        slot[self.eB, mesh.bface_local] = 2 * Nf + np.arange(Nb)
        if np.any(slot < 0):
            raise RuntimeError("element face without connectivity")
        self.slot = slot

    # ------------------------------------------------------------- utilities
    def to_points(self, c):
        """Modal coefficients (Ne, nm, ...) -> values at all points (P, ...)."""
        tail = c.shape[2:]
        c2 = c.reshape(c.shape[0], c.shape[1], -1)
        k = c2.shape[2]
        out = np.empty((self.n_points, k))
        Ne, Nf, Nb, nfq = self.n_elem, len(self.eL), len(self.eB), self.nfq
        np.matmul(self.phi, c2, out=out[self.sv].reshape(Ne, self.nvq, k))
        np.matmul(self.phiL, c2[self.eL], out=out[self.sl].reshape(Nf, nfq, k))
        np.matmul(self.phiR, c2[self.eR], out=out[self.sr].reshape(Nf, nfq, k))
        if Nb:
            np.matmul(self.phiB, c2[self.eB], out=out[self.sb].reshape(Nb, nfq, k))
        return out.reshape((self.n_points,) + tail)

    def to_volume(self, c):
        return np.matmul(self.phi, c.reshape(c.shape[0], c.shape[1], -1)).reshape(
            (c.shape[0], self.nvq) + c.shape[2:]
        )

    def project(self, values):
        """L2 projection of volume-node values (Ne, nvq, ...) onto P^q."""
        v = values.reshape(values.shape[0], values.shape[1], -1)
        return np.matmul(self.phi_w_T, v).reshape((values.shape[0], self.n_modes) + values.shape[2:])

    def integrate(self, c):
        """Domain integral of each variable of a modal field (Ne, nm, nv)."""
        # mode 0 is the constant sqrt(6); its reference integral is 1/sqrt(6)
        return np.einsum("e,e...->...", self.det, c[:, 0]) / np.sqrt(6.0)

    def _scatter(self, cL, cR, cB):
        C = np.concatenate([cL, cR, cB]) if len(cB) else np.concatenate([cL, cR])
        s = self.slot
        return C[s[:, 0]] + C[s[:, 1]] + C[s[:, 2]] + C[s[:, 3]]

    def _face_view(self, a, side):
        sl = {"L": self.sl, "R": self.sr, "B": self.sb}[side]
        n = len(self.eB) if side == "B" else len(self.eL)
        return a[sl].reshape((n, self.nfq) + a.shape[1:])

    # ----------------------------------------------------------- LDG gradient
    def lift_gradient(self, phi_pts, hat_F, hat_B):
        """Weak gradient of point data ``phi_pts`` (P, nv).

        ``hat_F`` (Nf, nfq, nv) and ``hat_B`` (Nb, nfq, nv) are the single
        valued face traces.  Returns modal coefficients (Ne, nm, nv, 3).
        """
        Ne, nm = self.n_elem, self.n_modes
        nv = phi_pts.shape[1]
        vol = phi_pts[self.sv].reshape(Ne, self.nvq, nv)
        B = np.matmul(self.grad_w_mk, vol).reshape(Ne, nm, 3, nv).transpose(0, 1, 3, 2)
        # B[e,m,v,k] -> physical direction d via Jinv[k,d]
        G = -np.matmul(B, self.Jinv)
        XF = ((self.WF[..., None] * hat_F)[..., None] * self.nF[:, None, None, :]).reshape(len(self.eL), self.nfq, nv * 3)
        cL = np.matmul(self.phiLT, XF)
        cR = -np.matmul(self.phiRT, XF)
        if len(self.eB):
            XB = ((self.WB[..., None] * hat_B)[..., None] * self.nB[:, None, None, :]).reshape(len(self.eB), self.nfq, nv * 3)
            cB = np.matmul(self.phiBT, XB)
        else:
            cB = np.zeros((0, nm, nv * 3))
        surf = self._scatter(cL, cR, cB).reshape(Ne, nm, nv, 3)
        return G + surf * self.inv_det[:, None, None, None]

    def _centered(self, vals, wall_value):
        L = self._face_view(vals, "L")
        R = self._face_view(vals, "R")
        hat_F = 0.5 * (L + R)
        hat_B = np.broadcast_to(np.asarray(wall_value, dtype=float), (len(self.eB), self.nfq, vals.shape[1]))
        return hat_F, hat_B

    def auxiliary_gradients(self, U):
        """Modal gradients of (u, v, w, T), shape (Ne, nm, 4, 3), with no
        subgrid trace in the temperature."""
        st = self.state(U, with_closure=False)
        return np.concatenate([st.Gu, st.GT[:, :, None, :]], axis=2)

    # ---------------------------------------------------------------- stages
    def begin_step(self):
        """Mark a new time step (resets per-step frozen coefficients)."""
        self._frozen = None
        self._stage = 0

    def _check_positive(self, a, what):
        bad = ~(a > 0.0)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            e = int(self.point_elem[i])
            raise PositivityError(f"nonpositive {what} in element {e}", element=e)

    def state(self, U, with_closure=True):
        """Evaluate the full pointwise state needed by the fluxes."""
        p = self.params
        Ne = self.n_elem
        Up = self.to_points(U)
        rho = Up[:, 0]
        self._check_positive(rho, "density")
        m = Up[:, 1:4]
        u = m / rho[:, None]
        kin = np.einsum("pi,pi->p", m, u)
        st = SimpleNamespace(U=Up, rho=rho, m=m, u=u, kin=kin, tau=None, tau_kk=None, Fsgs_E=None)
        model = self.model if with_closure else None
        nb = len(self.eB)

        if self.viscous:
            hat_F, hat_B = self._centered(u, 0.0)
            Gu = self.lift_gradient(u, hat_F, hat_B)
            st.Gu = Gu
            grad_u = self.to_points(Gu)
            st.grad_u = grad_u
            n = self.n_points
            st.S, st.Sd, st.S_mag = np.empty((n, 3, 3)), np.empty((n, 3, 3)), np.empty(n)
            strain_fields(grad_u, st.S, st.Sd, st.S_mag)
        tau_kk = 0.0
        if model is not None:
            # wall-state velocity for viscous and subgrid fluxes
            u_w = u.copy()
            u_w[self.sb] = 0.0
            pts = SimpleNamespace(
                rho=rho, u=u_w, grad_u=grad_u, S=st.S, Sd=st.Sd, S_mag=st.S_mag,
                elem=self.point_elem, wall_distance=self.wall_distance,
            )
            vol = SimpleNamespace(
                rho=rho[self.sv].reshape(Ne, -1), m=m[self.sv].reshape(Ne, -1, 3),
                u=u[self.sv].reshape(Ne, -1, 3), grad_u=grad_u[self.sv].reshape(Ne, -1, 3, 3),
                S=st.S[self.sv].reshape(Ne, -1, 3, 3), S_mag=st.S_mag[self.sv].reshape(Ne, -1),
            )
            if self._frozen is not None:
                coeffs = self._frozen
            else:
                coeffs = model.prepare(vol)
            if getattr(model, "limits_backscatter", False):
                # resolved temperature (no subgrid trace) sets the limiter viscosity
                T0 = (Up[:, 4] - 0.5 * p.gMa2 * kin) / (p.cv * rho)
                self._check_positive(T0, "temperature")
                T0[self.sb] = self.T_wall
                tau, tau_kk = model.limited_stress(pts, coeffs, T0)
            else:
                tau, tau_kk = model.stress(pts, coeffs)
            st.tau, st.tau_kk = tau, tau_kk
            st.pts, st.vol, st.coeffs = pts, vol, coeffs

        T = (Up[:, 4] - 0.5 * p.gMa2 * (kin + tau_kk)) / (p.cv * rho)
        self._check_positive(T, "temperature")
        st.T = T
        st.p = rho * T

        if self.viscous:
            hat_F, hat_B = self._centered(T[:, None], self.T_wall)
            GT = self.lift_gradient(T[:, None], hat_F, hat_B)[:, :, 0, :]
            st.GT = GT
            st.grad_T = self.to_points(GT)
        if model is not None:
            st.pts.grad_T = st.grad_T
            st.vol.T = T[self.sv].reshape(Ne, -1)
            st.vol.grad_T = st.grad_T[self.sv].reshape(Ne, -1, 3)
            coeffs = model.prepare_energy(st.vol, st.coeffs)
            freeze = getattr(getattr(model, "cfg", None), "freeze_per_step", False)
            if freeze and self._frozen is None:
                self._frozen = coeffs
            st.coeffs = coeffs
            st.Fsgs_E = model.energy_flux(st.pts, st.tau, st.tau_kk, coeffs)
            self.last.coeffs = coeffs
            self.last.beta_saturation = getattr(model, "beta_saturation", 0.0)
            nu = model.viscosity_bound(st.pts, coeffs)
            self.last.nu_max = np.maximum.reduceat(nu[self.sv], np.arange(0, Ne * self.nvq, self.nvq))
        return st

    def fluxes(self, st):
        """Total flux F = Fc - Fv + Fsgs at every point (P, 5, 3)."""
        p = self.params
        F = np.empty((self.n_points, 5, 3))
        if not self.viscous:
            dummy = np.zeros((1, 3, 3))
            total_flux(st.U, st.T, dummy, dummy[:, 0], dummy, dummy[:, 0], self.is_wall, False, False,
                       p.gMa2, p.Re, p.kappa, p.Pr, p.alpha, self.T_wall, F)
            return F
        has_sgs = st.tau is not None
        tau = st.tau if has_sgs else np.zeros((1, 3, 3))
        E = st.Fsgs_E if has_sgs else np.zeros((1, 3))
        total_flux(st.U, st.T, st.Sd, st.grad_T, tau, E, self.is_wall, True, has_sgs,
                   p.gMa2, p.Re, p.kappa, p.Pr, p.alpha, self.T_wall, F)
        return F

    def residual(self, U, forcing=None):
        """Time derivative of the modal coefficients (Ne, nm, 5)."""
        p = self.params
        Ne, nm, Nf, Nb, nfq = self.n_elem, self.n_modes, len(self.eL), len(self.eB), self.nfq
        st = self.state(U)
        self._stage += 1
        F = self.fluxes(st)

        # volume term
        Fv = F[self.sv].reshape(Ne, self.nvq, 5, 3)
        Fref = np.matmul(Fv, self.JinvT)  # [e,p,v,k]
        Fref = Fref.transpose(0, 1, 3, 2).reshape(Ne, self.nvq * 3, 5)
        R = np.matmul(self.grad_w, Fref)

        # interior faces
        c = sound_speed(st.T, p)
        nF = self.nF
        FL = self._face_view(F, "L")
        FR = self._face_view(F, "R")
        FnL = np.einsum("fpvd,fd->fpv", FL, nF)
        FnR = np.einsum("fpvd,fd->fpv", FR, nF)
        unL = np.einsum("fpd,fd->fp", self._face_view(st.u, "L"), nF)
        unR = np.einsum("fpd,fd->fp", self._face_view(st.u, "R"), nF)
        lam = np.maximum(np.abs(unL) + self._face_view(c, "L"), np.abs(unR) + self._face_view(c, "R"))
        Fhat = rusanov(FnL, FnR, self._face_view(st.U, "L"), self._face_view(st.U, "R"), lam)
        X = self.WF[..., None] * Fhat
        cL = np.matmul(self.phiLT, X)
        cR = -np.matmul(self.phiRT, X)

        # walls: mirror ghost for the convective part
        if Nb:
            nB = self.nB
            UB = self._face_view(st.U, "B")
            uB = self._face_view(st.u, "B")
            TB = self._face_view(st.T, "B")
            rhoB = UB[..., 0]
            Tg = 2.0 * self.T_wall - TB
            if np.any(Tg <= 0.0):
                f = int(np.argwhere(Tg <= 0.0)[0, 0])
                e = int(self.eB[f])
                raise PositivityError(f"nonpositive ghost temperature at wall of element {e}", element=e)
            tkk = 0.0 if st.tau_kk is None or np.ndim(st.tau_kk) == 0 else self._face_view(st.tau_kk, "B")
            Ug = np.empty_like(UB)
            Ug[..., 0] = rhoB
            Ug[..., 1:4] = -UB[..., 1:4]
            Ug[..., 4] = p.cv * rhoB * Tg + 0.5 * p.gMa2 * (self._face_view(st.kin, "B") + tkk)
            Fc_i = convective_flux(UB, uB, rhoB * TB, p)
            Fc_g = convective_flux(Ug, -uB, rhoB * Tg, p)
            un = np.einsum("fpd,fd->fp", uB, nB)
            lamB = np.abs(un) + np.maximum(sound_speed(TB, p), sound_speed(Tg, p))
            FB = self._face_view(F, "B")
            FnB = np.einsum("fpvd,fd->fpv", FB, nB)
            dFc = np.einsum("fpvd,fd->fpv", Fc_g - Fc_i, nB)
            FhatB = FnB + 0.5 * dFc - 0.5 * lamB[..., None] * (Ug - UB)
            cB = np.matmul(self.phiBT, self.WB[..., None] * FhatB)
        else:
            cB = np.zeros((0, nm, 5))
        R -= self._scatter(cL, cR, cB) * self.inv_det[:, None, None]

        f = self.forcing if forcing is None else np.asarray(forcing, dtype=float)
        if np.any(f != 0.0):
            rho_v = st.rho[self.sv].reshape(Ne, self.nvq)
            u_v = st.u[self.sv].reshape(Ne, self.nvq, 3)
            S = np.zeros((Ne, self.nvq, 5))
            S[..., 1:4] = rho_v[..., None] * f
            S[..., 4] = p.gMa2 * rho_v * (u_v @ f)
            R += np.matmul(self.phi_w_T, S)

        if not np.all(np.isfinite(R)):
            e = int(np.argwhere(~np.isfinite(R))[0, 0])
            raise NumericalBlowupError(f"non-finite residual in element {e}", element=e)
        self.last.state = st
        return R

    # --------------------------------------------------------------- helpers
    def element_speed(self, U):
        """Max of |u| + c and of the molecular kinematic viscosity per element."""
        p = self.params
        Uv = self.to_volume(U)
        rho = Uv[..., 0]
        u = Uv[..., 1:4] / rho[..., None]
        kin = np.einsum("epi,epi->ep", Uv[..., 1:4], u)
        T = (Uv[..., 4] - 0.5 * p.gMa2 * kin) / (p.cv * rho)
        T = np.maximum(T, 1e-300)
        speed = np.linalg.norm(u, axis=-1) + sound_speed(T, p)
        nu = viscosity(T, p.alpha) / (rho * p.Re)
        return speed.max(axis=1), nu.max(axis=1)

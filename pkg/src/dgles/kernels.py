"""Fused pointwise kernels for the residual hot path."""

import numpy as np
from numba import njit


@njit(cache=True)
def strain_fields(grad_u, S, Sd, S_mag):
    """Strain ``grad u + grad u^T``, its deviator and ``|S|`` per point."""
    for n in range(grad_u.shape[0]):
        acc = 0.0
        for i in range(3):
            for j in range(3):
                s = grad_u[n, i, j] + grad_u[n, j, i]
                S[n, i, j] = s
                acc += s * s
        S_mag[n] = np.sqrt(0.5 * acc)
        tr = (S[n, 0, 0] + S[n, 1, 1] + S[n, 2, 2]) / 3.0
        for i in range(3):
            for j in range(3):
                Sd[n, i, j] = S[n, i, j]
            Sd[n, i, i] -= tr


@njit(cache=True)
def total_flux(U, T, Sd, grad_T, tau, E_sgs, wall, has_visc, has_sgs,
               gMa2, Re, kappa, Pr, alpha, T_wall, F):
    """Total flux ``Fc - Fv + Fsgs`` (P, 5, 3).

    At points flagged ``wall`` the molecular flux is evaluated with zero
    velocity and the wall temperature.
    """
    inv_g = 1.0 / gMa2
    cq = 1.0 / (kappa * Re * Pr)
    gRe = gMa2 / Re
    for n in range(U.shape[0]):
        rho = U[n, 0]
        u0 = U[n, 1] / rho
        u1 = U[n, 2] / rho
        u2 = U[n, 3] / rho
        p = rho * T[n]
        h = U[n, 4] + p
        pm = p * inv_g
        for d in range(3):
            F[n, 0, d] = U[n, 1 + d]
        for i in range(3):
            m = U[n, 1 + i]
            F[n, 1 + i, 0] = m * u0
            F[n, 1 + i, 1] = m * u1
            F[n, 1 + i, 2] = m * u2
            F[n, 1 + i, i] += pm
        F[n, 4, 0] = h * u0
        F[n, 4, 1] = h * u1
        F[n, 4, 2] = h * u2
        if has_visc:
            if wall[n]:
                Tv = T_wall
                v0 = 0.0
                v1 = 0.0
                v2 = 0.0
            else:
                Tv = T[n]
                v0 = u0
                v1 = u1
                v2 = u2
            mu = Tv**alpha
            c = mu / Re
            for i in range(3):
                for j in range(3):
                    F[n, 1 + i, j] -= c * Sd[n, i, j]
            for j in range(3):
                work = v0 * Sd[n, 0, j] + v1 * Sd[n, 1, j] + v2 * Sd[n, 2, j]
                F[n, 4, j] -= gRe * mu * work + cq * mu * grad_T[n, j]
        if has_sgs:
            for i in range(3):
                for j in range(3):
                    F[n, 1 + i, j] += tau[n, i, j]
            for j in range(3):
                F[n, 4, j] += E_sgs[n, j]


@njit(cache=True)
def anisotropic_stress(C, elem, rho, delta, S_mag, S, Sd, T0, Re, alpha, cv, gMa2,
                       limit, theta, tau, tau_kk):
    """Limited anisotropic stress per point.

    Returns the number of points where the backscatter limiter and the
    trace guard were active.
    """
    n_lim = 0
    n_guard = 0
    for n in range(rho.shape[0]):
        e = elem[n]
        c = rho[n] * delta[e] ** 2 * S_mag[n]
        tS = 0.0
        for i in range(3):
            for j in range(3):
                t = -c * C[e, i, j] * S[n, i, j]
                tau[n, i, j] = t
                tS += t * S[n, i, j]
        g = 1.0
        if limit and tS > 0.0:
            sS = 0.0
            for i in range(3):
                for j in range(3):
                    sS += Sd[n, i, j] * S[n, i, j]
            sS *= T0[n] ** alpha / Re
            if sS < tS:
                g = sS / tS
                n_lim += 1
        tr = g * (tau[n, 0, 0] + tau[n, 1, 1] + tau[n, 2, 2])
        if theta > 0.0:
            bound = (1.0 - theta) * cv * rho[n] * T0[n] / (0.5 * gMa2)
            if tr > bound:
                g *= bound / tr
                tr = bound
                n_guard += 1
        if g != 1.0:
            for i in range(3):
                for j in range(3):
                    tau[n, i, j] *= g
        tau_kk[n] = tr
    return n_lim, n_guard


@njit(cache=True)
def anisotropic_energy(CQ, CJ, elem, rho, delta, S_mag, u, grad_u, grad_T, tau,
                       inv_kappa, half_gMa2, out):
    """Subgrid energy flux ``Q/kappa + gMa2/2 (tau3 + 2 u_k tau_ik)``."""
    for n in range(rho.shape[0]):
        e = elem[n]
        c = rho[n] * delta[e] ** 2 * S_mag[n]
        for i in range(3):
            gk = u[n, 0] * grad_u[n, 0, i] + u[n, 1] * grad_u[n, 1, i] + u[n, 2] * grad_u[n, 2, i]
            Q = -c * CQ[e, i] * grad_T[n, i]
            t3 = -c * CJ[e, i] * gk
            w = 2.0 * (tau[n, i, 0] * u[n, 0] + tau[n, i, 1] * u[n, 1] + tau[n, i, 2] * u[n, 2])
            out[n, i] = Q * inv_kappa + half_gMa2 * (t3 + w)

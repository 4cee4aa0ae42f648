"""Run orchestration: setup, the time loop, statistics, logging and restart."""

import os
import sys
import time

import numpy as np

from .basis import n_modes
from .checkpoint import read_checkpoint, write_checkpoint
from .closures.anisotropic import AnisotropicModel, dump_coefficients
from .closures.smagorinsky import SmagorinskyModel
from .config import load_config
from .errors import CheckpointError
from .filters import filter_scales
from .initial import divergence, initial_state
from .mesh import build_mesh
from .solver import LDGSolver
from .statistics import (
    ChannelStatistics, PlaneSampler, collect, derived_profiles, format_record, wall_quantities,
    write_profiles_csv,
)
from .timestep import ForcingState, advance_integral, compute_forcing, flow_rate, ssprk54_step, stable_dt


class RunLog:
    """Line-oriented log written to a file and optionally echoed."""

    def __init__(self, path=None, echo=None):
        self.fh = open(path, "a") if path else None
        self.echo = echo

    def __call__(self, line=""):
        for out in (self.fh, self.echo):
            if out is not None:
                out.write(line + "\n")
                out.flush()

    def close(self):
        if self.fh:
            self.fh.close()
            self.fh = None


def friction_velocity(dudy, rho_w, Re):
    """``u_tau`` from the wall gradient; zero for non-positive shear."""
    if not np.isfinite(dudy) or dudy <= 0 or not rho_w > 0:
        return 0.0
    return float(np.sqrt(rho_w * Re * dudy) / (Re * rho_w))


class Simulation:
    """One channel run described by a :class:`RunConfig`."""

    def __init__(self, cfg, log=None):
        self.cfg = cfg
        self.log = log or RunLog()
        v = cfg.values
        self.params = cfg.gas()
        self.mesh = build_mesh(cfg.mesh_spec())
        q = v["discretization.q"]
        self.q = q
        self.solver = s = LDGSolver(self.mesh, q, self.params, T_wall=v["gas.T_wall"])
        self.scales = filter_scales(self.mesh.hex_dims, n_modes(q), n_modes(v["discretization.q_hat"]))
        if cfg.model == "smagorinsky":
            s.model = SmagorinskyModel(cfg.smagorinsky(), self.params, self.scales.delta)
        elif cfg.model == "anisotropic":
            s.model = AnisotropicModel(
                cfg.anisotropic(), self.params, s.basis, s.geom, self.scales.delta, self.scales.delta_hat
            )
        self.sampler = PlaneSampler(s)
        self.stats = ChannelStatistics(self.sampler.n_planes)
        spec = self.mesh.spec
        self.forcing = ForcingState(
            Q0=spec.Ly * spec.Lz, alpha1=v["forcing.alpha1"], alpha2=v["forcing.alpha2"]
        )
        self.U = initial_state(s, cfg.perturbation(), u_center=v["initial.u_center"])
        self.t = 0.0
        self.step = 0
        self.u_tau = friction_velocity(*self.sampler.wall_sample(self.U), self.params.Re)
        self._sync_model()
        tot = s.integrate(self.U)
        self.mass0, self.energy0 = float(tot[0]), float(tot[4])
        self.max_saturation = 0.0
        self.max_guard = 0.0
        self.last_dt = 0.0
        self.last_Q = flow_rate(s, self.U)
        self.last_f = 0.0

    # --------------------------------------------------------------- restart
    def _sync_model(self):
        if isinstance(self.solver.model, SmagorinskyModel):
            self.solver.model.u_tau = self.u_tau

    def save(self, path):
        scalars = {
            "t": self.t, "step": self.step, "I": self.forcing.I, "Q0": self.forcing.Q0,
            "u_tau": self.u_tau, "mass0": self.mass0, "energy0": self.energy0,
            "weight": self.stats.weight, "n_samples": self.stats.n_samples,
            "max_saturation": self.max_saturation, "max_guard": self.max_guard,
        }
        arrays = {"U": self.U, "stat_sums": self.stats.sums, "stat_wall": self.stats.wall}
        write_checkpoint(path, arrays, scalars, self.cfg.echo())

    @classmethod
    def restore(cls, path, cfg=None, log=None):
        """Rebuild a run from a checkpoint (its embedded config unless ``cfg``)."""
        arrays, sc, text = read_checkpoint(path)
        if cfg is None:
            cfg = load_config(text)
        sim = cls(cfg, log)
        expect = {
            "U": sim.U.shape, "stat_sums": sim.stats.sums.shape, "stat_wall": sim.stats.wall.shape,
        }
        for name, shape in expect.items():
            if name not in arrays or arrays[name].shape != shape:
                got = arrays[name].shape if name in arrays else None
                raise CheckpointError(f"{path}: {name} has shape {got}, run expects {shape}")
        sim.U = arrays["U"].copy()
        sim.stats.sums = arrays["stat_sums"].copy()
        sim.stats.wall = arrays["stat_wall"].copy()
        sim.stats.weight = float(sc["weight"])
        sim.stats.n_samples = int(sc["n_samples"])
        sim.t, sim.step = float(sc["t"]), int(sc["step"])
        sim.forcing.I, sim.forcing.Q0 = float(sc["I"]), float(sc["Q0"])
        sim.u_tau = float(sc["u_tau"])
        sim.mass0, sim.energy0 = float(sc["mass0"]), float(sc["energy0"])
        sim.max_saturation = float(sc["max_saturation"])
        sim.max_guard = float(sc["max_guard"])
        sim._sync_model()
        return sim

    # ------------------------------------------------------------- stepping
    def advance(self, t_end=None):
        """Take one SSPRK step; returns the step size used."""
        v = self.cfg.values
        s = self.solver
        if t_end is None:
            t_end = self.cfg.t_end
        Q = flow_rate(s, self.U)
        f = compute_forcing(Q, self.forcing) if v["forcing.enabled"] else 0.0
        s.forcing = np.array([f, 0.0, 0.0])
        s.begin_step()
        # stage-0 residual first: its closure viscosity enters the step size
        R0 = s.residual(self.U)
        st = s.last.state
        dt = stable_dt(s, self.U, v["time.CFL"])
        # land exactly on the start of the averaging window and on t_end
        target = min(v["time.t_st"], t_end) if self.t < v["time.t_st"] else t_end
        landed = target > self.t and dt >= target - self.t
        if landed:
            dt = target - self.t
        sample = None
        if self.t >= v["time.t_st"] and self.t < t_end and v["time.t_av"] > 0:
            sample = collect(s, self.sampler, st, self.U)
        dudy, rho_w = self.sampler.wall_sample(self.U)
        self._track_closure()

        first = [True]

        def rhs(V):
            if first[0]:
                first[0] = False
                return R0
            r = s.residual(V)
            self._track_closure()
            return r

        U_new = ssprk54_step(self.U, dt, rhs)
        if sample is not None:
            self.stats.accumulate(sample[0], dt, sample[1])
        if v["forcing.enabled"]:
            advance_integral(Q, self.forcing, dt)
        # running u_tau: logged for every model, fed to the damping only
        inst = friction_velocity(dudy, rho_w, self.params.Re)
        w = min(1.0, dt / v["smagorinsky.u_tau_relax"])
        self.u_tau += w * (inst - self.u_tau)
        if isinstance(s.model, SmagorinskyModel):
            self._sync_model()
        self.U = U_new
        self.t = target if landed else self.t + dt
        self.step += 1
        self.last_dt = dt
        self.last_Q = Q
        self.last_f = f
        return dt

    def _track_closure(self):
        m = self.solver.model
        if m is None:
            return
        self.max_saturation = max(self.max_saturation, getattr(m, "beta_saturation", 0.0))
        self.max_guard = max(self.max_guard, getattr(m, "guard_fraction", 0.0))

    # ----------------------------------------------------------- diagnostics
    def diagnostics(self):
        s = self.solver
        tot = s.integrate(self.U)
        st = s.last.state
        m = s.model
        return {
            "step": self.step,
            "t": self.t,
            "dt": self.last_dt,
            "Q/Q0-1": self.last_Q / self.forcing.Q0 - 1.0,
            "f": self.last_f,
            "mass_drift": (tot[0] - self.mass0) / abs(self.mass0),
            "energy": tot[4] / self.mesh.spec.volume,
            "rho_min": float(st.rho.min()),
            "T_min": float(st.T.min()),
            "u_tau": self.u_tau,
            "beta_sat": getattr(m, "beta_saturation", 0.0),
            "guard": getattr(m, "guard_fraction", 0.0),
        }

    def log_diagnostics(self):
        d = self.diagnostics()
        self.log(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in d.items()))

    # --------------------------------------------------------------- outputs
    def results(self):
        """``(profiles, record)`` from the accumulated statistics."""
        ys = self.mesh.y_planes
        rec = wall_quantities(
            self.stats, ys, self.params, self.mesh.spec, np.diff(ys), self.q, self.cfg["gas.T_wall"]
        )
        rho_w = self.stats.wall[1] / self.stats.weight
        u_tau = rec["Re_tau"] / (self.params.Re * rho_w)
        prof = derived_profiles(self.stats, ys, u_tau, rho_w)
        return prof, rec

    def write_outputs(self, outdir):
        if self.stats.n_samples == 0:
            self.log("no statistics samples; profiles and record not written")
            return None
        prof, rec = self.results()
        write_profiles_csv(os.path.join(outdir, "profiles.csv"), prof)
        with open(os.path.join(outdir, "table2.txt"), "w") as fh:
            fh.write(f"# model = {self.cfg.model}, Ma = {self.params.Ma}, Re = {self.params.Re}\n")
            fh.write(format_record(rec))
        self.log("record: " + ", ".join(f"{k}={v:.6g}" for k, v in rec.items()))
        return rec

    def dump_coefficients(self, path):
        c = self.solver.last.coeffs
        if c is not None and getattr(c, "C", None) is not None:
            dump_coefficients(path, c, self.solver.geom.vertices.mean(axis=1))


def run(cfg, outdir=None, echo=sys.stderr, restart=None):
    """Execute a configured run; exceptions propagate to the caller.

    Returns the :class:`Simulation` after the final step.
    """
    outdir = outdir or os.environ.get("DGLES_OUTPUT_DIR") or cfg["output.dir"]
    os.makedirs(outdir, exist_ok=True)
    log = RunLog(os.path.join(outdir, "run.log"), echo)
    v = cfg.values
    try:
        log("# effective configuration")
        for line in cfg.echo().splitlines():
            log("# " + line)
        sim = Simulation.restore(restart, cfg, log) if restart else Simulation(cfg, log)
        s = sim.solver
        log(f"# elements={s.n_elem} modes={s.n_modes} points={s.n_points} "
            f"omega={sim.mesh.spec.omega:.6g} y1={sim.mesh.y_planes[1]:.6g}")
        if not restart:
            # the projected random perturbation is not solenoidal; report by how much
            log(f"# initial max|div u|={np.abs(divergence(s, sim.U)).max():.3e}")
        t_end = cfg.t_end
        max_steps = v["time.max_steps"] or None
        wall0 = time.time()
        taken = 0
        try:
            while sim.t < t_end and (max_steps is None or taken < max_steps):
                sim.advance(t_end)
                taken += 1
                if sim.step % v["output.log_interval"] == 0:
                    sim.log_diagnostics()
                ck = v["output.checkpoint_interval"]
                if ck and sim.step % ck == 0:
                    sim.save(os.path.join(outdir, "checkpoint.ckpt"))
                ci = v["output.coeff_interval"]
                if ci and sim.step % ci == 0 and cfg.model == "anisotropic":
                    sim.dump_coefficients(os.path.join(outdir, f"coeffs_{sim.step:08d}.csv"))
        except Exception:
            log(f"# failure at step {sim.step}, t={sim.t:.6g}; last good state in failed.ckpt")
            sim.save(os.path.join(outdir, "failed.ckpt"))
            raise
        if sim.step:
            sim.log_diagnostics()
        log(f"# finished: steps={sim.step} t={sim.t:.6g} wall={time.time() - wall0:.1f}s "
            f"max_beta_saturation={sim.max_saturation:.4g} max_guard={sim.max_guard:.4g}")
        sim.save(os.path.join(outdir, "final.ckpt"))
        sim.write_outputs(outdir)
        return sim
    finally:
        log.close()


def postprocess(path, outdir=None, echo=sys.stderr):
    """Recompute profiles and the record from a checkpoint."""
    outdir = outdir or os.environ.get("DGLES_OUTPUT_DIR") or os.path.dirname(os.path.abspath(path))
    os.makedirs(outdir, exist_ok=True)
    log = RunLog(None, echo)
    sim = Simulation.restore(path, log=log)
    rec = sim.write_outputs(outdir)
    return sim, rec

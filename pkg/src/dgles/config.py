"""Run configuration: a flat ``section.key = value`` text format.

Every key has a type and a default; validation collects every problem before
reporting, so a bad file is rejected in one pass.
"""

import math
from dataclasses import dataclass

from .closures.anisotropic import AnisotropicConfig
from .closures.smagorinsky import SmagorinskyConfig
from .errors import ConfigError, DGLESError
from .gas import GasParameters
from .initial import PerturbationSpec
from .mesh import ChannelMeshSpec

MODELS = ("none", "smagorinsky", "anisotropic")
UPDATES = ("stage", "step")


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float(text):
    t = str(text).strip().lower().replace(" ", "")
    # allow simple multiples of pi such as 4pi/3 or 2*pi
    if "pi" in t:
        t = t.replace("*pi", "pi")
        num, _, den = t.partition("/")
        factor = num.replace("pi", "") or "1"
        val = float(factor) * math.pi
        return val / float(den) if den else val
    return float(t)


def _optional_float(text):
    t = str(text).strip().lower()
    return None if t in ("", "none") else _float(t)


# key -> (parser, default)
SCHEMA = {
    "mesh.Nx": (int, 8),
    "mesh.Ny": (int, 16),
    "mesh.Nz": (int, 12),
    "mesh.Lx": (_float, 4 * math.pi),
    "mesh.Lz": (_float, 4 * math.pi / 3),
    "mesh.omega": (_float, 1.0),
    "mesh.y1_target": (_optional_float, None),
    "mesh.periodic_y": (_bool, False),
    "discretization.q": (int, 4),
    "discretization.q_hat": (int, 2),
    "gas.Ma": (_float, 0.7),
    "gas.Re": (_float, 2795.0),
    "gas.Pr": (_float, 0.7),
    "gas.gamma": (_float, 1.4),
    "gas.alpha": (_float, 0.7),
    "gas.T_wall": (_float, 1.0),
    "model.type": (str, "anisotropic"),
    "smagorinsky.C_S": (_float, 0.1),
    "smagorinsky.C_I": (_float, 0.0),
    "smagorinsky.A": (_float, 25.0),
    "smagorinsky.Pr_sgs": (_float, 0.9),
    "smagorinsky.damping": (_bool, True),
    "smagorinsky.u_tau_relax": (_float, 1.0),
    "anisotropic.eps_den": (_float, 1e-10),
    "anisotropic.eps_rel": (_float, 1e-2),
    "anisotropic.C_clip": (_float, 10.0),
    "anisotropic.limiter": (_bool, True),
    "anisotropic.update": (str, "stage"),
    "anisotropic.trace_guard": (_float, 0.5),
    "anisotropic.averaging": (str, "least_squares"),
    "time.CFL": (_float, 0.3),
    "time.t_st": (_float, 0.0),
    "time.t_av": (_float, 0.0),
    "time.max_steps": (int, 0),
    "forcing.enabled": (_bool, True),
    "forcing.alpha1": (_float, 0.1),
    "forcing.alpha2": (_float, 0.5),
    "initial.amplitude": (_float, 0.1),
    "initial.r": (_float, 3.999),
    "initial.n_iter": (int, 20),
    "initial.u_center": (_float, 0.75),
    "output.dir": (str, "output"),
    "output.log_interval": (int, 100),
    "output.checkpoint_interval": (int, 0),
    "output.coeff_interval": (int, 0),
}

MODEL_SECTIONS = {"smagorinsky": "smagorinsky", "anisotropic": "anisotropic"}


def parse_text(text):
    """Raw ``{key: value-string}`` and a list of syntax problems."""
    raw, problems = {}, []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {n}: expected 'section.key = value'")
            continue
        k, v = (s.strip() for s in line.split("=", 1))
        if k in raw:
            problems.append(f"line {n}: duplicate key {k}")
        raw[k] = v
    return raw, problems


@dataclass
class RunConfig:
    values: dict
    source: str = ""

    def __getitem__(self, key):
        return self.values[key]

    @property
    def model(self):
        return self.values["model.type"]

    def mesh_spec(self):
        v = self.values
        return ChannelMeshSpec(
            Nx=v["mesh.Nx"], Ny=v["mesh.Ny"], Nz=v["mesh.Nz"], Lx=v["mesh.Lx"], Lz=v["mesh.Lz"],
            omega=v["mesh.omega"], y1_target=v["mesh.y1_target"], periodic_y=v["mesh.periodic_y"],
        )

    def gas(self):
        v = self.values
        return GasParameters(v["gas.Ma"], v["gas.Re"], v["gas.Pr"], v["gas.gamma"], v["gas.alpha"])

    def smagorinsky(self):
        v = self.values
        return SmagorinskyConfig(
            v["smagorinsky.C_S"], v["smagorinsky.C_I"], v["smagorinsky.A"], v["smagorinsky.Pr_sgs"],
            v["smagorinsky.damping"],
        )

    def anisotropic(self):
        v = self.values
        return AnisotropicConfig(
            q_hat=v["discretization.q_hat"], eps_den=v["anisotropic.eps_den"],
            eps_rel=v["anisotropic.eps_rel"], C_clip=v["anisotropic.C_clip"],
            limiter_enabled=v["anisotropic.limiter"], freeze_per_step=v["anisotropic.update"] == "step",
            trace_guard=v["anisotropic.trace_guard"], averaging=v["anisotropic.averaging"],
        )

    def perturbation(self):
        v = self.values
        return PerturbationSpec(v["initial.amplitude"], v["initial.r"], v["initial.n_iter"])

    @property
    def t_end(self):
        return self.values["time.t_st"] + self.values["time.t_av"]

    def echo(self):
        """Every effective parameter, one per line; parses back to the same run."""
        skip = tuple(sec + "." for sec in MODEL_SECTIONS if sec != self.model)
        return "".join(f"{k} = {_fmt(self.values[k])}\n" for k in SCHEMA if not k.startswith(skip))


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def load_config(text, overrides=None):
    """Parse and validate; raises :class:`ConfigError` listing all problems."""
    raw, problems = parse_text(text)
    if overrides:
        raw.update(overrides)
    values = {}
    for k in raw:
        if k not in SCHEMA:
            problems.append(f"unknown key {k}")
    model = raw.get("model.type", SCHEMA["model.type"][1]).strip()
    if model not in MODELS:
        problems.append(f"model.type must be one of {MODELS}, got {model!r}")
    for sec in MODEL_SECTIONS:
        if sec != model and any(k.startswith(sec + ".") for k in raw):
            problems.append(f"section '{sec}' given but model.type = {model}")
    for k, (parser, default) in SCHEMA.items():
        if k in raw:
            try:
                values[k] = parser(raw[k])
            except (TypeError, ValueError) as exc:
                problems.append(f"{k}: {exc}")
                values[k] = default
        else:
            values[k] = default
    problems += _validate(values)
    if problems:
        raise ConfigError(problems)
    return RunConfig(values, text)


def _validate(v):
    problems = []
    checks = [
        (v["discretization.q"] >= 1, "discretization.q must be >= 1"),
        (v["discretization.q_hat"] >= 0, "discretization.q_hat must be >= 0"),
        (v["discretization.q_hat"] < v["discretization.q"], "discretization.q_hat must be < discretization.q"),
        (v["time.CFL"] > 0, "time.CFL must be positive"),
        (v["time.t_st"] >= 0, "time.t_st must be >= 0"),
        (v["time.t_av"] >= 0, "time.t_av must be >= 0"),
        (v["time.max_steps"] >= 0, "time.max_steps must be >= 0"),
        (v["forcing.alpha1"] >= 0 and v["forcing.alpha2"] >= 0, "forcing gains must be >= 0"),
        (v["gas.T_wall"] > 0, "gas.T_wall must be positive"),
        (v["anisotropic.update"] in UPDATES, f"anisotropic.update must be one of {UPDATES}"),
        (v["smagorinsky.u_tau_relax"] > 0, "smagorinsky.u_tau_relax must be positive"),
        (v["output.log_interval"] >= 1, "output.log_interval must be >= 1"),
        (v["output.checkpoint_interval"] >= 0, "output.checkpoint_interval must be >= 0"),
        (v["output.coeff_interval"] >= 0, "output.coeff_interval must be >= 0"),
    ]
    problems += [msg for ok, msg in checks if not ok]
    builders = [
        lambda: ChannelMeshSpec(
            Nx=v["mesh.Nx"], Ny=v["mesh.Ny"], Nz=v["mesh.Nz"], Lx=v["mesh.Lx"], Lz=v["mesh.Lz"],
            omega=v["mesh.omega"], y1_target=v["mesh.y1_target"], periodic_y=v["mesh.periodic_y"],
        ),
        lambda: GasParameters(v["gas.Ma"], v["gas.Re"], v["gas.Pr"], v["gas.gamma"], v["gas.alpha"]),
        lambda: SmagorinskyConfig(
            v["smagorinsky.C_S"], v["smagorinsky.C_I"], v["smagorinsky.A"], v["smagorinsky.Pr_sgs"]
        ),
        lambda: AnisotropicConfig(
            q_hat=max(v["discretization.q_hat"], 0), eps_den=v["anisotropic.eps_den"],
            eps_rel=v["anisotropic.eps_rel"], C_clip=v["anisotropic.C_clip"], trace_guard=v["anisotropic.trace_guard"],
            averaging=v["anisotropic.averaging"],
        ),
        lambda: PerturbationSpec(v["initial.amplitude"], v["initial.r"], v["initial.n_iter"]),
    ]
    for build in builders:
        try:
            build()
        except (DGLESError, ValueError) as exc:
            problems.append(str(exc))
    if v["discretization.q"] > 8:
        problems.append("discretization.q must be <= 8")
    return problems


def read_config(path, overrides=None):
    with open(path) as fh:
        return load_config(fh.read(), overrides)

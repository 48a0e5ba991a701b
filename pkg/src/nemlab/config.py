"""Config-file ingestion for the command-line front end.

Configs are YAML mappings.  Every lookup error carries the dotted key
path of the offending entry, and unknown keys are rejected so typos
fail loudly instead of being silently ignored.
"""

from dataclasses import dataclass

import numpy as np
import yaml

from . import scheme as scheme_mod
from .fields import (
    DirectorSpace,
    make_grid,
    random_band_limited,
    twist_field,
    unit_normalize,
)
from .material import build_params
from .scheme import SchemeConfig


class ConfigError(ValueError):
    pass


_MISSING = object()


class _Section:
    """Dict view that tracks its dotted path and consumed keys."""

    def __init__(self, data, path=""):
        if not isinstance(data, dict):
            raise ConfigError("config section '%s': expected a mapping, got %s"
                              % (path or "<root>", type(data).__name__))
        self.data = data
        self.path = path
        self.seen = set()

    def _label(self, key):
        return "%s.%s" % (self.path, key) if self.path else key

    def has(self, key):
        return key in self.data

    def child(self, key, default_empty=True):
        self.seen.add(key)
        raw = self.data.get(key)
        if raw is None:
            raw = {} if default_empty else None
        if raw is None:
            return None
        return _Section(raw, self._label(key))

    def get(self, key, kind, default=_MISSING):
        self.seen.add(key)
        if key not in self.data or self.data[key] is None:
            if default is _MISSING:
                raise ConfigError("config key '%s' is required" % self._label(key))
            return default
        val = self.data[key]
        if kind is float:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError("config key '%s': expected a number, got %r"
                                  % (self._label(key), val))
            return float(val)
        if kind is int:
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError("config key '%s': expected an integer, got %r"
                                  % (self._label(key), val))
            return val
        if kind is str:
            if not isinstance(val, str):
                raise ConfigError("config key '%s': expected a string, got %r"
                                  % (self._label(key), val))
            return val
        if kind is list:
            if not isinstance(val, list):
                raise ConfigError("config key '%s': expected a list, got %r"
                                  % (self._label(key), val))
            return val
        raise TypeError("unsupported kind %r" % kind)

    def vector(self, key, default=_MISSING):
        val = self.get(key, list, default)
        if val is default and not isinstance(val, list):
            return val
        if len(val) != 3 or not all(
                isinstance(c, (int, float)) and not isinstance(c, bool)
                for c in val):
            raise ConfigError("config key '%s': expected three numbers"
                              % self._label(key))
        return np.asarray(val, dtype=float)

    def finish(self):
        unknown = sorted(set(self.data) - self.seen)
        if unknown:
            raise ConfigError("unknown config key '%s'"
                              % self._label(unknown[0]))


@dataclass
class TestSpec:
    trajectory: str
    direction: np.ndarray
    mode: int
    pairing: str
    C: float
    tol: float
    H_test: np.ndarray


@dataclass
class ControlSpec:
    gamma_ctrl: float
    c_H: float
    parametrization: str
    fourier_modes: int
    max_mode: int
    target_H: np.ndarray
    target_v_path: str
    target_d_path: str
    max_evals: int
    max_iters: int
    tol: float
    grad_tol: float
    fd_step: float
    step0: float


@dataclass
class RunConfig:
    """Everything a subcommand needs, already validated."""

    grid: object
    params: object
    config: SchemeConfig
    state0: object
    d1: np.ndarray
    H: np.ndarray
    seed: int
    outdir: str
    test: TestSpec
    control: ControlSpec
    echo: dict


def load_config(path):
    """Parse a YAML config file into a raw mapping."""
    with open(path, "r") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("config file %s is not valid YAML: %s"
                              % (path, exc))
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config file %s: top level must be a mapping" % path)
    return data


def apply_overrides(data, overrides):
    """Apply repeated --override key.path=value entries in place."""
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError("override %r is not of the form key=value" % item)
        key, _, text = item.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError("override %r has an empty key" % item)
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError:
            value = text
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            nxt = node.get(part)
            if nxt is None:
                nxt = {}
                node[part] = nxt
            if not isinstance(nxt, dict):
                raise ConfigError(
                    "override %r: '%s' is not a mapping" % (item, part))
            node = nxt
        node[parts[-1]] = value
    return data


def _build_grid(sec):
    shape = sec.get("shape", list)
    if not all(isinstance(n, int) and not isinstance(n, bool) for n in shape):
        raise ConfigError("config key '%s.shape': entries must be integers"
                          % sec.path)
    extent = sec.data.get("extent")
    sec.seen.add("extent")
    if extent is None:
        extent = 2.0 * np.pi
    elif isinstance(extent, list):
        extent = tuple(float(e) for e in extent)
    elif isinstance(extent, (int, float)) and not isinstance(extent, bool):
        extent = float(extent)
    else:
        raise ConfigError("config key '%s.extent': expected a number or list"
                          % sec.path)
    boundary = sec.get("boundary", str, "periodic")
    sec.finish()
    try:
        return make_grid(tuple(shape), extent=extent, boundary=boundary)
    except ValueError as exc:
        raise ConfigError("config section '%s': %s" % (sec.path, exc))


def _build_material(sec):
    kwargs = {}
    for name in ("mu1", "mu2", "mu3", "mu4", "mu5", "mu6",
                 "K1", "K2", "K3", "chi_par", "chi_perp"):
        kwargs[name] = sec.get(name, float)
    kwargs["gamma_shift"] = sec.get("gamma_shift", float, 0.0)
    sec.finish()
    try:
        return build_params(**kwargs)
    except ValueError as exc:
        raise ConfigError("config section '%s': %s" % (sec.path, exc))


def _build_scheme(sec, forcing):
    dt = sec.get("dt", float)
    t_end = sec.get("t_end", float)
    integrator = sec.get("integrator", str, "rk4")
    record_every = sec.get("record_every", int, 1)
    cutoff = sec.get("velocity_cutoff", int, None)
    mode = sec.get("director_mode", str, "collocation")
    dcut = sec.get("director_cutoff", int, None)
    threshold = sec.get("blowup_threshold", float, 1e8)
    sec.finish()
    try:
        space = DirectorSpace(mode=mode, cutoff=dcut)
        return SchemeConfig(dt=dt, t_end=t_end, integrator=integrator,
                            velocity_cutoff=cutoff, director_space=space,
                            forcing=forcing, record_every=record_every,
                            blowup_threshold=threshold)
    except ValueError as exc:
        raise ConfigError("config section '%s': %s" % (sec.path, exc))


def _static_field(grid, sec, what):
    """Shared builder for uniform/zero static vector fields."""
    if sec is None:
        return None
    preset = sec.get("preset", str, "zero")
    if preset == "zero":
        sec.finish()
        return None
    if preset == "uniform":
        vec = sec.vector("vector")
        sec.finish()
        return np.broadcast_to(vec, grid.shape + (3,)).copy()
    raise ConfigError("config key '%s.preset': unknown %s preset %r"
                      % (sec.path, what, preset))


def _build_initial(grid, sec, rng):
    preset = sec.get("preset", str, "constant")
    direction = sec.vector("direction", np.array([0.0, 0.0, 1.0]))
    mode = sec.get("mode", int, 1)
    base_name = sec.get("base", str, "constant")
    amplitude = sec.get("amplitude", float, 0.05)
    max_mode = sec.get("max_mode", int, 3)
    vel_amp = sec.get("velocity_amplitude", float, 0.0)
    vel_mode = sec.get("velocity_max_mode", int, 2)
    sec.finish()

    def base_field(name):
        if name == "constant":
            e = direction / np.linalg.norm(direction)
            return np.broadcast_to(e, grid.shape + (3,)).copy()
        if name == "twist":
            return twist_field(grid, mode=mode)
        raise ConfigError("config key '%s.base': unknown base %r"
                          % (sec.path, name))

    if preset in ("constant", "twist"):
        d_raw = base_field(preset)
    elif preset == "random-perturbed":
        noise = random_band_limited(grid, rng, max_mode, ncomp=3)
        d_raw = unit_normalize(base_field(base_name) + amplitude * noise)
    else:
        raise ConfigError("config key '%s.preset': unknown initial preset %r"
                          % (sec.path, preset))
    if vel_amp != 0.0:
        v_raw = vel_amp * random_band_limited(grid, rng, vel_mode, ncomp=3)
    else:
        v_raw = np.zeros(grid.shape + (3,))
    return v_raw, d_raw


def _build_test(grid, sec):
    if sec is None or not sec.data:
        return None
    trajectory = sec.get("trajectory", str, "equilibrium")
    if trajectory not in ("equilibrium", "static_twist", "from_trace"):
        raise ConfigError("config key '%s.trajectory': unknown trajectory %r"
                          % (sec.path, trajectory))
    spec = TestSpec(
        trajectory=trajectory,
        direction=sec.vector("direction", np.array([0.0, 0.0, 1.0])),
        mode=sec.get("mode", int, 1),
        pairing=sec.get("pairing", str, "continuous"),
        C=sec.get("C", float, None),
        tol=sec.get("tol", float, 1e-6),
        H_test=_static_field(grid, sec.child("magnetic", default_empty=False),
                             "magnetic"),
    )
    if spec.pairing not in ("continuous", "discrete"):
        raise ConfigError("config key '%s.pairing': expected 'continuous' or "
                          "'discrete', got %r" % (sec.path, spec.pairing))
    sec.finish()
    return spec


def _build_control(sec):
    if sec is None or not sec.data:
        return None
    spec = ControlSpec(
        gamma_ctrl=sec.get("gamma_ctrl", float, 1e-3),
        c_H=sec.get("c_H", float, 2.0),
        parametrization=sec.get("parametrization", str, "uniform"),
        fourier_modes=sec.get("fourier_modes", int, 4),
        max_mode=sec.get("max_mode", int, 2),
        target_H=sec.vector("target_H", None),
        target_v_path=sec.get("target_v", str, None),
        target_d_path=sec.get("target_d", str, None),
        max_evals=sec.get("max_evals", int, 200),
        max_iters=sec.get("max_iters", int, 100),
        tol=sec.get("tol", float, 1e-10),
        grad_tol=sec.get("grad_tol", float, 1e-8),
        fd_step=sec.get("fd_step", float, None),
        step0=sec.get("step0", float, 1.0),
    )
    sec.finish()
    if spec.target_H is None and (spec.target_v_path is None
                                  or spec.target_d_path is None):
        raise ConfigError("config section '%s': either target_H or both "
                          "target_v and target_d are required" % sec.path)
    return spec


def build_run(data):
    """Assemble a validated RunConfig from a parsed mapping."""
    root = _Section(dict(data))
    grid = _build_grid(root.child("grid"))
    params = _build_material(root.child("material"))
    forcing = _static_field(grid, root.child("forcing", default_empty=False),
                            "forcing")
    cfg = _build_scheme(root.child("scheme"), forcing)
    seed = root.get("seed", int, 1234)
    rng = np.random.default_rng(seed)
    v_raw, d_raw = _build_initial(grid, root.child("initial"), rng)
    H = _static_field(grid, root.child("magnetic", default_empty=False),
                      "magnetic")
    test = _build_test(grid, root.child("test", default_empty=False))
    control = _build_control(root.child("control", default_empty=False))
    outdir = root.get("output", str, "out")
    root.finish()

    d1 = None
    if grid.boundary == "dirichlet":
        d1 = d_raw
    state0 = scheme_mod.prepare_initial(grid, params, v_raw, d_raw, cfg, d1=d1)
    return RunConfig(grid=grid, params=params, config=cfg, state0=state0,
                     d1=d1, H=H, seed=seed, outdir=outdir, test=test,
                     control=control, echo=dict(data))

"""Semi-discrete Ericksen-Leslie system: RHS assembly and time stepping.

The spatial scheme is the Galerkin system in its strong nodal realization:
velocity updates stay in the discretely solenoidal space through the Leray
projection, the director update is projected by the director space (the
identity in collocation mode) and the elastic force on the velocity uses
the adjoint (replacement) form so the energy-identity cancellations are
exact in space. Time integration is explicit (rk4 default, euler for
debugging); the running dissipation and forcing-work integrals are carried
as augmented quadrature variables inside the stepper, so the energy
residual measures time-integration error only.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .energy import total_free_energy, variational_derivative
from .fields import (
    DirectorSpace,
    director_project,
    div_mat,
    extend_dirichlet,
    grad,
    h1_norm,
    inner,
    integrate as quad,
    leray_project,
    lp_norm,
)
from .tensors import (
    matvec,
    mat_t_vec,
    outer,
    skw_part,
    sym_part,
    transverse_projector,
)


class BlowUpError(RuntimeError):
    def __init__(self, step, t, what):
        super().__init__(
            "blow-up detected at step %d, t=%.6g (%s)" % (step, t, what)
        )
        self.step = step
        self.t = t
        self.what = what


@dataclass
class FieldState:
    v: np.ndarray
    d: np.ndarray
    t: float


@dataclass
class SchemeConfig:
    dt: float
    t_end: float
    integrator: str = "rk4"
    velocity_cutoff: object = None
    director_space: DirectorSpace = dc_field(default_factory=DirectorSpace)
    forcing: object = None  # None, a static field, or a callable t -> field
    record_every: int = 1
    blowup_threshold: float = 1e8

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end < self.dt:
            raise ValueError("t_end must be at least dt")
        if self.integrator not in ("rk4", "euler"):
            raise ValueError("integrator must be rk4 or euler")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class SimulationTrace:
    grid: object
    params: object
    config: SchemeConfig
    H: object
    times: np.ndarray
    states: list
    diagnostics: dict
    initial_norm: np.ndarray

    DIAG_COLUMNS = (
        "t",
        "kinetic",
        "elastic",
        "magnetic",
        "diss_mu1",
        "diss_mu4",
        "diss_mu56",
        "diss_dxq",
        "energy_residual",
        "max_norm_deviation",
    )


def suggest_dt(grid, params, safety=0.2):
    """Stability heuristic dt <= safety * h^2 / max(k1, k2, mu4)."""
    h = min(grid.spacing)
    return safety * h * h / max(params.k1, params.k2, params.mu4)


def leslie_stress(grid, params, v, d, q):
    """Approximate Leslie stress from nodal fields."""
    s = sym_part(grad(grid, v))
    return _stress(params, s, d, q)


def _stress(params, s, d, q):
    lam = params.lam
    dsd = np.einsum("...i,...ij,...j->...", d, s, d)
    sd = matvec(s, d)
    n2 = np.sum(d * d, axis=-1)
    pq = matvec(transverse_projector(d), q)
    t = (params.mu1 + lam**2) * dsd[..., None, None] * outer(d, d)
    t = t + params.mu4 * s
    t = t + (params.mu5 + params.mu6 - lam**2) * sym_part(outer(d, sd))
    t = t - lam * sym_part(outer(d, pq))
    t = t - n2[..., None, None] * skw_part(outer(d, q))
    return t


def _forcing_at(config, t):
    g = config.forcing
    if g is None:
        return None
    if callable(g):
        return np.asarray(g(t), dtype=float)
    return np.asarray(g, dtype=float)


def _rhs(grid, params, v, d, t, config, H):
    """Assemble both rates and the dissipation/work rate vector."""
    space = config.director_space
    q = variational_derivative(grid, params, d, H, form="tensor", project=space)
    gv = grad(grid, v)
    s = sym_part(gv)
    w = skw_part(gv)
    gd = grad(grid, d)
    proj = transverse_projector(d)
    pq = matvec(proj, q)

    drive = matvec(gd, v) - matvec(w, d) + params.lam * matvec(s, d) + q
    dd = -director_project(grid, matvec(proj, drive), space)

    stress = _stress(params, s, d, q)
    ericksen = mat_t_vec(gd, pq)
    convection = 0.5 * (matvec(gv, v) + div_mat(grid, outer(v, v)))
    force = ericksen - convection + div_mat(grid, stress)
    g = _forcing_at(config, t)
    if g is not None:
        force = force + g
    dv = leray_project(grid, force, cutoff=config.velocity_cutoff)

    lam = params.lam
    dsd = np.einsum("...i,...ij,...j->...", d, s, d)
    sd = matvec(s, d)
    dxq = np.cross(d, q)
    rates = np.array(
        [
            (params.mu1 + lam**2) * quad(grid, dsd**2),
            params.mu4 * quad(grid, np.einsum("...ij,...ij->...", s, s)),
            (params.mu5 + params.mu6 - lam**2)
            * quad(grid, np.sum(sd * sd, axis=-1)),
            quad(grid, np.sum(dxq * dxq, axis=-1)),
            0.0 if g is None else inner(grid, g, v),
        ]
    )
    return dv, dd, rates


def assemble_rhs(grid, params, state, config, H=None):
    """Public RHS of the semi-discrete system, (dv_dt, dd_dt)."""
    dv, dd, _ = _rhs(grid, params, state.v, state.d, state.t, config, H)
    return dv, dd


def prepare_initial(grid, params, v_raw, d_raw, config, d1=None):
    """Project raw initial data into the discrete spaces.

    Velocity goes through the Leray projection (with the velocity cutoff if
    set). In dirichlet mode the director is the elliptic extension of the
    boundary data plus the projected interior fluctuation; in periodic mode
    the director-space projection is applied directly.
    """
    v0 = leray_project(grid, np.asarray(v_raw, dtype=float), cutoff=config.velocity_cutoff)
    d_raw = np.asarray(d_raw, dtype=float)
    if grid.boundary == "dirichlet":
        bc = d_raw if d1 is None else np.asarray(d1, dtype=float)
        lift = extend_dirichlet(grid, bc, params.k1, params.k2)
        d0 = lift + director_project(grid, d_raw - lift, config.director_space)
    else:
        d0 = director_project(grid, d_raw, config.director_space)
    return FieldState(v=v0, d=d0, t=0.0)


def _check_state(grid, v, d, threshold, step, t):
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(d))):
        raise BlowUpError(step, t, "non-finite field values")
    vmax = float(np.max(np.sqrt(np.sum(v * v, axis=-1))))
    if vmax > threshold:
        raise BlowUpError(step, t, "nodal |v| = %.3g" % vmax)
    gd = grad(grid, d)
    gmax = float(np.max(np.sqrt(np.sum(gd * gd, axis=(-2, -1)))))
    if gmax > threshold:
        raise BlowUpError(step, t, "nodal |grad d| = %.3g" % gmax)


def integrate(grid, params, state0, config, H=None):
    """Advance the semi-discrete system and record diagnostics.

    Returns a SimulationTrace whose diagnostic columns carry the running
    dissipation integrals accumulated inside the integrator, the energy
    residual of the semi-discrete energy equality and the maximal nodal
    deviation of |d| from its initial values.
    """
    if H is not None:
        H = np.asarray(H, dtype=float)
    v = np.asarray(state0.v, dtype=float).copy()
    d = np.asarray(state0.d, dtype=float).copy()
    n_steps = max(1, int(round(config.t_end / config.dt)))
    dt = config.t_end / n_steps

    ints = np.zeros(5)
    norm0 = np.sqrt(np.sum(d * d, axis=-1))
    e0_break = total_free_energy(grid, params, d, H)
    e0 = 0.5 * lp_norm(grid, v, 2) ** 2 + e0_break.total

    times = []
    states = []
    rows = {k: [] for k in SimulationTrace.DIAG_COLUMNS}

    def record(step, t, v, d, ints):
        br = total_free_energy(grid, params, d, H)
        kinetic = 0.5 * lp_norm(grid, v, 2) ** 2
        residual = (kinetic + br.total + ints[0] + ints[1] + ints[2] + ints[3]) - (
            e0 + ints[4]
        )
        dev = float(np.max(np.abs(np.sqrt(np.sum(d * d, axis=-1)) - norm0)))
        times.append(t)
        states.append(FieldState(v=v.copy(), d=d.copy(), t=t))
        rows["t"].append(t)
        rows["kinetic"].append(kinetic)
        rows["elastic"].append(br.elastic)
        rows["magnetic"].append(br.magnetic)
        rows["diss_mu1"].append(ints[0])
        rows["diss_mu4"].append(ints[1])
        rows["diss_mu56"].append(ints[2])
        rows["diss_dxq"].append(ints[3])
        rows["energy_residual"].append(residual)
        rows["max_norm_deviation"].append(dev)

    record(0, 0.0, v, d, ints)

    def f(t, v, d):
        return _rhs(grid, params, v, d, t, config, H)

    for step in range(1, n_steps + 1):
        t = (step - 1) * dt
        if config.integrator == "euler":
            dv, dd, r = f(t, v, d)
            v = v + dt * dv
            d = d + dt * dd
            ints = ints + dt * r
        else:
            k1v, k1d, k1r = f(t, v, d)
            k2v, k2d, k2r = f(t + 0.5 * dt, v + 0.5 * dt * k1v, d + 0.5 * dt * k1d)
            k3v, k3d, k3r = f(t + 0.5 * dt, v + 0.5 * dt * k2v, d + 0.5 * dt * k2d)
            k4v, k4d, k4r = f(t + dt, v + dt * k3v, d + dt * k3d)
            v = v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            d = d + (dt / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
            ints = ints + (dt / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
        t_new = step * dt
        _check_state(grid, v, d, config.blowup_threshold, step, t_new)
        if step % config.record_every == 0 or step == n_steps:
            record(step, t_new, v, d, ints)

    diagnostics = {k: np.asarray(rows[k]) for k in rows}
    return SimulationTrace(
        grid=grid,
        params=params,
        config=config,
        H=H,
        times=np.asarray(times),
        states=states,
        diagnostics=diagnostics,
        initial_norm=norm0,
    )


@dataclass
class EnergyReport:
    times: np.ndarray
    total: np.ndarray
    residual: np.ndarray
    h1_d: np.ndarray
    coercivity_lower: np.ndarray
    coercivity_margin: np.ndarray
    coercivity_ok: bool
    bound_constant: float
    sup_v_l2: float
    sup_d_h1: float
    max_residual: float

    COLUMNS = (
        "t",
        "total",
        "residual",
        "h1_d",
        "coercivity_lower",
        "coercivity_margin",
        "coercivity_ok",
    )


def energy_report(trace, d1=None) -> EnergyReport:
    """Energy-equality and coercivity diagnostics along a completed trace.

    The coercivity statement checked is F(d(t)) >= eta ||d(t)||_H1^2 - c
    with eta = k_coercive. The constant c is eta times the squared L2 norm
    of the reference field: the elliptic extension of d1 in dirichlet mode,
    the initial director in periodic mode (where the L2 norm of d is a
    conserved quantity of the scheme).
    """
    grid = trace.grid
    params = trace.params
    if grid.boundary == "dirichlet":
        bc = d1 if d1 is not None else trace.states[0].d
        ref = extend_dirichlet(grid, np.asarray(bc, dtype=float), params.k1, params.k2)
    else:
        ref = trace.states[0].d
    c_bound = params.k_coercive * lp_norm(grid, ref, 2) ** 2

    times = trace.times
    total = (
        trace.diagnostics["kinetic"]
        + trace.diagnostics["elastic"]
        + trace.diagnostics["magnetic"]
    )
    free = trace.diagnostics["elastic"] + trace.diagnostics["magnetic"]
    h1 = np.array([h1_norm(grid, st.d) for st in trace.states])
    lower = params.k_coercive * h1**2 - c_bound
    margin = free - lower
    sup_v = np.max(np.sqrt(2.0 * trace.diagnostics["kinetic"]))
    return EnergyReport(
        times=times,
        total=total,
        residual=trace.diagnostics["energy_residual"],
        h1_d=h1,
        coercivity_lower=lower,
        coercivity_margin=margin,
        coercivity_ok=bool(np.all(margin >= -1e-10)),
        bound_constant=c_bound,
        sup_v_l2=float(sup_v),
        sup_d_h1=float(np.max(h1)),
        max_residual=float(np.max(np.abs(trace.diagnostics["energy_residual"]))),
    )

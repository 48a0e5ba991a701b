"""End-time optimal control over static magnetic fields.

The reduced cost maps a small control parameter vector to a field H,
runs the scheme once and measures the distance of the final state to
the targets plus a quadratic control penalty.  Minimization is a
projected descent with central finite-difference gradients; the
parametrizations are linear, so the L^3 ball constraint is enforced by
radial scaling in parameter space.  The paper-level problem proves
existence only; the descent reports the local minimizer it reaches and
makes no global claim.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import scheme
from .fields import h1_norm, lp_norm
from .scheme import BlowUpError


class ControlError(ValueError):
    pass


@dataclass(frozen=True)
class ControlProblem:
    """Targets, penalty, constraint radius and control parametrization.

    parametrization "uniform" is a spatially constant field (3
    parameters); "fourier" spans the lowest fourier_modes wavevectors
    with two transverse polarizations and two phases each (4 parameters
    per wavevector), divergence-free by construction.
    """

    grid: object
    params: object
    config: object
    state0: object
    v_target: np.ndarray
    d_target: np.ndarray
    gamma_ctrl: float
    c_H: float
    parametrization: str = "uniform"
    fourier_modes: int = 4
    max_mode: int = 2

    def __post_init__(self):
        if self.gamma_ctrl <= 0:
            raise ControlError("control penalty gamma_ctrl must be positive")
        if self.c_H <= 0:
            raise ControlError("constraint radius c_H must be positive")
        if self.parametrization not in ("uniform", "fourier"):
            raise ControlError(
                "parametrization must be 'uniform' or 'fourier', got %r"
                % (self.parametrization,))
        shape = self.grid.shape + (3,)
        if self.v_target.shape != shape or self.d_target.shape != shape:
            raise ControlError("target shapes must match the grid")
        if self.parametrization == "fourier":
            if self.grid.boundary != "periodic":
                raise ControlError(
                    "fourier control parametrization needs a periodic grid")
            if self.fourier_modes < 1:
                raise ControlError("fourier_modes must be at least 1")
            if self.dim > 64:
                raise ControlError(
                    "control dimension %d exceeds 64" % self.dim)

    @property
    def dim(self):
        if self.parametrization == "uniform":
            return 3
        return 4 * self.fourier_modes


def _wavevectors(grid, count, max_mode):
    """Deterministic list of integer mode tuples, one per +/- pair."""
    ranges = [range(-max_mode, max_mode + 1)] * grid.ndim
    found = []
    for m in np.ndindex(*[2 * max_mode + 1] * grid.ndim):
        mode = tuple(ranges[a][m[a]] for a in range(grid.ndim))
        if all(c == 0 for c in mode):
            continue
        nz = next(c for c in mode if c != 0)
        if nz < 0:
            continue
        found.append(mode)
    found.sort(key=lambda mode: (sum(c * c for c in mode), mode))
    if len(found) < count:
        raise ControlError(
            "only %d wavevectors available up to max_mode=%d, need %d"
            % (len(found), max_mode, count))
    return found[:count]


def _polarizations(kvec):
    ez = np.array([0.0, 0.0, 1.0])
    ex = np.array([1.0, 0.0, 0.0])
    u = ez if np.linalg.norm(np.cross(kvec, ez)) > 1e-12 else ex
    e1 = np.cross(kvec, u)
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(kvec, e1)
    e2 = e2 / np.linalg.norm(e2)
    return e1, e2


def build_control_field(problem, theta):
    """Realize the control parameters as a field on the grid."""
    grid = problem.grid
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (problem.dim,):
        raise ControlError(
            "expected %d control parameters, got shape %r"
            % (problem.dim, theta.shape))
    shape = grid.shape + (3,)
    if problem.parametrization == "uniform":
        return np.broadcast_to(theta, shape).copy()
    H = np.zeros(shape)
    mesh = grid.mesh()
    modes = _wavevectors(grid, problem.fourier_modes, problem.max_mode)
    for w, mode in enumerate(modes):
        kvec = np.zeros(3)
        phase = np.zeros(grid.shape)
        for a, m in enumerate(mode):
            ka = 2.0 * np.pi * m / grid.extent[a]
            kvec[a] = ka
            phase = phase + ka * mesh[a]
        e1, e2 = _polarizations(kvec)
        c = np.cos(phase)[..., None]
        s = np.sin(phase)[..., None]
        a0 = 4 * w
        H = H + theta[a0] * c * e1 + theta[a0 + 1] * s * e1
        H = H + theta[a0 + 2] * c * e2 + theta[a0 + 3] * s * e2
    return H


def project_control(grid, H, c_H):
    """Radial projection onto the L^3 ball of radius c_H."""
    norm = lp_norm(grid, H, 3)
    if norm <= c_H:
        return H
    return H * (c_H / norm)


def _project_theta(problem, theta):
    norm = lp_norm(problem.grid, build_control_field(problem, theta), 3)
    if norm <= problem.c_H or norm == 0.0:
        return theta
    return theta * (problem.c_H / norm)


def cost_J(final_state, H, problem):
    """End-time tracking cost plus the control penalty."""
    grid = problem.grid
    out = lp_norm(grid, final_state.v - problem.v_target, 2) ** 2
    out += h1_norm(grid, final_state.d - problem.d_target) ** 2
    if H is not None:
        out += problem.gamma_ctrl * lp_norm(grid, H, 2) ** 2
    return float(out)


@dataclass
class ControlResult:
    theta: np.ndarray
    H_opt: np.ndarray
    J_history: np.ndarray
    trace: object
    evaluations: int
    log: list
    converged: bool
    message: str

    LOG_COLUMNS = ("iteration", "J", "grad_norm", "step", "H_l2", "H_l3")


def _reduced_cost(problem, theta, lean_config):
    H = build_control_field(problem, theta)
    try:
        trace = scheme.integrate(problem.grid, problem.params, problem.state0,
                                 lean_config, H)
    except BlowUpError:
        return np.inf, None, H
    return cost_J(trace.states[-1], H, problem), trace, H


def optimize(problem, theta0=None, tol=1e-10, grad_tol=1e-8, stag_tol=1e-12,
             max_iters=100, max_evals=200, fd_step=None, step0=1.0,
             shrink=0.5, grow=1.5, min_step=1e-12):
    """Projected descent on the reduced cost.

    Every cost evaluation is one full scheme integration and counts
    against max_evals.  Gradients use central differences with step
    fd_step (default 1e-4 * c_H); candidates are projected into the
    L^3 ball before evaluation, so every accepted iterate is feasible.
    A blown-up integration yields an infinite cost and the step is
    rejected by the simple-decrease test.  Finite-difference components
    that come back non-finite are dropped from the gradient.
    """
    dim = problem.dim
    n_steps = max(1, int(round(problem.config.t_end / problem.config.dt)))
    lean = replace(problem.config, record_every=n_steps)
    if theta0 is None:
        theta = np.zeros(dim)
    else:
        theta = np.asarray(theta0, dtype=float).copy()
    theta = _project_theta(problem, theta)

    evals = 0

    def ev(t):
        nonlocal evals
        evals += 1
        return _reduced_cost(problem, t, lean)

    J, trace, H = ev(theta)
    if not np.isfinite(J):
        raise ControlError("initial control evaluation blew up")
    history = [J]
    log = [(0, J, 0.0, 0.0, lp_norm(problem.grid, H, 2),
            lp_norm(problem.grid, H, 3))]
    converged = False
    message = "max iterations reached"
    if J <= tol:
        converged = True
        message = "initial cost below tolerance"
        max_iters = 0

    step = step0
    h = fd_step if fd_step is not None else 1e-4 * problem.c_H
    for it in range(1, max_iters + 1):
        if evals + 2 * dim + 1 > max_evals:
            message = "evaluation budget exhausted"
            break
        g = np.zeros(dim)
        for j in range(dim):
            probe = np.zeros(dim)
            probe[j] = h
            jp, _, _ = ev(theta + probe)
            jm, _, _ = ev(theta - probe)
            if np.isfinite(jp) and np.isfinite(jm):
                g[j] = (jp - jm) / (2.0 * h)
        gnorm = float(np.linalg.norm(g))
        if gnorm < grad_tol:
            converged = True
            message = "gradient norm below tolerance"
            break
        accepted = False
        while step >= min_step and evals < max_evals:
            cand = _project_theta(problem, theta - step * g)
            Jc, tc, Hc = ev(cand)
            if Jc < J:
                prev = J
                theta, J, trace, H = cand, Jc, tc, Hc
                accepted = True
                break
            step *= shrink
        if not accepted:
            message = "line search stalled"
            break
        history.append(J)
        log.append((it, J, gnorm, step, lp_norm(problem.grid, H, 2),
                    lp_norm(problem.grid, H, 3)))
        if J <= tol:
            converged = True
            message = "cost below tolerance"
            break
        if prev - J <= stag_tol * max(1.0, abs(prev)):
            message = "cost stagnated"
            break
        step *= grow

    return ControlResult(
        theta=theta,
        H_opt=build_control_field(problem, theta),
        J_history=np.asarray(history),
        trace=trace,
        evaluations=evals,
        log=log,
        converged=converged,
        message=message,
    )

"""Relative-energy comparison and the dissipative-solution certificate.

A computed trace is compared against a smooth test trajectory through
the relative energy, the relative dissipation, a regularity weight with
an unspecified constant C, and a residual pairing.  The certificate
evaluates both sides of the resulting Gronwall-type inequality on the
trace's sample times and, when C is not supplied, searches for the
smallest constant that makes the slack nonnegative.

Two pairing variants exist.  "continuous" uses the classical equation
residual with the divergence-form Ericksen stress and unprojected
variational derivatives.  "discrete" uses the scheme's algebraic
Ericksen term, projected variational derivatives (gamma shift only on
the trace side, matching the scheme) and adds the projection-residual
terms, all of which vanish in collocation mode with a unit test
director.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .energy import variational_derivative
from .fields import (
    director_project,
    div_mat,
    grad,
    inner,
    integrate,
    leray_project,
    lp_norm,
    twist_field,
    w1p_norm,
)
from .scheme import _forcing_at, assemble_rhs, leslie_stress
from .tensors import (
    mat_t_vec,
    matvec,
    outer3,
    rank4_apply,
    rank4_form,
    rank6_apply,
    rank6_form,
    skw_part,
    sym_part,
    transverse_projector,
)


class TrajectoryError(ValueError):
    pass


def _field_or_zero(grid, H):
    if H is None:
        return np.zeros(grid.shape + (3,))
    return np.asarray(H, dtype=float)


@dataclass(frozen=True)
class TestSample:
    """Fields of a test trajectory frozen at one time."""

    __test__ = False  # not a pytest case despite the name

    t: float
    v: np.ndarray
    d: np.ndarray
    dt_v: np.ndarray
    dt_d: np.ndarray


class TestTrajectory:
    """Comparison trajectory sampled on demand.

    sampler maps a time to a TestSample on the trajectory's grid; H is
    the static test-side magnetic field (None means zero).  The unit
    constraint on the director is checked nodewise at registration and
    on every sample.
    """

    __test__ = False  # not a pytest case despite the name

    def __init__(self, grid, sampler, H=None, label="custom", unit_tol=1e-10,
                 check_time=0.0):
        self.grid = grid
        self.H = None if H is None else np.asarray(H, dtype=float)
        self.label = label
        self.unit_tol = float(unit_tol)
        self._sampler = sampler
        self.sample(check_time)

    def sample(self, t):
        s = self._sampler(float(t))
        dev = np.max(np.abs(np.sqrt(np.sum(s.d * s.d, axis=-1)) - 1.0))
        if dev > self.unit_tol:
            raise TrajectoryError(
                "test director must be unit nodewise, max deviation %.3e "
                "exceeds %.1e" % (dev, self.unit_tol))
        return s

    @classmethod
    def equilibrium(cls, grid, direction=(0.0, 0.0, 1.0)):
        """Constant unit director at rest."""
        e = np.asarray(direction, dtype=float)
        e = e / np.linalg.norm(e)
        shape = grid.shape + (3,)

        def sampler(t):
            d = np.broadcast_to(e, shape).copy()
            return TestSample(t, np.zeros(shape), d, np.zeros(shape),
                              np.zeros(shape))

        return cls(grid, sampler, H=None, label="equilibrium")

    @classmethod
    def static_twist(cls, grid, mode=1, H=None):
        """Stationary twist pattern at rest."""
        d = twist_field(grid, mode=mode)
        shape = d.shape

        def sampler(t):
            return TestSample(t, np.zeros(shape), d.copy(), np.zeros(shape),
                              np.zeros(shape))

        return cls(grid, sampler, H=H, label="static_twist")

    @classmethod
    def from_callables(cls, grid, v_fn, d_fn, dt_v_fn=None, dt_d_fn=None,
                       H=None, label="callable", fd_eps=1e-6, unit_tol=1e-10):
        """Build from callables t -> field array.

        Missing time derivatives are replaced by centered differences
        with step fd_eps.
        """

        def sampler(t):
            v = np.asarray(v_fn(t), dtype=float)
            d = np.asarray(d_fn(t), dtype=float)
            if dt_v_fn is not None:
                dv = np.asarray(dt_v_fn(t), dtype=float)
            else:
                dv = (np.asarray(v_fn(t + fd_eps), dtype=float)
                      - np.asarray(v_fn(t - fd_eps), dtype=float)) / (2.0 * fd_eps)
            if dt_d_fn is not None:
                dd = np.asarray(dt_d_fn(t), dtype=float)
            else:
                dd = (np.asarray(d_fn(t + fd_eps), dtype=float)
                      - np.asarray(d_fn(t - fd_eps), dtype=float)) / (2.0 * fd_eps)
            return TestSample(t, v, d, dv, dd)

        return cls(grid, sampler, H=H, label=label, unit_tol=unit_tol)

    @classmethod
    def from_trace(cls, trace, unit_tol=1e-6):
        """Reuse a computed trace as its own test trajectory.

        Time derivatives are the assembled right-hand side, the exact
        semidiscrete derivative at each stored state.  The stored
        director is unit only up to integration error, hence the looser
        default tolerance.
        """
        lookup = {}
        for state in trace.states:
            lookup[round(float(state.t), 12)] = state

        def sampler(t):
            state = lookup.get(round(t, 12))
            if state is None:
                raise TrajectoryError("trace has no sample at t=%r" % t)
            dv, dd = assemble_rhs(trace.grid, trace.params, state,
                                  trace.config, trace.H)
            return TestSample(float(state.t), state.v.copy(), state.d.copy(),
                              dv, dd)

        return cls(trace.grid, sampler, H=trace.H, label="from_trace",
                   unit_tol=unit_tol, check_time=float(trace.times[0]))


def rel_energy(grid, state, H, test, H_test, params):
    """Relative energy between a state and a test state, tensor form."""
    Hn = _field_or_zero(grid, H)
    Ht = _field_or_zero(grid, H_test)
    gd = grad(grid, state.d)
    gt = grad(grid, test.d)
    dvel = state.v - test.v
    dgrad = gd - gt
    dgam = outer3(gd, state.d) - outer3(gt, test.d)
    spar = np.sum(state.d * Hn, -1) - np.sum(test.d * Ht, -1)
    sperp = np.cross(state.d, Hn) - np.cross(test.d, Ht)
    out = 0.5 * integrate(grid, np.sum(dvel * dvel, -1))
    out += 0.5 * integrate(grid, rank4_form(dgrad, params.elastic_rank4, dgrad))
    out += 0.5 * integrate(grid, rank6_form(dgam, params.elastic_rank6, dgam))
    out -= 0.5 * params.chi_par * integrate(grid, spar * spar)
    out -= 0.5 * params.chi_perp * integrate(grid, np.sum(sperp * sperp, -1))
    return float(out)


def rel_energy_expanded(grid, state, H, test, H_test, params):
    """Same quantity written out in the splay/twist/bend constants."""
    Hn = _field_or_zero(grid, H)
    Ht = _field_or_zero(grid, H_test)
    gd = grad(grid, state.d)
    gt = grad(grid, test.d)
    div_d = np.trace(gd, axis1=-2, axis2=-1)
    div_t = np.trace(gt, axis1=-2, axis2=-1)
    skw_d = skw_part(gd)
    skw_t = skw_part(gt)
    dvel = state.v - test.v
    s1 = div_d - div_t
    s2 = skw_d - skw_t
    s3 = div_d[..., None] * state.d - div_t[..., None] * test.d
    curl_d = np.stack([gd[..., 2, 1] - gd[..., 1, 2],
                       gd[..., 0, 2] - gd[..., 2, 0],
                       gd[..., 1, 0] - gd[..., 0, 1]], axis=-1)
    curl_t = np.stack([gt[..., 2, 1] - gt[..., 1, 2],
                       gt[..., 0, 2] - gt[..., 2, 0],
                       gt[..., 1, 0] - gt[..., 0, 1]], axis=-1)
    s4 = np.sum(state.d * curl_d, -1) - np.sum(test.d * curl_t, -1)
    s5 = matvec(skw_d, state.d) - matvec(skw_t, test.d)
    spar = np.sum(state.d * Hn, -1) - np.sum(test.d * Ht, -1)
    sperp = np.cross(state.d, Hn) - np.cross(test.d, Ht)
    out = 0.5 * params.k1 * integrate(grid, s1 * s1)
    out += params.k2 * integrate(grid, np.sum(s2 * s2, (-2, -1)))
    out += 0.5 * params.k3 * integrate(grid, np.sum(s3 * s3, -1))
    out += 0.5 * params.k4 * integrate(grid, s4 * s4)
    out += 2.0 * params.k5 * integrate(grid, np.sum(s5 * s5, -1))
    out += 0.5 * integrate(grid, np.sum(dvel * dvel, -1))
    out -= 0.5 * params.chi_par * integrate(grid, spar * spar)
    out -= 0.5 * params.chi_perp * integrate(grid, np.sum(sperp * sperp, -1))
    return float(out)


def rel_dissipation(grid, state, q, test, q_test, params):
    """Relative dissipation between a state and a test state."""
    sv = sym_part(grad(grid, state.v))
    st = sym_part(grad(grid, test.v))
    lam2 = params.lam ** 2
    a1 = np.sum(state.d * matvec(sv, state.d), -1) - np.sum(
        test.d * matvec(st, test.d), -1)
    a2 = sv - st
    a3 = matvec(sv, state.d) - matvec(st, test.d)
    a4 = np.cross(state.d, q) - np.cross(test.d, q_test)
    out = (params.mu1 + lam2) * integrate(grid, a1 * a1)
    out += params.mu4 * integrate(grid, np.sum(a2 * a2, (-2, -1)))
    out += (params.mu5 + params.mu6 - lam2) * integrate(grid, np.sum(a3 * a3, -1))
    out += integrate(grid, np.sum(a4 * a4, -1))
    return float(out)


def regularity_weight(grid, params, test, H_test, C, q_test=None):
    """Weight K(s) built from the test-state norms, scaled by C."""
    if q_test is None:
        q_test = variational_derivative(grid, params, test.d, H_test)
    base = lp_norm(grid, test.v, np.inf) ** 2
    base += lp_norm(grid, grad(grid, test.v), 3) ** 2
    base += lp_norm(grid, q_test, 3) ** 2
    base += lp_norm(grid, test.dt_d, np.inf)
    base += w1p_norm(grid, test.dt_d, 3)
    base += lp_norm(grid, test.dt_d, 3) ** 2
    return float(C) * float(base)


def _theta_gamma(grid, params, d):
    return rank6_apply(params.elastic_rank6, outer3(grad(grid, d), d))


def correction(grid, params, d, H, d_test, H_test):
    """Correction vector a entering the residual pairing."""
    t3 = _theta_gamma(grid, params, d_test)
    diff = d_test - d
    m = np.einsum("...ijk,...k->...ij", t3, diff)
    out = np.einsum("...ij,...ijk->...k", m, t3) / params.k_coercive
    Hn = _field_or_zero(grid, H)
    Ht = _field_or_zero(grid, H_test)
    dh = Ht - Hn
    out = out + params.chi_par * np.sum(d_test * Ht, -1)[..., None] * dh
    out = out - params.chi_perp * np.cross(dh, np.cross(Ht, d_test))
    return out


def initial_distance(grid, state0, H, test0, H_test, params):
    """Distance measure at the initial time, relative energy plus the
    quadratic and cross terms in the rank-6 coupling."""
    e = rel_energy(grid, state0, H, test0, H_test, params)
    t3 = _theta_gamma(grid, params, test0.d)
    diff = state0.d - test0.d
    m = np.einsum("...ijk,...k->...ij", t3, diff)
    quad = integrate(grid, np.sum(m * m, (-2, -1))) / (2.0 * params.k_coercive)
    cross_term = inner(grid, outer3(grad(grid, state0.d) - grad(grid, test0.d),
                                    diff), t3)
    return float(e + quad + cross_term)


def equation_residual(grid, params, test, H_test, g=None, mode="continuous",
                      space=None, q=None):
    """Strong-form residual of the test trajectory, both components.

    mode "continuous" uses the divergence-form Ericksen stress and the
    raw variational derivative; mode "discrete" uses the scheme's
    algebraic Ericksen term and the projected, shift-free variational
    derivative (pass q to override, e.g. with the scheme's own shifted
    value when evaluating the residual at a trace state).
    """
    if mode not in ("continuous", "discrete"):
        raise ValueError("mode must be 'continuous' or 'discrete'")
    gvel = grad(grid, test.v)
    gdir = grad(grid, test.d)
    conv = matvec(gvel, test.v)
    if q is None:
        q = variational_derivative(grid, params, test.d, H_test)
        if mode == "discrete":
            q = director_project(grid, q, space)
    stress = leslie_stress(grid, params, test.v, test.d, q)
    if mode == "continuous":
        phi = rank4_apply(params.elastic_rank4, gdir)
        phi = phi + np.einsum("...ijk,...k->...ij",
                              _theta_gamma(grid, params, test.d), test.d)
        ericksen = div_mat(grid, np.einsum("...ki,...kj->...ij", gdir, phi))
        comp_v = test.dt_v + conv + ericksen - div_mat(grid, stress)
    else:
        pq = matvec(transverse_projector(test.d), q)
        comp_v = test.dt_v + conv - mat_t_vec(gdir, pq) - div_mat(grid, stress)
    if g is not None:
        comp_v = comp_v - g
    rot = test.dt_d + matvec(gdir, test.v) - matvec(skw_part(gvel), test.d)
    rot = rot + params.lam * matvec(sym_part(gvel), test.d) + q
    comp_d = np.cross(test.d, rot)
    return comp_v, comp_d


def weak_pairing(grid, params, l, h, H):
    """Duality bracket of l against the variational derivative at h,
    with the elastic part in weak form."""
    gh = grad(grid, h)
    t3 = _theta_gamma(grid, params, h)
    flux = rank4_apply(params.elastic_rank4, gh)
    flux = flux + np.einsum("...ijk,...k->...ij", t3, h)
    out = inner(grid, grad(grid, l), flux)
    bulk = np.einsum("...ij,...ijk->...k", gh, t3)
    Hn = _field_or_zero(grid, H)
    bulk = bulk - params.chi_par * np.sum(h * Hn, -1)[..., None] * Hn
    bulk = bulk + params.chi_perp * np.cross(Hn, np.cross(Hn, h))
    return float(out + inner(grid, l, bulk))


@dataclass(frozen=True)
class CertificateReport:
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    slack: np.ndarray
    minimal_C: float
    passed: bool
    pairing: str
    tol: float
    label: str
    warnings: tuple

    COLUMNS = ("t", "lhs", "rhs", "slack")

    def rows(self):
        for i in range(len(self.times)):
            yield (float(self.times[i]), float(self.lhs[i]),
                   float(self.rhs[i]), float(self.slack[i]))

    def summary(self):
        c = None if math.isinf(self.minimal_C) else float(self.minimal_C)
        return {
            "minimal_C": c,
            "passed": bool(self.passed),
            "pairing": self.pairing,
            "tol": float(self.tol),
            "samples": int(len(self.times)),
            "trajectory": self.label,
            "warnings": list(self.warnings),
        }


def _sample_terms(trace, state, ts, Hn, Ht, params, pairing):
    """Per-sample relative quantities and the residual pairing value."""
    grid = trace.grid
    g = _forcing_at(trace.config, float(state.t))
    if pairing == "continuous":
        qn = variational_derivative(grid, params, state.d, Hn)
        qt = variational_derivative(grid, params, ts.d, Ht)
        av, ad = equation_residual(grid, params, ts, Ht, g=g, q=qt)
        a = correction(grid, params, state.d, Hn, ts.d, Ht)
        pair = inner(grid, av, ts.v - state.v)
        pair += inner(grid, ad, np.cross(state.d, qt - qn + a))
    else:
        space = trace.config.director_space
        cutoff = trace.config.velocity_cutoff
        qn = variational_derivative(grid, params, state.d, Hn, project=space)
        qt = director_project(
            grid, variational_derivative(grid, params, ts.d, Ht), space)
        av, ad = equation_residual(grid, params, ts, Ht, g=g, mode="discrete",
                                   space=space, q=qt)
        a = correction(grid, params, state.d, Hn, ts.d, Ht)
        delta = qt - qn + a
        pair = inner(grid, av, ts.v - state.v)
        pair += inner(grid, ad, np.cross(state.d, delta))
        l = ts.dt_d - director_project(grid, ts.dt_d, space)
        if np.any(l):
            pair += weak_pairing(grid, params, l, ts.d, Ht)
            pair -= weak_pairing(grid, params, l, state.d, Hn)
        dvn, ddn = assemble_rhs(grid, params, state, trace.config, trace.H)
        own = TestSample(float(state.t), state.v, state.d, dvn, ddn)
        avn, adn = equation_residual(grid, params, own, Hn, g=g,
                                     mode="discrete", space=space, q=qn)
        ra = director_project(grid, a, space) - a
        pair += inner(grid, avn, leray_project(grid, ts.v, cutoff) - ts.v)
        pair += inner(grid, adn, np.cross(state.d, ra))
        norm_n = np.sum(state.d * state.d, -1)
        pair += inner(grid, ddn * (norm_n - 1.0)[..., None], ra)
        norm_t = np.sum(ts.d * ts.d, -1)
        defect = (1.0 - norm_t)[..., None] * ts.dt_d
        defect = defect + np.sum(ts.d * ts.dt_d, -1)[..., None] * ts.d
        pair += inner(grid, defect, delta)
    e = rel_energy(grid, state, Hn, ts, Ht, params)
    w = rel_dissipation(grid, state, qn, ts, qt, params)
    kb = regularity_weight(grid, params, ts, Ht, 1.0, q_test=qt)
    return e, w, kb, float(pair)


def _evaluate(times, e, w, kbase, pair, d0, hdist, C):
    k = C * kbase
    steps = np.diff(times)
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (k[1:] + k[:-1]) * steps)))
    n = len(times)
    lhs = np.empty(n)
    rhs = np.empty(n)
    with np.errstate(over="ignore"):
        for i in range(n):
            wgt = np.exp(cum[i] - cum[: i + 1])
            tt = times[: i + 1]
            lhs[i] = 0.5 * e[i] + hdist + 0.5 * trapezoid(w[: i + 1] * wgt, tt)
            rhs[i] = d0 * np.exp(cum[i]) + trapezoid(pair[: i + 1] * wgt, tt)
    return lhs, rhs, rhs - lhs


def certificate(trace, H, test, H_test, params, C=None, tol=1e-6,
                pairing="continuous", c_max=1e6):
    """Evaluate the dissipative-solution inequality along a trace.

    Returns a CertificateReport with both sides on the trace's sample
    times.  With C unset the minimal admissible constant is located by
    doubling and bisection; math.inf is reported when no constant up to
    c_max closes the inequality.
    """
    if pairing not in ("continuous", "discrete"):
        raise ValueError("pairing must be 'continuous' or 'discrete'")
    grid = trace.grid
    Hn = None if H is None else np.asarray(H, dtype=float)
    Ht = None if H_test is None else np.asarray(H_test, dtype=float)
    times = np.asarray(trace.times, dtype=float)
    n = len(times)
    warnings = []
    if n < 8:
        warnings.append(
            "only %d time samples; trapezoid quadrature may be "
            "under-resolved" % n)

    e = np.empty(n)
    w = np.empty(n)
    kbase = np.empty(n)
    pair = np.empty(n)
    ts0 = None
    for i, state in enumerate(trace.states):
        ts = test.sample(times[i])
        if i == 0:
            ts0 = ts
        e[i], w[i], kbase[i], pair[i] = _sample_terms(
            trace, state, ts, Hn, Ht, params, pairing)
    d0 = initial_distance(grid, trace.states[0], Hn, ts0, Ht, params)
    dH = _field_or_zero(grid, Hn) - _field_or_zero(grid, Ht)
    hdist = inner(grid, dH, dH)

    def run(c):
        lhs, rhs, slack = _evaluate(times, e, w, kbase, pair, d0, hdist, c)
        ok = bool(np.all(np.isfinite(slack)) and np.min(slack) >= -tol)
        return lhs, rhs, slack, ok

    if C is not None:
        lhs, rhs, slack, ok = run(float(C))
        return CertificateReport(times, lhs, rhs, slack, float(C), ok,
                                 pairing, float(tol), test.label,
                                 tuple(warnings))

    lhs, rhs, slack, ok = run(0.0)
    if ok:
        return CertificateReport(times, lhs, rhs, slack, 0.0, True, pairing,
                                 float(tol), test.label, tuple(warnings))
    lo, hi = 0.0, 1.0
    found = False
    while hi <= c_max:
        _, _, _, ok = run(hi)
        if ok:
            found = True
            break
        lo, hi = hi, 2.0 * hi
    if not found:
        _, _, _, ok = run(c_max)
        if ok:
            found, hi = True, c_max
    if not found:
        lhs, rhs, slack, _ = run(c_max)
        warnings.append("no admissible constant up to c_max=%g" % c_max)
        return CertificateReport(times, lhs, rhs, slack, math.inf, False,
                                 pairing, float(tol), test.label,
                                 tuple(warnings))
    while hi - lo > 1e-3 * max(hi, 1.0):
        mid = 0.5 * (lo + hi)
        _, _, _, ok = run(mid)
        if ok:
            hi = mid
        else:
            lo = mid
    lhs, rhs, slack, ok = run(hi)
    return CertificateReport(times, lhs, rhs, slack, hi, ok, pairing,
                             float(tol), test.label, tuple(warnings))

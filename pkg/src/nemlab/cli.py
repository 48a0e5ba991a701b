"""Batch command-line front door.

Subcommands: simulate, certify, optimize, energy-report.  Each reads a
YAML config, runs the relevant pipeline and writes deterministic CSV
files plus rendered figures into the output directory.  Timestamps live
only in the metadata sidecar, so reruns with the same config and seed
produce byte-identical CSVs.  Failures print a JSON error record to
stderr and exit nonzero.
"""

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import figures
from .certificate import TestTrajectory, TrajectoryError, certificate
from .config import (
    ConfigError,
    apply_overrides,
    build_run,
    load_config,
)
from .control import ControlError, ControlProblem, cost_J, optimize
from .fields import (
    ExtensionError,
    ProjectionError,
    SnapshotError,
    lp_norm,
    read_snapshot,
    write_snapshot,
)
from .material import MaterialError
from .scheme import BlowUpError, energy_report, integrate


def _write_csv(outdir, name, header, rows):
    path = os.path.join(outdir, name)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("%.17g" % float(x) for x in row) + "\n")
    return name


def _write_json(outdir, name, payload):
    path = os.path.join(outdir, name)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return name


def _metadata(outdir, subcommand, run, outputs):
    payload = {
        "subcommand": subcommand,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "seed": run.seed,
        "config": run.echo,
        "outputs": sorted(outputs),
    }
    _write_json(outdir, "metadata.json", payload)


def _run_scheme(run):
    return integrate(run.grid, run.params, run.state0, run.config, run.H)


def _trace_outputs(run, trace, outdir):
    rows = zip(*[trace.diagnostics[k] for k in trace.DIAG_COLUMNS])
    outputs = [_write_csv(outdir, "trace.csv", trace.DIAG_COLUMNS, rows)]
    final = trace.states[-1]
    write_snapshot(os.path.join(outdir, "final_v.nlc"), run.grid, final.v)
    write_snapshot(os.path.join(outdir, "final_d.nlc"), run.grid, final.d)
    outputs += ["final_v.nlc", "final_d.nlc"]
    outputs += figures.trace_figures(trace, outdir)
    return outputs


def cmd_simulate(run, outdir):
    trace = _run_scheme(run)
    return _trace_outputs(run, trace, outdir)


def cmd_energy_report(run, outdir):
    trace = _run_scheme(run)
    report = energy_report(trace, d1=run.d1)
    ok_rows = (report.coercivity_margin >= -1e-10).astype(float)
    rows = zip(report.times, report.total, report.residual, report.h1_d,
               report.coercivity_lower, report.coercivity_margin, ok_rows)
    outputs = [_write_csv(outdir, "energy_report.csv", report.COLUMNS, rows)]
    outputs.append(_write_json(outdir, "energy_summary.json", {
        "coercivity_ok": bool(report.coercivity_ok),
        "bound_constant": report.bound_constant,
        "max_residual": report.max_residual,
        "sup_v_l2": report.sup_v_l2,
        "sup_d_h1": report.sup_d_h1,
    }))
    outputs += figures.energy_figures(report, outdir)
    return outputs


def _build_trajectory(run, trace):
    spec = run.test
    if spec is None:
        raise ConfigError("config section 'test' is required for certify")
    if spec.trajectory == "equilibrium":
        return TestTrajectory.equilibrium(run.grid, spec.direction), spec.H_test
    if spec.trajectory == "static_twist":
        traj = TestTrajectory.static_twist(run.grid, mode=spec.mode,
                                           H=spec.H_test)
        return traj, spec.H_test
    traj = TestTrajectory.from_trace(trace)
    return traj, trace.H


def cmd_certify(run, outdir):
    trace = _run_scheme(run)
    traj, H_test = _build_trajectory(run, trace)
    report = certificate(trace, run.H, traj, H_test, run.params,
                         C=run.test.C, tol=run.test.tol,
                         pairing=run.test.pairing)
    outputs = [_write_csv(outdir, "certificate.csv", report.COLUMNS,
                          report.rows())]
    outputs.append(_write_json(outdir, "certificate.json", report.summary()))
    outputs += figures.certificate_figures(report, outdir)
    return outputs


def _control_targets(run):
    spec = run.control
    if spec.target_H is not None:
        H_star = np.broadcast_to(spec.target_H, run.grid.shape + (3,)).copy()
        trace = integrate(run.grid, run.params, run.state0, run.config, H_star)
        final = trace.states[-1]
        return final.v, final.d, H_star
    vgrid, v_t = read_snapshot(spec.target_v_path)
    dgrid, d_t = read_snapshot(spec.target_d_path)
    for g in (vgrid, dgrid):
        if g.shape != run.grid.shape or g.boundary != run.grid.boundary:
            raise ConfigError("target snapshot grid does not match the run grid")
    return v_t, d_t, None


def cmd_optimize(run, outdir):
    spec = run.control
    if spec is None:
        raise ConfigError("config section 'control' is required for optimize")
    v_t, d_t, H_star = _control_targets(run)
    problem = ControlProblem(
        grid=run.grid, params=run.params, config=run.config,
        state0=run.state0, v_target=v_t, d_target=d_t,
        gamma_ctrl=spec.gamma_ctrl, c_H=spec.c_H,
        parametrization=spec.parametrization,
        fourier_modes=spec.fourier_modes, max_mode=spec.max_mode)
    result = optimize(problem, tol=spec.tol, grad_tol=spec.grad_tol,
                      max_iters=spec.max_iters, max_evals=spec.max_evals,
                      fd_step=spec.fd_step, step0=spec.step0)
    outputs = [_write_csv(outdir, "control_log.csv", result.LOG_COLUMNS,
                          result.log)]
    write_snapshot(os.path.join(outdir, "H_opt.nlc"), run.grid, result.H_opt)
    outputs.append("H_opt.nlc")
    summary = {
        "J_final": float(result.J_history[-1]),
        "evaluations": int(result.evaluations),
        "converged": bool(result.converged),
        "message": result.message,
        "theta": [float(x) for x in result.theta],
    }
    if H_star is not None:
        summary["J_reference"] = float(
            spec.gamma_ctrl * lp_norm(run.grid, H_star, 2) ** 2)
        summary["tracking_residual"] = float(
            cost_J(result.trace.states[-1], None, problem))
    outputs.append(_write_json(outdir, "control_summary.json", summary))
    outputs += figures.control_figures(result, outdir)
    return outputs


_COMMANDS = {
    "simulate": cmd_simulate,
    "certify": cmd_certify,
    "optimize": cmd_optimize,
    "energy-report": cmd_energy_report,
}


def _error_record(exc):
    return json.dumps({"error": type(exc).__name__, "message": str(exc)})


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="nemlab",
        description="Desk-scale nematic liquid crystal laboratory")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML config path")
        p.add_argument("--out", default=None,
                       help="output directory (default from config)")
        p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="override a config entry, repeatable")
    args = parser.parse_args(argv)

    try:
        data = load_config(args.config)
        apply_overrides(data, args.override)
        run = build_run(data)
        outdir = args.out if args.out is not None else run.outdir
        os.makedirs(outdir, exist_ok=True)
        outputs = _COMMANDS[args.subcommand](run, outdir)
        _metadata(outdir, args.subcommand, run, outputs)
    except (ConfigError, MaterialError, SnapshotError, TrajectoryError,
            ControlError, ValueError) as exc:
        print(_error_record(exc), file=sys.stderr)
        return 2
    except (BlowUpError, ProjectionError, ExtensionError, OSError) as exc:
        print(_error_record(exc), file=sys.stderr)
        return 3
    except Exception as exc:
        print(_error_record(exc), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

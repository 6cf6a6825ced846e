"""``probe`` command-line interface.

Exit codes: 0 success, 1 validation or usage error, 2 internal numerical
consistency failure.
"""
from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import __version__
from .constructions import (
    DcpInstanceParams,
    LambdaParams,
    build_dcp_not_kcp,
    build_lambda,
    build_trap_instance,
    lie_algebra_closure,
    two_level_system,
)
from .critical import Tolerances, classify, second_order_trap_numeric, trap_certificate
from .errors import NumericalError, ValidationError
from .landscape import (
    fd_gradient,
    gradient_discrete,
    gradient_kernel,
    hessian_kernel,
    jacobian_probe,
)
from .matrix_core import frobenius, unitarity_defect
from .optimizer import AscentConfig, gradient_ascent, multistart
from .propagator import objective_from_unitary, propagate
from .reporting import emit_report, to_json
from .system import ControlField, kinematic_bounds, load_field, load_task, save_field, save_task, task_to_dict

DEFAULT_GRID = 128


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _floats(raw: str) -> list[float]:
    return [float(x) for x in raw.split(",") if x.strip()]


def _ints(raw: str) -> list[int]:
    return [int(x) for x in raw.split(",") if x.strip()]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--task", help="task JSON file")
    p.add_argument("--field", default="zero", help="field JSON file, 'zero' or 'const:VALUE'")
    p.add_argument("--grid", type=int, default=None, help=f"interval count M (default {DEFAULT_GRID})")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--tol-grad", type=float, default=Tolerances.grad)
    p.add_argument("--tol-kcp", type=float, default=Tolerances.kcp)
    p.add_argument("--tol-hess", type=float, default=Tolerances.hess)
    p.add_argument("--starts", type=int, default=20)
    p.add_argument("--amplitude", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="probe", description="Quantum control landscape probe")
    parser.add_argument("--version", action="version", version=f"probe {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    build = sub.add_parser("build", help="write a task file for a known instance family")
    bsub = build.add_subparsers(dest="family", parser_class=_Parser)
    bsub.required = True

    lam = bsub.add_parser("lambda", help="three-level Lambda system")
    _common(lam)
    lam.add_argument("--lambdas", type=_floats, default=[1.0, 2.0, 0.0])
    lam.add_argument("--energies", type=_floats, default=[0.0, 1.0, 2.5])
    lam.add_argument("--mu13", type=float, default=1.0)
    lam.add_argument("--mu23", type=float, default=1.0)
    lam.add_argument("--T", type=float, default=5.0)
    lam.add_argument("--initial-level", type=int, default=1)

    trap = bsub.add_parser("trap", help="constant-control trap instance on a given system")
    _common(trap)
    trap.add_argument("--eps0", type=float, default=0.0)
    trap.add_argument("--k", type=int, required=True)
    trap.add_argument("--lambdas", type=_floats, required=True)
    trap.add_argument("--order", type=_ints, default=None)
    trap.add_argument("--T", type=float, default=None)

    dcp = bsub.add_parser("dcp-not-kcp", help="superposition instance critical only dynamically")
    _common(dcp)
    dcp.add_argument("--i", type=int, default=1)
    dcp.add_argument("--j", type=int, default=2)
    dcp.add_argument("--psi", type=float, default=0.0)
    dcp.add_argument("--phi", type=float, default=math.pi / 2)
    dcp.add_argument("--eps0", type=float, default=0.0)
    dcp.add_argument("--T", type=float, default=1.0)

    for name, help_ in (
        ("propagate", "objective and populations along the grid"),
        ("grad", "gradient kernel samples"),
        ("hess", "Hessian kernel matrix"),
        ("classify", "critical-point report"),
        ("trap-cert", "analytic trap certificate for a constant control"),
        ("trap-check", "numerical second-order trap check"),
        ("jacobian-rank", "rank of the sampled dipole span"),
        ("controllability", "Lie algebra rank of the system"),
        ("optimize", "gradient ascent from one field"),
        ("multistart", "gradient ascent from seeded random fields"),
    ):
        p = sub.add_parser(name, help=help_)
        _common(p)
        if name == "grad":
            p.add_argument("--check-fd", action="store_true")
            p.add_argument("--fd-step", type=float, default=1e-5)
        if name == "trap-cert":
            p.add_argument("--eps0", type=float, default=None)
        if name == "trap-check":
            p.add_argument("--probes", type=int, default=100)
            p.add_argument("--mode", choices=("max", "min"), default="max")
        if name in ("optimize", "multistart"):
            p.add_argument("--max-iters", type=int, default=2000)
            p.add_argument("--step", type=float, default=AscentConfig.initial_step)
            p.add_argument("--j-stop", type=float, default=None)
            p.add_argument("--direction", choices=("kernel", "discrete"), default="kernel")
        if name == "multistart":
            p.add_argument("--delta", type=float, default=0.05)
        if name == "optimize":
            p.add_argument("--save-field", help="write the final field to this path")
    return parser


# -- helpers --------------------------------------------------------------

def _require_task(args):
    if not args.task:
        raise ValidationError(f"{args.command} needs --task PATH")
    return load_task(args.task)


def _resolve_field(args, T: float) -> ControlField:
    raw = args.field
    M = args.grid if args.grid is not None else DEFAULT_GRID
    if M < 1:
        raise ValidationError(f"--grid must be >= 1, got {M}")
    if raw == "zero":
        return ControlField.zeros(T, M)
    if raw.startswith("const:"):
        try:
            value = float(raw[len("const:"):])
        except ValueError:
            raise ValidationError(f"bad constant field {raw!r}") from None
        return ControlField.constant(T, M, value)
    field = load_field(raw)
    if args.grid is not None and args.grid != field.M:
        raise ValidationError(f"--grid {args.grid} disagrees with field file M={field.M}")
    return field


def _const_value(raw: str) -> float | None:
    if raw == "zero":
        return 0.0
    if raw.startswith("const:"):
        return float(raw[len("const:"):])
    return None


def _tolerances(args) -> Tolerances:
    return Tolerances(grad=args.tol_grad, kcp=args.tol_kcp, hess=args.tol_hess)


def _manifest(args, params: dict, outputs: list) -> dict:
    inputs = {"task": args.task}
    if getattr(args, "field", None) is not None:
        inputs["field"] = args.field
    return {
        "command": args.command if args.command != "build" else f"build {args.family}",
        "inputs": inputs,
        "parameters": params,
        "tool_version": __version__,
        "outputs": outputs,
    }


def _write(args, report: dict, params: dict, rows=None) -> None:
    """Emit the JSON report, or CSV rows plus a JSON sidecar."""
    if args.format == "csv" and rows is not None:
        outputs = [args.out] if args.out else ["<stdout>"]
        if args.out:
            sidecar = args.out + ".json"
            outputs.append(sidecar)
        report = dict(report, manifest=_manifest(args, params, outputs))
        emit_report(rows, "csv", args.out)
        if args.out:
            emit_report(report, "json", sidecar)
        else:
            sys.stderr.write(to_json(report))
        return
    report = dict(report, manifest=_manifest(args, params, [args.out or "<stdout>"]))
    emit_report(report, "json", args.out)


def _grid_params(args, field: ControlField) -> dict:
    return {"M": field.M, "T": field.T, "dt": field.dt, "seed": args.seed}


# -- commands -------------------------------------------------------------

def cmd_build(args) -> None:
    if args.family == "lambda":
        if len(args.lambdas) != 3 or len(args.energies) != 3:
            raise ValidationError("--lambdas and --energies need three values each")
        params = LambdaParams(tuple(args.lambdas), tuple(args.energies), args.mu13, args.mu23, args.T)
        task = build_lambda(params, args.initial_level)
        extra = {}
    elif args.family == "trap":
        base = _require_task(args)
        task = build_trap_instance(
            base.system, args.eps0, args.k, args.lambdas, args.T or base.T, order=args.order
        )
        extra = {}
    else:
        system = _require_task(args).system if args.task else two_level_system()
        params = DcpInstanceParams(
            system, args.i, args.j, args.psi, args.phi, args.T, eps0=args.eps0
        )
        task, pred = build_dcp_not_kcp(params)
        extra = {"predictions": pred.to_dict()}
    if args.out:
        save_task(task, args.out)
        summary = {"written": args.out, "n": task.n, "template": task.template, **extra}
        summary["manifest"] = _manifest(args, {"family": args.family}, [args.out])
        emit_report(summary, "json", None)
    else:
        # bare task file on stdout so it can be redirected
        emit_report(task_to_dict(task), "json", None)


def cmd_propagate(args) -> None:
    task = _require_task(args)
    field = _resolve_field(args, task.T)
    prop = propagate(task, field)
    J = objective_from_unitary(task, prop.U_final)
    report = {
        "J": J,
        "unitarity_defect": unitarity_defect(prop.U_final),
        "U_final": prop.U_final,
        "O_T": prop.O_T,
    }
    states = prop.boundary_unitaries @ task.rho0 @ np.swapaxes(prop.boundary_unitaries, -1, -2).conj()
    pops = np.real(np.diagonal(states, axis1=-2, axis2=-1))
    header = ("m", "t") + tuple(f"p{k + 1}" for k in range(task.n))
    rows = [header] + [(m, m * field.dt, *pops[m]) for m in range(field.M + 1)]
    _write(args, report, _grid_params(args, field), rows)


def cmd_grad(args) -> None:
    task = _require_task(args)
    field = _resolve_field(args, task.T)
    g = gradient_kernel(task, field)
    disc = gradient_discrete(task, field)
    kernel_err = float(np.linalg.norm(g.discrete() - disc) / max(1e-12, np.linalg.norm(disc)))
    report = {
        "M": field.M,
        "dt": field.dt,
        "kernel_sup_norm": g.sup_norm,
        "discrete_l2_norm": float(np.linalg.norm(disc)),
        "kernel_vs_discrete_rel_error": kernel_err,
    }
    header = ["m", "t_mid", "g_kernel", "dt_g_kernel", "grad_discrete"]
    cols = [np.arange(field.M), field.midpoints(), g.samples, g.discrete(), disc]
    params = _grid_params(args, field)
    if args.check_fd:
        fd = fd_gradient(task, field, args.fd_step)
        report["fd_check"] = {
            "step": args.fd_step,
            "discrete_vs_fd_rel_error": float(np.linalg.norm(disc - fd) / max(1e-12, np.linalg.norm(fd))),
            "kernel_vs_fd_rel_error": float(np.linalg.norm(g.discrete() - fd) / max(1e-12, np.linalg.norm(fd))),
        }
        header.append("grad_fd")
        cols.append(fd)
        params["fd_step"] = args.fd_step
    rows = [tuple(header)] + list(zip(*cols))
    _write(args, report, params, rows)


def cmd_hess(args) -> None:
    task = _require_task(args)
    field = _resolve_field(args, task.T)
    hess = hessian_kernel(task, field)
    eigs = hess.eigenvalues()
    report = {
        "M": field.M,
        "dt": field.dt,
        "kernel_frobenius": frobenius(hess.entries),
        "weighted_frobenius": frobenius(hess.weighted),
        "weighted_eigs": eigs,
    }
    _write(args, report, _grid_params(args, field), [tuple(r) for r in hess.entries])


def cmd_classify(args) -> None:
    task = _require_task(args)
    field = _resolve_field(args, task.T)
    tol = _tolerances(args)
    rep = classify(task, field, tol)
    params = {**_grid_params(args, field), "tol_grad": tol.grad, "tol_kcp": tol.kcp, "tol_hess": tol.hess}
    rows = [("index", "eigenvalue")] + list(enumerate(rep.hessian_eigs))
    _write(args, rep.to_dict(), params, rows)


def cmd_trap_cert(args) -> None:
    task = _require_task(args)
    eps0 = args.eps0
    if eps0 is None:
        eps0 = _const_value(args.field)
        if eps0 is None:
            raise ValidationError("trap-cert needs --eps0 or a constant --field")
    cert = trap_certificate(task, eps0)
    _write(args, cert.to_dict(), {"eps0": eps0})


def cmd_trap_check(args) -> None:
    task = _require_task(args)
    field = _resolve_field(args, task.T)
    tol = _tolerances(args)
    verdict = second_order_trap_numeric(task, field, args.probes, args.seed, tol, mode=args.mode)
    params = {**_grid_params(args, field), "probes": args.probes, "mode": args.mode,
              "tol_grad": tol.grad, "tol_kcp": tol.kcp, "tol_hess": tol.hess}
    _write(args, verdict.to_dict(), params)


def cmd_jacobian_rank(args) -> None:
    task = _require_task(args)
    field = _resolve_field(args, task.T)
    probe = jacobian_probe(task, field)
    report = {
        "rank": probe.rank,
        "full_rank": probe.full_rank,
        "singular_values": probe.singular_values,
        "absent_coordinates": probe.absent_coordinates,
    }
    _write(args, report, _grid_params(args, field))


def cmd_controllability(args) -> None:
    task = _require_task(args)
    res = lie_algebra_closure(task.system)
    report = {"dimension": res.dimension, "n": res.n, "controllable": res.controllable, "rounds": res.rounds}
    _write(args, report, {})


def _ascent_config(args) -> AscentConfig:
    return AscentConfig(
        max_iters=args.max_iters,
        initial_step=args.step,
        grad_stop=args.tol_grad,
        J_stop=args.j_stop,
        seed=args.seed,
        direction=args.direction,
    )


def cmd_optimize(args) -> None:
    task = _require_task(args)
    field = _resolve_field(args, task.T)
    config = _ascent_config(args)
    traj = gradient_ascent(task, field, config)
    if args.save_field:
        save_field(traj.final_field, args.save_field)
    report = {
        "termination": traj.termination,
        "iterations": traj.iterations,
        "initial_J": traj.iterates[0][1],
        "final_J": traj.final_J,
        "Jmax": kinematic_bounds(task).Jmax,
    }
    params = {**_grid_params(args, field), "max_iters": config.max_iters, "initial_step": config.initial_step,
              "J_stop": config.J_stop, "direction": config.direction}
    _write(args, report, params, list(traj.csv_rows()))


def cmd_multistart(args) -> None:
    task = _require_task(args)
    M = args.grid if args.grid is not None else DEFAULT_GRID
    config = _ascent_config(args)
    summary = multistart(task, args.starts, args.amplitude, config, M=M, delta=args.delta)
    params = {"M": M, "T": task.T, "seed": args.seed, "starts": args.starts, "amplitude": args.amplitude,
              "delta": args.delta, "max_iters": config.max_iters, "J_stop": config.J_stop}
    _write(args, summary.to_dict(), params, list(summary.csv_rows()))


COMMANDS = {
    "build": cmd_build,
    "propagate": cmd_propagate,
    "grad": cmd_grad,
    "hess": cmd_hess,
    "classify": cmd_classify,
    "trap-cert": cmd_trap_cert,
    "trap-check": cmd_trap_check,
    "jacobian-rank": cmd_jacobian_rank,
    "controllability": cmd_controllability,
    "optimize": cmd_optimize,
    "multistart": cmd_multistart,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"probe: error: {exc}\n")
        return 1
    try:
        COMMANDS[args.command](args)
    except NumericalError as exc:
        sys.stderr.write(f"probe: numerical check failed: {exc}\n")
        return 2
    except (ValidationError, ValueError, OSError) as exc:
        sys.stderr.write(f"probe: {exc}\n")
        return 1
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()

"""Command-line front end.

Exit codes form a stable contract:
  0  success
  2  user or configuration error (bad flags, unreadable or invalid spec)
  3  scientific stability flag raised by a solve (outputs still written)
  4  resource cap exceeded

Experiment subcommands reserve nonzero exits for operational failures only;
scaling outcomes are data in the report, not pass/fail.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .encoding import SpecError, augmented_to_dict, encode, load_spec
from .experiments import (
    ExperimentConfig,
    generator_discrimination,
    run_example,
    scaling_vs_n,
    scaling_vs_dt,
    write_report,
)
from .history import (
    apply_M,
    condition_estimate,
    forward_solve,
    history_to_csv,
    matrix_step_system,
)
from .meanfield import DEFAULT_CAP, ResourceCapError
from .encoding import eval_f_direct
from .reference import euler_forward, rk4_oracle, stability_report, trajectory_to_csv
from .reporting import write_json
from .systems import BUILTIN_SYSTEMS

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_CAP = 4

EXPERIMENTS = ("scaling_vs_n", "scaling_vs_dt", "generator_discrimination")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="polyode",
        description="Encode polynomial ODEs, solve their history-state block systems, "
        "and run multi-copy mean-field scaling experiments.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"polyode {__version__} (spec-schema {SCHEMA_VERSION})",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="path to a system spec JSON document")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--dt", type=float, help="override the spec time step")
    common.add_argument("--steps", type=int, help="override the spec step count")
    common.add_argument("--copies", type=int, help="largest copy count for sweeps")
    common.add_argument("--eps", type=float, help="norm-closure / stability tolerance")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized pieces")
    common.add_argument("--threads", type=int, default=1, help="worker threads for grids")
    common.add_argument("--cap", type=int, default=DEFAULT_CAP, help="state-size cap")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("encode", parents=[common], help="write the encoded system and a sparsity summary")
    sub.add_parser("solve", parents=[common], help="single-copy history solve plus reference integrators")
    exp = sub.add_parser("experiment", parents=[common], help="run a verification campaign")
    exp.add_argument(
        "--name",
        required=True,
        help=f"one of {', '.join(EXPERIMENTS)} or example:<{'|'.join(sorted(BUILTIN_SYSTEMS))}>",
    )
    return parser


def _validate_overrides(args):
    """Type/range-check all overrides up front; report every problem at once."""
    problems = []
    if args.dt is not None and not (args.dt > 0):
        problems.append(f"--dt must be positive (got {args.dt})")
    if args.steps is not None and args.steps < 1:
        problems.append(f"--steps must be >= 1 (got {args.steps})")
    if args.copies is not None and args.copies < 2:
        problems.append(f"--copies must be >= 2 (got {args.copies})")
    if args.eps is not None and not (0 < args.eps < 1):
        problems.append(f"--eps must lie in (0, 1) (got {args.eps})")
    if args.seed is not None and args.seed < 0:
        problems.append(f"--seed must be nonnegative (got {args.seed})")
    if args.threads < 1:
        problems.append(f"--threads must be >= 1 (got {args.threads})")
    if args.cap < 4:
        problems.append(f"--cap must be >= 4 (got {args.cap})")
    return problems


def _load_system(args):
    if not args.spec:
        raise SpecError("--spec is required for this subcommand", field="spec")
    if not os.path.exists(args.spec):
        raise SpecError(f"spec file not found: {args.spec}", field="spec")
    spec = load_spec(args.spec)
    overrides = {}
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.steps is not None:
        overrides["steps"] = args.steps
        if spec.driving is not None:
            raise SpecError("--steps cannot override a spec with explicit driving", field="steps")
    if args.eps is not None and args.command == "encode":
        overrides["norm_closure_eps"] = args.eps
    if overrides:
        spec = replace(spec, **overrides)
    return spec


def cmd_encode(args):
    spec = _load_system(args)
    aug = encode(spec)
    os.makedirs(args.out, exist_ok=True)
    doc = augmented_to_dict(aug)
    write_json(doc, os.path.join(args.out, "augmented.json"))
    summary = {"terms": aug.term_count, "D": aug.D, "m_eff": aug.m}
    write_json(summary, os.path.join(args.out, "summary.json"))
    print(f"encoded: D={aug.D} terms={aug.term_count} m_eff={aug.m}")
    return EXIT_OK


def cmd_solve(args):
    spec = _load_system(args)
    aug = encode(spec)
    eps = args.eps if args.eps is not None else 0.1
    if aug.D * (aug.steps + 1) > args.cap:
        print(
            f"error: history size D*(T+1) = {aug.D * (aug.steps + 1)} exceeds cap {args.cap}",
            file=sys.stderr,
        )
        return EXIT_CAP
    os.makedirs(args.out, exist_ok=True)

    # the single-copy block system; for state-dependent f the step map is the
    # same nonlinear update the first-order integrator applies
    def step(v):
        return v - aug.dt * (eval_f_direct(aug, v) @ v)

    rhs = [aug.initial_state] + [aug.dt * aug.driving_block(k) for k in range(1, aug.steps + 1)]
    from .history import BlockSystemSpec

    sys_spec = BlockSystemSpec(
        block_dim=aug.D,
        steps=aug.steps,
        dt=aug.dt,
        step_operator=step,
        rhs_blocks=tuple(rhs),
    )
    history = forward_solve(sys_spec)
    residual_blocks = apply_M(sys_spec, history)
    num = np.sqrt(sum(float(np.linalg.norm(a - b)) ** 2 for a, b in zip(residual_blocks, rhs)))
    den = np.sqrt(sum(float(np.linalg.norm(b)) ** 2 for b in rhs))
    residual = float(num / den) if den > 0 else 0.0

    euler = euler_forward(aug)
    oracle = rk4_oracle(aug, substeps=10)
    stab = stability_report(aug, euler, eps)

    history_to_csv(history, os.path.join(args.out, "history.csv"))
    trajectory_to_csv(euler, os.path.join(args.out, "traj_euler.csv"))
    trajectory_to_csv(oracle, os.path.join(args.out, "traj_oracle.csv"))
    write_json(
        {"residual": residual, "stability": stab.to_dict(), "overflowed": euler.overflowed},
        os.path.join(args.out, "solve.json"),
    )

    state_independent = all(
        all(i == 0 for i in mo.conj_idx) and all(i == 0 for i in mo.unconj_idx)
        for mo in aug.monomials
    )
    if state_independent:
        A = eval_f_direct(aug, aug.initial_state)
        lin = matrix_step_system(A, aug.initial_state, aug.dt, aug.steps,
                                 driving=[aug.driving_block(k) for k in range(1, aug.steps + 1)])
        cond = condition_estimate(lin, iters=200, seed=args.seed)
        write_json(cond, os.path.join(args.out, "condition.json"))

    if euler.overflowed or not stab.bound_satisfied:
        print(
            f"stability flag: margin={stab.margin:.6g} eps={eps} overflowed={euler.overflowed}"
        )
        return EXIT_UNSTABLE
    if residual >= 1e-10:
        print(f"error: residual {residual:.3e} above 1e-10", file=sys.stderr)
        return 1
    print(f"solved: residual={residual:.3e} margin={stab.margin:.6g}")
    return EXIT_OK


def cmd_experiment(args):
    name = args.name
    cfg = ExperimentConfig(seed=args.seed, cap=args.cap, threads=args.threads)
    if args.copies is not None:
        grid = tuple(n for n in cfg.n_grid if n <= args.copies) or (args.copies,)
        cfg = replace(cfg, n_grid=grid)
    if args.dt is not None:
        cfg = replace(cfg, dt=args.dt)
    if args.steps is not None:
        cfg = replace(cfg, steps=args.steps)
    if args.spec:
        spec = _load_system(args)
        cfg = replace(cfg, system=encode(spec))

    if name.startswith("example:"):
        system = name.split(":", 1)[1]
        if system not in BUILTIN_SYSTEMS:
            print(f"error: unknown example system '{system}'", file=sys.stderr)
            return EXIT_CONFIG
        report = run_example(system, out_dir=args.out, cfg=replace(cfg, system=system, dt=None, steps=None))
    elif name == "scaling_vs_n":
        report = scaling_vs_n(cfg)
    elif name == "scaling_vs_dt":
        report = scaling_vs_dt(cfg)
    elif name == "generator_discrimination":
        report = generator_discrimination(cfg)
    else:
        print(f"error: unknown experiment '{name}'", file=sys.stderr)
        return EXIT_CONFIG

    write_report(report, args.out)
    skipped = sum(1 for r in report.rows if r.get("skipped"))
    print(f"experiment {name}: {len(report.rows)} grid points ({skipped} skipped)")
    return EXIT_OK


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)

    problems = _validate_overrides(args)
    if problems:
        print("error: invalid overrides:\n  " + "\n  ".join(problems), file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "encode":
            return cmd_encode(args)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "experiment":
            return cmd_experiment(args)
        return EXIT_CONFIG
    except SpecError as exc:
        field = f" (field: {exc.field})" if getattr(exc, "field", None) else ""
        print(f"error: {exc}{field}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands:

- ``simulate``: one closed-loop run; writes ``<name>_log.csv``,
  ``<name>_metrics.txt`` and figures into the output directory.
- ``compare``: the three-controller comparison; writes per-controller logs,
  ``<name>_compare_metrics.csv``, ``<name>_contour_series.csv`` and figures.
- ``lmi-check``: terminal-ingredient verification report.
- ``discretize-check``: Taylor discretization order-study report.

Numeric CSV fields are written with 17 significant digits so a rerun of the
same configuration reproduces the files byte for byte.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, PRESET_NAMES, load_config, preset
from .discretization import taylor_order_study
from .dynamics import DivergenceError, JointState, ManipulatorParams
from .sim import (
    CONTROLLER_NAMES,
    InvalidConfigError,
    Metrics,
    SimConfig,
    SimLog,
    compare_controllers,
    run_closed_loop,
)
from .terminal import (
    TerminalInfeasibleError,
    certify_terminal,
    double_integrator_model,
    solve_terminal_lmi,
)

LOG_COLUMNS = (
    "t,q1,q2,qd1,qd2,qr1,qr2,tau1,tau2,px,py,pdx,pdy,eps_x,eps_y,mode,cost"
)


@dataclass(frozen=True)
class RunManifest:
    """Resolved invocation: where the config came from and where output goes."""

    config_path: str | None
    out_dir: Path
    name: str
    seed: int


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _load(args) -> SimConfig:
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        cfg = preset(args.preset)
    if getattr(args, "controller", None):
        cfg = dataclasses.replace(cfg, controller=args.controller)
    return cfg


def _manifest(args) -> RunManifest:
    if args.config is None and args.preset is None:
        raise ConfigError("either --config or --preset is required")
    name = args.name
    if name is None:
        name = args.preset if args.config is None else Path(args.config).stem
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return RunManifest(
        config_path=args.config, out_dir=out, name=name, seed=args.seed
    )


def write_log_csv(path, log: SimLog) -> None:
    """One row per control step, bit-exact numeric fields."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(LOG_COLUMNS + "\n")
        for k in range(len(log)):
            fields = [
                log.t[k],
                log.q[k, 0], log.q[k, 1],
                log.qd[k, 0], log.qd[k, 1],
                log.q_r[k, 0], log.q_r[k, 1],
                log.tau[k, 0], log.tau[k, 1],
                log.p[k, 0], log.p[k, 1],
                log.p_d[k, 0], log.p_d[k, 1],
                log.eps[k, 0], log.eps[k, 1],
            ]
            fh.write(
                ",".join(_fmt(v) for v in fields)
                + f",{log.mode[k]},{_fmt(log.cost[k])}\n"
            )


def _metrics_pairs(m: Metrics):
    return [
        ("max_contour_error", _fmt(m.max_contour_error)),
        ("rms_contour_error", _fmt(m.rms_contour_error)),
        ("mean_joint_error_1", _fmt(m.mean_joint_error[0])),
        ("mean_joint_error_2", _fmt(m.mean_joint_error[1])),
        ("max_joint_error_1", _fmt(m.max_joint_error[0])),
        ("max_joint_error_2", _fmt(m.max_joint_error[1])),
        ("torque_min_1", _fmt(m.torque_min[0])),
        ("torque_min_2", _fmt(m.torque_min[1])),
        ("torque_max_1", _fmt(m.torque_max[0])),
        ("torque_max_2", _fmt(m.torque_max[1])),
        ("settling_index", str(m.settling_index)),
    ]


def write_metrics_txt(path, m: Metrics) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in _metrics_pairs(m):
            fh.write(f"{key} = {value}\n")


def cmd_simulate(args) -> int:
    from . import plots
    from .sim import compute_metrics, contour_error_series

    manifest = _manifest(args)
    cfg = _load(args)
    log = run_closed_loop(cfg)
    base = manifest.out_dir / manifest.name
    write_log_csv(f"{base}_log.csv", log)
    if len(log):
        series = contour_error_series(log, cfg.spec)
        metrics = compute_metrics(log, cfg.spec, contour=series)
        write_metrics_txt(f"{base}_metrics.txt", metrics)
        plots.save_contour_plot(
            f"{base}_contour.png", log.t, {cfg.controller: series}
        )
        plots.save_trajectory_plot(
            f"{base}_trajectory.png", {cfg.controller: log}, cfg.spec
        )
        plots.save_torque_plot(
            f"{base}_torque.png", {cfg.controller: log}, cfg.limits
        )
    if log.diverged:
        print(f"error: plant diverged; partial log at {base}_log.csv",
              file=sys.stderr)
        return 1
    print(f"wrote {base}_log.csv ({len(log)} rows)")
    return 0


def cmd_compare(args) -> int:
    from . import plots

    manifest = _manifest(args)
    cfg = _load(args)
    report = compare_controllers(cfg)
    base = manifest.out_dir / manifest.name

    for name, log in report.logs.items():
        write_log_csv(f"{base}_{name}_log.csv", log)

    order = sorted(
        report.metrics, key=lambda n: report.metrics[n].max_contour_error
    )
    rank = {name: i + 1 for i, name in enumerate(order)}
    with open(f"{base}_compare_metrics.csv", "w", encoding="utf-8",
              newline="\n") as fh:
        keys = [k for k, _ in _metrics_pairs(
            Metrics(0.0, 0.0, np.zeros(2), np.zeros(2),
                    np.zeros(2), np.zeros(2), 0)
        )]
        fh.write(",".join(["controller"] + keys + ["rank"]) + "\n")
        for name in CONTROLLER_NAMES:
            if name in report.metrics:
                vals = [v for _, v in _metrics_pairs(report.metrics[name])]
                fh.write(",".join([name] + vals + [str(rank[name])]) + "\n")
            elif name in report.failures:
                fh.write(f"{name},failed: {report.failures[name]}\n")

    with open(f"{base}_contour_series.csv", "w", encoding="utf-8",
              newline="\n") as fh:
        names = [n for n in CONTROLLER_NAMES if n in report.contour]
        fh.write(",".join(["t"] + names) + "\n")
        for k in range(len(report.t)):
            row = [_fmt(report.t[k])] + [
                _fmt(report.contour[n][k]) if k < len(report.contour[n])
                else "" for n in names
            ]
            fh.write(",".join(row) + "\n")

    plots.save_contour_plot(f"{base}_contour.png", report.t, report.contour)
    plots.save_trajectory_plot(f"{base}_trajectory.png", report.logs, cfg.spec)
    plots.save_torque_plot(f"{base}_torque.png", report.logs, cfg.limits)

    for name, reason in report.failures.items():
        print(f"error: {name}: {reason}", file=sys.stderr)
    if report.metrics:
        best = order[0]
        print(f"lowest max contour error: {best} "
              f"({report.metrics[best].max_contour_error:.6g} m)")
    return 1 if report.failures else 0


def cmd_lmi_check(args) -> int:
    T = 0.002
    if args.config is not None or args.preset is not None:
        T = _load(args).T
    A, B = double_integrator_model(T, n=2)
    if args.zero_b:
        B = np.zeros_like(B)
    Q = np.diag([10.0, 10.0, 0.0, 0.0])
    try:
        ing = solve_terminal_lmi(A, B, Q)
    except TerminalInfeasibleError as exc:
        print(f"FAIL: {exc}")
        return 1
    cert = certify_terminal(A, B, Q, ing)
    with np.printoptions(precision=6, suppress=False):
        print(f"T = {T:g} s")
        print("P =")
        print(ing.P)
        print("H =")
        print(ing.H)
    print(f"contraction certificate max eig = {cert['contraction']:.6e}")
    print(f"Q-augmented certificate max eig = {cert['augmented']:.6e}")
    print(f"LMI block min eig               = {cert['lmi_min']:.6e}")
    ok = (
        cert["p_min_eig"] > 0.0
        and cert["contraction"] <= 1e-8
        and cert["augmented"] <= 1e-8
        and cert["lmi_min"] > 0.0
    )
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_discretize_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    params = ManipulatorParams()
    state = JointState(
        q=np.array([0.3, 0.9]) + 0.1 * rng.standard_normal(2),
        qd=0.5 * rng.standard_normal(2),
    )
    tau = np.array([2.0, 0.5]) + 0.2 * rng.standard_normal(2)
    study = taylor_order_study(params, state, tau)
    print("period [s]   pos error [rad]   vel error [rad/s]")
    for T, pe, ve in zip(study["periods"], study["pos_errors"],
                         study["vel_errors"]):
        print(f"{T:10.4g}   {pe:15.6e}   {ve:17.6e}")
    print(f"position-error halving ratios: "
          f"{['%.3f' % r for r in study['pos_ratios']]} (window [6, 10])")
    print(f"velocity-error halving ratios: "
          f"{['%.3f' % r for r in study['vel_ratios']]} (window [3, 5])")
    ok = all(6.0 <= r <= 10.0 for r in study["pos_ratios"]) and all(
        3.0 <= r <= 5.0 for r in study["vel_ratios"]
    )
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def _add_common(sp, controller=False):
    sp.add_argument("--config", help="experiment configuration file")
    sp.add_argument("--preset", choices=PRESET_NAMES,
                    help="built-in experiment preset")
    sp.add_argument("--out", default=".", help="output directory")
    sp.add_argument("--name", help="experiment name (output file prefix)")
    sp.add_argument("--seed", type=int, default=0,
                    help="seed for randomized verification subcommands")
    if controller:
        sp.add_argument("--controller", choices=CONTROLLER_NAMES,
                        help="override the configured controller")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cesmpc",
        description="Contour-synchronized predictive control experiments "
                    "on a 2-DoF planar arm.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run one closed-loop experiment")
    _add_common(sp, controller=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("compare", help="run the three-controller comparison")
    _add_common(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("lmi-check", help="verify the terminal ingredients")
    _add_common(sp)
    sp.add_argument("--zero-b", action="store_true",
                    help="zero the input matrix to exercise the failure path")
    sp.set_defaults(func=cmd_lmi_check)

    sp = sub.add_parser("discretize-check",
                        help="run the discretization order study")
    _add_common(sp)
    sp.set_defaults(func=cmd_discretize_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

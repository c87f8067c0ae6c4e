"""Command-line entry point: ``aerialmanip <command> [options]``.

Exit codes:
    0  success
    1  other library error
    2  usage or validation error (bad flags, missing/invalid config, empty series)
    3  H-infinity synthesis infeasible
    4  simulation diverged
    5  selftest failure
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import Config, load_config
from .errors import AerialManipError, Diverged, EmptySeries, Infeasible, ValidationError
from .report import ab_report, format_ab, format_error_table, format_mapd, mapd_report
from .selftest import run_selftest
from .simulator import RunLog, run_scenario

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_DIVERGED, EXIT_SELFTEST = 0, 1, 2, 3, 4, 5

log = logging.getLogger("aerialmanip")

PLOT_SCRIPT = '''"""Plot a run log written by ``aerialmanip simulate``. Needs matplotlib."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv}"
with open(path) as fh:
    rows = list(csv.DictReader(fh))
col = lambda k: [float(r[k]) for r in rows]
t = col("t")
fig, ax = plt.subplots(3, 1, sharex=True, figsize=(9, 8))
for k in ("e_x", "e_y", "e_z"):
    ax[0].plot(t, col(k), label=k)
ax[0].set_ylabel("position error (m)")
for i, k in enumerate(("x", "y", "z")):
    ax[1].plot(t, col("tau_dis_" + k), color="C%d" % i, label="true " + k)
    ax[1].plot(t, col("tau_hat_" + k), color="C%d" % i, ls="--", label="est " + k)
ax[1].set_ylabel("torque disturbance (N m)")
ax[2].plot(t, col("compensation"), label="compensation")
ax[2].set_xlabel("t (s)")
for a in ax:
    a.legend(loc="upper right", fontsize=7)
plt.tight_layout()
plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=120)
'''


def _out_dir(p: str) -> Path:
    out = Path(p)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _gains(cfg: Config, out: Path | None = None) -> np.ndarray:
    sol = cfg.gains()
    if cfg.gains_path is None and out is not None:
        sol.save(out / "gains.json")
    return sol.K


def cmd_synthesize(args) -> int:
    cfg = load_config(args.config)
    syn = cfg.synthesis
    if args.gamma_min is not None or args.gamma_max is not None:
        syn = replace(syn, gamma_min=args.gamma_min or syn.gamma_min, gamma_max=args.gamma_max or syn.gamma_max)
    out = _out_dir(args.out)
    try:
        sol = syn.run(cfg.vehicle, cfg.m_s)
    except Infeasible as exc:
        print(f"infeasible: {exc} (bracket [{syn.gamma_min:g}, {syn.gamma_max:g}])", file=sys.stderr)
        return EXIT_INFEASIBLE
    path = out / "gains.json"
    sol.save(path)
    print(f"gamma {sol.gamma:.6g}")
    print(f"lambda {sol.lam:.6g}")
    print(f"sigma {sol.sigma:.6g}")
    print(f"lmi residual {sol.lmi_residual:.3e}")
    print(f"certificate residual {sol.certificate_residual:.3e}")
    print(f"wrote {path}")
    return EXIT_OK


def _simulate_one(cfg: Config, out: Path, seed: int | None, compensation: str | None) -> str:
    K = _gains(cfg, out)
    runlog = run_scenario(cfg.scenario(K, seed=seed, compensation=compensation))
    csv_path = out / "run.csv"
    runlog.to_csv(csv_path)
    (out / "plot_run.py").write_text(PLOT_SCRIPT.format(csv=csv_path.name))
    parts = [format_error_table(runlog, (cfg.warmup, float(runlog.t[-1]) + cfg.control_dt))]
    try:
        parts.append(format_mapd(mapd_report(runlog, cfg.warmup)))
    except EmptySeries as exc:
        parts.append(f"MAPD unavailable: {exc}")
    sched = cfg.compensation_schedule(compensation)
    if len({on for _, on in sched}) > 1:
        windows = [w for w in cfg.metric_windows() if w[1][1] <= cfg.duration + 1e-9]
        if windows:
            parts.append(format_ab(ab_report(runlog, windows)))
    text = "\n\n".join(parts) + "\n"
    (out / "metrics.txt").write_text(text)
    return text


def cmd_simulate(args) -> int:
    configs = [load_config(p) for p in args.config]
    root = _out_dir(args.out)
    outs = [root] if len(configs) == 1 else [_out_dir(str(root / Path(p).stem)) for p in args.config]
    jobs = max(1, int(args.jobs))
    try:
        if jobs == 1 or len(configs) == 1:
            texts = [_simulate_one(c, o, args.seed, args.compensation) for c, o in zip(configs, outs)]
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futs = [pool.submit(_simulate_one, c, o, args.seed, args.compensation) for c, o in zip(configs, outs)]
                texts = [f.result() for f in futs]
    except Diverged as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    for o, t in zip(outs, texts):
        print(f"== {o}")
        print(t, end="")
    return EXIT_OK


def cmd_estimate_compare(args) -> int:
    cfg = load_config(args.config)
    if cfg.profile != "estimation":
        cfg = replace(cfg, profile="estimation", profile_options={}, duration=60.0, compensation="on")
    out = _out_dir(args.out)
    K = _gains(cfg, out)
    try:
        runlog = run_scenario(cfg.scenario(K, seed=args.seed, compensation=args.compensation))
    except Diverged as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    runlog.to_csv(out / "estimate.csv")
    text = format_mapd(mapd_report(runlog, cfg.warmup)) + "\n"
    (out / "mapd.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_metrics(args) -> int:
    runlog = RunLog.from_csv(args.log)
    if len(runlog.t) == 0:
        raise EmptySeries(f"{args.log} has no samples")
    cfg = load_config(args.config) if args.config else None
    warmup = cfg.warmup if cfg else 2.0
    end = float(runlog.t[-1]) + (float(np.diff(runlog.t[-2:])[0]) if len(runlog.t) > 1 else 0.0)
    parts = [format_error_table(runlog, (warmup, end)), format_mapd(mapd_report(runlog, warmup))]
    if cfg is not None and runlog.compensation.any() and not runlog.compensation.all():
        windows = [w for w in cfg.metric_windows() if w[1][1] <= end + 1e-9]
        if windows:
            parts.append(format_ab(ab_report(runlog, windows)))
    text = "\n\n".join(parts) + "\n"
    if args.out:
        (_out_dir(args.out) / "metrics.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_selftest(args) -> int:
    checks = run_selftest(seed=args.seed or 0, gains=Path(args.gains) if args.gains else None)
    for c in checks:
        print(f"{'PASS' if c.ok else 'FAIL'}  {c.name}: {c.detail}")
    failed = [c for c in checks if not c.ok]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_SELFTEST if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aerialmanip", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True, multi=False):
        if multi:
            sp.add_argument("--config", action="append", required=True, help="scenario TOML (repeatable)")
        else:
            sp.add_argument("--config", required=config_required, help="scenario TOML")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="RNG seed (overrides the config)")

    s = sub.add_parser("synthesize", help="solve the LMI and write gains.json")
    common(s)
    s.add_argument("--gamma-min", type=float, default=None)
    s.add_argument("--gamma-max", type=float, default=None)
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("simulate", help="run a scenario, write run.csv, metrics.txt and plot_run.py")
    common(s, multi=True)
    s.add_argument("--compensation", choices=("on", "off", "schedule"), default=None)
    s.add_argument("--jobs", type=int, default=1, help="parallel scenarios when several --config are given")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("estimate-compare", help="MAPD of the torque estimate on the estimation profile")
    common(s)
    s.add_argument("--compensation", choices=("on", "off", "schedule"), default=None)
    s.set_defaults(func=cmd_estimate_compare)

    s = sub.add_parser("metrics", help="error and MAPD tables from a run.csv")
    s.add_argument("--log", required=True, help="run CSV")
    s.add_argument("--config", default=None, help="scenario TOML for windows")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("selftest", help="fast invariant battery")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--gains", default=None, help="also verify this gains file")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "seed", None) is not None and args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ValidationError, EmptySeries) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Diverged as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except AerialManipError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

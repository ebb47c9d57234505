"""Command-line interface: dataset generation, training, evaluation, sweeps, plots.

Exit codes: 0 success, 2 usage/config error, 3 numeric abort. All outputs are
deterministic functions of flags and input files; nothing embeds a timestamp.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import envs, plots
from .data import generate_teacher_dataset, load_dataset, save_dataset
from .evaluation import (
    EvalReport,
    aer,
    coefficient_of_variation,
    disjoint_eval_seeds,
    performance,
    random_baseline_aer,
    seed_digest,
)
from .models import load_models
from .training import (
    ConfigError,
    ExperimentConfig,
    NumericAbortError,
    TrainingLog,
    build_nets,
    train,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_USAGE


def _load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    cfg = ExperimentConfig.from_dict(raw)
    cfg.validate()
    return cfg


def _report_row(tag: str, report: EvalReport) -> str:
    return (
        f"{tag}: AER {report.aer_mean:.4f} +/- {report.aer_std:.4f}  "
        f"P {report.performance:.4f}  CV {100.0 * report.cv:.2f}%  "
        f"(n={report.n_seeds} seeds)"
    )


def cmd_gen_teacher(env: str, n: int, seed: int, out_path: str) -> int:
    if n < 1:
        return _fail(f"--n must be >= 1, got {n}")
    if seed < 0:
        return _fail(f"--seed must be >= 0, got {seed}")
    try:
        spec = envs.get_spec(env)
    except envs.UnknownEnvError as exc:
        return _fail(str(exc))
    returns = []
    teacher = envs.teacher_policy(spec)
    for i in range(n):
        traj = envs.rollout(spec, teacher, seed + i, record_actions=True)
        returns.append(traj.episode_return())
    dataset = generate_teacher_dataset(spec, n, seed)
    try:
        save_dataset(dataset, out_path)
    except OSError as exc:
        return _fail(f"cannot write {out_path}: {exc}")
    print(
        f"wrote {n} state-only teacher trajectories to {out_path} "
        f"(mean return {float(np.mean(returns)):.4f})"
    )
    return EXIT_OK


def _evaluate_run(run_dir: str, which: str, n_seeds: int, seed_base: int = 0):
    """Build the requested policy from a run directory and score it on
    seed-disjoint seeds. Returns (report, seeds)."""
    config = _load_config(os.path.join(run_dir, "config.json"))
    spec = envs.get_spec(config.env_name, horizon=config.horizon)
    dataset = generate_teacher_dataset(
        spec, config.n_teacher_trajectories, config.teacher_seed_base
    )
    online_path = os.path.join(run_dir, "online_initial_states.json")
    online_states = None
    if os.path.exists(online_path):
        with open(online_path) as fh:
            online_states = np.asarray(json.load(fh), dtype=np.float64)
    seeds = disjoint_eval_seeds(spec, dataset, online_states, n_seeds, base=seed_base)

    teacher_mean, teacher_std = aer(envs.teacher_policy(spec), spec, seeds)
    random_mean, random_std = random_baseline_aer(spec, seeds)

    if which == "auto":
        which = "stage2" if os.path.exists(os.path.join(run_dir, "stage2.ckpt")) else "stage1"
    if which in ("stage1", "stage2"):
        ckpt = os.path.join(run_dir, f"{which}.ckpt")
        if not os.path.exists(ckpt):
            raise ConfigError(f"checkpoint not found: {ckpt}")
        policy, generator, discriminator = build_nets(config, spec)
        load_models(
            ckpt,
            {"policy": policy, "generator": generator, "discriminator": discriminator},
        )
        agent_mean, agent_std = aer(policy.act, spec, seeds)
    elif which == "teacher":
        agent_mean, agent_std = teacher_mean, teacher_std
    elif which == "random":
        agent_mean, agent_std = random_mean, random_std
    else:
        raise ConfigError(f"unknown policy choice {which!r}")

    report = EvalReport(
        aer_mean=agent_mean,
        aer_std=agent_std,
        cv=coefficient_of_variation(agent_mean, agent_std),
        performance=performance(agent_mean, random_mean, teacher_mean),
        n_seeds=len(seeds),
        seed_digest=seed_digest(seeds),
    )
    return report, which


def cmd_train(config_path: str, out_dir: str, stage1_only: bool = False,
              eval_seeds: int = 200) -> int:
    try:
        config = _load_config(config_path)
    except ConfigError as exc:
        return _fail(str(exc))
    try:
        train(config, run_dir=out_dir, stage1_only=stage1_only)
    except NumericAbortError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    report, which = _evaluate_run(out_dir, "auto", eval_seeds)
    with open(os.path.join(out_dir, "eval_report.json"), "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    print(_report_row(f"{config.env_name} {which}", report))
    return EXIT_OK


def cmd_eval(run_dir: str, n_seeds: int = 200, which: str = "auto",
             seed_base: int = 0) -> int:
    try:
        report, resolved = _evaluate_run(run_dir, which, n_seeds, seed_base)
    except (ConfigError, OSError) as exc:
        return _fail(str(exc))
    with open(os.path.join(run_dir, "eval_report.json"), "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    print(_report_row(resolved, report))
    return EXIT_OK


def _sweep_one(config: ExperimentConfig, count: int, out_dir: str, n_seeds: int):
    sub = ExperimentConfig.from_dict(
        {**config.to_dict(), "n_teacher_trajectories": count}
    )
    run_dir = os.path.join(out_dir, f"n{count}")
    train(sub, run_dir=run_dir, stage1_only=True)
    report, _ = _evaluate_run(run_dir, "stage1", n_seeds)
    with open(os.path.join(run_dir, "eval_report.json"), "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    return report


def cmd_sweep(config_path: str, counts, out_dir: str, n_seeds: int = 200) -> int:
    try:
        config = _load_config(config_path) if config_path else ExperimentConfig()
    except ConfigError as exc:
        return _fail(str(exc))
    if not counts:
        return _fail("--counts must list at least one trajectory count")
    if any(c < 1 for c in counts) or sorted(counts) != list(counts) or len(set(counts)) != len(counts):
        return _fail(f"--counts must be positive and strictly increasing, got {counts}")
    os.makedirs(out_dir, exist_ok=True)
    threads = max(1, int(os.environ.get("RUN_THREADS", "1")))
    try:
        if threads == 1:
            reports = [_sweep_one(config, c, out_dir, n_seeds) for c in counts]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = [
                    pool.submit(_sweep_one, config, c, out_dir, n_seeds) for c in counts
                ]
                reports = [f.result() for f in futures]
    except NumericAbortError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    csv_path = os.path.join(out_dir, "sweep.csv")
    lines = ["n_trajectories,aer_mean,aer_std,cv,performance"]
    for count, rep in zip(counts, reports):
        lines.append(
            f"{count},{rep.aer_mean!r},{rep.aer_std!r},{rep.cv!r},{rep.performance!r}"
        )
    with open(csv_path, "w") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")
    plots.grouped_bars(
        [str(c) for c in counts],
        [
            ("AER", [rep.aer_mean for rep in reports]),
            ("CV", [rep.cv for rep in reports]),
        ],
        "Sample efficiency: AER and CV by teacher trajectory count",
        os.path.join(out_dir, "sweep.svg"),
    )
    for count, rep in zip(counts, reports):
        print(_report_row(f"n={count}", rep))
    return EXIT_OK


def cmd_plot(run_dir: str) -> int:
    log_path = os.path.join(run_dir, "training_log.csv")
    if not os.path.exists(log_path):
        return _fail(f"training log not found: {log_path}")
    try:
        log = TrainingLog.from_csv(log_path)
    except ValueError as exc:
        return _fail(str(exc))
    if not log.records:
        return _fail(f"training log is empty: {log_path}")
    plot_dir = os.path.join(run_dir, "plots")
    os.makedirs(plot_dir, exist_ok=True)
    out = os.path.join(plot_dir, "training.svg")
    plots.line_plot(
        [
            ("policy loss", [r.policy_loss for r in log.records]),
            ("generator loss (train)", [r.gen_loss_train for r in log.records]),
            ("generator loss (eval)", [r.gen_loss_eval for r in log.records]),
            ("AER probe", [r.aer_probe for r in log.records]),
        ],
        "Training curves",
        out,
    )
    print(f"wrote {out}")
    return EXIT_OK


def _parse_counts(text: str):
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        return None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ilfo",
        description="Two-stage imitation learning from state-only demonstrations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-teacher", help="generate a state-only teacher dataset")
    p.add_argument("--env", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="run the two-stage training pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stage1-only", action="store_true")
    p.add_argument("--eval-seeds", type=int, default=200)

    p = sub.add_parser("eval", help="evaluate a trained run on disjoint seeds")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--n-seeds", type=int, default=200)
    p.add_argument(
        "--policy", default="auto", choices=["auto", "stage1", "stage2", "teacher", "random"]
    )
    p.add_argument("--seed-base", type=int, default=0)

    p = sub.add_parser("sweep", help="train/eval across teacher dataset sizes")
    p.add_argument("--config", default=None)
    p.add_argument("--counts", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-seeds", type=int, default=200)

    p = sub.add_parser("plot", help="render training curves from a run directory")
    p.add_argument("--run-dir", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "gen-teacher":
        return cmd_gen_teacher(args.env, args.n, args.seed, args.out)
    if args.command == "train":
        return cmd_train(args.config, args.out, args.stage1_only, args.eval_seeds)
    if args.command == "eval":
        return cmd_eval(args.run_dir, args.n_seeds, args.policy, args.seed_base)
    if args.command == "sweep":
        counts = _parse_counts(args.counts)
        if counts is None:
            return _fail(f"--counts must be comma-separated integers: {args.counts!r}")
        return cmd_sweep(args.config, counts, args.out, args.n_seeds)
    if args.command == "plot":
        return cmd_plot(args.run_dir)
    return _fail(f"unknown command {args.command!r}")


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

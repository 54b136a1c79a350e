"""Command line for the pipeline: evolve, demo, analyze, validate-layout.

Every run lives in one directory (checkpoints/, logs/, reports/) whose
artifacts all embed the experiment config hash. Analyses refuse trial
logs written under a different config unless --force is given. The
--jobs flag is a parallelism hint only; results are identical at any
setting.
"""

from __future__ import annotations

import argparse
import glob
import os
import sys
from dataclasses import replace

import numpy as np

from .analysis import (
    ablation_battery,
    build_segment_templates,
    save_ablation_table,
    save_bin_error_map,
    save_decoding_summary,
    save_trajectory_report,
    save_transition_report,
    spatial_decoding_report,
    trajectory_decode,
    transition_matrix,
)
from .config import ExperimentConfig, load_config, save_config
from .errors import ConfigError
from .evolve import run_evolution, save_history
from .maze import validate_layout
from .rnn import RNNController, load_genotype, save_genotype
from .seeds import STREAM_DEMO, rng_for
from .world import (
    TrialParams,
    TrialRunner,
    load_trial_log,
    log_comment,
    save_trial_log,
)


def _config_from_args(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "out", None):
        overrides["out"] = args.out
    return replace(cfg, **overrides) if overrides else cfg


def _run_dirs(cfg: ExperimentConfig):
    dirs = {name: os.path.join(cfg.out, name)
            for name in ("checkpoints", "logs", "reports")}
    for d in dirs.values():
        os.makedirs(d, exist_ok=True)
    return dirs


def _agent_name(genotype_path: str) -> str:
    return os.path.splitext(os.path.basename(genotype_path))[0]


def _wrote(path: str) -> None:
    print(f"wrote {path}")


def cmd_evolve(args) -> int:
    cfg = _config_from_args(args)
    layout = cfg.build_layout()
    dirs = _run_dirs(cfg)
    history, best = run_evolution(layout, cfg.evolution_config(),
                                  checkpoint_dir=dirs["checkpoints"],
                                  jobs=args.jobs)
    tag = f"config {cfg.content_hash()}"
    config_path = os.path.join(cfg.out, "config.txt")
    history_path = os.path.join(cfg.out, "history.csv")
    best_path = os.path.join(cfg.out, "best_genotype.txt")
    save_config(cfg, config_path)
    save_history(history, history_path, comment=tag)
    save_genotype(best, best_path, comment=f"{tag} agent best_genotype")
    for path in (config_path, history_path, best_path):
        _wrote(path)
    last = history[-1]
    g, i = last.best_so_far_id
    print(f"best-so-far fitness {last.best_so_far_fitness!r} "
          f"(generation {g}, slot {i}) after generation {last.generation}")
    return 0


def cmd_demo(args) -> int:
    cfg = _config_from_args(args)
    layout = cfg.build_layout()
    dirs = _run_dirs(cfg)
    genotype = load_genotype(args.genotype)
    trials = args.trials if args.trials is not None else cfg.demo_trials
    comment = (f"config {cfg.content_hash()} "
               f"agent {_agent_name(args.genotype)}")
    runner = TrialRunner(layout,
                         params=TrialParams(max_steps=cfg.evolution_max_steps))
    controller = RNNController(genotype)
    fits = []
    for k in range(trials):
        result = runner.run(controller, rng_for(cfg.master_seed, STREAM_DEMO, k),
                            record=True)
        path = os.path.join(dirs["logs"], f"trial_{k:03d}.csv")
        save_trial_log(result.log, path, comment=comment)
        _wrote(path)
        fits.append(result.fitness)
    print(f"{trials} trials, mean fitness {float(np.mean(fits))!r}")
    return 0


def _checked_logs(cfg, dirs, force: bool):
    paths = sorted(glob.glob(os.path.join(dirs["logs"], "*.csv")))
    if not paths:
        raise FileNotFoundError(
            f"no trial logs in {dirs['logs']} (run the demo first)")
    expected = f"config {cfg.content_hash()}"
    agent = "unknown"
    for path in paths:
        comment = log_comment(path) or ""
        if not comment.startswith(expected) and not force:
            raise ConfigError(
                f"{path} was written under a different config "
                f"({comment or 'no config comment'}); "
                "pass --force to analyze anyway")
        if " agent " in comment:
            agent = comment.split(" agent ", 1)[1]
    return [load_trial_log(p) for p in paths], agent


def cmd_analyze(args) -> int:
    cfg = _config_from_args(args)
    layout = cfg.build_layout()
    dirs = _run_dirs(cfg)
    tag = f"config {cfg.content_hash()}"

    if args.kind == "ablation":
        if not args.genotype:
            raise ConfigError("analyze ablation needs --genotype")
        genotype = load_genotype(args.genotype)
        trials = (args.trials if args.trials is not None
                  else cfg.analysis_battery_trials)
        rows = ablation_battery(genotype, layout, cfg.master_seed,
                                trials=trials,
                                max_steps=cfg.evolution_max_steps,
                                alpha=cfg.analysis_significance)
        path = os.path.join(dirs["reports"], "ablation.csv")
        save_ablation_table(rows, path,
                            comment=f"{tag} agent {_agent_name(args.genotype)}")
        _wrote(path)
        return 0

    logs, agent = _checked_logs(cfg, dirs, args.force)
    comment = f"{tag} agent {agent}"
    if args.kind == "spatial":
        report = spatial_decoding_report([logs], layout,
                                         build_count=cfg.analysis_build_trials)
        summary_path = os.path.join(dirs["reports"], "spatial_summary.csv")
        bins_path = os.path.join(dirs["reports"], "spatial_bins.csv")
        save_decoding_summary(report, summary_path, comment=comment)
        save_bin_error_map(report, layout, bins_path, comment=comment)
        _wrote(summary_path)
        _wrote(bins_path)
        print(f"exact-bin fraction {report.fraction_exact!r}, "
              f"mean error {report.mean_error!r} bins over {report.n_scored}")
    elif args.kind == "trajectory":
        build = logs[:cfg.analysis_build_trials]
        test = logs[cfg.analysis_build_trials:]
        if not test:
            raise ConfigError(
                f"need more than {cfg.analysis_build_trials} logs to hold "
                f"out a test set, found {len(logs)}")
        templates = build_segment_templates(build, layout)
        results = trajectory_decode(test, templates, layout)
        path = os.path.join(dirs["reports"], "trajectory.csv")
        save_trajectory_report(results, path, comment=comment)
        _wrote(path)
    else:
        matrix, zero_rows, edges = transition_matrix(
            logs, n_paths=len(layout.rewards),
            threshold=cfg.analysis_edge_threshold)
        path = os.path.join(dirs["reports"], "transitions.csv")
        save_transition_report(matrix, zero_rows, edges, path, comment=comment)
        _wrote(path)
    return 0


def cmd_validate_layout(args) -> int:
    cfg = _config_from_args(args)
    layout = cfg.build_layout()
    problems = validate_layout(layout, body_radius=cfg.robot_body_radius)
    if problems:
        for problem in problems:
            print(f"problem: {problem}", file=sys.stderr)
        return 1
    bins = len(layout.grid().corridor_bins(layout.free_rects))
    print(f"{cfg.layout}: ok ({bins} corridor bins, "
          f"{len(layout.rewards)} rewards, {len(layout.tees)} tees, "
          f"{len(layout.segments)} segments)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tmaze-evo",
        description="Evolve, replay, and analyze maze-running RNN agents.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", metavar="PATH",
                       help="experiment config file (defaults if omitted)")
        p.add_argument("--seed", type=int, metavar="N",
                       help="override the master seed")
        p.add_argument("--out", metavar="DIR",
                       help="override the run directory")

    p = sub.add_parser("evolve", help="run the genetic algorithm")
    add_common(p)
    p.add_argument("--jobs", type=int, default=1, metavar="N",
                   help="parallel evaluation workers (does not change results)")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("demo", help="replay a genotype and record trial logs")
    add_common(p)
    p.add_argument("--genotype", required=True, metavar="PATH")
    p.add_argument("--trials", type=int, metavar="N",
                   help="number of demo trials (default from config)")
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("analyze", help="write analysis reports for a run")
    p.add_argument("kind", choices=("spatial", "trajectory", "ablation",
                                    "transitions"))
    add_common(p)
    p.add_argument("--genotype", metavar="PATH",
                   help="agent to lesion (analyze ablation)")
    p.add_argument("--trials", type=int, metavar="N",
                   help="battery trials per lesion (analyze ablation)")
    p.add_argument("--force", action="store_true",
                   help="analyze logs whose config hash does not match")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("validate-layout", help="check the configured layout")
    add_common(p)
    p.set_defaults(func=cmd_validate_layout)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point.

Stage commands share one working directory (``--out``) and talk through files:

  explore      seeds/<task>.jsonl, trajectories/<task>.jsonl
  build-graph  graphs/<task>.json, candidates.json
  optimize     suite.json
  prioritize   tags.json, prioritized.json
  run          results.json, repository.json
  report       report.json, report.txt

``pipeline`` runs all of them for every repetition; ``bench`` compares the
pipeline with the RANDOM and diff-Q-learning baselines.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import DATA_DIR
from .env import load_config
from .explore import AgentConfig, behavior_clone, explore, read_trajectories, write_trajectories
from .graph import PathLimits, build_graph, derive_test_cases, save_graph
from .optimize import load_suite, optimize_suite, save_suite
from .pipeline import ABLATIONS, PipelineConfig, StageError, run_benchmark, run_pipeline
from .runner import Repository, RunResult, aggregate_metrics, execute, maintain, render_table, save_repository
from .seeds import ProviderConfig, generate_seeds, write_seeds
from .selection import SelectionConfig, extract_tags, parse_update_log, prioritize

log = logging.getLogger("graytest")


def _data_path(value):
    """Accept a path or a bundled fixture name such as ``v2``."""
    p = Path(value)
    if p.exists():
        return p
    bundled = DATA_DIR / f"{value}.json"
    return bundled if bundled.exists() else p


def _tasks(config, names):
    if not names:
        return list(config.tasks)
    return [config.task(n) for n in names]


def _dump(path, doc):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def cmd_explore(args):
    config = load_config(_data_path(args.config))
    agent = AgentConfig(random_seed=args.seed, task_step_budget=args.budget)
    provider = ProviderConfig(
        backend=args.backend,
        mock_script_path=args.mock or DATA_DIR / "mock" / config.version_id,
    )
    for task in _tasks(config, args.task):
        seeds = generate_seeds(config, task, provider)
        (args.out / "seeds").mkdir(parents=True, exist_ok=True)
        write_seeds(args.out / "seeds" / f"{task.task_id}.jsonl", seeds)
        trajs = explore(config, task, behavior_clone(seeds, config, task), agent)
        (args.out / "trajectories").mkdir(parents=True, exist_ok=True)
        write_trajectories(args.out / "trajectories" / f"{task.task_id}.jsonl", trajs)
        print(f"{task.task_id}: {len(seeds)} seeds, {len(trajs)} episodes, {sum(t.success for t in trajs)} successful")


def cmd_build_graph(args):
    config = load_config(_data_path(args.config))
    limits = PathLimits(args.max_depth, args.max_paths_per_goal, args.max_total_paths)
    cases = []
    for task in _tasks(config, args.task):
        src = args.out / "trajectories" / f"{task.task_id}.jsonl"
        if not src.exists():
            continue
        graph = build_graph(read_trajectories(src), task.task_id, config.version_id, config.actions)
        (args.out / "graphs").mkdir(parents=True, exist_ok=True)
        save_graph(graph, args.out / "graphs" / f"{task.task_id}.json")
        found = derive_test_cases(graph, limits)
        print(f"{task.task_id}: {len(graph.states)} states, {len(graph.edges)} edges, {len(found)} paths")
        cases.extend(found)
    save_suite(cases, args.out / "candidates.json")


def cmd_optimize(args):
    pool = load_suite(args.out / "candidates.json")
    suite = []
    for task_id in dict.fromkeys(c.task_id for c in pool):
        suite.extend(optimize_suite([c for c in pool if c.task_id == task_id], args.ngram))
    save_suite(suite, args.out / "suite.json")
    print(f"{len(pool)} candidates -> {len(suite)} on the Pareto fronts")


def cmd_prioritize(args):
    old, new = load_config(_data_path(args.old)), load_config(_data_path(args.new))
    log_path = args.log or DATA_DIR / f"update_{old.version_id}_{new.version_id}.txt"
    tags = extract_tags(parse_update_log(Path(log_path).read_text(encoding="utf-8")))
    _dump(args.out / "tags.json", {"tags": list(tags.tags), "summary": tags.summary})
    suite = load_suite(args.out / "suite.json")
    ps = prioritize(suite, tags, SelectionConfig(lambda_=args.lambda_, rts_proportion=args.proportion))
    _dump(args.out / "prioritized.json", ps.to_json())
    print(f"selected {len(ps.cut)} of {len(ps.entries)} cases at p={args.proportion}")


def cmd_run(args):
    config = load_config(_data_path(args.new))
    suite = {c.case_id: c for c in load_suite(args.out / "suite.json")}
    prio = args.out / "prioritized.json"
    if prio.exists():
        order = [e["case_id"] for e in json.loads(prio.read_text())["entries"] if e["selected"]]
    else:
        order = list(suite)
    repo = Repository.from_cases(suite.values())
    results = [execute(suite[cid], config, config.task(suite[cid].task_id), args.timing) for cid in order]
    maintain(repo, results)
    _dump(args.out / "results.json", [r.to_json() for r in results])
    save_repository(repo, args.out / "repository.json")
    print(f"{len(results)} cases run, {len(repo.flagged())} flagged obsolete")


def cmd_report(args):
    results = [RunResult.from_json(d) for d in json.loads((args.out / "results.json").read_text())]
    reps = max(r.repetition for r in results) + 1
    report = aggregate_metrics(results, reps)
    _dump(args.out / "report.json", report.to_json())
    text = render_table([(args.label, report)])
    (args.out / "report.txt").write_text(text + "\n", encoding="utf-8")
    print(text)


def _pipeline_config(args, ablation=None):
    agent = AgentConfig(random_seed=args.seed, task_step_budget=args.budget)
    return PipelineConfig(
        old=_data_path(args.old),
        new=_data_path(args.new),
        tasks=tuple(args.task) if args.task else None,
        agent=agent,
        selection=SelectionConfig(lambda_=args.lambda_, rts_proportion=args.proportion),
        repetitions=args.reps,
        random_seed=args.seed,
        out=args.out,
        ablation=ablation or args.ablation,
        timing=args.timing,
    )


def cmd_pipeline(args):
    run = run_pipeline(_pipeline_config(args))
    print((args.out / "report.txt").read_text(), end="")
    return run


def cmd_bench(args):
    cfg = _pipeline_config(args)
    if args.old_given or args.new_given:
        transitions = [(cfg.old, cfg.new)]
    else:
        transitions = [(DATA_DIR / "v1.json", DATA_DIR / "v2.json"), (DATA_DIR / "v2.json", DATA_DIR / "v3.json")]
    ablations = ABLATIONS if args.all_ablations else (args.ablation,)
    run_benchmark(cfg, transitions, ablations)
    print((args.out / "bench.txt").read_text(), end="")


def build_parser():
    p = argparse.ArgumentParser(prog="graytest", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=False, pair=False):
        sp.add_argument("--out", type=Path, required=True, help="working directory for artifacts")
        sp.add_argument("--task", action="append", help="restrict to a task id (repeatable)")
        if config:
            sp.add_argument("--config", required=True, help="config file or bundled name (v1, v2, v3)")
        if pair:
            sp.add_argument("--old", default="v1")
            sp.add_argument("--new", default="v2")

    def run_flags(sp):
        sp.add_argument("--seed", type=int, default=42)
        sp.add_argument("--budget", type=int, default=5000, help="exploration steps per task")

    def sel_flags(sp):
        sp.add_argument("--lambda", dest="lambda_", type=float, default=0.5)
        sp.add_argument("--proportion", type=float, default=0.5)

    sp = sub.add_parser("explore", help="seed, clone and explore")
    common(sp, config=True)
    run_flags(sp)
    sp.add_argument("--backend", choices=("mock", "http"), default="mock")
    sp.add_argument("--mock", type=Path, help="mock script file or directory")
    sp.set_defaults(func=cmd_explore)

    sp = sub.add_parser("build-graph", help="merge trajectories and enumerate candidate paths")
    common(sp, config=True)
    sp.add_argument("--max-depth", type=int, default=PathLimits.max_depth)
    sp.add_argument("--max-paths-per-goal", type=int, default=PathLimits.max_paths_per_goal)
    sp.add_argument("--max-total-paths", type=int, default=PathLimits.max_total_paths)
    sp.set_defaults(func=cmd_build_graph)

    sp = sub.add_parser("optimize", help="score candidates and keep each task's Pareto front")
    common(sp)
    sp.add_argument("--ngram", type=int, default=2)
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("prioritize", help="rank the suite against an update log")
    common(sp, pair=True)
    sel_flags(sp)
    sp.add_argument("--log", type=Path, help="update log (default: bundled log for the pair)")
    sp.set_defaults(func=cmd_prioritize)

    sp = sub.add_parser("run", help="replay the selected cases on the new version")
    common(sp)
    sp.add_argument("--new", default="v2")
    sp.add_argument("--timing", choices=("wall", "simulated"), default="simulated")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("report", help="aggregate results.json into a metrics table")
    common(sp)
    sp.add_argument("--label", default="suite")
    sp.set_defaults(func=cmd_report)

    for name, func, helptext in (
        ("pipeline", cmd_pipeline, "every stage, every repetition"),
        ("bench", cmd_bench, "baselines versus the pipeline"),
    ):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--old", default=None)
        sp.add_argument("--new", default=None)
        run_flags(sp)
        sel_flags(sp)
        sp.add_argument("--reps", type=int, default=10)
        sp.add_argument("--ablation", choices=ABLATIONS, default="full")
        sp.add_argument("--timing", choices=("wall", "simulated"), default="simulated")
        if name == "bench":
            sp.add_argument("--all-ablations", action="store_true")
        sp.set_defaults(func=func)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command in ("pipeline", "bench"):
        args.old_given, args.new_given = args.old is not None, args.new is not None
        args.old, args.new = args.old or "v1", args.new or "v2"
    try:
        args.func(args)
    except (StageError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"graytest {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

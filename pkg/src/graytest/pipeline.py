"""End-to-end orchestration and the comparative benchmark.

One repetition runs: seeds -> prior -> exploration -> graph -> candidate
paths -> Pareto filter -> prioritization -> replay on the new version ->
repository maintenance. Every stage writes its artifact under the output
directory so later stages can be rerun from disk.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import DATA_DIR
from .env import load_config
from .explore import AgentConfig, behavior_clone, diff_q_learning, explore, random_rollouts, write_trajectories
from .graph import PathLimits, build_graph, derive_test_cases, save_graph
from .optimize import optimize_suite, save_suite, score_pool
from .runner import Repository, aggregate_metrics, execute, maintain, render_table, save_repository, trajectory_result
from .seeds import ProviderConfig, generate_seeds, write_seeds
from .selection import SelectionConfig, extract_tags, parse_update_log, prioritize

log = logging.getLogger(__name__)

ABLATIONS = ("full", "no_multi_opt", "no_rts", "no_both")
PROPORTIONS = (0.1, 0.3, 0.5, 0.7, 0.9)


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


@dataclass
class PipelineConfig:
    old: Path = DATA_DIR / "v1.json"
    new: Path = DATA_DIR / "v2.json"
    tasks: tuple | None = None  # None means every task of the new version
    agent: AgentConfig = field(default_factory=AgentConfig)
    limits: PathLimits = field(default_factory=PathLimits)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    provider: ProviderConfig | None = None  # default: scripted mock seeds of the new version
    update_log: Path | None = None  # default: data/update_<old>_<new>.txt
    repetitions: int = 10
    random_seed: int = 42
    out: Path | None = None
    ablation: str = "full"
    ngram: int = 2
    timing: str = "simulated"  # "wall" reports real seconds, not reproducible

    def __post_init__(self):
        self.old, self.new = Path(self.old), Path(self.new)
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"unknown ablation {self.ablation!r}")
        for p in (self.old, self.new):
            if not p.exists():
                raise FileNotFoundError(p)
        if self.update_log is not None and not Path(self.update_log).exists():
            raise FileNotFoundError(self.update_log)


@dataclass
class PipelineRun:
    """Everything one ``run_pipeline`` call produced, beyond the report."""

    report: object
    results: list  # RunResult in execution order, all repetitions
    pool_sizes: list  # candidate paths per repetition
    suite_sizes: list  # after the Pareto filter
    executed: list  # case ids per repetition, in execution order


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage name
        raise StageError(name, exc) from exc


def _ensure(path):
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path, doc):
    if path is None:
        return
    _ensure(path)
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _load_pair(cfg):
    old = _stage("load", load_config, cfg.old)
    new = _stage("load", load_config, cfg.new)
    tasks = [t for t in new.tasks if cfg.tasks is None or t.task_id in cfg.tasks]
    if not tasks:
        raise StageError("load", f"no task of {new.version_id} matches {cfg.tasks}")
    return old, new, tasks


def _update_log_path(cfg, old, new):
    return Path(cfg.update_log) if cfg.update_log else DATA_DIR / f"update_{old.version_id}_{new.version_id}.txt"


def _seed_all(cfg, new, tasks):
    provider = cfg.provider or ProviderConfig(backend="mock", mock_script_path=DATA_DIR / "mock" / new.version_id)
    seeds, warnings = {}, []
    for task in tasks:
        seeds[task.task_id] = _stage("seeds", generate_seeds, new, task, provider, warnings)
    for w in warnings:
        log.warning("seed provider: %s", w)
    return seeds


def _candidates(cfg, new, tasks, seeds, rep, rep_dir):
    """Explore every task and return (pool, suite) with objectives attached."""
    agent = replace(cfg.agent, random_seed=cfg.random_seed + rep)
    pool, suite = [], []
    for task in tasks:
        prior = _stage("explore", behavior_clone, seeds[task.task_id], new, task)
        trajs = _stage("explore", explore, new, task, prior, agent)
        graph = _stage("build-graph", build_graph, trajs, task.task_id, new.version_id, new.actions)
        cases = _stage("build-graph", derive_test_cases, graph, cfg.limits)
        if rep_dir is not None:
            write_trajectories(_ensure(rep_dir / "trajectories" / f"{task.task_id}.jsonl"), trajs)
            save_graph(graph, _ensure(rep_dir / "graphs" / f"{task.task_id}.json"))
        if not cases:
            log.warning("no candidate paths for %s", task.task_id)
            continue
        if cfg.ablation in ("no_multi_opt", "no_both"):
            _stage("optimize", score_pool, cases, cfg.ngram)
            kept = cases
        else:
            # the Pareto filter runs per task; objectives are only comparable within one task
            kept = _stage("optimize", optimize_suite, cases, cfg.ngram)
        pool.extend(cases)
        suite.extend(kept)
    return pool, suite


def run_pipeline(cfg: PipelineConfig) -> PipelineRun:
    """Run every stage ``cfg.repetitions`` times (seed + repetition index)."""
    old, new, tasks = _load_pair(cfg)
    out = Path(cfg.out) if cfg.out else None
    tasks_by_id = {t.task_id: t for t in tasks}
    seeds = _seed_all(cfg, new, tasks)
    if out is not None:
        for tid, s in seeds.items():
            write_seeds(_ensure(out / "seeds" / f"{tid}.jsonl"), s)
    log_text = _update_log_path(cfg, old, new).read_text(encoding="utf-8")
    tags = _stage("prioritize", extract_tags, parse_update_log(log_text))
    _write_json(out and out / "tags.json", {"tags": list(tags.tags), "summary": tags.summary})

    results, pool_sizes, suite_sizes, executed = [], [], [], []
    for rep in range(cfg.repetitions):
        rep_dir = out / f"rep-{rep:02d}" if out else None
        pool, suite = _candidates(cfg, new, tasks, seeds, rep, rep_dir)
        if not suite:
            raise StageError("optimize", "empty suite: no task produced a candidate path")
        pool_sizes.append(len(pool))
        suite_sizes.append(len(suite))
        repo = Repository.from_cases(suite)
        if rep_dir is not None:
            save_suite(pool, _ensure(rep_dir / "candidates.json"))
            save_suite(suite, rep_dir / "suite.json")
        by_id = {c.case_id: c for c in suite}
        if cfg.ablation in ("no_rts", "no_both"):
            order = [c.case_id for c in repo.active_cases()]
        else:
            ps = _stage("prioritize", prioritize, repo.active_cases(), tags, cfg.selection)
            order = ps.cut
            _write_json(rep_dir and rep_dir / "prioritized.json", ps.to_json())
        rep_results = []
        for cid in order:
            case = by_id[cid]
            rep_results.append(_stage("run", execute, case, new, tasks_by_id[case.task_id], cfg.timing, rep))
        maintain(repo, rep_results)
        if rep_dir is not None:
            _write_json(rep_dir / "results.json", [r.to_json() for r in rep_results])
            save_repository(repo, rep_dir / "repository.json")
        results.extend(rep_results)
        executed.append(order)
    report = _stage("report", aggregate_metrics, results, cfg.repetitions)
    if out is not None:
        _write_json(out / "report.json", report.to_json())
        (out / "report.txt").write_text(render_table([(cfg.ablation, report)], _title(old, new)) + "\n", encoding="utf-8")
    return PipelineRun(report, results, pool_sizes, suite_sizes, executed)


def _title(old, new):
    return f"{old.version_id} -> {new.version_id}"


def run_baseline(cfg: PipelineConfig, method: str, _loaded=None):
    """RANDOM (``"random"``) or diff-Q-learning (``"diffq"``) under the pipeline's budget and seeds."""
    if method not in ("random", "diffq"):
        raise ValueError(f"unknown baseline {method!r}")
    old, new, tasks = _loaded or _load_pair(cfg)
    results = []
    for rep in range(cfg.repetitions):
        agent = replace(cfg.agent, random_seed=cfg.random_seed + rep)
        for task in tasks:
            if method == "random":
                trajs = random_rollouts(new, task, agent)
            else:
                trajs = diff_q_learning(old, new, task, agent)
            for i, tr in enumerate(trajs):
                results.append(trajectory_result(tr, f"{task.task_id}-ep{i:04d}", "simulated", 0.0, rep))
    return aggregate_metrics(results, cfg.repetitions)


def cases_to_reach(results, repetition, target):
    """Executed cases until ``target`` distinct bugs have shown up (None if never)."""
    seen = set()
    n = 0
    for r in results:
        if r.repetition != repetition:
            continue
        n += 1
        seen.update(r.triggered_bugs)
        if len(seen) >= target:
            return n
    return None


def run_benchmark(cfg: PipelineConfig, transitions=None, ablations=("full",)):
    """RANDOM, diff-Q-learning and the pipeline on each version transition.

    ``transitions`` is a list of (old_path, new_path); default is the single
    pair in ``cfg``. Returns ``{"v1->v2": {method: SuiteReport}}`` and
    writes ``bench.json`` and ``bench.txt`` under ``cfg.out`` when set.
    """
    transitions = transitions or [(cfg.old, cfg.new)]
    tables, text = {}, []
    for old_path, new_path in transitions:
        sub = replace(cfg, old=old_path, new=new_path, out=None)
        old, new, tasks = _load_pair(sub)
        rows = {
            "RANDOM": run_baseline(sub, "random", (old, new, tasks)),
            "diff-Qlearning": run_baseline(sub, "diffq", (old, new, tasks)),
        }
        for ab in ablations:
            name = "pipeline" if ab == "full" else f"pipeline/{ab}"
            rows[name] = run_pipeline(replace(sub, ablation=ab)).report
        key = _title(old, new)
        tables[key] = rows
        text.append(render_table(list(rows.items()), f"{key} (p={cfg.selection.rts_proportion})"))
    if cfg.out:
        out = Path(cfg.out)
        _write_json(out / "bench.json", {k: {m: r.to_json() for m, r in v.items()} for k, v in tables.items()})
        (out / "bench.txt").write_text("\n\n".join(text) + "\n", encoding="utf-8")
    return tables


def config_to_json(cfg: PipelineConfig):
    d = asdict(cfg)
    d["selection"] = {k: v for k, v in d["selection"].items() if not callable(v)}
    return json.loads(json.dumps(d, default=str))

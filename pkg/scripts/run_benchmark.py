"""Benchmark table: RANDOM, diff-Q-learning and the pipeline on v1 -> v2 and v2 -> v3.

    python3 scripts/run_benchmark.py --out runs/bench [--ablations] [--reps 10]

Also prints, per transition, how many executed cases the full pipeline and
the no_rts ablation need to reach the full pipeline's per-repetition bug count.
"""
import argparse
import statistics
import sys
from dataclasses import replace
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from graytest import DATA_DIR  # noqa: E402
from graytest.explore import AgentConfig  # noqa: E402
from graytest.pipeline import ABLATIONS, PipelineConfig, cases_to_reach, run_benchmark, run_pipeline  # noqa: E402
from graytest.selection import SelectionConfig  # noqa: E402

PAIRS = [("v1", "v2"), ("v2", "v3")]


def cases_needed(cfg):
    full = run_pipeline(cfg)
    flat = run_pipeline(replace(cfg, ablation="no_rts"))
    a, b = [], []
    for rep in range(cfg.repetitions):
        target = full.report.per_repetition[rep]["unique_bugs"]
        a.append(cases_to_reach(full.results, rep, target))
        got = cases_to_reach(flat.results, rep, target)
        b.append(got if got is not None else float("inf"))
    return statistics.fmean(a), statistics.fmean(b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=ROOT / "runs" / "bench")
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--budget", type=int, default=5000)
    ap.add_argument("--proportion", type=float, default=0.5)
    ap.add_argument("--ablations", action="store_true", help="add no_multi_opt, no_rts and no_both rows")
    args = ap.parse_args()

    cfg = PipelineConfig(
        agent=AgentConfig(random_seed=args.seed, task_step_budget=args.budget),
        selection=SelectionConfig(rts_proportion=args.proportion),
        repetitions=args.reps,
        random_seed=args.seed,
        out=args.out,
    )
    pairs = [(DATA_DIR / f"{o}.json", DATA_DIR / f"{n}.json") for o, n in PAIRS]
    run_benchmark(cfg, pairs, ABLATIONS if args.ablations else ("full",))
    print((args.out / "bench.txt").read_text())
    for (o, n), (old, new) in zip(PAIRS, pairs):
        full, flat = cases_needed(replace(cfg, old=old, new=new, out=None))
        print(f"{o} -> {n}: cases to reach the full bug count: full {full:.1f}, no_rts {flat:.1f}")


if __name__ == "__main__":
    main()

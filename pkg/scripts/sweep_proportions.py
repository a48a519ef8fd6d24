"""Run the full pipeline at RTS proportions 10%..90% and tabulate the reports.

    python3 scripts/sweep_proportions.py --out runs/sweep [--old v1 --new v2]

The exploration, graph and Pareto stages are identical across proportions
(same seeds), so the selected sets are nested.
"""
import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from graytest import DATA_DIR  # noqa: E402
from graytest.explore import AgentConfig  # noqa: E402
from graytest.pipeline import PROPORTIONS, PipelineConfig, run_pipeline  # noqa: E402
from graytest.runner import render_table  # noqa: E402
from graytest.selection import SelectionConfig  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=ROOT / "runs" / "sweep")
    ap.add_argument("--old", default="v1")
    ap.add_argument("--new", default="v2")
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--lambda", dest="lambda_", type=float, default=0.5)
    args = ap.parse_args()

    rows = []
    for p in PROPORTIONS:
        cfg = PipelineConfig(
            old=DATA_DIR / f"{args.old}.json",
            new=DATA_DIR / f"{args.new}.json",
            agent=AgentConfig(random_seed=args.seed),
            selection=SelectionConfig(lambda_=args.lambda_, rts_proportion=p),
            repetitions=args.reps,
            random_seed=args.seed,
            out=args.out / f"p{int(p * 100):02d}",
        )
        rows.append((f"top {int(p * 100)}%", run_pipeline(cfg).report))
    text = render_table(rows, f"{args.old} -> {args.new}, lambda={args.lambda_}")
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "sweep.txt").write_text(text + "\n", encoding="utf-8")
    print(text)


if __name__ == "__main__":
    main()

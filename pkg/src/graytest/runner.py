"""Replay test cases on a game version, maintain the repository, aggregate metrics."""
from __future__ import annotations

import json
import statistics
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .env import QUEST_MARK, hash_state, reset, step

METRICS = ("episodes", "bug_count", "unique_bugs", "unique_states", "mean_reward", "success_rate", "duration", "total_steps")
COLUMNS = ("Episodes", "Bug Count", "Unique Bugs", "Unique States", "Reward", "Success Rate", "Duration", "Total Steps")


@dataclass
class RunResult:
    case_id: str
    status: str  # "valid" or "obsolete"
    triggered_bugs: list
    visited_state_hashes: list
    steps: int
    reward: float
    duration: float
    success: bool
    repetition: int = 0
    exec_time: float = 0.0

    def to_json(self):
        return {
            "case_id": self.case_id,
            "status": self.status,
            "triggered_bugs": list(self.triggered_bugs),
            "visited_state_hashes": [f"{h:016x}" for h in self.visited_state_hashes],
            "steps": self.steps,
            "reward": self.reward,
            "duration": self.duration,
            "success": self.success,
            "repetition": self.repetition,
            "exec_time": self.exec_time,
        }

    @classmethod
    def from_json(cls, d):
        return cls(**{**d, "visited_state_hashes": [int(h, 16) for h in d["visited_state_hashes"]]})


def execute(case, config_new, task, timing="wall", repetition=0) -> RunResult:
    """Replay ``case`` from reset on ``config_new``.

    Stops at the end of the case, on reaching the goal, or at the episode cap.
    With ``timing="simulated"`` the duration is the summed per-action time
    estimate of the config instead of wall-clock seconds.
    """
    t0 = time.perf_counter()
    state = reset(config_new, task)
    visited = [hash_state(state)]
    bugs, total, est, steps = [], 0.0, 0.0, 0
    for action in case.actions[: task.max_episode_steps]:
        if action not in config_new.actions:
            break
        out = step(state, action, config_new, task)
        steps += 1
        bugs.extend(out.triggered_bugs)
        total += out.reward
        est += out.events[0]["dt"]
        state = out.next_state
        visited.append(hash_state(state))
        if QUEST_MARK in state.progress:
            break
    success = QUEST_MARK in state.progress
    duration = time.perf_counter() - t0 if timing == "wall" else est
    return RunResult(case.case_id, "valid" if success else "obsolete", bugs, visited, steps, total, duration, success, repetition, est)


def trajectory_result(traj, case_id, timing="wall", duration=0.0, repetition=0) -> RunResult:
    """View an exploration episode as a run (used for baselines that test while exploring)."""
    bugs = [b for _, _, out in traj.transitions for b in out.triggered_bugs]
    est = sum(out.events[0]["dt"] for _, _, out in traj.transitions)
    return RunResult(
        case_id,
        "valid" if traj.success else "obsolete",
        bugs,
        traj.state_hashes(),
        traj.steps,
        traj.total_reward,
        duration if timing == "wall" else est,
        traj.success,
        repetition,
        est,
    )


# -- repository ---------------------------------------------------------------


@dataclass
class CaseRecord:
    case: object
    status: str = "new"
    flagged: bool = False
    exec_time: float | None = None
    bug_history: list = field(default_factory=list)
    runs: int = 0


@dataclass
class Repository:
    records: dict = field(default_factory=dict)  # case_id -> CaseRecord

    @classmethod
    def from_cases(cls, cases):
        return cls({c.case_id: CaseRecord(c) for c in cases})

    def active_cases(self):
        """Cases eligible for prioritization (obsolete ones excluded)."""
        return [r.case for r in self.records.values() if not r.flagged]

    def flagged(self):
        return sorted(cid for cid, r in self.records.items() if r.flagged)

    def to_json(self):
        return [
            {
                "case": r.case.to_json(),
                "status": r.status,
                "flagged": r.flagged,
                "exec_time": r.exec_time,
                "bug_history": r.bug_history,
                "runs": r.runs,
            }
            for _, r in sorted(self.records.items())
        ]

    @classmethod
    def from_json(cls, docs):
        from .graph import TestCase

        repo = cls()
        for d in docs:
            case = TestCase.from_json(d["case"])
            repo.records[case.case_id] = CaseRecord(case, d["status"], d["flagged"], d["exec_time"], d["bug_history"], d["runs"])
        return repo


def maintain(repo: Repository, results) -> Repository:
    """Refresh valid cases and flag obsolete ones (they stay in the store)."""
    for res in results:
        rec = repo.records.get(res.case_id)
        if rec is None:
            raise KeyError(f"unknown case_id {res.case_id!r}")
        rec.runs += 1
        rec.status = res.status
        if res.status == "valid":
            rec.flagged = False
            rec.exec_time = res.exec_time
            rec.bug_history.append(sorted(Counter(res.triggered_bugs).items()))
        else:
            rec.flagged = True
    return repo


def save_repository(repo, path):
    Path(path).write_text(json.dumps(repo.to_json(), sort_keys=True, indent=1), encoding="utf-8")


def load_repository(path):
    return Repository.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# -- metrics ------------------------------------------------------------------


@dataclass
class SuiteReport:
    episodes: float
    bug_count: float
    unique_bugs: float
    unique_states: float
    mean_reward: float
    success_rate: float
    duration: float
    total_steps: float
    stddev: dict = field(default_factory=dict)
    per_repetition: list = field(default_factory=list)
    bug_ids: list = field(default_factory=list)

    def to_json(self):
        out = {k: getattr(self, k) for k in METRICS}
        out["stddev"] = dict(self.stddev)
        out["per_repetition"] = self.per_repetition
        out["bug_ids"] = self.bug_ids
        return out

    @classmethod
    def from_json(cls, d):
        return cls(**d)


def _rep_metrics(results):
    bugs = [b for r in results for b in r.triggered_bugs]
    states = set()
    for r in results:
        states.update(r.visited_state_hashes)
    n = len(results)
    return {
        "episodes": n,
        "bug_count": len(bugs),
        "unique_bugs": len(set(bugs)),
        "unique_states": len(states),
        "mean_reward": sum(r.reward for r in results) / n if n else 0.0,
        "success_rate": sum(r.status == "valid" for r in results) / n if n else 0.0,
        "duration": sum(r.duration for r in results),
        "total_steps": sum(r.steps for r in results),
    }


def aggregate_metrics(results, repetitions=1) -> SuiteReport:
    """Per-repetition counts, then mean and (sample) stddev across repetitions."""
    if not results:
        raise ValueError("no results to aggregate")
    by_rep = {i: [] for i in range(repetitions)}
    for r in results:
        by_rep.setdefault(r.repetition, []).append(r)
    reps = [_rep_metrics(by_rep[i]) for i in sorted(by_rep)]
    mean = {k: statistics.fmean(m[k] for m in reps) for k in METRICS}
    std = {k: (statistics.stdev(m[k] for m in reps) if len(reps) > 1 else 0.0) for k in METRICS}
    bug_ids = sorted({b for r in results for b in r.triggered_bugs})
    return SuiteReport(**mean, stddev=std, per_repetition=reps, bug_ids=bug_ids)


def render_table(rows, title=""):
    """Plain-text table; ``rows`` is a list of ``(label, SuiteReport)``."""
    head = ["Method"] + list(COLUMNS)
    body = []
    for label, rep in rows:
        cells = [label]
        for k in METRICS:
            v, s = getattr(rep, k), rep.stddev.get(k, 0.0)
            fmt = "{:.2f} (±{:.2f})" if k == "success_rate" else "{:.1f} (±{:.1f})"
            cells.append(fmt.format(v, s))
        body.append(cells)
    widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
    lines = [title] if title else []
    lines.append("  ".join(h.ljust(w) for h, w in zip(head, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join([r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]))
    return "\n".join(lines)

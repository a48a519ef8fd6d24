"""Produce scripted seed responses for the mock backend.

For every task of every fixture version this writes
``src/graytest/data/mock/<version>/<task_id>.jsonl``: one JSON-encoded raw
response string per line, shaped like a model's answer to the seed prompt.
Plans come from breadth-first search with a shuffled action order, half of
them routed through a random waypoint so the canned plans differ.
"""
import json
import random
import sys
from collections import deque
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from graytest import DATA_DIR  # noqa: E402
from graytest.predicates import evaluate  # noqa: E402
from graytest.env import QUEST_MARK, hash_state, load_config, reset, step  # noqa: E402

N_SEEDS = 20


def bfs(config, task, start, done, order):
    """Shortest action list from ``start`` to a state satisfying ``done``."""
    seen = {hash_state(start): None}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        if done(state):
            plan, h = [], hash_state(state)
            while seen[h] is not None:
                h, a = seen[h]
                plan.append(a)
            return state, plan[::-1]
        for a in order:
            nxt = step(state, a, config, task).next_state
            h = hash_state(nxt)
            if h not in seen:
                seen[h] = (hash_state(state), a)
                queue.append(nxt)
    raise RuntimeError("goal unreachable")


def _holds(config, preds, state):
    return all(evaluate(p, config, state) for p in preds)


def describe(config, task, plan):
    state = reset(config, task)
    steps, key_steps = [], []
    for i, a in enumerate(plan, 1):
        out = step(state, a, config, task)
        objs = ", ".join(out.events[0]["objects"])
        if a.startswith("move_"):
            text = f"walk {a[5:]} to {out.next_state.agent_cell}"
        elif a == "pickup":
            text = f"pick up the {objs}"
            key_steps.append(f"fetch {objs}")
        elif a == "drop":
            kind = config.cell_kind(state.agent_cell)
            text = f"put the {objs} on the {kind}"
            if kind == "serving":
                key_steps.append(f"serve {objs}")
        else:
            st = dict((o, s) for o, _, s in out.next_state.objects)
            text = f"process the {objs} into {st.get(objs, '?')}"
            key_steps.append(text)
        steps.append({"step": i, "description": text, "action": a})
        state = out.next_state
    return steps, key_steps


def plans_for(config, task):
    """Chain short searches through the stage goals; odd seeds detour via a waypoint."""
    rows, cols = config.shape
    cells = [(r, c) for r in range(rows) for c in range(cols) if config.cell_kind((r, c)) != "wall"]
    s0 = reset(config, task)
    targets = []
    for i, stage in enumerate(task.stage_goals):
        # split placement conjuncts into "hold it" then "place it" so each search stays shallow
        done = []
        for conj in stage.get("all", [stage]):
            if "on" in conj or "cell" in conj:
                targets.append(lambda s, d=tuple(done), o=conj["object"]: s.inventory == o and _holds(config, d, s))
            done.append(conj)
            targets.append(lambda s, d=tuple(done): _holds(config, d, s))
        targets.append(lambda s, i=i: i in s.progress)
    targets.append(lambda s: QUEST_MARK in s.progress)
    out = []
    rng = random.Random(f"{config.version_id}/{task.task_id}")
    for i in range(N_SEEDS):
        order = list(config.actions)
        rng.shuffle(order)
        detour_at = rng.randrange(len(targets)) if i % 2 else None
        way = rng.choice(cells)
        state, plan = s0, []
        for j, done in enumerate(targets):
            if j == detour_at:
                state, part = bfs(config, task, state, lambda s, w=way: s.agent_cell == w, order)
                plan += part
            state, part = bfs(config, task, state, done, order)
            plan += part
        out.append((plan, "direct" if detour_at is None else f"via {way}"))
    return out


def main():
    for version in ("v1", "v2", "v3"):
        config = load_config(DATA_DIR / f"{version}.json")
        target = DATA_DIR / "mock" / version
        target.mkdir(parents=True, exist_ok=True)
        for task in config.tasks:
            lines, lengths = [], []
            for plan, route in plans_for(config, task):
                lengths.append(len(plan))
                steps, key_steps = describe(config, task, plan)
                response = {
                    "summary": f"{task.name}: {len(plan)}-step plan, route {route}.",
                    "key_steps": key_steps,
                    "steps": steps,
                }
                lines.append(json.dumps(json.dumps(response, indent=1)))
            (target / f"{task.task_id}.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
            print(version, task.task_id, lengths)


if __name__ == "__main__":
    main()

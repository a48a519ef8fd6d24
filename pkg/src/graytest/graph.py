"""State-action transition graph and candidate test-case derivation."""
from __future__ import annotations

import hashlib
import json
import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .env import ACTIONS, GameState, hash_hex, hash_state

log = logging.getLogger(__name__)


class GraphError(ValueError):
    pass


@dataclass
class EdgeMeta:
    exec_time: float
    objects: set = field(default_factory=set)
    scene: str = ""
    ui: set = field(default_factory=set)
    observations: int = 1


@dataclass
class TransitionGraph:
    task_id: str
    version_id: str
    actions: tuple = ACTIONS
    s0: int | None = None
    states: dict = field(default_factory=dict)  # hash -> GameState (tick 0)
    edges: dict = field(default_factory=dict)  # (hash, action) -> (hash, EdgeMeta)
    goal_states: set = field(default_factory=set)

    def successors(self, h):
        for a in self.actions:
            e = self.edges.get((h, a))
            if e is not None:
                yield a, e[0]

    def to_json(self):
        return {
            "task_id": self.task_id,
            "version_id": self.version_id,
            "actions": list(self.actions),
            "s0": hash_hex(self.s0) if self.s0 is not None else None,
            "goal_states": sorted(hash_hex(h) for h in self.goal_states),
            "states": {hash_hex(h): {k: v for k, v in s.to_json().items() if k != "tick"} for h, s in sorted(self.states.items())},
            "edges": [
                {
                    "src": hash_hex(src),
                    "action": a,
                    "dst": hash_hex(dst),
                    "exec_time": m.exec_time,
                    "objects": sorted(m.objects),
                    "scene": m.scene,
                    "ui": sorted(m.ui),
                    "observations": m.observations,
                }
                for (src, a), (dst, m) in sorted(self.edges.items(), key=lambda kv: (kv[0][0], self.actions.index(kv[0][1])))
            ],
        }

    @classmethod
    def from_json(cls, doc):
        g = cls(doc["task_id"], doc["version_id"], tuple(doc["actions"]))
        g.s0 = int(doc["s0"], 16) if doc["s0"] else None
        g.goal_states = {int(h, 16) for h in doc["goal_states"]}
        g.states = {int(h, 16): GameState.from_json({**s, "tick": 0}) for h, s in doc["states"].items()}
        for e in doc["edges"]:
            meta = EdgeMeta(e["exec_time"], set(e["objects"]), e["scene"], set(e["ui"]), e["observations"])
            g.edges[(int(e["src"], 16), e["action"])] = (int(e["dst"], 16), meta)
        return g


def save_graph(graph, path):
    Path(path).write_text(json.dumps(graph.to_json(), sort_keys=True, indent=1), encoding="utf-8")


def load_graph(path):
    return TransitionGraph.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _canon(state):
    return GameState(state.agent_cell, state.inventory, state.objects, state.progress, 0)


def ingest(trajectories, graph: TransitionGraph) -> TransitionGraph:
    """Merge observed transitions into ``graph`` (mutated and returned)."""
    for traj in trajectories:
        if traj.version_id != graph.version_id or traj.task_id != graph.task_id:
            raise GraphError(
                f"trajectory from {traj.version_id}/{traj.task_id} cannot enter graph {graph.version_id}/{graph.task_id}"
            )
        if not traj.transitions:
            continue
        first = hash_state(traj.transitions[0][0])
        if graph.s0 is None:
            graph.s0 = first
            graph.states[first] = _canon(traj.transitions[0][0])
        elif first != graph.s0:
            raise GraphError("trajectory does not start at the graph's initial state")
        for s, a, out in traj.transitions:
            h, h2 = hash_state(s), hash_state(out.next_state)
            graph.states.setdefault(h, _canon(s))
            graph.states.setdefault(h2, _canon(out.next_state))
            ev = out.events[0]
            hit = graph.edges.get((h, a))
            if hit is None:
                graph.edges[(h, a)] = (h2, EdgeMeta(ev["dt"], set(ev["objects"]), ev["scene"], set(ev["ui"]), 1))
                continue
            dst, meta = hit
            if dst != h2:
                raise GraphError(f"nondeterminism detected at {hash_hex(h)} / {a}")
            meta.exec_time += (ev["dt"] - meta.exec_time) / (meta.observations + 1)
            meta.objects |= set(ev["objects"])
            meta.ui |= set(ev["ui"])
            meta.observations += 1
        if traj.success:
            graph.goal_states.add(hash_state(traj.transitions[-1][2].next_state))
    return graph


def build_graph(trajectories, task_id, version_id, actions=ACTIONS):
    return ingest(trajectories, TransitionGraph(task_id, version_id, tuple(actions)))


@dataclass
class PathLimits:
    max_depth: int = 60
    max_paths_per_goal: int = 500
    max_total_paths: int = 5000

    def __post_init__(self):
        if min(self.max_depth, self.max_paths_per_goal, self.max_total_paths) <= 0:
            raise ValueError("path limits must be positive")


@dataclass(frozen=True)
class CandidatePath:
    nodes: tuple
    actions: tuple
    task_id: str


def _goal_distance(graph, goals):
    """Edges-to-nearest-goal for every state that can reach one."""
    rev = {}
    for (src, _), (dst, _) in graph.edges.items():
        rev.setdefault(dst, set()).add(src)
    dist = {g: 0 for g in goals}
    queue = deque(goals)
    while queue:
        v = queue.popleft()
        for u in rev.get(v, ()):
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


def enumerate_paths(graph: TransitionGraph, limits: PathLimits = None):
    """Simple paths from s0 to goal states, depth-first in action-alphabet order.

    Paths may continue through a goal state towards another goal. Branches
    that cannot reach a goal within ``max_depth`` are pruned, which never
    changes the result set.
    """
    limits = limits or PathLimits()
    if not graph.goal_states or graph.s0 is None:
        log.warning("graph %s/%s has no goal states", graph.version_id, graph.task_id)
        return []
    per_goal = {g: 0 for g in graph.goal_states}
    live = {g for g in graph.goal_states}
    dist = _goal_distance(graph, live)
    if graph.s0 not in dist:
        log.warning("no goal reachable from s0 in %s/%s", graph.version_id, graph.task_id)
        return []

    out = []
    nodes, acts = [graph.s0], []
    on_path = {graph.s0}
    # explicit stack of successor iterators keeps deep graphs off the recursion limit
    stack = [iter(list(graph.successors(graph.s0)))]
    while stack:
        nxt = next(stack[-1], None)
        if nxt is None:
            stack.pop()
            on_path.discard(nodes.pop())
            if acts:
                acts.pop()
            continue
        a, v = nxt
        if v in on_path:
            continue
        depth = len(acts) + 1
        d = dist.get(v)
        if d is None or depth + d > limits.max_depth:
            continue
        if v in live:
            out.append(CandidatePath(tuple(nodes) + (v,), tuple(acts) + (a,), graph.task_id))
            per_goal[v] += 1
            if len(out) >= limits.max_total_paths:
                break
            if per_goal[v] >= limits.max_paths_per_goal:
                live.discard(v)
                if not live:
                    break
                dist = _goal_distance(graph, live)
        if depth < limits.max_depth:
            nodes.append(v)
            acts.append(a)
            on_path.add(v)
            stack.append(iter(list(graph.successors(v))))
    return out


@dataclass
class TestCase:
    case_id: str
    task_id: str
    version_id: str
    actions: tuple
    states: tuple
    objects: frozenset = frozenset()
    scenes: frozenset = frozenset()
    ui: frozenset = frozenset()
    exec_times: tuple = ()
    objectives: object = None
    products: frozenset = frozenset()  # "<state> <object>" reached along the path, e.g. "chopped tomato"

    __test__ = False  # not a pytest class

    def to_json(self):
        return {
            "case_id": self.case_id,
            "task_id": self.task_id,
            "version_id": self.version_id,
            "actions": list(self.actions),
            "metadata": {
                "states": [hash_hex(h) for h in self.states],
                "objects": sorted(self.objects),
                "scenes": sorted(self.scenes),
                "ui": sorted(self.ui),
                "exec_times": list(self.exec_times),
                "products": sorted(self.products),
            },
            "objectives": self.objectives.to_json() if self.objectives is not None else None,
        }

    @classmethod
    def from_json(cls, d):
        from .optimize import ObjectiveVector

        m = d["metadata"]
        return cls(
            case_id=d["case_id"],
            task_id=d["task_id"],
            version_id=d["version_id"],
            actions=tuple(d["actions"]),
            states=tuple(int(h, 16) for h in m["states"]),
            objects=frozenset(m["objects"]),
            scenes=frozenset(m["scenes"]),
            ui=frozenset(m["ui"]),
            exec_times=tuple(m["exec_times"]),
            products=frozenset(m.get("products", ())),
            objectives=ObjectiveVector.from_json(d["objectives"]) if d.get("objectives") else None,
        )


def _path_digest(path):
    text = ",".join(path.actions) + "|" + ",".join(hash_hex(h) for h in path.nodes)
    return hashlib.blake2b(text.encode(), digest_size=6).hexdigest()


def _products(nodes, graph):
    """Processing states objects pass through on the path, beyond their initial one."""
    first = graph.states.get(nodes[0])
    if first is None:
        return frozenset()
    initial = {oid: st for oid, _, st in first.objects}
    out = set()
    for h in nodes[1:]:
        state = graph.states.get(h)
        if state is not None:
            out.update(f"{st} {oid}" for oid, _, st in state.objects if st != initial.get(oid))
    return frozenset(out)


def to_test_case(path: CandidatePath, graph: TransitionGraph, case_id=None) -> TestCase:
    objects, scenes, ui, times = set(), set(), set(), []
    for i, a in enumerate(path.actions):
        hit = graph.edges.get((path.nodes[i], a))
        if hit is None or hit[0] != path.nodes[i + 1]:
            raise GraphError(f"dangling edge at position {i} ({a})")
        meta = hit[1]
        objects |= meta.objects
        ui |= meta.ui
        if meta.scene:
            scenes.add(meta.scene)
        times.append(meta.exec_time)
    return TestCase(
        case_id=case_id or f"{graph.task_id}-{_path_digest(path)}",
        task_id=path.task_id,
        version_id=graph.version_id,
        actions=tuple(path.actions),
        states=tuple(path.nodes),
        objects=frozenset(objects),
        scenes=frozenset(scenes),
        ui=frozenset(ui),
        exec_times=tuple(times),
        products=_products(path.nodes, graph),
    )


def derive_test_cases(graph, limits=None):
    """Enumerate paths and bundle each one as a test case with a stable id."""
    return [to_test_case(p, graph, f"{graph.task_id}-{i:05d}") for i, p in enumerate(enumerate_paths(graph, limits))]

"""Deterministic, versioned grid-world cooking simulator.

The kitchen is a rectangular grid. The agent stands on any non-wall cell and
acts on the cell it occupies: ``pickup`` takes the object lying there,
``drop`` places the held object on an empty counter, station or serving cell,
and ``interact`` applies the processing rule of the station under the agent to
the object lying on it. Everything else is a penalized no-op.

Config files are single JSON documents; see ``docs/config_schema.md``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from .predicates import PredicateError, evaluate, referenced_objects

ACTIONS = (
    "move_up",
    "move_down",
    "move_left",
    "move_right",
    "pickup",
    "drop",
    "interact",
)

MOVES = {
    "move_up": (-1, 0),
    "move_down": (1, 0),
    "move_left": (0, -1),
    "move_right": (0, 1),
}

CELL_KINDS = {".": "floor", "C": "counter", "S": "station", "X": "serving", "#": "wall"}
PLACEABLE = {"counter", "station", "serving"}

STEP_PENALTY = -0.1
STAGE_BONUS = 1000.0
QUEST_BONUS = 10000.0
QUEST_MARK = -1  # sentinel stored in GameState.progress once the quest pays out


class ConfigError(ValueError):
    """Raised when a config fails to parse or violates an invariant."""

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class ObjectSpec:
    object_id: str
    kind: str
    cell: tuple
    states: tuple

    @property
    def initial_state(self):
        return self.states[0]


@dataclass(frozen=True)
class Rule:
    station: str
    kind: str
    from_state: str
    to_state: str
    ui: tuple = ()


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    name: str
    goal_predicate: dict
    stage_goals: tuple
    max_episode_steps: int = 100
    max_task_steps: int = 5000
    objective: str = ""
    related_rules: str = ""


@dataclass(frozen=True)
class BugTrigger:
    bug_id: str
    predicate: dict
    description: str = ""
    category: str = "logic"


@dataclass
class VersionedGameConfig:
    version_id: str
    grid: list
    objects: list
    tasks: list
    bug_triggers: list
    scene_map: dict
    ui_components: frozenset
    start: tuple = (0, 0)
    stations: dict = field(default_factory=dict)
    rules: list = field(default_factory=list)
    actions: tuple = ACTIONS
    action_time: dict = field(default_factory=dict)
    action_ui: dict = field(default_factory=dict)
    serving_ui: tuple = ()
    name: str = "kitchen"
    description: str = ""
    basic_rules: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._objects = {o.object_id: o for o in self.objects}
        self._rules = {(r.station, r.kind, r.from_state): r for r in self.rules}
        self._tasks = {t.task_id: t for t in self.tasks}

    @property
    def shape(self):
        return len(self.grid), len(self.grid[0])

    def cell_kind(self, cell):
        r, c = cell
        return CELL_KINDS[self.grid[r][c]]

    def in_bounds(self, cell):
        rows, cols = self.shape
        return 0 <= cell[0] < rows and 0 <= cell[1] < cols

    def scene(self, cell):
        return self.scene_map.get(tuple(cell), "")

    def object_spec(self, object_id) -> ObjectSpec:
        return self._objects[object_id]

    def task(self, task_id) -> TaskSpec:
        try:
            return self._tasks[task_id]
        except KeyError:
            raise KeyError(f"unknown task_id {task_id!r} in config {self.version_id}") from None

    def rule_for(self, station, kind, state):
        return self._rules.get((station, kind, state))

    def dt(self, action):
        return float(self.action_time.get(action, 1.0))


@dataclass(frozen=True)
class GameState:
    """Immutable game state.

    ``objects`` is a tuple of ``(object_id, cell, processing_state)`` sorted by
    object id; ``cell`` is ``None`` while the object is held. ``progress`` holds
    the indices of stage goals already rewarded in this episode (and
    ``QUEST_MARK`` once the quest bonus was paid).
    """

    agent_cell: tuple
    inventory: str | None
    objects: tuple
    progress: frozenset = frozenset()
    tick: int = 0

    @property
    def object_states(self):
        return {oid: (cell, st) for oid, cell, st in self.objects}

    def object_at(self, cell):
        for oid, ocell, _ in self.objects:
            if ocell == cell:
                return oid
        return None

    def to_json(self):
        return {
            "agent_cell": list(self.agent_cell),
            "inventory": self.inventory,
            "objects": [[oid, list(cell) if cell is not None else None, st] for oid, cell, st in self.objects],
            "progress": sorted(self.progress),
            "tick": self.tick,
        }

    @classmethod
    def from_json(cls, d):
        objects = tuple(
            (oid, tuple(cell) if cell is not None else None, st) for oid, cell, st in d["objects"]
        )
        return cls(
            agent_cell=tuple(d["agent_cell"]),
            inventory=d["inventory"],
            objects=objects,
            progress=frozenset(d.get("progress", ())),
            tick=d.get("tick", 0),
        )


@dataclass(frozen=True)
class StepOutcome:
    next_state: GameState
    reward: float
    events: list
    triggered_bugs: list

    @property
    def event(self):
        return self.events[0]


# -- loading -----------------------------------------------------------------


def _cell(value, path):
    if not (isinstance(value, (list, tuple)) and len(value) == 2 and all(isinstance(v, int) for v in value)):
        raise ConfigError("expected [row, col]", path)
    return (value[0], value[1])


def parse_config(doc: dict) -> VersionedGameConfig:
    """Build and validate a config from an already-decoded JSON document."""
    for key in ("version_id", "grid", "objects", "tasks", "bug_triggers", "scene_map", "ui_components"):
        if key not in doc:
            raise ConfigError("missing required key", key)

    grid = doc["grid"]
    if not grid or not all(isinstance(row, str) for row in grid):
        raise ConfigError("grid must be a non-empty list of strings", "grid")
    if len({len(row) for row in grid}) != 1 or not grid[0]:
        raise ConfigError("grid must be rectangular", "grid")
    for r, row in enumerate(grid):
        for c, ch in enumerate(row):
            if ch not in CELL_KINDS:
                raise ConfigError(f"unknown cell code {ch!r}", f"grid[{r}][{c}]")
    rows, cols = len(grid), len(grid[0])

    def in_bounds(cell):
        return 0 <= cell[0] < rows and 0 <= cell[1] < cols

    stations = {}
    for i, st in enumerate(doc.get("stations", [])):
        cell = _cell(st.get("cell"), f"stations[{i}].cell")
        if not in_bounds(cell) or grid[cell[0]][cell[1]] != "S":
            raise ConfigError("station must sit on an 'S' cell", f"stations[{i}].cell")
        stations[cell] = st["type"]
    for r, row in enumerate(grid):
        for c, ch in enumerate(row):
            if ch == "S" and (r, c) not in stations:
                raise ConfigError("station cell has no declared type", f"grid[{r}][{c}]")

    ui_components = frozenset(doc["ui_components"])

    def check_ui(labels, path):
        for label in labels:
            if label not in ui_components:
                raise ConfigError(f"undeclared ui component {label!r}", path)
        return tuple(labels)

    objects = []
    seen_cells = set()
    for i, o in enumerate(doc["objects"]):
        path = f"objects[{i}]"
        cell = _cell(o.get("cell"), path + ".cell")
        if not in_bounds(cell):
            raise ConfigError("object cell out of bounds", path + ".cell")
        if CELL_KINDS[grid[cell[0]][cell[1]]] not in PLACEABLE:
            raise ConfigError("object must start on a counter, station or serving cell", path + ".cell")
        if cell in seen_cells:
            raise ConfigError("two objects share a cell", path + ".cell")
        seen_cells.add(cell)
        states = tuple(o.get("states") or ("raw",))
        objects.append(ObjectSpec(o["id"], o.get("kind", o["id"]), cell, states))
    ids = [o.object_id for o in objects]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate object id", "objects")
    by_id = {o.object_id: o for o in objects}
    kinds = {}
    for o in objects:
        kinds.setdefault(o.kind, set()).update(o.states)

    rules = []
    for i, r in enumerate(doc.get("rules", [])):
        path = f"rules[{i}]"
        if r["station"] not in stations.values():
            raise ConfigError(f"no station of type {r['station']!r}", path)
        if r["kind"] not in kinds:
            raise ConfigError(f"unknown object kind {r['kind']!r}", path)
        for key in ("from", "to"):
            if r[key] not in kinds[r["kind"]]:
                raise ConfigError(f"state {r[key]!r} not declared for kind {r['kind']!r}", f"{path}.{key}")
        rules.append(Rule(r["station"], r["kind"], r["from"], r["to"], check_ui(r.get("ui", ()), path + ".ui")))

    actions = tuple(doc.get("actions", ACTIONS))
    for a in actions:
        if a not in ACTIONS:
            raise ConfigError(f"unknown action {a!r}", "actions")

    scene_map = {}
    sm = doc["scene_map"]
    legend, scene_rows = sm.get("legend", {}), sm.get("rows", [])
    if scene_rows:
        if len(scene_rows) != rows or any(len(row) != cols for row in scene_rows):
            raise ConfigError("scene_map rows must match grid shape", "scene_map.rows")
        for r, row in enumerate(scene_rows):
            for c, ch in enumerate(row):
                if ch not in legend:
                    raise ConfigError(f"scene code {ch!r} missing from legend", f"scene_map.rows[{r}][{c}]")
                scene_map[(r, c)] = legend[ch]

    def check_predicate(pred, path):
        try:
            refs = referenced_objects(pred)
        except PredicateError as exc:
            raise ConfigError(str(exc), path) from None
        for oid, state in refs:
            if oid not in by_id:
                raise ConfigError(f"predicate references unknown object {oid!r}", path)
            if state is not None and state not in by_id[oid].states:
                raise ConfigError(f"state {state!r} not declared for object {oid!r}", path)

    tasks = []
    for i, t in enumerate(doc["tasks"]):
        path = f"tasks[{i}]"
        goal = t["goal_predicate"]
        stages = tuple(t.get("stage_goals", ()))
        check_predicate(goal, path + ".goal_predicate")
        for j, s in enumerate(stages):
            check_predicate(s, f"{path}.stage_goals[{j}]")
        if stages:
            conjuncts = goal.get("all", [goal]) if isinstance(goal, dict) else [goal]
            if stages[-1] != goal and stages[-1] not in conjuncts:
                raise ConfigError("goal_predicate must entail the last stage goal", path)
        task = TaskSpec(
            task_id=t["task_id"],
            name=t.get("name", t["task_id"]),
            goal_predicate=goal,
            stage_goals=stages,
            max_episode_steps=int(t.get("max_episode_steps", 100)),
            max_task_steps=int(t.get("max_task_steps", 5000)),
            objective=t.get("objective", ""),
            related_rules=t.get("related_rules", ""),
        )
        if task.max_episode_steps <= 0 or task.max_task_steps <= 0:
            raise ConfigError("step caps must be positive", path)
        tasks.append(task)
    if len({t.task_id for t in tasks}) != len(tasks):
        raise ConfigError("duplicate task_id", "tasks")

    bugs = []
    for i, b in enumerate(doc["bug_triggers"]):
        check_predicate(b["predicate"], f"bug_triggers[{i}].predicate")
        bugs.append(BugTrigger(b["bug_id"], b["predicate"], b.get("description", ""), b.get("category", "logic")))
    if len({b.bug_id for b in bugs}) != len(bugs):
        raise ConfigError("duplicate bug_id", "bug_triggers")

    start = _cell(doc.get("start", [0, 0]), "start")
    if not in_bounds(start) or grid[start[0]][start[1]] == "#":
        raise ConfigError("start cell must be in bounds and not a wall", "start")

    action_ui = {a: check_ui(v, f"action_ui.{a}") for a, v in doc.get("action_ui", {}).items()}
    return VersionedGameConfig(
        version_id=doc["version_id"],
        grid=list(grid),
        objects=objects,
        tasks=tasks,
        bug_triggers=bugs,
        scene_map=scene_map,
        ui_components=ui_components,
        start=start,
        stations=stations,
        rules=rules,
        actions=actions,
        action_time={a: float(v) for a, v in doc.get("action_time", {}).items()},
        action_ui=action_ui,
        serving_ui=check_ui(doc.get("serving_ui", ()), "serving_ui"),
        name=doc.get("name", "kitchen"),
        description=doc.get("description", ""),
        basic_rules=doc.get("basic_rules", ""),
        raw=doc,
    )


def load_config(path) -> VersionedGameConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse failure: {exc}") from None
    return parse_config(doc)


# -- dynamics ----------------------------------------------------------------


def reset(config: VersionedGameConfig, task: TaskSpec) -> GameState:
    if config._tasks.get(task.task_id) is None:
        raise KeyError(f"unknown task_id {task.task_id!r} in config {config.version_id}")
    objects = tuple(sorted((o.object_id, o.cell, o.initial_state) for o in config.objects))
    return GameState(agent_cell=config.start, inventory=None, objects=objects)


def goal_reached(state: GameState, config, task: TaskSpec) -> bool:
    return evaluate(task.goal_predicate, config, state)


def _progress(state, next_state, config, task):
    """Stage indices and quest flag newly satisfied by the transition."""
    done = set(state.progress)
    new = []
    for i, stage in enumerate(task.stage_goals):
        if i in done:
            continue
        # stages are ordered: a stage only counts once every earlier stage has
        if all(j in done for j in range(i)) and evaluate(stage, config, next_state):
            done.add(i)
            new.append(i)
    quest = QUEST_MARK not in state.progress and evaluate(task.goal_predicate, config, next_state)
    return new, quest


def reward(state, action, next_state, task, config=None) -> float:
    """Reward of one transition; pure given both endpoints.

    Stage and quest bonuses are read off ``next_state.progress`` so each is
    paid at most once per episode.
    """
    gained = next_state.progress - state.progress
    stages = sum(1 for p in gained if p != QUEST_MARK)
    quest = QUEST_MARK in gained
    return STEP_PENALTY + STAGE_BONUS * stages + QUEST_BONUS * quest


def step(state: GameState, action: str, config: VersionedGameConfig, task: TaskSpec) -> StepOutcome:
    if action not in config.actions:
        raise ValueError(f"action {action!r} not in the config's action alphabet")
    objects = {oid: [cell, st] for oid, cell, st in state.objects}
    agent, inventory = state.agent_cell, state.inventory
    here = config.cell_kind(agent)
    touched, ui = [], []

    if action in MOVES:
        dr, dc = MOVES[action]
        target = (agent[0] + dr, agent[1] + dc)
        if config.in_bounds(target) and config.cell_kind(target) != "wall":
            agent = target
    elif action == "pickup":
        oid = state.object_at(agent)
        if inventory is None and oid is not None and here != "serving":
            objects[oid][0] = None
            inventory = oid
            touched.append(oid)
            ui.extend(config.action_ui.get("pickup", ()))
    elif action == "drop":
        if inventory is not None and here in PLACEABLE and state.object_at(agent) is None:
            objects[inventory][0] = agent
            touched.append(inventory)
            ui.extend(config.action_ui.get("drop", ()))
            if here == "serving":
                ui.extend(config.serving_ui)
            inventory = None
    elif action == "interact":
        oid = state.object_at(agent)
        if here == "station" and oid is not None:
            spec = config.object_spec(oid)
            rule = config.rule_for(config.stations[agent], spec.kind, objects[oid][1])
            if rule is not None:
                objects[oid][1] = rule.to_state
                touched.append(oid)
                ui.extend(rule.ui)

    interim = GameState(
        agent_cell=agent,
        inventory=inventory,
        objects=tuple(sorted((oid, cell, st) for oid, (cell, st) in objects.items())),
        progress=state.progress,
        tick=state.tick + 1,
    )
    new_stages, quest = _progress(state, interim, config, task)
    if new_stages or quest:
        progress = set(state.progress) | set(new_stages)
        if quest:
            progress.add(QUEST_MARK)
        next_state = GameState(interim.agent_cell, interim.inventory, interim.objects, frozenset(progress), interim.tick)
    else:
        next_state = interim

    triggered = [b.bug_id for b in config.bug_triggers if evaluate(b.predicate, config, next_state, state, action)]
    event = {
        "tick": state.tick,
        "action": action,
        "objects": sorted(set(touched)),
        "scene": config.scene(agent),
        "ui": sorted(set(ui)),
        "bug_ids": triggered,
        "dt": config.dt(action),
    }
    return StepOutcome(next_state, reward(state, action, next_state, task), [event], triggered)


# -- hashing -----------------------------------------------------------------


def canonical(state: GameState) -> str:
    """Canonical serialization, tick excluded, fields in declared order."""
    return json.dumps(
        [list(state.agent_cell), state.inventory, [[o, c and list(c), s] for o, c, s in state.objects], sorted(state.progress)],
        separators=(",", ":"),
    )


@lru_cache(maxsize=1 << 18)
def _hash_key(agent_cell, inventory, objects, progress):
    text = canonical(GameState(agent_cell, inventory, objects, progress))
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "big")


def hash_state(state: GameState) -> int:
    return _hash_key(state.agent_cell, state.inventory, state.objects, state.progress)


def hash_hex(h: int) -> str:
    return f"{h:016x}"


def write_event_log(path, events):
    """Append step events as JSONL (one record per step)."""
    with open(path, "a", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps(ev, sort_keys=True) + "\n")

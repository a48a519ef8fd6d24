"""Seed trajectories from a language-model backend (live HTTP or scripted mock)."""
from __future__ import annotations

import json
import logging
import os
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .env import reset

log = logging.getLogger(__name__)

ENDPOINT_ENV = "GRAYTEST_LLM_ENDPOINT"
API_KEY_ENV = "GRAYTEST_LLM_API_KEY"

SEED_INSTRUCTIONS = (
    "Propose a plan for the task that differs from every entry in past_solutions "
    "(another ordering, another route or another station). Break the task into "
    "subtasks, and for each step give its purpose and exactly one atomic action "
    "taken from available_actions."
)
SEED_OUTPUT_FORMAT = (
    "A single JSON object with: summary (string, the plan in one sentence); "
    "key_steps (list of strings, the subtasks); steps (list of objects "
    "{step: int starting at 1, description: string, action: one of available_actions})."
)


class SeedError(ValueError):
    pass


@dataclass
class SeedPrompt:
    environment: dict
    task: dict
    past_solutions: list
    instructions: str = SEED_INSTRUCTIONS
    output_format: str = SEED_OUTPUT_FORMAT

    def to_json(self):
        return asdict(self)


@dataclass
class SeedTrajectory:
    summary: str
    key_steps: list
    steps: list  # [{"step": int, "description": str, "action": str}]

    @property
    def actions(self):
        return [s["action"] for s in self.steps]

    def to_json(self):
        return {"summary": self.summary, "key_steps": list(self.key_steps), "steps": [dict(s) for s in self.steps]}


@dataclass
class ProviderConfig:
    backend: str = "mock"  # "http" or "mock"
    endpoint: str | None = None  # falls back to $GRAYTEST_LLM_ENDPOINT
    mock_script_path: str | None = None  # JSONL file, or a directory holding <task_id>.jsonl
    seeds_per_task: int = 20
    timeout: float = 30.0
    retries: int = 2
    max_calls: int | None = None
    sampling: dict = field(default_factory=dict)  # forwarded verbatim to the http backend

    def __post_init__(self):
        if self.backend not in ("http", "mock"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.seeds_per_task < 1:
            raise ValueError("seeds_per_task must be >= 1")


def describe_layout(config, task) -> str:
    state = reset(config, task)
    parts = [f"agent at {tuple(state.agent_cell)}"]
    parts += [f"{oid} ({st}) at {cell}" for oid, cell, st in state.objects]
    parts += [f"{kind} at {cell}" for cell, kind in sorted(config.stations.items())]
    rows, cols = config.shape
    serving = [(r, c) for r in range(rows) for c in range(cols) if config.grid[r][c] == "X"]
    parts += [f"serving window at {cell}" for cell in serving]
    return "Kitchen layout: " + ", ".join(parts) + ". Grid rows: " + " / ".join(config.grid)


def build_prompt(config, task, past) -> SeedPrompt:
    config.task(task.task_id)
    return SeedPrompt(
        environment={
            "name": config.name,
            "game_description": config.description,
            "basic_rules": config.basic_rules,
            "current_obs_description": describe_layout(config, task),
            "available_actions": list(config.actions),
        },
        task={"name": task.name, "task_objective": task.objective, "related_rules": task.related_rules},
        past_solutions=[{"summary": p.summary, "key_subtasks": list(p.key_steps)} for p in past],
    )


def _strip_fences(text):
    text = text.strip()
    if text.startswith("```"):
        text = text.split("\n", 1)[1] if "\n" in text else ""
        if text.rstrip().endswith("```"):
            text = text.rstrip()[:-3]
    return text


def parse_trajectory(response: str, actions=None) -> SeedTrajectory:
    """Validate a raw model response. Invalid output is rejected, never repaired."""
    from .env import ACTIONS

    alphabet = set(actions or ACTIONS)
    try:
        doc = json.loads(_strip_fences(response))
    except (json.JSONDecodeError, TypeError) as exc:
        raise SeedError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SeedError("malformed JSON: expected an object")
    steps = doc.get("steps")
    if not isinstance(steps, list) or not steps:
        raise SeedError("empty steps")
    clean, last = [], 0
    for raw in steps:
        if not isinstance(raw, dict) or not isinstance(raw.get("step"), int):
            raise SeedError("malformed step entry")
        if raw.get("action") not in alphabet:
            raise SeedError(f"unknown action {raw.get('action')!r}")
        idx = raw["step"]
        if (last == 0 and idx != 1) or idx <= last:
            raise SeedError(f"non-increasing step index {idx} after {last}")
        last = idx
        clean.append({"step": idx, "description": str(raw.get("description", "")), "action": raw["action"]})
    key_steps = doc.get("key_steps") or []
    return SeedTrajectory(summary=str(doc.get("summary", "")), key_steps=[str(k) for k in key_steps], steps=clean)


class MockBackend:
    """Replays canned raw responses, one per call, in file order."""

    def __init__(self, path, task_id):
        p = Path(path)
        if p.is_dir():
            p = p / f"{task_id}.jsonl"
        if not p.exists():
            raise SeedError(f"mock script not found: {p}")
        self.responses = [json.loads(line) for line in p.read_text(encoding="utf-8").splitlines() if line.strip()]
        self.pos = 0

    def __call__(self, prompt: SeedPrompt):
        if self.pos >= len(self.responses):
            return None
        self.pos += 1
        return self.responses[self.pos - 1]


class HttpBackend:
    def __init__(self, provider: ProviderConfig):
        self.endpoint = provider.endpoint or os.environ.get(ENDPOINT_ENV)
        if not self.endpoint:
            raise SeedError(f"http backend needs an endpoint (set {ENDPOINT_ENV})")
        self.provider = provider

    def __call__(self, body: dict):
        if self.provider.sampling:
            body = {**body, "sampling": self.provider.sampling}
        headers = {"Content-Type": "application/json"}
        if os.environ.get(API_KEY_ENV):
            headers["Authorization"] = f"Bearer {os.environ[API_KEY_ENV]}"
        data = json.dumps(body).encode()
        for attempt in range(self.provider.retries + 1):
            req = urllib.request.Request(self.endpoint, data=data, headers=headers, method="POST")
            try:
                with urllib.request.urlopen(req, timeout=self.provider.timeout) as resp:
                    return resp.read().decode("utf-8")
            except (urllib.error.URLError, TimeoutError, OSError) as exc:
                log.warning("http backend attempt %d failed: %s", attempt + 1, exc)
        return None


def make_backend(provider: ProviderConfig, task_id: str):
    if provider.backend == "mock":
        if not provider.mock_script_path:
            raise SeedError("mock backend needs mock_script_path")
        backend = MockBackend(provider.mock_script_path, task_id)
        return lambda prompt: backend(prompt)
    http = HttpBackend(provider)
    return lambda prompt: http(prompt.to_json())


def generate_seeds(config, task, provider: ProviderConfig, warnings=None):
    """Collect up to ``seeds_per_task`` valid seeds; bad responses are skipped."""
    call = make_backend(provider, task.task_id)
    max_calls = provider.max_calls or 2 * provider.seeds_per_task
    seeds, calls = [], 0
    warnings = [] if warnings is None else warnings
    while len(seeds) < provider.seeds_per_task and calls < max_calls:
        prompt = build_prompt(config, task, seeds)
        response = call(prompt)
        calls += 1
        if response is None:
            if provider.backend == "mock":
                break
            warnings.append({"call": calls, "error": "no response"})
            continue
        try:
            seeds.append(parse_trajectory(response, config.actions))
        except SeedError as exc:
            warnings.append({"call": calls, "error": str(exc)})
            log.warning("skipping seed response %d for %s: %s", calls, task.task_id, exc)
    if not seeds:
        raise SeedError("no valid seeds")
    return seeds


def write_seeds(path, seeds):
    with open(path, "w", encoding="utf-8") as fh:
        for s in seeds:
            fh.write(json.dumps(s.to_json(), sort_keys=True) + "\n")


def read_seeds(path):
    return [SeedTrajectory(**json.loads(line)) for line in Path(path).read_text().splitlines() if line.strip()]

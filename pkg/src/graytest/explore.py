"""Prior-guided exploration plus the RANDOM and diff-Q-learning baselines.

The explorer is tabular Q-learning whose Q-table is seeded from a
behavior-cloned prior and trained on the environment reward plus a
count-based novelty bonus ``1 / n(s')`` for the state the action lands in.
"""
from __future__ import annotations

import hashlib
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .env import QUEST_MARK, GameState, StepOutcome, hash_hex, hash_state, reset, step


@dataclass
class AgentConfig:
    episode_step_cap: int = 100
    task_step_budget: int = 5000
    eps_start: float = 0.3
    eps_end: float = 0.05
    q_alpha: float = 0.2
    q_gamma: float = 0.99
    prior_bonus: float = 10.0
    random_seed: int = 42
    # diff-Q-learning baseline schedule
    dq_eps_start: float = 0.5
    dq_eps_decay: float = 0.95
    dq_eps_floor: float = 0.01
    dq_decay_every: int = 100
    discrepancy_weight: float = 1.0

    def __post_init__(self):
        if self.episode_step_cap <= 0 or self.task_step_budget <= 0:
            raise ValueError("step caps must be positive")
        for name in ("eps_start", "eps_end", "dq_eps_start", "dq_eps_floor"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass
class Policy:
    actions: tuple
    table: dict = field(default_factory=dict)  # state hash -> {action: prob}

    def probs(self, h):
        dist = self.table.get(h)
        if dist is None:
            return {a: 1.0 / len(self.actions) for a in self.actions}
        return {a: dist.get(a, 0.0) for a in self.actions}

    def prob(self, h, action):
        return self.probs(h)[action]


@dataclass
class Trajectory:
    task_id: str
    version_id: str
    transitions: list  # (GameState, action, StepOutcome)
    total_reward: float = 0.0
    success: bool = False
    shaped_rewards: list = field(default_factory=list)

    @property
    def steps(self):
        return len(self.transitions)

    @property
    def actions(self):
        return [a for _, a, _ in self.transitions]

    def state_hashes(self):
        if not self.transitions:
            return []
        return [hash_state(self.transitions[0][0])] + [hash_state(o.next_state) for _, _, o in self.transitions]


def behavior_clone(seeds, config, task) -> Policy:
    """Empirical action frequencies of the seeds, replayed from reset."""
    if not seeds:
        raise ValueError("behavior cloning needs at least one seed")
    counts: dict = {}
    s0 = reset(config, task)
    h0 = hash_state(s0)
    advanced = False
    for seed in seeds:
        state = s0
        for action in seed.actions:
            h = hash_state(state)
            counts.setdefault(h, Counter())[action] += 1
            state = step(state, action, config, task).next_state
            if hash_state(state) != h0:
                advanced = True
            if QUEST_MARK in state.progress:
                break
    if not advanced:
        raise ValueError("no seed advances past the initial state")
    table = {}
    for h, c in counts.items():
        total = sum(c.values())
        table[h] = {a: c[a] / total for a in config.actions if c[a]}
    return Policy(tuple(config.actions), table)


def _greedy(q, rng):
    best = max(q)
    cands = [i for i, v in enumerate(q) if v == best]
    return cands[0] if len(cands) == 1 else rng.choice(cands)


def _epsilon(agent: AgentConfig, used: int) -> float:
    frac = min(1.0, used / agent.task_step_budget)
    return agent.eps_start + (agent.eps_end - agent.eps_start) * frac


def explore(config, task, prior: Policy, agent: AgentConfig, counts=None):
    """Run episodes until the task step budget is spent.

    ``counts`` (state hash -> visits) is shared by every episode of the run;
    pass a Counter to inspect it afterwards.
    """
    rng = random.Random(agent.random_seed)
    actions = list(config.actions)
    k = len(actions)
    cap = min(agent.episode_step_cap, task.max_episode_steps)
    counts = Counter() if counts is None else counts
    q_table = {}

    def q_of(h):
        q = q_table.get(h)
        if q is None:
            probs = prior.probs(h)
            q = q_table[h] = [probs[a] * agent.prior_bonus for a in actions]
        return q

    trajectories, used = [], 0
    while used < agent.task_step_budget:
        state = reset(config, task)
        h = hash_state(state)
        counts[h] += 1
        traj = Trajectory(task.task_id, config.version_id, [])
        while len(traj.transitions) < cap and used < agent.task_step_budget:
            q = q_of(h)
            if rng.random() < _epsilon(agent, used):
                ai = rng.randrange(k)
            else:
                ai = _greedy(q, rng)
            out = step(state, actions[ai], config, task)
            used += 1
            h2 = hash_state(out.next_state)
            counts[h2] += 1
            shaped = out.reward + 1.0 / counts[h2]
            done = QUEST_MARK in out.next_state.progress
            target = shaped if done else shaped + agent.q_gamma * max(q_of(h2))
            q[ai] += agent.q_alpha * (target - q[ai])
            traj.transitions.append((state, actions[ai], out))
            traj.shaped_rewards.append(shaped)
            traj.total_reward += out.reward
            state, h = out.next_state, h2
            if done:
                traj.success = True
                break
        trajectories.append(traj)
    return trajectories


def random_rollouts(config, task, agent: AgentConfig):
    """Uniform i.i.d. actions over the whole alphabet, invalid ones included."""
    rng = random.Random(agent.random_seed)
    actions = list(config.actions)
    cap = min(agent.episode_step_cap, task.max_episode_steps)
    trajectories, used = [], 0
    while used < agent.task_step_budget:
        state = reset(config, task)
        traj = Trajectory(task.task_id, config.version_id, [])
        while len(traj.transitions) < cap and used < agent.task_step_budget:
            action = actions[rng.randrange(len(actions))]
            out = step(state, action, config, task)
            used += 1
            traj.transitions.append((state, action, out))
            traj.shaped_rewards.append(out.reward)
            traj.total_reward += out.reward
            state = out.next_state
            if QUEST_MARK in state.progress:
                traj.success = True
                break
        trajectories.append(traj)
    return trajectories


def shared_view(state: GameState, shared: frozenset) -> int:
    """Hash of the part of a state both versions can observe."""
    inv = state.inventory if state.inventory in shared else ("*" if state.inventory else None)
    objs = [[o, c and list(c), s] for o, c, s in state.objects if o in shared]
    text = json.dumps([list(state.agent_cell), inv, objs], separators=(",", ":"))
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "big")


def diff_q_learning(config_old, config_new, task, agent: AgentConfig):
    """Q-learning rewarded for behavioral discrepancies between two versions.

    Every action is applied to both versions in lockstep. A step scores
    ``discrepancy_weight`` when the (shared-view hash, reward) pairs of the
    two successors differ. Tasks missing from the old version get no
    discrepancy signal. Trajectories of the new version are returned.
    """
    rng = random.Random(agent.random_seed)
    actions = list(config_new.actions)
    k = len(actions)
    cap = min(agent.episode_step_cap, task.max_episode_steps)
    old_task = next((t for t in config_old.tasks if t.task_id == task.task_id), None)
    shared = frozenset(o.object_id for o in config_old.objects) & frozenset(o.object_id for o in config_new.objects)
    q_table = {}
    trajectories, used = [], 0
    while used < agent.task_step_budget:
        state = reset(config_new, task)
        old_state = reset(config_old, old_task) if old_task else None
        h = hash_state(state)
        traj = Trajectory(task.task_id, config_new.version_id, [])
        while len(traj.transitions) < cap and used < agent.task_step_budget:
            eps = max(agent.dq_eps_floor, agent.dq_eps_start * agent.dq_eps_decay ** (used // agent.dq_decay_every))
            q = q_table.setdefault(h, [0.0] * k)
            ai = rng.randrange(k) if rng.random() < eps else _greedy(q, rng)
            action = actions[ai]
            out = step(state, action, config_new, task)
            used += 1
            bonus = 0.0
            if old_state is not None and action in config_old.actions:
                old_out = step(old_state, action, config_old, old_task)
                if (shared_view(old_out.next_state, shared), old_out.reward) != (
                    shared_view(out.next_state, shared),
                    out.reward,
                ):
                    bonus = agent.discrepancy_weight
                old_state = old_out.next_state
            h2 = hash_state(out.next_state)
            shaped = out.reward + bonus
            done = QUEST_MARK in out.next_state.progress
            target = shaped if done else shaped + agent.q_gamma * max(q_table.setdefault(h2, [0.0] * k))
            q[ai] += agent.q_alpha * (target - q[ai])
            traj.transitions.append((state, action, out))
            traj.shaped_rewards.append(shaped)
            traj.total_reward += out.reward
            state, h = out.next_state, h2
            if done:
                traj.success = True
                break
        trajectories.append(traj)
    return trajectories


# -- trajectory store ----------------------------------------------------------


def write_trajectories(path, trajectories):
    """JSONL, one trajectory per line; states go to ``<path>.states.json``."""
    path = Path(path)
    states = {}
    with open(path, "w", encoding="utf-8") as fh:
        for t in trajectories:
            steps = []
            start = None
            for s, a, out in t.transitions:
                if start is None:
                    start = hash_hex(hash_state(s))
                    states[start] = s
                nh = hash_hex(hash_state(out.next_state))
                states[nh] = out.next_state
                steps.append({"action": a, "next": nh, "reward": out.reward, "events": out.events, "bugs": out.triggered_bugs})
            rec = {
                "task_id": t.task_id,
                "version_id": t.version_id,
                "success": t.success,
                "total_reward": t.total_reward,
                "start": start,
                "start_tick": t.transitions[0][0].tick if t.transitions else 0,
                "shaped_rewards": t.shaped_rewards,
                "steps": steps,
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    sidecar = {h: {k: v for k, v in s.to_json().items() if k != "tick"} for h, s in sorted(states.items())}
    Path(str(path) + ".states.json").write_text(json.dumps(sidecar, sort_keys=True), encoding="utf-8")


def read_trajectories(path):
    path = Path(path)
    states = json.loads(Path(str(path) + ".states.json").read_text(encoding="utf-8"))

    def state_at(h, tick):
        return GameState.from_json({**states[h], "tick": tick})

    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        t = Trajectory(rec["task_id"], rec["version_id"], [], rec["total_reward"], rec["success"], rec["shaped_rewards"])
        if rec["steps"]:
            tick = rec["start_tick"]
            state = state_at(rec["start"], tick)
            for st in rec["steps"]:
                tick += 1
                nxt = state_at(st["next"], tick)
                t.transitions.append((state, st["action"], StepOutcome(nxt, st["reward"], st["events"], st["bugs"])))
                state = nxt
        out.append(t)
    return out

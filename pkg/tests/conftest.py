import copy
import json

import pytest

from graytest import DATA_DIR
from graytest.env import load_config, parse_config


@pytest.fixture(scope="session")
def v1():
    return load_config(DATA_DIR / "v1.json")


@pytest.fixture(scope="session")
def v2():
    return load_config(DATA_DIR / "v2.json")


@pytest.fixture(scope="session")
def v3():
    return load_config(DATA_DIR / "v3.json")


TINY = {
    "version_id": "tiny",
    "grid": ["CS.", "...", "..X"],
    "start": [1, 1],
    "stations": [{"cell": [0, 1], "type": "board"}],
    "objects": [{"id": "apple", "cell": [0, 0], "states": ["raw", "cut"]}],
    "rules": [{"station": "board", "kind": "apple", "from": "raw", "to": "cut", "ui": ["knife"]}],
    "scene_map": {"legend": {"a": "left", "b": "right"}, "rows": ["aab", "aab", "aab"]},
    "ui_components": ["knife", "slot"],
    "action_ui": {"pickup": ["slot"]},
    "tasks": [
        {
            "task_id": "serve_apple",
            "goal_predicate": {"object": "apple", "state": "cut", "on": "serving"},
            "stage_goals": [
                {"object": "apple", "state": "cut"},
                {"object": "apple", "state": "cut", "on": "serving"},
            ],
            "max_episode_steps": 30,
        }
    ],
    "bug_triggers": [
        {"bug_id": "T1", "predicate": {"all": [{"action": "interact"}, {"object": "apple", "state": "cut"}]}},
        {"bug_id": "T2", "predicate": {"all": [{"action": "move_up"}, {"at": [0, 2], "when": "before"}]}},
    ],
}

# pickup at (0,0), carry to the board, cut, carry to the window
TINY_SOLUTION = [
    "move_up", "move_left", "pickup", "move_right", "drop", "interact", "pickup",
    "move_down", "move_right", "move_down", "drop",
]


@pytest.fixture
def tiny_doc():
    return copy.deepcopy(TINY)


@pytest.fixture
def tiny():
    return parse_config(copy.deepcopy(TINY))


@pytest.fixture
def write_config(tmp_path):
    def _write(doc, name="cfg.json"):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return p

    return _write


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

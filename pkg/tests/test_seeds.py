import json
import socket
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from graytest import DATA_DIR
from graytest.env import reset, step
from graytest.seeds import (
    ProviderConfig,
    SeedError,
    build_prompt,
    generate_seeds,
    parse_trajectory,
    read_seeds,
    write_seeds,
)


def _response(actions, start=1):
    return json.dumps(
        {
            "summary": "plan",
            "key_steps": ["go"],
            "steps": [{"step": start + i, "description": a, "action": a} for i, a in enumerate(actions)],
        }
    )


def test_parse_five_steps():
    t = parse_trajectory(_response(["move_up", "move_left", "pickup", "move_right", "drop"]))
    assert len(t.steps) == 5
    assert t.actions[2] == "pickup"


def test_parse_strips_code_fences():
    t = parse_trajectory("```json\n" + _response(["interact"]) + "\n```")
    assert t.actions == ["interact"]


@pytest.mark.parametrize(
    "text, message",
    [
        ("{nope", "malformed JSON"),
        ("[1, 2]", "malformed JSON"),
        (json.dumps({"summary": "x", "steps": []}), "empty steps"),
        (_response(["move_up", "fly"]), "unknown action"),
        (json.dumps({"steps": [{"step": i, "action": "drop"} for i in (1, 3, 2)]}), "non-increasing step index"),
        (_response(["drop"], start=0), "non-increasing step index"),
    ],
)
def test_parse_rejects(text, message):
    with pytest.raises(SeedError, match=message):
        parse_trajectory(text)


def test_parse_respects_config_alphabet():
    with pytest.raises(SeedError, match="unknown action"):
        parse_trajectory(_response(["interact"]), actions=["move_up"])


def test_prompt_shape(v1):
    task = v1.task("make_salad")
    prompt = build_prompt(v1, task, []).to_json()
    assert set(prompt) == {"environment", "task", "past_solutions", "instructions", "output_format"}
    assert set(prompt["environment"]) == {
        "name", "game_description", "basic_rules", "current_obs_description", "available_actions",
    }
    assert set(prompt["task"]) == {"name", "task_objective", "related_rules"}
    assert prompt["past_solutions"] == []
    assert prompt["environment"]["available_actions"] == list(v1.actions)
    assert len(prompt["environment"]["available_actions"]) == 7
    json.dumps(prompt)


def test_prompt_accumulates_past(v1):
    task = v1.task("chop_tomato")
    past = [parse_trajectory(_response(["move_up"])), parse_trajectory(_response(["drop"]))]
    prompt = build_prompt(v1, task, past)
    assert len(prompt.past_solutions) == 2
    assert prompt.past_solutions[0] == {"summary": "plan", "key_subtasks": ["go"]}


def test_mock_yields_twenty_seeds(v2):
    task = v2.task("make_salad")
    seeds = generate_seeds(v2, task, ProviderConfig(mock_script_path=DATA_DIR / "mock" / "v2"))
    assert len(seeds) == 20


def test_mock_seeds_replay_to_goal(v2):
    # every canned plan is an executable solution on the version it was written for
    for task in v2.tasks:
        for seed in generate_seeds(v2, task, ProviderConfig(mock_script_path=DATA_DIR / "mock" / "v2")):
            s = reset(v2, task)
            for a in seed.actions:
                s = step(s, a, v2, task).next_state
            assert -1 in s.progress, task.task_id


def test_mock_is_deterministic(v1):
    task = v1.task("cook_onion")
    cfg = ProviderConfig(mock_script_path=DATA_DIR / "mock" / "v1")
    a = generate_seeds(v1, task, cfg)
    b = generate_seeds(v1, task, cfg)
    assert [s.to_json() for s in a] == [s.to_json() for s in b]


def test_mock_skips_bad_responses(v1, tmp_path):
    good = [_response(["move_up", "pickup"]) for _ in range(3)]
    lines = [good[0], "{broken", good[1], _response(["teleport"]), good[2]]
    script = tmp_path / "chop_tomato.jsonl"
    script.write_text("\n".join(json.dumps(x) for x in lines))
    warnings = []
    seeds = generate_seeds(v1, v1.task("chop_tomato"), ProviderConfig(mock_script_path=script), warnings)
    assert len(seeds) == 3
    assert len(warnings) == 2
    assert "malformed JSON" in warnings[0]["error"]


def test_all_bad_raises(v1, tmp_path):
    script = tmp_path / "s.jsonl"
    script.write_text(json.dumps("not json at all") + "\n")
    with pytest.raises(SeedError, match="no valid seeds"):
        generate_seeds(v1, v1.task("chop_tomato"), ProviderConfig(mock_script_path=script))


def test_seed_store_round_trip(tmp_path):
    seeds = [parse_trajectory(_response(["move_up", "drop"])), parse_trajectory(_response(["interact"]))]
    p = tmp_path / "seeds.jsonl"
    write_seeds(p, seeds)
    assert read_seeds(p) == seeds


class _Recorder(BaseHTTPRequestHandler):
    bodies = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).bodies.append((body, self.headers.get("Authorization")))
        payload = _response(["move_up", "interact"]).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def local_server():
    _Recorder.bodies = []
    server = HTTPServer(("127.0.0.1", 0), _Recorder)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/", _Recorder.bodies
    server.shutdown()


def test_http_backend_posts_prompt(v1, local_server, monkeypatch):
    url, bodies = local_server
    monkeypatch.setenv("GRAYTEST_LLM_API_KEY", "k")
    cfg = ProviderConfig(backend="http", endpoint=url, seeds_per_task=3, sampling={"temperature": 0.7})
    seeds = generate_seeds(v1, v1.task("chop_tomato"), cfg)
    assert len(seeds) == 3
    assert [len(b["past_solutions"]) for b, _ in bodies] == [0, 1, 2]
    assert bodies[0][0]["sampling"] == {"temperature": 0.7}
    assert bodies[0][1] == "Bearer k"


def test_http_backend_unreachable(v1):
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
    cfg = ProviderConfig(backend="http", endpoint=f"http://127.0.0.1:{port}/", seeds_per_task=2, retries=0, timeout=0.5)
    warnings = []
    with pytest.raises(SeedError, match="no valid seeds"):
        generate_seeds(v1, v1.task("chop_tomato"), cfg, warnings)
    assert warnings and all(w["error"] == "no response" for w in warnings)


def test_http_needs_endpoint(v1, monkeypatch):
    monkeypatch.delenv("GRAYTEST_LLM_ENDPOINT", raising=False)
    with pytest.raises(SeedError, match="endpoint"):
        generate_seeds(v1, v1.task("chop_tomato"), ProviderConfig(backend="http"))

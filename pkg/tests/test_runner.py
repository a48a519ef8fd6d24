import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graytest import DATA_DIR
from graytest.env import reset, step
from graytest.graph import TestCase
from graytest.runner import (
    COLUMNS,
    Repository,
    RunResult,
    aggregate_metrics,
    execute,
    load_repository,
    maintain,
    render_table,
    save_repository,
)
from graytest.seeds import ProviderConfig, generate_seeds

from conftest import TINY_SOLUTION


def as_case(actions, cid="c", task="serve_apple", version="tiny"):
    return TestCase(cid, task, version, tuple(actions), tuple(range(len(actions) + 1)))


def result(cid="c", bugs=(), hashes=(), status="valid", rep=0, steps=1, reward=0.0):
    return RunResult(cid, status, list(bugs), list(hashes), steps, reward, 1.0, status == "valid", rep)


def seed_cases(config, version):
    provider = ProviderConfig(mock_script_path=DATA_DIR / "mock" / version, seeds_per_task=3)
    out = []
    for task in config.tasks:
        for i, s in enumerate(generate_seeds(config, task, provider)):
            out.append(as_case(s.actions, f"{task.task_id}-{i}", task.task_id, config.version_id))
    return out


def test_execute_valid_with_bug(tiny):
    task = tiny.tasks[0]
    res = execute(as_case(TINY_SOLUTION), tiny, task, "simulated")
    assert res.status == "valid" and res.success
    assert res.triggered_bugs == ["T1"]
    assert res.steps == len(TINY_SOLUTION)
    assert res.reward == pytest.approx(999.9 + 10999.9 - 0.1 * 9)
    assert len(res.visited_state_hashes) == res.steps + 1
    assert res.duration == res.exec_time == pytest.approx(len(TINY_SOLUTION) * 1.0)


def test_execute_stops_at_goal_and_cap(tiny):
    task = tiny.tasks[0]
    longer = execute(as_case(TINY_SOLUTION + ["move_up"] * 5), tiny, task)
    assert longer.steps == len(TINY_SOLUTION)
    capped = execute(as_case(["move_left", "move_right"] * 40), tiny, task)
    assert capped.steps == task.max_episode_steps
    assert capped.status == "obsolete"


def test_execute_unknown_action_stops(tiny):
    res = execute(as_case(["move_up", "teleport", "move_left"]), tiny, tiny.tasks[0])
    assert res.steps == 1 and res.status == "obsolete"


def test_own_version_replay_is_valid(v2):
    for case in seed_cases(v2, "v2"):
        assert execute(case, v2, v2.task(case.task_id)).status == "valid", case.case_id


def test_rule_change_makes_case_obsolete(v1, v2):
    cases = [c for c in seed_cases(v1, "v1") if c.task_id == "cook_onion"]
    assert cases
    for c in cases:
        assert execute(c, v1, v1.task("cook_onion")).status == "valid"
        assert execute(c, v2, v2.task("cook_onion")).status == "obsolete"


def test_bugs_match_step_replay(v2):
    hit = set()
    for case in seed_cases(v2, "v2"):
        task = v2.task(case.task_id)
        res = execute(case, v2, task)
        s, expect = reset(v2, task), []
        for a in case.actions[: res.steps]:
            out = step(s, a, v2, task)
            expect.extend(out.triggered_bugs)
            s = out.next_state
        assert res.triggered_bugs == expect
        hit.update(expect)
    assert hit and hit <= {b.bug_id for b in v2.bug_triggers}


def test_maintain_partitions():
    cases = [as_case(["move_up"], f"c{i}") for i in range(10)]
    repo = Repository.from_cases(cases)
    results = [result(f"c{i}", status="obsolete" if i in (2, 5, 7) else "valid", bugs=["T1"] * (i == 0)) for i in range(10)]
    maintain(repo, results)
    assert repo.flagged() == ["c2", "c5", "c7"]
    assert len(repo.records) == 10
    refreshed = [r for r in repo.records.values() if r.status == "valid"]
    assert len(refreshed) == 7 and all(r.exec_time == 0.0 and r.runs == 1 for r in refreshed)
    assert repo.records["c0"].bug_history == [[("T1", 1)]]
    assert {c.case_id for c in repo.active_cases()} == {f"c{i}" for i in (0, 1, 3, 4, 6, 8, 9)}


def test_maintain_all_valid_and_unknown():
    repo = Repository.from_cases([as_case(["move_up"], "a")])
    maintain(repo, [result("a")])
    assert repo.flagged() == []
    with pytest.raises(KeyError):
        maintain(repo, [result("zz")])


def test_regenerated_case_unflags():
    repo = Repository.from_cases([as_case(["move_up"], "a")])
    maintain(repo, [result("a", status="obsolete")])
    maintain(repo, [result("a")])
    assert repo.flagged() == []


def test_repository_round_trip(tmp_path):
    repo = Repository.from_cases([as_case(["move_up", "pickup"], f"c{i}") for i in range(3)])
    maintain(repo, [result("c0", bugs=["T1"]), result("c1", status="obsolete")])
    p = tmp_path / "repo.json"
    save_repository(repo, p)
    back = load_repository(p)
    assert back.to_json() == json.loads(json.dumps(repo.to_json()))
    assert back.flagged() == ["c1"]


def test_aggregate_examples():
    rep = aggregate_metrics([result("a", bugs=["b1"]), result("b", bugs=["b1"])])
    assert rep.bug_count == 2 and rep.unique_bugs == 1
    rep = aggregate_metrics([result("a", hashes=[1, 2, 3]), result("b", hashes=[4, 5, 6, 7])])
    assert rep.unique_states == 7


def test_aggregate_mean_and_std():
    rs = [result("a", bugs=["x"], rep=0, steps=4), result("b", bugs=["x", "y", "z"], rep=1, steps=6)]
    rep = aggregate_metrics(rs, 2)
    assert rep.unique_bugs == 2.0 and rep.total_steps == 5.0
    assert rep.stddev["unique_bugs"] == pytest.approx(2 ** 0.5)
    assert rep.bug_ids == ["x", "y", "z"]
    with pytest.raises(ValueError):
        aggregate_metrics([])


_results = st.lists(
    st.builds(
        result,
        cid=st.sampled_from("abc"),
        bugs=st.lists(st.sampled_from(["B1", "B2", "B3"]), max_size=3),
        hashes=st.lists(st.integers(0, 20), max_size=5),
        status=st.sampled_from(["valid", "obsolete"]),
        rep=st.integers(0, 2),
        steps=st.integers(0, 9),
        reward=st.floats(-5, 5),
    ),
    min_size=1,
    max_size=20,
)


@settings(max_examples=60, deadline=None)
@given(_results)
def test_aggregate_matches_recount(results):
    rep = aggregate_metrics(results, 3)
    per = []
    for i in range(3):
        mine = [r for r in results if r.repetition == i]
        bugs = [b for r in mine for b in r.triggered_bugs]
        per.append((len(bugs), len(set(bugs)), len({h for r in mine for h in r.visited_state_hashes}), sum(r.steps for r in mine)))
    assert rep.bug_count == pytest.approx(sum(p[0] for p in per) / 3)
    assert rep.unique_bugs == pytest.approx(sum(p[1] for p in per) / 3)
    assert rep.unique_states == pytest.approx(sum(p[2] for p in per) / 3)
    assert rep.total_steps == pytest.approx(sum(p[3] for p in per) / 3)
    assert all(m["unique_bugs"] <= m["bug_count"] for m in rep.per_repetition)
    assert json.dumps(rep.to_json(), sort_keys=True) == json.dumps(aggregate_metrics(list(results), 3).to_json(), sort_keys=True)


def test_result_round_trip():
    r = result("a", bugs=["B1"], hashes=[2 ** 63 + 5, 7])
    assert RunResult.from_json(json.loads(json.dumps(r.to_json()))) == r


def test_table_columns():
    text = render_table([("RANDOM", aggregate_metrics([result("a")]))], "v1 -> v2")
    lines = text.splitlines()
    assert lines[0] == "v1 -> v2"
    for col in COLUMNS:
        assert col in lines[1]
    assert lines[3].startswith("RANDOM")
    assert len(COLUMNS) == 8

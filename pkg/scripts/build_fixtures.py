"""Write the V1/V2/V3 kitchen configs and update logs into src/graytest/data/.

Run once after editing; the generated JSON is committed.
"""
import copy
import json
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "graytest" / "data"

GRID = [
    "CSCCSCX",
    ".......",
    "C.###.C",
    ".......",
    "CSCSCCX",
]
SCENES = {
    "legend": {"p": "prep area", "k": "cooking line", "s": "service window", "h": "hallway", "b": "bakery", "q": "pantry"},
    "rows": [
        "pppkkks",
        "pppkkks",
        "hhhhhhs",
        "bbbhhhs",
        "bbbbqqs",
    ],
}


def on(obj, state, cell=None, kind=None):
    p = {"object": obj, "state": state}
    if cell:
        p["cell"] = cell
    if kind:
        p["on"] = kind
    return p


def transition(action, *clauses):
    return {"all": [{"action": action}, *clauses]}


def before(p):
    return {**p, "when": "before"}


TASKS = {
    "chop_tomato": {
        "name": "Chop Tomato",
        "objective": "Chop the tomato on a cutting board and deliver it to a serving window.",
        "related_rules": "Tomatoes are chopped by interacting with them on a cutting board.",
        "stage_goals": [on("tomato", "chopped"), on("tomato", "chopped", kind="serving")],
    },
    "make_salad": {
        "name": "Make Salad",
        "objective": "Chop both the tomato and the lettuce and deliver each to a serving window.",
        "related_rules": "Every serving window holds one item; use both windows.",
        "stage_goals": [
            on("tomato", "chopped"),
            on("lettuce", "chopped"),
            {"all": [on("tomato", "chopped", kind="serving"), on("lettuce", "chopped", kind="serving")]},
        ],
    },
    "cook_onion": {
        "name": "Cook Onion",
        "objective": "Cook the onion on the stove and deliver it to a serving window.",
        "related_rules": "The stove cooks onions placed on it when you interact.",
        "stage_goals": [on("onion", "cooked"), on("onion", "cooked", kind="serving")],
    },
    "cheese_plate": {
        "name": "Cheese Plate",
        "objective": "Slice the cheese on a cutting board and deliver it to a serving window.",
        "related_rules": "Cheese must be sliced before serving.",
        "stage_goals": [on("cheese", "sliced"), on("cheese", "sliced", kind="serving")],
    },
    "bake_bread": {
        "name": "Bake Bread",
        "objective": "Knead the dough, bake it in the oven and deliver the bread to a serving window.",
        "related_rules": "Dough is kneaded on a cutting board, then baked in the oven.",
        "stage_goals": [on("dough", "kneaded"), on("dough", "baked"), on("dough", "baked", kind="serving")],
    },
    "cheese_toast": {
        "name": "Cheese Toast",
        "objective": "Serve baked bread and sliced cheese, one per serving window.",
        "related_rules": "Bread and cheese must each be processed before serving.",
        "stage_goals": [
            on("cheese", "sliced"),
            on("dough", "baked"),
            {"all": [on("cheese", "sliced", kind="serving"), on("dough", "baked", kind="serving")]},
        ],
    },
}


def task(tid):
    t = copy.deepcopy(TASKS[tid])
    return {
        "task_id": tid,
        "name": t["name"],
        "objective": t["objective"],
        "related_rules": t["related_rules"],
        "goal_predicate": t["stage_goals"][-1],
        "stage_goals": t["stage_goals"],
        "max_episode_steps": 100,
        "max_task_steps": 5000,
    }


BUGS = {
    "B01": ("ui", "agent sprite clips into the top-left wall", transition("move_up", before({"at": [0, 0]}))),
    "B02": (
        "ui",
        "held item flickers when dropped on bare floor",
        transition("drop", before({"holding": "*"}), before({"cell_kind": "floor"})),
    ),
    "B03": ("logic", "stove accepts a tomato", transition("drop", on("tomato", "raw", cell=[0, 4]))),
    "B04": (
        "interaction",
        "chopping the tomato after the lettuce resets the salad order",
        transition("interact", before(on("tomato", "raw")), on("tomato", "chopped"), on("lettuce", "chopped")),
    ),
    "B05": ("ui", "order panel shows salad twice at the lower window", transition("drop", on("lettuce", "chopped", cell=[4, 6]))),
    "B06": ("logic", "chopped onion duplicates when placed on the stove", transition("drop", on("onion", "chopped", cell=[0, 4]))),
    "B07": ("logic", "cooked onion served at the lower window never scores", transition("drop", on("onion", "cooked", cell=[4, 6]))),
    "B08": (
        "interaction",
        "slicing cheese on the bakery cutting board eats the knife",
        transition("interact", before({"at": [4, 1]}), before(on("cheese", "raw")), on("cheese", "sliced")),
    ),
    "B09": ("ui", "inventory icon shows raw cheese after slicing", transition("pickup", {"holding": "cheese"}, on("cheese", "sliced"))),
    "B10": (
        "interaction",
        "kneading dough on the prep cutting board leaves flour on tomatoes",
        transition("interact", before({"at": [0, 1]}), before(on("dough", "raw")), on("dough", "kneaded")),
    ),
    "B11": ("ui", "oven timer freezes at zero", transition("interact", before(on("dough", "kneaded")), on("dough", "baked"))),
    "B12": ("logic", "bread served at the upper window counts as burnt", transition("drop", on("dough", "baked", cell=[0, 6]))),
    "B13": ("interaction", "cheese placed in the oven blocks it", transition("drop", on("cheese", "raw", cell=[4, 3]))),
    "B14": (
        "logic",
        "toast combo completes without the bread",
        transition("drop", on("cheese", "sliced", kind="serving"), on("dough", "baked", kind="serving")),
    ),
    "B15": ("ui", "stove flame icon shows on an empty stove", transition("interact", before({"at": [0, 4]}), {"noop": True})),
}


def bug(bid):
    cat, desc, pred = BUGS[bid]
    return {"bug_id": bid, "category": cat, "description": desc, "predicate": pred}


BASE = {
    "name": "Grid Kitchen (desk kitchen)",
    "description": "A single-chef cooking game on a small grid kitchen. Ingredients are processed at stations and delivered to serving windows.",
    "basic_rules": (
        "The chef walks on every cell except walls and acts on the cell it stands on. "
        "pickup takes the item lying there, drop places the held item on an empty counter, station or serving window, "
        "interact runs the station under the chef on the item lying on it. Each counter holds one item. "
        "Items on a serving window are delivered and cannot be picked up again."
    ),
    "grid": GRID,
    "start": [3, 3],
    "stations": [
        {"cell": [0, 1], "type": "cutting_board"},
        {"cell": [0, 4], "type": "stove"},
        {"cell": [4, 1], "type": "cutting_board"},
        {"cell": [4, 3], "type": "oven"},
    ],
    "scene_map": SCENES,
    "actions": ["move_up", "move_down", "move_left", "move_right", "pickup", "drop", "interact"],
    "action_time": {"move_up": 1.0, "move_down": 1.0, "move_left": 1.0, "move_right": 1.0, "pickup": 1.5, "drop": 1.5, "interact": 3.0},
    "action_ui": {"pickup": ["inventory_slot"], "drop": ["inventory_slot"]},
    "serving_ui": ["order_panel"],
}

V1_OBJECTS = [
    {"id": "tomato", "kind": "tomato", "cell": [0, 0], "states": ["raw", "chopped"]},
    {"id": "lettuce", "kind": "lettuce", "cell": [0, 2], "states": ["raw", "chopped"]},
    {"id": "onion", "kind": "onion", "cell": [2, 0], "states": ["raw", "chopped", "cooked"]},
]
V2_OBJECTS = V1_OBJECTS + [
    {"id": "cheese", "kind": "cheese", "cell": [4, 0], "states": ["raw", "sliced"]},
    {"id": "dough", "kind": "dough", "cell": [4, 2], "states": ["raw", "kneaded", "baked"]},
]

V1_RULES = [
    {"station": "cutting_board", "kind": "tomato", "from": "raw", "to": "chopped", "ui": ["chop_progress_bar"]},
    {"station": "cutting_board", "kind": "lettuce", "from": "raw", "to": "chopped", "ui": ["chop_progress_bar"]},
    {"station": "cutting_board", "kind": "onion", "from": "raw", "to": "chopped", "ui": ["chop_progress_bar"]},
    {"station": "stove", "kind": "onion", "from": "raw", "to": "cooked", "ui": ["stove_flame_icon"]},
    {"station": "stove", "kind": "onion", "from": "chopped", "to": "cooked", "ui": ["stove_flame_icon"]},
]
V2_RULES = [r for r in V1_RULES if not (r["kind"] == "onion" and r["from"] == "raw" and r["station"] == "stove")] + [
    {"station": "cutting_board", "kind": "cheese", "from": "raw", "to": "sliced", "ui": ["slice_counter"]},
    {"station": "cutting_board", "kind": "dough", "from": "raw", "to": "kneaded", "ui": ["chop_progress_bar"]},
    {"station": "oven", "kind": "dough", "from": "kneaded", "to": "baked", "ui": ["oven_timer"]},
]

UI_V1 = ["inventory_slot", "order_panel", "chop_progress_bar", "stove_flame_icon", "oven_timer"]
UI_V2 = UI_V1 + ["slice_counter"]


def config(version, objects, rules, ui, tasks, bugs):
    doc = {"version_id": version, **copy.deepcopy(BASE)}
    doc.update(
        objects=copy.deepcopy(objects),
        rules=copy.deepcopy(rules),
        ui_components=ui,
        tasks=[task(t) for t in tasks],
        bug_triggers=[bug(b) for b in bugs],
    )
    return doc


V1 = config("v1", V1_OBJECTS, V1_RULES, UI_V1, ["chop_tomato", "make_salad", "cook_onion"], ["B01", "B02", "B03", "B04", "B05", "B07"])
V2 = config(
    "v2",
    V2_OBJECTS,
    V2_RULES,
    UI_V2,
    ["chop_tomato", "make_salad", "cook_onion", "cheese_plate", "bake_bread"],
    ["B01", "B02", "B03", "B04", "B05", "B06", "B07", "B08", "B09", "B10", "B11", "B12", "B13"],
)
V3 = config(
    "v3",
    V2_OBJECTS,
    V2_RULES,
    UI_V2,
    ["chop_tomato", "make_salad", "cook_onion", "cheese_plate", "bake_bread", "cheese_toast"],
    ["B02", "B03", "B04", "B05", "B06", "B07", "B09", "B10", "B11", "B12", "B13", "B14", "B15"],
)

LOG_V2 = """Grid Kitchen (Version 2.0)
Release Date: September 1, 2025

New Features:
- Cheese Slicing Mechanic: Cheese must now be sliced on a cutting board, introducing a new sliced cheese state.
- Bread Baking System: Dough is kneaded on a cutting board and baked in the oven.
- Slice Counter UI: A slice counter appears while cheese is being sliced.

Feature Changes:
- Onion Cooking Rule: Onions must be chopped before the stove will cook them.
- Oven Timer: The oven timer is now shown while dough bakes.

New Tasks:
- Cheese Plate: Slice the cheese and serve it.
- Bake Bread: Knead the dough, bake it and serve the bread.

Bug Fixes:
- Fixed an issue where chopped lettuce occasionally disappeared from the serving window.
"""

LOG_V3 = """Grid Kitchen (Version 3.0)
Release Date: November 3, 2025

New Features:
- Cheese Toast Combo: Baked bread and sliced cheese can now be served together as a combo order.

Feature Changes:
- Serving Window Logic: Combo orders are validated across both serving windows.
- Stove Flame Icon: The stove flame icon reacts to every interaction.

New Tasks:
- Cheese Toast: Bake bread, slice cheese and serve both.

Bug Fixes:
- Fixed wall clipping in the prep area corner.
- Fixed the bakery cutting board losing its knife when slicing cheese.
"""


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    for name, doc in (("v1", V1), ("v2", V2), ("v3", V3)):
        (DATA / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    (DATA / "update_v1_v2.txt").write_text(LOG_V2, encoding="utf-8")
    (DATA / "update_v2_v3.txt").write_text(LOG_V3, encoding="utf-8")


if __name__ == "__main__":
    main()

"""Declarative predicates over game states and transitions.

A predicate is a JSON object. Combinators: ``{"all": [...]}``,
``{"any": [...]}``, ``{"not": {...}}``. Leaf clauses (every key optional
unless noted; several keys in one leaf are AND-ed):

``action``      action name or list of names (transition only)
``at``          agent cell ``[r, c]``
``scene``       scene label of the agent cell
``cell_kind``   kind of the agent cell (floor, counter, station, serving)
``station``     station type under the agent
``holding``     held object id, ``null`` for empty hands, ``"*"`` for any
``object``      object id, refined by ``state``, ``cell``, ``on`` or ``held``
``stage_done``  index of an already rewarded stage goal
``noop``        ``true`` if the transition left agent, inventory and objects unchanged

State clauses read the post-transition state unless ``"when": "before"``.
"""

_LEAF_KEYS = {"action", "at", "scene", "cell_kind", "station", "holding", "object", "state", "cell", "on", "held", "stage_done", "noop", "when"}


class PredicateError(ValueError):
    pass


def evaluate(pred, config, state, before=None, action=None) -> bool:
    if "all" in pred:
        return all(evaluate(p, config, state, before, action) for p in pred["all"])
    if "any" in pred:
        return any(evaluate(p, config, state, before, action) for p in pred["any"])
    if "not" in pred:
        return not evaluate(pred["not"], config, state, before, action)

    if "action" in pred:
        if action is None:
            return False
        want = pred["action"]
        if (action not in want) if isinstance(want, list) else (action != want):
            return False

    s = before if pred.get("when") == "before" and before is not None else state
    if pred.get("when") == "before" and before is None:
        return False

    if "at" in pred and tuple(pred["at"]) != s.agent_cell:
        return False
    if "scene" in pred and config.scene(s.agent_cell) != pred["scene"]:
        return False
    if "cell_kind" in pred and config.cell_kind(s.agent_cell) != pred["cell_kind"]:
        return False
    if "station" in pred and config.stations.get(s.agent_cell) != pred["station"]:
        return False
    if "holding" in pred:
        want = pred["holding"]
        if want == "*":
            if s.inventory is None:
                return False
        elif s.inventory != want:
            return False
    if "object" in pred:
        found = [(cell, st) for oid, cell, st in s.objects if oid == pred["object"]]
        if not found:
            return False
        cell, st = found[0]
        if "state" in pred and st != pred["state"]:
            return False
        if "held" in pred and (cell is None) != bool(pred["held"]):
            return False
        if "cell" in pred and cell != tuple(pred["cell"]):
            return False
        if "on" in pred and (cell is None or config.cell_kind(cell) != pred["on"]):
            return False
    if "stage_done" in pred and pred["stage_done"] not in s.progress:
        return False
    if pred.get("noop"):
        if before is None:
            return False
        if (before.agent_cell, before.inventory, before.objects) != (state.agent_cell, state.inventory, state.objects):
            return False
    return True


def referenced_objects(pred):
    """(object_id, state-or-None) pairs mentioned by a predicate; validates shape."""
    if not isinstance(pred, dict) or not pred:
        raise PredicateError("predicate must be a non-empty object")
    out = []
    if "all" in pred or "any" in pred:
        for p in pred.get("all", pred.get("any")):
            out.extend(referenced_objects(p))
        return out
    if "not" in pred:
        return referenced_objects(pred["not"])
    unknown = set(pred) - _LEAF_KEYS
    if unknown:
        raise PredicateError(f"unknown predicate keys {sorted(unknown)}")
    if "object" in pred:
        out.append((pred["object"], pred.get("state")))
    elif any(k in pred for k in ("state", "cell", "on", "held")):
        raise PredicateError("state/cell/on/held need an 'object'")
    if pred.get("holding") not in (None, "*"):
        out.append((pred["holding"], None))
    return out

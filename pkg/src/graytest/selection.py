"""Update-aware prioritization: tags from update logs, relevance, complexity, ranking."""
from __future__ import annotations

import functools
import hashlib
import json
import logging
import math
import re
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

SCS_LENGTH_FLOOR = 0.05
DEGENERATE_NORM = 0.5

STOP_WORDS = frozenset(
    """
    a an the and or but if then than so as of to in on at by for with from into onto over under
    is are was were be been being it its this that these those there here where when while which who
    whom whose what why how all any both each few more most other some such no nor not only own same
    too very can will just should now also must may might could would new newly added add adds adding
    fixed fix fixes fixing adjusted adjust adjusts changed change changes updated update improved improve
    removed remove introduced introducing introduces unified reduce reduced reduces occasionally sometimes
    issue issues bug bugs where before after during between retained retains use used using now before
    two one three multiple e g eg etc including include includes involves involving under strict
    """.split()
)
_WORD = re.compile(r"[a-z][a-z0-9_'-]*")
_VERSIONISH = re.compile(r"\d")
_BULLET = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+")


class SelectionError(ValueError):
    pass


@dataclass
class UpdateLog:
    raw_text: str
    sections: dict = field(default_factory=dict)  # heading -> list of bullet strings

    def __post_init__(self):
        if not self.raw_text or not self.raw_text.strip():
            raise SelectionError("update log text is empty")


def parse_update_log(text: str) -> UpdateLog:
    """Split an update log into ``heading -> bullets``; loose lines become bullets."""
    if not text or not text.strip():
        raise SelectionError("update log text is empty")
    sections, current = {}, ""
    for line in text.splitlines():
        if not line.strip() or line.strip() in ("...", "…"):
            continue
        m = _BULLET.match(line)
        if m:
            sections.setdefault(current, []).append(line[m.end():].strip())
        elif line.strip().endswith(":"):
            current = line.strip().rstrip(":").strip()
        elif ":" in line and line.split(":", 1)[0].strip().lower() in ("release date", "date", "version"):
            continue
        elif _VERSIONISH.search(line) and "version" in line.lower():
            continue
        else:
            sections.setdefault(current, []).append(line.strip())
    return UpdateLog(text, sections)


@dataclass
class TagSet:
    tags: list
    summary: str = ""


def _phrases(text):
    """Maximal runs of non-stop-words, lowercased; tokens with digits dropped."""
    words = _WORD.findall(text.lower().replace("_", " "))
    out, run = [], []
    for w in words + [None]:
        if w is None or w in STOP_WORDS or _VERSIONISH.search(w) or len(w) < 2:
            if run:
                out.append(" ".join(run))
            run = []
        else:
            run.append(w.strip("'-"))
    return [p for p in out if p]


def fallback_tags(log_: UpdateLog) -> TagSet:
    tags = []
    for heading, bullets in log_.sections.items():
        for b in bullets:
            head, sep, _ = b.partition(":")
            source = head if sep and len(head.split()) <= 6 else b
            for p in _phrases(source):
                if p not in tags:
                    tags.append(p)
    if not tags:
        raise SelectionError("no tags")
    n_bullets = sum(len(b) for b in log_.sections.values())
    summary = f"{n_bullets} change entries touching " + ", ".join(tags[:3])
    return TagSet(tags, summary)


TAG_INSTRUCTIONS = (
    "List the game components this update log affects: items, actions, UI, "
    "functions, environment and mechanics. Use short lowercase phrases; leave "
    "out version numbers and filler words."
)
TAG_OUTPUT_FORMAT = "A JSON object with tags (list of strings) and summary (one sentence)."


def tag_prompt(log_: UpdateLog):
    return {"update log": log_.raw_text, "instructions": TAG_INSTRUCTIONS, "output_format": TAG_OUTPUT_FORMAT}


def parse_tag_response(text) -> TagSet:
    from .seeds import _strip_fences

    try:
        doc = json.loads(_strip_fences(text))
    except (json.JSONDecodeError, TypeError) as exc:
        raise SelectionError(f"malformed tag response: {exc}") from None
    tags = []
    for t in doc.get("tags", []) if isinstance(doc, dict) else []:
        t = str(t).strip().lower()
        if t and not _VERSIONISH.search(t) and t not in tags:
            tags.append(t)
    if not tags:
        raise SelectionError("no tags")
    return TagSet(tags, str(doc.get("summary", "")))


def extract_tags(log_: UpdateLog, provider=None) -> TagSet:
    """Tags via the configured backend; ``provider=None`` uses the offline extractor."""
    if provider is None:
        return fallback_tags(log_)
    from .seeds import HttpBackend, MockBackend

    if provider.backend == "mock":
        response = MockBackend(provider.mock_script_path, "tags")(None)
    else:
        response = HttpBackend(provider)(tag_prompt(log_))
    if response is None:
        raise SelectionError("tag backend returned nothing")
    return parse_tag_response(response)


# -- embedding -----------------------------------------------------------------


@dataclass
class SelectionConfig:
    lambda_: float = 0.5
    rts_proportion: float = 0.5
    embedder: object = "hashed-trigram"  # or any callable text -> vector
    dims: int = 256
    scs_scope: str = "task"  # normalize complexity within each task, or over the whole "suite"

    def __post_init__(self):
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if not 0.0 < self.rts_proportion <= 1.0:
            raise ValueError("rts_proportion must lie in (0, 1]")
        if self.scs_scope not in ("task", "suite"):
            raise ValueError(f"unknown scs_scope {self.scs_scope!r}")


def _normalize_text(text):
    return " ".join(re.sub(r"[^a-z0-9]+", " ", text.lower()).split())


@functools.lru_cache(maxsize=65536)
def _trigram_embed(text, dims):
    vec = _trigram_counts(text, dims)
    vec.setflags(write=False)
    return vec


def trigram_embed(text, dims=256):
    """Character-trigram counts hashed into ``dims`` buckets, L2-normalized."""
    return _trigram_embed(text, dims).copy()


def _trigram_counts(text, dims):
    vec = np.zeros(dims)
    t = _normalize_text(text)
    if not t:
        return vec
    padded = f" {t} "
    for i in range(len(padded) - 2):
        digest = hashlib.blake2b(padded[i : i + 3].encode(), digest_size=4).digest()
        vec[int.from_bytes(digest, "little") % dims] += 1.0
    return vec / np.linalg.norm(vec)


def embed(text, cfg: SelectionConfig):
    if cfg.embedder == "hashed-trigram":
        return _trigram_embed(text, cfg.dims)
    v = np.asarray(cfg.embedder(text), dtype=float)
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


def cosine(u, v) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def case_text(case) -> str:
    """Canonical one-line description of a case's metadata."""
    actions = sorted(set(case.actions))
    return (
        f"actions: {' '.join(actions)}; objects: {' '.join(sorted(case.objects))}; "
        f"products: {', '.join(sorted(case.products))}; "
        f"scenes: {' '.join(sorted(case.scenes))}; ui: {' '.join(sorted(case.ui))}; "
        f"states: {len(set(case.states))}"
    )


def relevance(case, tags: TagSet, cfg: SelectionConfig, _tag_vecs=None) -> float:
    """Largest cosine between the case text and any tag."""
    if not tags.tags:
        raise SelectionError("no tags")
    v = embed(case_text(case), cfg)
    vecs = _tag_vecs if _tag_vecs is not None else [embed(t, cfg) for t in tags.tags]
    return max(cosine(v, k) for k in vecs)


# -- complexity ---------------------------------------------------------------


def _minmax(values):
    values = np.asarray(values, dtype=float)
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.full(len(values), DEGENERATE_NORM)
    return (values - lo) / (hi - lo)


def scs_all(suite):
    """Semantic Complexity Score of every case, normalized over ``suite``."""
    if not suite:
        raise SelectionError("empty suite")
    cols = {
        "A": [len(set(c.actions)) for c in suite],
        "O": [len(c.objects) for c in suite],
        "S": [len(c.scenes) for c in suite],
        "U": [len(c.ui) for c in suite],
        "G": [len(set(c.states)) for c in suite],
    }
    numer = sum(_minmax(v) for v in cols.values())
    length = np.maximum(_minmax([len(c.actions) for c in suite]), SCS_LENGTH_FLOOR)
    return numer / length


def scoped_scs(suite, scope="task"):
    """SCS with min-max statistics taken per task (``"task"``) or over the suite."""
    if scope == "suite":
        return scs_all(suite)
    out = np.zeros(len(suite))
    by_task = {}
    for i, c in enumerate(suite):
        by_task.setdefault(c.task_id, []).append(i)
    for idx in by_task.values():
        out[idx] = scs_all([suite[i] for i in idx])
    return out


def scs(case, suite) -> float:
    for i, c in enumerate(suite):
        if c is case or c.case_id == case.case_id:
            return float(scs_all(suite)[i])
    raise SelectionError(f"case {case.case_id} not in suite")


# -- ranking ------------------------------------------------------------------


@dataclass
class PrioritizedSuite:
    entries: list  # [{"case_id", "sim", "scs", "score", "rank"}]
    cut: list
    proportion: float = 1.0

    def ranked_ids(self):
        return [e["case_id"] for e in self.entries]

    def to_json(self):
        selected = set(self.cut)
        return {
            "proportion": self.proportion,
            "entries": [{**e, "selected": e["case_id"] in selected} for e in self.entries],
        }


def cut_size(n, p):
    return min(n, math.ceil(round(p * n, 9)))


def rank(ids, sims, scs_values, lam, groups=None):
    """Blend and sort; returns entries in rank order.

    The complexity term is SCS over the largest SCS of the case's group
    (``groups`` labels each case; ``None`` means one group).
    """
    scs_values = np.asarray(scs_values, dtype=float)
    groups = [None] * len(ids) if groups is None else list(groups)
    scs_term = np.zeros(len(scs_values))
    for g in dict.fromkeys(groups):
        idx = [i for i, x in enumerate(groups) if x == g]
        top = scs_values[idx].max()
        if top <= 0:
            log.warning("max SCS is 0; complexity term set to 0")
        else:
            scs_term[idx] = scs_values[idx] / top
    scores = [lam * s + (1 - lam) * t for s, t in zip(sims, scs_term)]
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))
    return [
        {"case_id": ids[i], "sim": float(sims[i]), "scs": float(scs_values[i]), "score": float(scores[i]), "rank": r + 1}
        for r, i in enumerate(order)
    ]


def prioritize(suite, tags: TagSet, cfg: SelectionConfig) -> PrioritizedSuite:
    if not suite:
        raise SelectionError("empty suite")
    tag_vecs = [embed(t, cfg) for t in tags.tags]
    sims = [relevance(c, tags, cfg, tag_vecs) for c in suite]
    groups = [c.task_id for c in suite] if cfg.scs_scope == "task" else None
    entries = rank([c.case_id for c in suite], sims, scoped_scs(suite, cfg.scs_scope), cfg.lambda_, groups)
    k = cut_size(len(entries), cfg.rts_proportion)
    return PrioritizedSuite(entries, [e["case_id"] for e in entries[:k]], cfg.rts_proportion)


def recut(ps: PrioritizedSuite, p: float) -> PrioritizedSuite:
    """Same ranking, different proportion."""
    k = cut_size(len(ps.entries), p)
    return PrioritizedSuite(ps.entries, [e["case_id"] for e in ps.entries[:k]], p)

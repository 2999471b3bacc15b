"""Data model for procedures, entities, and per-entity annotation grids.

On-disk corpus files are UTF-8 JSON lines, one procedure per line:

    {"id": "p1",
     "steps": ["...", "..."],
     "entities": [{"id": "water", "raw_name": "water; liquid"}],
     "gold": {"water": {"states": ["move", ...], "locations": ["?", ...]}}}

``steps`` has length T. Each gold ``states`` list has length T and each
``locations`` list length T+1: slot 0 is the location before step 1 and
slot t the location after step t. Location tokens are "-" (nonexistent),
"?" (unknown), or a verbatim text span. Prediction files reuse the exact
same record layout, with the predicted tracks in the ``gold`` field.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from functools import cached_property

from .errors import ValidationError

SPAN = "span"
UNKNOWN = "unknown"
NONEXISTENT = "nonexistent"

_STRIP_CHARS = string.punctuation + string.whitespace


def normalize_location(text: str) -> str:
    """Lowercase, collapse whitespace runs, strip surrounding punctuation.

    Idempotent: normalizing a normalized string is a no-op.
    """
    return " ".join(text.lower().split()).strip(_STRIP_CHARS)


@dataclass(frozen=True)
class LocationValue:
    """One location slot: a text span, unknown ("?"), or nonexistent ("-")."""

    kind: str
    text: str = ""

    def __post_init__(self):
        if self.kind not in (SPAN, UNKNOWN, NONEXISTENT):
            raise ValidationError(f"bad location kind: {self.kind!r}")
        if self.kind == SPAN and not self.text.strip():
            raise ValidationError("span location needs non-empty text")
        if self.kind != SPAN and self.text:
            raise ValidationError(f"{self.kind} location carries no text")

    @classmethod
    def span(cls, text: str) -> "LocationValue":
        return cls(SPAN, text)

    @classmethod
    def from_token(cls, token: str) -> "LocationValue":
        """Decode a grid token ("-", "?", or a span kept verbatim)."""
        if token == "-":
            return NO_LOCATION
        if token == "?":
            return UNKNOWN_LOCATION
        return cls(SPAN, token)

    def token(self) -> str:
        """Grid encoding, the inverse of :meth:`from_token`."""
        if self.kind == NONEXISTENT:
            return "-"
        if self.kind == UNKNOWN:
            return "?"
        return self.text

    def answer_text(self) -> str:
        """QA answer encoding: "none", "unknown", or the span verbatim."""
        if self.kind == NONEXISTENT:
            return "none"
        if self.kind == UNKNOWN:
            return "unknown"
        return self.text

    def key(self) -> tuple:
        """Comparison key: spans compare after normalization, "-" and "?"
        only match themselves."""
        if self.kind == SPAN:
            return (SPAN, normalize_location(self.text))
        return (self.kind,)

    def matches(self, other: "LocationValue") -> bool:
        return self.key() == other.key()


NO_LOCATION = LocationValue(NONEXISTENT)
UNKNOWN_LOCATION = LocationValue(UNKNOWN)


def parse_prediction(text: str) -> LocationValue:
    """Map a raw location prediction string onto a LocationValue.

    "none"/"-" mean nonexistent, "unknown"/"?" mean unknown. An empty or
    whitespace-only prediction degrades to unknown rather than fabricating
    a span. Anything else is kept verbatim (minus outer whitespace).
    """
    trimmed = text.strip()
    lowered = trimmed.lower()
    if lowered in ("none", "-"):
        return NO_LOCATION
    if lowered in ("unknown", "?") or not trimmed:
        return UNKNOWN_LOCATION
    return LocationValue(SPAN, trimmed)


@dataclass(frozen=True)
class StateVocabulary:
    """Closed label set for one dataset flavor.

    ``labels`` order is normative: emission logit vectors are indexed by it.
    ``nonexistent_states`` are the labels that imply the entity has no
    location at that step.
    """

    name: str
    labels: tuple[str, ...]
    nonexistent_states: frozenset[str]

    def __post_init__(self):
        if not self.labels:
            raise ValidationError("vocabulary needs at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("duplicate labels in vocabulary")
        if any(not lab for lab in self.labels):
            raise ValidationError("empty label in vocabulary")
        if not self.nonexistent_states <= set(self.labels):
            raise ValidationError("nonexistent_states must be a subset of labels")

    @cached_property
    def _index(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.labels)}

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise ValidationError(
                f"label {label!r} not in vocabulary {self.name!r}"
            ) from None

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def tracks_movement(self) -> bool:
        """Whether "exist" means "did not move" (only when "move" is a label).

        Without a "move" label, an existing entity may change location
        freely between steps, so the exist-keeps-location rule is off.
        """
        return "move" in self.labels


PROPARA = StateVocabulary(
    name="propara",
    labels=("create", "exist", "move", "destroy", "outside_before", "outside_after"),
    nonexistent_states=frozenset({"outside_before", "outside_after"}),
)

RECIPES = StateVocabulary(
    name="recipes",
    labels=("exist", "absence"),
    nonexistent_states=frozenset({"absence"}),
)

VOCABULARIES = {v.name: v for v in (PROPARA, RECIPES)}


def get_vocabulary(name: str) -> StateVocabulary:
    try:
        return VOCABULARIES[name]
    except KeyError:
        raise ValidationError(
            f"unknown vocabulary {name!r}; choose from {sorted(VOCABULARIES)}"
        ) from None


@dataclass(frozen=True)
class Entity:
    id: str
    raw_name: str
    aliases: tuple[str, ...]

    def __post_init__(self):
        if not self.id:
            raise ValidationError("entity id must be non-empty")
        if not self.aliases or any(not a.strip() for a in self.aliases):
            raise ValidationError(f"entity {self.id!r} has no usable alias")

    @classmethod
    def from_raw(cls, entity_id: str, raw_name: str) -> "Entity":
        # Raw names may pack alternates: "water; liquid" names two aliases.
        aliases = tuple(part.strip() for part in raw_name.split(";") if part.strip())
        if not aliases:
            raise ValidationError(f"entity {entity_id!r}: raw name {raw_name!r} has no aliases")
        return cls(id=entity_id, raw_name=raw_name, aliases=aliases)


@dataclass(frozen=True)
class Procedure:
    id: str
    steps: tuple[str, ...]
    entities: tuple[Entity, ...]

    def __post_init__(self):
        if not self.id:
            raise ValidationError("procedure id must be non-empty")
        if not self.steps:
            raise ValidationError(f"procedure {self.id!r} has no steps")
        if any(not s.strip() for s in self.steps):
            raise ValidationError(f"procedure {self.id!r} has an empty step")
        ids = [e.id for e in self.entities]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"procedure {self.id!r} has duplicate entity ids")

    @property
    def num_steps(self) -> int:
        return len(self.steps)

    def entity(self, entity_id: str) -> Entity:
        for ent in self.entities:
            if ent.id == entity_id:
                return ent
        raise ValidationError(f"procedure {self.id!r} has no entity {entity_id!r}")


@dataclass(frozen=True)
class Track:
    """States and locations for one entity across one procedure."""

    states: tuple[str, ...]
    locations: tuple[LocationValue, ...]

    def __post_init__(self):
        if len(self.locations) != len(self.states) + 1:
            raise ValidationError(
                f"track needs T+1 locations for T states, got "
                f"{len(self.states)} states and {len(self.locations)} locations"
            )

    @property
    def num_steps(self) -> int:
        return len(self.states)


@dataclass
class AnnotationGrid:
    """Per-entity tracks for one procedure. Treated as immutable after load."""

    procedure_id: str
    entries: dict[str, Track]


@dataclass(frozen=True)
class Violation:
    entity_id: str
    step: int
    rule: str
    message: str


def track_violations(track: Track, vocabulary: StateVocabulary,
                     entity_id: str = "") -> list[Violation]:
    """Check the state/location coupling rules for one track.

    Slot indices in messages are location slots (0..T); rule checks hang off
    the step t = 1..T whose state constrains slots t-1 and t.
    """
    found = []
    states, locs = track.states, track.locations

    def bad(step, rule, msg):
        found.append(Violation(entity_id, step, rule, msg))

    for t, state in enumerate(states, start=1):
        if state in vocabulary.nonexistent_states or state == "destroy":
            if locs[t].kind != NONEXISTENT:
                bad(t, "nonexistent-state-location",
                    f"state {state!r} at step {t} requires location '-', "
                    f"got {locs[t].token()!r}")
        if state == "create":
            if locs[t - 1].kind != NONEXISTENT:
                bad(t, "create-clears-before",
                    f"create at step {t} requires slot {t - 1} to be '-', "
                    f"got {locs[t - 1].token()!r}")
            if locs[t].kind == NONEXISTENT:
                bad(t, "create-yields-location",
                    f"create at step {t} forbids location '-' at slot {t}")
        if state == "exist" and vocabulary.tracks_movement:
            if not locs[t].matches(locs[t - 1]):
                bad(t, "exist-keeps-location",
                    f"exist at step {t} requires slot {t} to repeat slot "
                    f"{t - 1} ({locs[t - 1].token()!r}), got {locs[t].token()!r}")
        if state == "move":
            if locs[t].kind == NONEXISTENT:
                bad(t, "move-needs-location",
                    f"move at step {t} forbids location '-' at slot {t}")
    return found


def grid_violations(grid: AnnotationGrid, vocabulary: StateVocabulary) -> list[Violation]:
    found = []
    for entity_id, track in grid.entries.items():
        found.extend(track_violations(track, vocabulary, entity_id))
    return found


def _parse_track(payload, procedure: Procedure, entity_id: str,
                 vocabulary: StateVocabulary, where: str) -> Track:
    if not isinstance(payload, dict):
        raise ValidationError(f"{where}: track for {entity_id!r} must be an object")
    states = payload.get("states")
    locations = payload.get("locations")
    if not isinstance(states, list) or not all(isinstance(s, str) for s in states):
        raise ValidationError(f"{where}: {entity_id!r} 'states' must be a list of strings")
    if not isinstance(locations, list) or not all(isinstance(s, str) for s in locations):
        raise ValidationError(f"{where}: {entity_id!r} 'locations' must be a list of strings")
    if len(states) != procedure.num_steps:
        raise ValidationError(
            f"{where}: {entity_id!r} has {len(states)} states for "
            f"{procedure.num_steps} steps")
    if len(locations) != procedure.num_steps + 1:
        raise ValidationError(
            f"{where}: {entity_id!r} has {len(locations)} locations, "
            f"expected {procedure.num_steps + 1}")
    for s in states:
        vocabulary.index(s)
    try:
        locs = tuple(LocationValue.from_token(tok) for tok in locations)
    except ValidationError as exc:
        raise ValidationError(f"{where}: {entity_id!r}: {exc}") from None
    return Track(states=tuple(states), locations=locs)


def _parse_record(record, vocabulary: StateVocabulary, where: str):
    if not isinstance(record, dict):
        raise ValidationError(f"{where}: record must be an object")
    proc_id = record.get("id")
    if not isinstance(proc_id, str) or not proc_id:
        raise ValidationError(f"{where}: missing or bad 'id'")
    steps = record.get("steps")
    if not isinstance(steps, list) or not steps or not all(isinstance(s, str) for s in steps):
        raise ValidationError(f"{where}: 'steps' must be a non-empty list of strings")
    raw_entities = record.get("entities")
    if not isinstance(raw_entities, list):
        raise ValidationError(f"{where}: 'entities' must be a list")
    entities = []
    for item in raw_entities:
        if not isinstance(item, dict) or "id" not in item or "raw_name" not in item:
            raise ValidationError(f"{where}: each entity needs 'id' and 'raw_name'")
        entities.append(Entity.from_raw(str(item["id"]), str(item["raw_name"])))
    procedure = Procedure(id=proc_id, steps=tuple(steps), entities=tuple(entities))

    grid = None
    gold = record.get("gold")
    if gold is not None:
        if not isinstance(gold, dict):
            raise ValidationError(f"{where}: 'gold' must be an object keyed by entity id")
        known = {e.id for e in procedure.entities}
        entries = {}
        for entity_id, payload in gold.items():
            if entity_id not in known:
                raise ValidationError(f"{where}: gold refers to unknown entity {entity_id!r}")
            entries[entity_id] = _parse_track(payload, procedure, entity_id, vocabulary, where)
        grid = AnnotationGrid(procedure_id=proc_id, entries=entries)
    return procedure, grid


def _iter_records(path):
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                yield where, json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{where}: bad JSON: {exc}") from None


def load_corpus(path, vocabulary: StateVocabulary):
    """Read a corpus file. Gold grids are validated with hard errors.

    Returns (procedures, grids) where grids maps procedure id to
    AnnotationGrid for every record that carried gold annotations.
    """
    procedures: list[Procedure] = []
    grids: dict[str, AnnotationGrid] = {}
    seen = set()
    for where, record in _iter_records(path):
        procedure, grid = _parse_record(record, vocabulary, where)
        if procedure.id in seen:
            raise ValidationError(f"{where}: duplicate procedure id {procedure.id!r}")
        seen.add(procedure.id)
        procedures.append(procedure)
        if grid is not None:
            bad = grid_violations(grid, vocabulary)
            if bad:
                first = bad[0]
                raise ValidationError(
                    f"{where}: gold grid inconsistent ({len(bad)} violation(s)); "
                    f"first: entity {first.entity_id!r} rule {first.rule}: {first.message}")
            grids[procedure.id] = grid
    return procedures, grids


def load_predictions(path, procedures: list[Procedure], vocabulary: StateVocabulary):
    """Read a prediction file written in the corpus record layout.

    Structural problems (bad schema, wrong lengths, unknown labels) raise;
    state/location rule violations are collected and returned, because a
    scorer must still accept inconsistent predictions.

    Returns (grids, violations).
    """
    by_id = {p.id: p for p in procedures}
    grids: dict[str, AnnotationGrid] = {}
    violations: list[tuple[str, Violation]] = []
    for where, record in _iter_records(path):
        if not isinstance(record, dict) or "id" not in record:
            raise ValidationError(f"{where}: record must be an object with an 'id'")
        proc_id = record["id"]
        procedure = by_id.get(proc_id)
        if procedure is None:
            raise ValidationError(f"{where}: unknown procedure id {proc_id!r}")
        if proc_id in grids:
            raise ValidationError(f"{where}: duplicate procedure id {proc_id!r}")
        gold = record.get("gold") or {}
        if not isinstance(gold, dict):
            raise ValidationError(f"{where}: 'gold' must be an object keyed by entity id")
        known = {e.id for e in procedure.entities}
        entries = {}
        for entity_id, payload in gold.items():
            if entity_id not in known:
                raise ValidationError(f"{where}: prediction for unknown entity {entity_id!r}")
            entries[entity_id] = _parse_track(payload, procedure, entity_id, vocabulary, where)
        grid = AnnotationGrid(procedure_id=proc_id, entries=entries)
        for v in grid_violations(grid, vocabulary):
            violations.append((proc_id, v))
        grids[proc_id] = grid
    return grids, violations


def _record_dict(procedure: Procedure, grid: AnnotationGrid | None) -> dict:
    record = {
        "id": procedure.id,
        "steps": list(procedure.steps),
        "entities": [{"id": e.id, "raw_name": e.raw_name} for e in procedure.entities],
    }
    if grid is not None and grid.entries:
        record["gold"] = {
            entity_id: {
                "states": list(track.states),
                "locations": [loc.token() for loc in track.locations],
            }
            for entity_id, track in grid.entries.items()
        }
    return record


def save_corpus(procedures, grids, path) -> None:
    """Write procedures (and any grids) back out as JSON lines."""
    with open(path, "w", encoding="utf-8") as handle:
        for procedure in procedures:
            record = _record_dict(procedure, grids.get(procedure.id) if grids else None)
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def save_predictions(procedures, grids, path) -> None:
    """Write prediction grids in the corpus record layout."""
    save_corpus(procedures, grids, path)


@dataclass(frozen=True)
class CorpusStats:
    procedures: int
    avg_steps: float
    avg_entities: float


def split_stats(procedures) -> CorpusStats:
    """Procedure count plus mean steps/entities per procedure."""
    procs = list(procedures)
    if not procs:
        return CorpusStats(procedures=0, avg_steps=0.0, avg_entities=0.0)
    n = len(procs)
    return CorpusStats(
        procedures=n,
        avg_steps=sum(p.num_steps for p in procs) / n,
        avg_entities=sum(len(p.entities) for p in procs) / n,
    )


def format_stats_table(rows: dict[str, CorpusStats]) -> str:
    """Plain-text stats table; means shown to one decimal."""
    lines = [f"{'split':<12} {'procedures':>10} {'avg_steps':>10} {'avg_entities':>13}"]
    for name, stats in rows.items():
        lines.append(
            f"{name:<12} {stats.procedures:>10d} {stats.avg_steps:>10.1f} "
            f"{stats.avg_entities:>13.1f}")
    return "\n".join(lines)

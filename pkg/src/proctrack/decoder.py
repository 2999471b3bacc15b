"""Mention-aware Viterbi decoding over per-step state logits.

The per-step logits come from an external text model (one logit per label,
vocabulary order). Before decoding, each step's logit row is scaled by
tau_exp when the entity is explicitly mentioned in that step's text and by
tau_imp otherwise; the transition model then vetoes structurally impossible
sequences via its -inf entries.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np

from .corpus import Entity, Procedure, StateVocabulary
from .errors import NoValidPathError, ValidationError
from .transitions import TransitionModel

# Stand-in for -inf when decoding with relax=True. Finite so a path always
# exists, large enough that legal paths win whenever one exists.
RELAX_SCORE = -1e4

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class DecodeConfig:
    """Emission weights for explicitly mentioned vs unmentioned steps."""

    tau_exp: float = 0.6
    tau_imp: float = 0.7

    def __post_init__(self):
        if not (self.tau_exp > 0 and self.tau_imp > 0):
            raise ValidationError(
                f"tau values must be positive, got ({self.tau_exp}, {self.tau_imp})")


@dataclass
class EmissionTrack:
    """Model outputs for one entity: a (T, L) logit matrix and T+1 location
    strings ("none", "unknown", or a span)."""

    state_logits: np.ndarray
    location_preds: tuple[str, ...]

    def __post_init__(self):
        self.state_logits = np.asarray(self.state_logits, dtype=float)
        if self.state_logits.ndim != 2:
            raise ValidationError("state_logits must be a (T, L) matrix")
        if not np.isfinite(self.state_logits).all():
            raise ValidationError("state logits must all be finite")
        if len(self.location_preds) != self.state_logits.shape[0] + 1:
            raise ValidationError(
                f"expected {self.state_logits.shape[0] + 1} location predictions, "
                f"got {len(self.location_preds)}")

    @property
    def num_steps(self) -> int:
        return self.state_logits.shape[0]


@dataclass
class EmissionSet:
    procedure_id: str
    tracks: dict[str, EmissionTrack]


def _tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _contains(haystack: list[str], needle: list[str]) -> bool:
    if not needle or len(needle) > len(haystack):
        return False
    return any(
        haystack[i:i + len(needle)] == needle
        for i in range(len(haystack) - len(needle) + 1)
    )


def detect_mentions(procedure: Procedure, entity: Entity) -> tuple[bool, ...]:
    """Flag each step whose text contains any alias of the entity.

    Matching is case-insensitive on alphanumeric token boundaries, so
    "Water flows." mentions water while "The underwater cave." does not.
    """
    alias_tokens = [toks for toks in (_tokens(a) for a in entity.aliases) if toks]
    step_tokens = [_tokens(step) for step in procedure.steps]
    return tuple(
        any(_contains(toks, alias) for alias in alias_tokens)
        for toks in step_tokens
    )


def weight_emissions(state_logits, flags, config: DecodeConfig) -> np.ndarray:
    """Scale each logit row by tau_exp (mentioned) or tau_imp (not mentioned)."""
    logits = np.asarray(state_logits, dtype=float)
    if logits.ndim != 2:
        raise ValidationError("state_logits must be a (T, L) matrix")
    if len(flags) != logits.shape[0]:
        raise ValidationError(
            f"{len(flags)} mention flags for {logits.shape[0]} steps")
    if not (config.tau_exp > 0 and config.tau_imp > 0):
        raise ValidationError("tau values must be positive")
    taus = np.where(np.asarray(flags, dtype=bool), config.tau_exp, config.tau_imp)
    return logits * taus[:, None]


def argmax_states(state_logits, vocabulary: StateVocabulary) -> list[str]:
    """Per-step argmax baseline, ignoring transitions. Ties pick the lowest
    label index."""
    logits = np.asarray(state_logits, dtype=float)
    if logits.shape[1] != vocabulary.size:
        raise ValidationError(
            f"logits have {logits.shape[1]} columns for {vocabulary.size} labels")
    return [vocabulary.labels[j] for j in logits.argmax(axis=1)]


def viterbi(emissions, model: TransitionModel, relax: bool = False):
    """Best state sequence under start + emission + transition scores.

    Returns (labels, score). Ties are broken toward the lowest label index
    at every backpointer decision. Raises NoValidPathError when every
    sequence scores -inf; with relax=True, -inf model entries are replaced
    by RELAX_SCORE so decoding always succeeds.
    """
    U = np.asarray(emissions, dtype=float)
    if U.ndim != 2:
        raise ValidationError("emissions must be a (T, L) matrix")
    size = model.vocabulary.size
    if U.shape[1] != size:
        raise ValidationError(
            f"emissions have {U.shape[1]} columns for {size} labels")
    if U.shape[0] < 1:
        raise ValidationError("emissions must cover at least one step")
    if not np.isfinite(U).all():
        raise ValidationError("emission scores must all be finite")

    start = model.start_scores
    trans = model.trans_scores
    if relax:
        start = np.where(np.isneginf(start), RELAX_SCORE, start)
        trans = np.where(np.isneginf(trans), RELAX_SCORE, trans)

    T = U.shape[0]
    dp = start + U[0]
    backptr = np.zeros((T, size), dtype=int)
    for t in range(1, T):
        cand = dp[:, None] + trans          # cand[p, q]: best ending in p, then p->q
        best_prev = cand.argmax(axis=0)     # first max = lowest predecessor index
        dp = cand[best_prev, np.arange(size)] + U[t]
        backptr[t] = best_prev

    last = int(dp.argmax())
    score = float(dp[last])
    if score == -np.inf:
        raise NoValidPathError(
            f"no state sequence of length {T} has finite score under the model")

    path = [last]
    for t in range(T - 1, 0, -1):
        path.append(int(backptr[t][path[-1]]))
    path.reverse()
    return [model.vocabulary.labels[i] for i in path], score


def decode_entity(procedure: Procedure, entity: Entity, track: EmissionTrack,
                  model: TransitionModel, config: DecodeConfig,
                  relax: bool = False) -> list[str]:
    """Mention-weighted decode for one entity; returns its state sequence."""
    if track.num_steps != procedure.num_steps:
        raise ValidationError(
            f"emissions cover {track.num_steps} steps but procedure "
            f"{procedure.id!r} has {procedure.num_steps}")
    flags = detect_mentions(procedure, entity)
    weighted = weight_emissions(track.state_logits, flags, config)
    states, _ = viterbi(weighted, model, relax=relax)
    return states


def load_emissions(path, procedures, vocabulary: StateVocabulary):
    """Read an emissions file (JSON lines keyed by procedure and entity).

    Each record: {"procedure_id", "entity_id", "state_logits" (T x L,
    row-major), "location_preds" (T+1 strings)}. Dimensions are checked
    against the corpus and all logits must be finite.
    """
    by_id = {p.id: p for p in procedures}
    sets: dict[str, EmissionSet] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{where}: bad JSON: {exc}") from None
            try:
                proc_id = record["procedure_id"]
                entity_id = record["entity_id"]
                logits = record["state_logits"]
                preds = record["location_preds"]
            except (KeyError, TypeError) as exc:
                raise ValidationError(f"{where}: missing field: {exc}") from None
            procedure = by_id.get(proc_id)
            if procedure is None:
                raise ValidationError(f"{where}: unknown procedure id {proc_id!r}")
            if all(e.id != entity_id for e in procedure.entities):
                raise ValidationError(
                    f"{where}: unknown entity {entity_id!r} in procedure {proc_id!r}")
            try:
                track = EmissionTrack(
                    state_logits=np.array(logits, dtype=float),
                    location_preds=tuple(str(p) for p in preds),
                )
            except (ValueError, ValidationError) as exc:
                raise ValidationError(f"{where}: {exc}") from None
            if track.num_steps != procedure.num_steps:
                raise ValidationError(
                    f"{where}: {track.num_steps} logit rows for "
                    f"{procedure.num_steps} steps")
            if track.state_logits.shape[1] != vocabulary.size:
                raise ValidationError(
                    f"{where}: {track.state_logits.shape[1]} logit columns for "
                    f"{vocabulary.size} labels")
            bucket = sets.setdefault(proc_id, EmissionSet(proc_id, {}))
            if entity_id in bucket.tracks:
                raise ValidationError(f"{where}: duplicate emissions for "
                                      f"({proc_id!r}, {entity_id!r})")
            bucket.tracks[entity_id] = track
    return sets


def save_emissions(sets, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for emission_set in sets.values():
            for entity_id, track in emission_set.tracks.items():
                record = {
                    "procedure_id": emission_set.procedure_id,
                    "entity_id": entity_id,
                    "state_logits": [[float(x) for x in row] for row in track.state_logits],
                    "location_preds": list(track.location_preds),
                }
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")

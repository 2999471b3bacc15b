"""Scoring for predicted grids against gold grids.

Three protocols:

* document level: per-procedure tuple sets for four questions (what were
  the inputs, what were the outputs, what was converted, what moved), each
  scored with exact-tuple precision/recall/F1 over the whole split;
* sentence level: per (procedure, entity, event) triples for create,
  destroy, and move, scored on occurrence, step agreement, and location
  arguments;
* ingredient location changes, for two-state vocabularies: the set of slots
  where an entity's location differs from the previous slot.

Location comparisons are normalized (case, whitespace, surrounding
punctuation); "?" matches only "?" and "-" only "-". Entities missing from
the predictions count as empty tracks, which hurts recall but never crashes
the scorer.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import NONEXISTENT, AnnotationGrid, StateVocabulary, Track
from .errors import ValidationError

EVENTS = ("create", "destroy", "move")


@dataclass(frozen=True)
class QuestionScore:
    precision: float
    recall: float
    f1: float
    n_pred: int
    n_gold: int
    n_correct: int


@dataclass(frozen=True)
class CategoryScore:
    score: float
    n_correct: int
    n_scored: int


@dataclass(frozen=True)
class DocumentReport:
    inputs: QuestionScore
    outputs: QuestionScore
    conversions: QuestionScore
    moves: QuestionScore
    macro_precision: float
    macro_recall: float
    macro_f1: float

    def questions(self) -> dict[str, QuestionScore]:
        return {
            "inputs": self.inputs,
            "outputs": self.outputs,
            "conversions": self.conversions,
            "moves": self.moves,
        }


@dataclass(frozen=True)
class SentenceReport:
    cat1: CategoryScore
    cat2: CategoryScore
    cat3: CategoryScore
    macro: float
    micro: float


@dataclass(frozen=True)
class BucketAccuracy:
    accuracy: float | None
    n_correct: int
    n_steps: int


@dataclass(frozen=True)
class SplitReport:
    explicit: BucketAccuracy
    implicit: BucketAccuracy


def _prf(n_pred: int, n_gold: int, n_correct: int) -> QuestionScore:
    # Empty sets score vacuously perfect on their own side: predicting
    # nothing costs recall, not precision, and vice versa.
    precision = n_correct / n_pred if n_pred > 0 else 1.0
    recall = n_correct / n_gold if n_gold > 0 else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return QuestionScore(precision, recall, f1, n_pred, n_gold, n_correct)


def _score_sets(pred: set, gold: set) -> QuestionScore:
    return _prf(len(pred), len(gold), len(pred & gold))


def _check_coverage(gold_grids: dict[str, AnnotationGrid],
                    pred_grids: dict[str, AnnotationGrid]) -> None:
    for proc_id, grid in pred_grids.items():
        gold = gold_grids.get(proc_id)
        if gold is None:
            raise ValidationError(f"prediction for unknown procedure {proc_id!r}")
        for entity_id, track in grid.entries.items():
            gold_track = gold.entries.get(entity_id)
            if gold_track is None:
                raise ValidationError(
                    f"prediction for unknown entity {entity_id!r} "
                    f"in procedure {proc_id!r}")
            if track.num_steps != gold_track.num_steps:
                raise ValidationError(
                    f"prediction length mismatch for ({proc_id!r}, {entity_id!r})")


def _loc_key(loc) -> tuple:
    return loc.key()


def _document_tuples(grids: dict[str, AnnotationGrid]):
    inputs, outputs, conversions, moves = set(), set(), set(), set()
    for proc_id, grid in grids.items():
        destroyed: dict[int, list] = {}
        created: dict[int, list] = {}
        for entity_id, track in grid.entries.items():
            T = track.num_steps
            first, last = track.locations[0], track.locations[T]
            if first.kind != NONEXISTENT and last.kind == NONEXISTENT:
                inputs.add((proc_id, entity_id))
            if first.kind == NONEXISTENT and last.kind != NONEXISTENT:
                outputs.add((proc_id, entity_id))
            for t, state in enumerate(track.states, start=1):
                if state == "move":
                    moves.add((proc_id, entity_id, t,
                               _loc_key(track.locations[t - 1]),
                               _loc_key(track.locations[t])))
                elif state == "destroy":
                    # An entity is destroyed where it last was.
                    destroyed.setdefault(t, []).append(
                        (entity_id, _loc_key(track.locations[t - 1])))
                elif state == "create":
                    created.setdefault(t, []).append(
                        (entity_id, _loc_key(track.locations[t])))
        for t, gone in destroyed.items():
            for died, died_at in gone:
                for born, born_at in created.get(t, []):
                    if died_at == born_at and died_at != (NONEXISTENT,):
                        conversions.add((proc_id, t, died, born, died_at))
    return inputs, outputs, conversions, moves


def eval_document_level(gold_grids: dict[str, AnnotationGrid],
                        pred_grids: dict[str, AnnotationGrid]) -> DocumentReport:
    _check_coverage(gold_grids, pred_grids)
    gold_tuples = _document_tuples(gold_grids)
    pred_tuples = _document_tuples(pred_grids)
    scores = [_score_sets(p, g) for p, g in zip(pred_tuples, gold_tuples)]
    return DocumentReport(
        inputs=scores[0],
        outputs=scores[1],
        conversions=scores[2],
        moves=scores[3],
        macro_precision=sum(s.precision for s in scores) / 4,
        macro_recall=sum(s.recall for s in scores) / 4,
        macro_f1=sum(s.f1 for s in scores) / 4,
    )


def _event_steps(track: Track | None, event: str) -> set[int]:
    if track is None:
        return set()
    return {t for t, s in enumerate(track.states, start=1) if s == event}


def _event_args(track: Track | None, event: str, steps: set[int]):
    """Location arguments at the given steps: where it was created, where it
    was destroyed, or (from, to) per move step."""
    if track is None:
        return None
    args = []
    for t in sorted(steps):
        if event == "create":
            args.append(_loc_key(track.locations[t]))
        elif event == "destroy":
            args.append(_loc_key(track.locations[t - 1]))
        else:
            args.append((_loc_key(track.locations[t - 1]), _loc_key(track.locations[t])))
    return tuple(args)


def eval_sentence_level(gold_grids: dict[str, AnnotationGrid],
                        pred_grids: dict[str, AnnotationGrid]) -> SentenceReport:
    """Score (procedure, entity, event) triples on three questions.

    Cat-1: does the event happen at all (all triples). Cat-2: at exactly the
    gold steps (gold-positive triples). Cat-3: with the gold location
    arguments, read off at the gold event steps (gold-positive triples).
    """
    _check_coverage(gold_grids, pred_grids)
    c1_correct = c1_total = 0
    c2_correct = c2_total = 0
    c3_correct = c3_total = 0
    for proc_id, gold in gold_grids.items():
        pred = pred_grids.get(proc_id)
        for entity_id, gold_track in gold.entries.items():
            pred_track = pred.entries.get(entity_id) if pred else None
            for event in EVENTS:
                gold_steps = _event_steps(gold_track, event)
                pred_steps = _event_steps(pred_track, event)
                c1_total += 1
                if bool(gold_steps) == bool(pred_steps):
                    c1_correct += 1
                if not gold_steps:
                    continue
                c2_total += 1
                if pred_steps == gold_steps:
                    c2_correct += 1
                c3_total += 1
                gold_args = _event_args(gold_track, event, gold_steps)
                pred_args = _event_args(pred_track, event, gold_steps)
                if pred_args == gold_args:
                    c3_correct += 1

    def cat(correct, total):
        return CategoryScore(correct / total if total else 1.0, correct, total)

    cat1, cat2, cat3 = cat(c1_correct, c1_total), cat(c2_correct, c2_total), cat(c3_correct, c3_total)
    total = c1_total + c2_total + c3_total
    micro = (c1_correct + c2_correct + c3_correct) / total if total else 1.0
    return SentenceReport(
        cat1=cat1, cat2=cat2, cat3=cat3,
        macro=(cat1.score + cat2.score + cat3.score) / 3,
        micro=micro,
    )


def _change_tuples(grids: dict[str, AnnotationGrid]) -> set:
    changes = set()
    for proc_id, grid in grids.items():
        for entity_id, track in grid.entries.items():
            for t in range(1, track.num_steps + 1):
                here = _loc_key(track.locations[t])
                if here != _loc_key(track.locations[t - 1]):
                    changes.add((proc_id, entity_id, t, here))
    return changes


def eval_recipes_locations(gold_grids: dict[str, AnnotationGrid],
                           pred_grids: dict[str, AnnotationGrid],
                           vocabulary: StateVocabulary) -> QuestionScore:
    """Location-change tuples (entity, slot, new location), exact match."""
    if vocabulary.name != "recipes":
        raise ValidationError(
            f"location-change scoring expects the recipes vocabulary, "
            f"got {vocabulary.name!r}")
    _check_coverage(gold_grids, pred_grids)
    return _score_sets(_change_tuples(pred_grids), _change_tuples(gold_grids))


def eval_split(gold_grids: dict[str, AnnotationGrid],
               pred_states: dict[tuple[str, str], list[str]],
               mention_flags: dict[tuple[str, str], tuple[bool, ...]]) -> SplitReport:
    """Per-step state accuracy, partitioned by the mention flag of the step."""
    correct = {True: 0, False: 0}
    total = {True: 0, False: 0}
    for (proc_id, entity_id), states in pred_states.items():
        gold = gold_grids.get(proc_id)
        gold_track = gold.entries.get(entity_id) if gold else None
        if gold_track is None:
            raise ValidationError(
                f"no gold track for ({proc_id!r}, {entity_id!r})")
        flags = mention_flags.get((proc_id, entity_id))
        if flags is None or len(flags) != gold_track.num_steps:
            raise ValidationError(
                f"bad mention flags for ({proc_id!r}, {entity_id!r})")
        if len(states) != gold_track.num_steps:
            raise ValidationError(
                f"bad state count for ({proc_id!r}, {entity_id!r})")
        for flag, pred, gold_state in zip(flags, states, gold_track.states):
            total[flag] += 1
            if pred == gold_state:
                correct[flag] += 1

    def bucket(flag):
        n = total[flag]
        return BucketAccuracy(correct[flag] / n if n else None, correct[flag], n)

    return SplitReport(explicit=bucket(True), implicit=bucket(False))

"""End-to-end run: decode every entity, repair locations, score, report.

Entities with no emissions never abort a run: they are logged, scored as
empty tracks, and surfaced in the report's coverage block. The report is
written both as JSON and as a plain-text table; neither embeds paths or
timestamps, so identical inputs produce byte-identical outputs.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .consistency import resolve
from .corpus import AnnotationGrid, StateVocabulary, Track, save_predictions
from .decoder import (
    DecodeConfig,
    argmax_states,
    detect_mentions,
    viterbi,
    weight_emissions,
)
from .errors import DecodeError
from .evaluator import (
    QuestionScore,
    SplitReport,
    eval_document_level,
    eval_recipes_locations,
    eval_sentence_level,
    eval_split,
)
from .transitions import TransitionModel

log = logging.getLogger(__name__)


@dataclass
class PipelineResult:
    pred_grids: dict[str, AnnotationGrid]
    document: object
    sentence: object
    recipes_location: QuestionScore | None
    split_argmax: SplitReport
    split_decoded: SplitReport
    repair_counts: dict[str, int]
    missing: list[tuple[str, str]]
    config: DecodeConfig
    vocabulary: StateVocabulary
    seed: int | None = None
    per_procedure: dict | None = None
    decoded_states: dict = field(default_factory=dict)


def _decode_unit(args):
    """Decode one procedure's entities; used both inline and in workers."""
    procedure, tracks, model, config, relax = args
    out = []
    for entity_id, track in tracks:
        entity = procedure.entity(entity_id)
        flags = detect_mentions(procedure, entity)
        weighted = weight_emissions(track.state_logits, flags, config)
        try:
            states, score = viterbi(weighted, model, relax=relax)
        except DecodeError as exc:
            raise type(exc)(
                f"procedure {procedure.id!r}, entity {entity_id!r}: {exc}") from exc
        raw = argmax_states(track.state_logits, model.vocabulary)
        out.append((entity_id, states, score, raw, flags))
    return procedure.id, out


def run_pipeline(procedures, gold_grids, emissions, model: TransitionModel,
                 vocabulary: StateVocabulary, config: DecodeConfig | None = None,
                 relax: bool = False, jobs: int = 1, seed: int | None = None,
                 per_procedure: bool = False) -> PipelineResult:
    config = config or DecodeConfig()
    units = []
    missing: list[tuple[str, str]] = []
    for procedure in procedures:
        gold = gold_grids.get(procedure.id)
        if gold is None:
            continue
        eset = emissions.get(procedure.id)
        tracks = []
        for entity_id in gold.entries:
            track = eset.tracks.get(entity_id) if eset else None
            if track is None:
                missing.append((procedure.id, entity_id))
                continue
            tracks.append((entity_id, track))
        units.append((procedure, tracks, model, config, relax))
    for proc_id, entity_id in missing:
        log.warning("no emissions for procedure %r entity %r; scoring an empty track",
                    proc_id, entity_id)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            decoded_units = list(pool.map(_decode_unit, units))
    else:
        decoded_units = [_decode_unit(unit) for unit in units]

    by_proc = {p.id: p for p in procedures}
    pred_grids: dict[str, AnnotationGrid] = {}
    decoded_states: dict[tuple[str, str], list[str]] = {}
    raw_states: dict[tuple[str, str], list[str]] = {}
    flags_map: dict[tuple[str, str], tuple[bool, ...]] = {}
    repair_counts: dict[str, int] = {}
    for proc_id, rows in decoded_units:
        eset = emissions.get(proc_id)
        grid = pred_grids.setdefault(proc_id, AnnotationGrid(proc_id, {}))
        for entity_id, states, _score, raw, flags in rows:
            track = eset.tracks[entity_id]
            resolved = resolve(states, track.location_preds, vocabulary)
            for repair in resolved.repairs:
                repair_counts[repair.rule] = repair_counts.get(repair.rule, 0) + 1
            grid.entries[entity_id] = Track(states=resolved.states,
                                            locations=resolved.locations)
            decoded_states[proc_id, entity_id] = states
            raw_states[proc_id, entity_id] = raw
            flags_map[proc_id, entity_id] = flags
    # Procedures whose every entity lacked emissions still need a (fully
    # empty) grid so the evaluator counts them against recall.
    for proc_id, entity_id in missing:
        pred_grids.setdefault(proc_id, AnnotationGrid(proc_id, {}))

    document = eval_document_level(gold_grids, pred_grids)
    sentence = eval_sentence_level(gold_grids, pred_grids)
    recipes = None
    if vocabulary.name == "recipes":
        recipes = eval_recipes_locations(gold_grids, pred_grids, vocabulary)
    split_decoded = eval_split(gold_grids, decoded_states, flags_map)
    split_argmax = eval_split(gold_grids, raw_states, flags_map)

    per_proc = None
    if per_procedure:
        per_proc = {}
        for proc_id in sorted(pred_grids):
            doc = eval_document_level(
                {proc_id: gold_grids[proc_id]}, {proc_id: pred_grids[proc_id]})
            per_proc[proc_id] = doc

    return PipelineResult(
        pred_grids=pred_grids,
        document=document,
        sentence=sentence,
        recipes_location=recipes,
        split_argmax=split_argmax,
        split_decoded=split_decoded,
        repair_counts=dict(sorted(repair_counts.items())),
        missing=missing,
        config=config,
        vocabulary=vocabulary,
        seed=seed,
        per_procedure=per_proc,
        decoded_states=decoded_states,
    )


def question_dict(score: QuestionScore) -> dict:
    return {
        "precision": score.precision,
        "recall": score.recall,
        "f1": score.f1,
        "pred": score.n_pred,
        "gold": score.n_gold,
        "correct": score.n_correct,
    }


def document_dict(document) -> dict:
    payload = {name: question_dict(score)
               for name, score in document.questions().items()}
    payload["macro"] = {
        "precision": document.macro_precision,
        "recall": document.macro_recall,
        "f1": document.macro_f1,
    }
    return payload


def split_dict(split: SplitReport) -> dict:
    def bucket(b):
        return {"accuracy": b.accuracy, "correct": b.n_correct, "steps": b.n_steps}
    return {"explicit": bucket(split.explicit), "implicit": bucket(split.implicit)}


def report_dict(result: PipelineResult) -> dict:
    sentence = result.sentence
    payload = {
        "config": {
            "vocabulary": result.vocabulary.name,
            "tau_exp": result.config.tau_exp,
            "tau_imp": result.config.tau_imp,
            "seed": result.seed,
        },
        "coverage": {
            "decoded_entities": len(result.decoded_states),
            "missing_emissions": len(result.missing),
        },
        "consistency_repairs": result.repair_counts,
        "document_level": document_dict(result.document),
        "sentence_level": {
            "cat1": {"score": sentence.cat1.score, "correct": sentence.cat1.n_correct,
                     "scored": sentence.cat1.n_scored},
            "cat2": {"score": sentence.cat2.score, "correct": sentence.cat2.n_correct,
                     "scored": sentence.cat2.n_scored},
            "cat3": {"score": sentence.cat3.score, "correct": sentence.cat3.n_correct,
                     "scored": sentence.cat3.n_scored},
            "macro": sentence.macro,
            "micro": sentence.micro,
        },
        "recipes_location_changes": (
            question_dict(result.recipes_location)
            if result.recipes_location is not None else None),
        "split_accuracy": {
            "argmax": split_dict(result.split_argmax),
            "decoded": split_dict(result.split_decoded),
        },
    }
    if result.per_procedure is not None:
        payload["per_procedure"] = {
            proc_id: document_dict(doc)
            for proc_id, doc in result.per_procedure.items()
        }
    return payload


def render_report(result: PipelineResult) -> str:
    lines = []
    doc = result.document

    def fmt(x):
        return "  none" if x is None else f"{x:.4f}"

    lines.append("document-level")
    lines.append(f"  {'question':<12} {'P':>8} {'R':>8} {'F1':>8} "
                 f"{'pred':>6} {'gold':>6} {'hit':>6}")
    for name, score in doc.questions().items():
        lines.append(
            f"  {name:<12} {score.precision:>8.4f} {score.recall:>8.4f} "
            f"{score.f1:>8.4f} {score.n_pred:>6d} {score.n_gold:>6d} "
            f"{score.n_correct:>6d}")
    lines.append(f"  {'macro':<12} {doc.macro_precision:>8.4f} "
                 f"{doc.macro_recall:>8.4f} {doc.macro_f1:>8.4f}")
    sent = result.sentence
    lines.append("sentence-level")
    for name, cat in (("cat1", sent.cat1), ("cat2", sent.cat2), ("cat3", sent.cat3)):
        lines.append(f"  {name:<12} {cat.score:>8.4f} "
                     f"({cat.n_correct}/{cat.n_scored})")
    lines.append(f"  {'macro':<12} {sent.macro:>8.4f}")
    lines.append(f"  {'micro':<12} {sent.micro:>8.4f}")
    if result.recipes_location is not None:
        s = result.recipes_location
        lines.append("location-changes")
        lines.append(f"  {'changes':<12} {s.precision:>8.4f} {s.recall:>8.4f} "
                     f"{s.f1:>8.4f} {s.n_pred:>6d} {s.n_gold:>6d} {s.n_correct:>6d}")
    lines.append("split-accuracy")
    for name, split in (("argmax", result.split_argmax),
                        ("decoded", result.split_decoded)):
        lines.append(
            f"  {name:<12} explicit {fmt(split.explicit.accuracy)} "
            f"({split.explicit.n_correct}/{split.explicit.n_steps})  "
            f"implicit {fmt(split.implicit.accuracy)} "
            f"({split.implicit.n_correct}/{split.implicit.n_steps})")
    lines.append(f"repairs {sum(result.repair_counts.values())} "
                 f"missing-emissions {len(result.missing)}")
    return "\n".join(lines) + "\n"


def write_outputs(result: PipelineResult, procedures, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    save_predictions(procedures, result.pred_grids,
                     os.path.join(out_dir, "predictions.jsonl"))
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as handle:
        json.dump(report_dict(result), handle, ensure_ascii=False, indent=2)
        handle.write("\n")
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as handle:
        handle.write(render_report(result))

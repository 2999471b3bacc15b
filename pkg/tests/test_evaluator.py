"""Scoring protocols: document events, sentence categories, location changes."""

import pytest

from proctrack.corpus import (
    PROPARA,
    RECIPES,
    AnnotationGrid,
    LocationValue,
    Track,
)
from proctrack.errors import ValidationError
from proctrack.evaluator import (
    eval_document_level,
    eval_recipes_locations,
    eval_sentence_level,
    eval_split,
)
from proctrack.synth import make_corpus


def _track(states, tokens):
    return Track(
        states=tuple(states),
        locations=tuple(LocationValue.from_token(t) for t in tokens),
    )


def _conversion_grid():
    """Three entities over three steps: A is consumed into B at step 2 in the
    soil while C moves from pond to river at step 3."""
    entries = {
        "A": _track(
            ["exist", "destroy", "outside_after"], ["soil", "soil", "-", "-"]
        ),
        "B": _track(
            ["outside_before", "create", "exist"], ["-", "-", "soil", "soil"]
        ),
        "C": _track(["exist", "exist", "move"], ["pond", "pond", "pond", "river"]),
    }
    return {"mix": AnnotationGrid(procedure_id="mix", entries=entries)}


def _no_events_grid():
    entries = {
        name: _track(["exist"] * 3, ["?"] * 4) for name in ("A", "B", "C")
    }
    return {"mix": AnnotationGrid(procedure_id="mix", entries=entries)}


def test_document_identity_is_perfect():
    gold = _conversion_grid()
    report = eval_document_level(gold, gold)
    for score in report.questions().values():
        assert score.precision == 1.0
        assert score.recall == 1.0
        assert score.f1 == 1.0
    assert report.macro_f1 == 1.0
    assert report.macro_precision == 1.0
    assert report.macro_recall == 1.0


def test_document_events_extracted_from_hand_grid():
    gold = _conversion_grid()
    report = eval_document_level(gold, gold)
    assert report.inputs.n_gold == 1
    assert report.outputs.n_gold == 1
    assert report.conversions.n_gold == 1
    assert report.moves.n_gold == 1


def test_document_missed_move_costs_recall_not_precision():
    gold = _conversion_grid()
    pred = _conversion_grid()
    pred["mix"].entries["C"] = _track(
        ["exist", "exist", "exist"], ["pond", "pond", "pond", "pond"]
    )
    report = eval_document_level(gold, pred)
    assert report.moves.precision == 1.0
    assert report.moves.recall == 0.0
    assert report.moves.f1 == 0.0
    assert report.inputs.f1 == 1.0
    assert report.outputs.f1 == 1.0
    assert report.conversions.f1 == 1.0
    assert report.macro_f1 == pytest.approx(0.75)
    assert report.macro_recall == pytest.approx(0.75)
    assert report.macro_precision == 1.0


def test_document_conversion_requires_shared_location():
    gold = _conversion_grid()
    pred = _conversion_grid()
    pred["mix"].entries["B"] = _track(
        ["outside_before", "create", "exist"], ["-", "-", "oven", "oven"]
    )
    report = eval_document_level(gold, pred)
    assert report.conversions.n_pred == 0
    assert report.conversions.recall == 0.0


def test_document_missing_entity_counts_as_empty_track():
    gold = _conversion_grid()
    pred = _conversion_grid()
    del pred["mix"].entries["C"]
    report = eval_document_level(gold, pred)
    assert report.moves.precision == 1.0
    assert report.moves.recall == 0.0


def test_document_rejects_unknown_prediction_entity():
    gold = _conversion_grid()
    pred = _conversion_grid()
    pred["mix"].entries["D"] = _track(["exist"] * 3, ["?"] * 4)
    with pytest.raises(ValidationError):
        eval_document_level(gold, pred)


def test_sentence_identity_is_perfect():
    gold = _conversion_grid()
    report = eval_sentence_level(gold, gold)
    assert report.cat1.score == 1.0
    assert report.cat2.score == 1.0
    assert report.cat3.score == 1.0
    assert report.macro == 1.0
    assert report.micro == 1.0


def test_sentence_categories_count_hand_case():
    gold = _conversion_grid()
    pred = _conversion_grid()
    pred["mix"].entries["C"] = _track(
        ["exist", "exist", "exist"], ["pond", "pond", "pond", "pond"]
    )
    report = eval_sentence_level(gold, pred)
    assert (report.cat1.n_correct, report.cat1.n_scored) == (8, 9)
    assert (report.cat2.n_correct, report.cat2.n_scored) == (2, 3)
    assert (report.cat3.n_correct, report.cat3.n_scored) == (2, 3)
    assert report.micro == pytest.approx(12 / 15)
    assert report.macro == pytest.approx((8 / 9 + 2 / 3 + 2 / 3) / 3)


def test_sentence_no_events_predictor_scores_gold_negative_fraction():
    gold = _conversion_grid()
    report = eval_sentence_level(gold, _no_events_grid())
    assert report.cat1.score == pytest.approx(6 / 9)
    assert report.cat2.score == 0.0
    assert report.cat3.score == 0.0


def test_sentence_cat2_needs_exact_step_sets():
    gold = _conversion_grid()
    pred = _conversion_grid()
    # Right event, wrong step: move at 2 instead of 3.
    pred["mix"].entries["C"] = _track(
        ["exist", "move", "exist"], ["pond", "pond", "river", "river"]
    )
    report = eval_sentence_level(gold, pred)
    assert report.cat1.score == 1.0
    assert (report.cat2.n_correct, report.cat2.n_scored) == (2, 3)


def test_recipes_location_changes_identity_and_offsets():
    gold = {
        "stew": AnnotationGrid(
            procedure_id="stew",
            entries={
                "egg": _track(
                    ["exist", "exist", "absence"], ["shelf", "bowl", "bowl", "-"]
                )
            },
        )
    }
    assert eval_recipes_locations(gold, gold, RECIPES).f1 == 1.0
    off_by_one = {
        "stew": AnnotationGrid(
            procedure_id="stew",
            entries={
                "egg": _track(
                    ["exist", "exist", "absence"], ["shelf", "shelf", "bowl", "-"]
                )
            },
        )
    }
    shifted = eval_recipes_locations(gold, off_by_one, RECIPES)
    assert shifted.n_correct == 1  # only the final "-" change lines up
    assert shifted.f1 == pytest.approx(0.5)


def test_recipes_four_of_five_with_one_spurious_is_point_eight():
    def grid(tokens_by_entity):
        return {
            "stew": AnnotationGrid(
                procedure_id="stew",
                entries={
                    entity: _track(["exist"] * (len(tokens) - 1), tokens)
                    for entity, tokens in tokens_by_entity.items()
                },
            )
        }

    gold = grid(
        {
            "egg": ["shelf", "bowl", "pan", "plate"],
            "flour": ["bag", "bowl", "bowl", "bowl"],
            "milk": ["fridge", "fridge", "bowl", "bowl"],
        }
    )
    pred = grid(
        {
            "egg": ["shelf", "bowl", "pan", "pan"],  # misses plate
            "flour": ["bag", "bowl", "bowl", "oven"],  # spurious oven
            "milk": ["fridge", "fridge", "bowl", "bowl"],
        }
    )
    score = eval_recipes_locations(gold, pred, RECIPES)
    assert (score.n_pred, score.n_gold, score.n_correct) == (5, 5, 4)
    assert score.f1 == pytest.approx(0.8)


def test_recipes_scorer_rejects_other_vocabularies():
    gold = _conversion_grid()
    with pytest.raises(ValidationError):
        eval_recipes_locations(gold, gold, PROPARA)


def test_split_buckets_by_mention_flag():
    gold = {
        "mix": AnnotationGrid(
            procedure_id="mix",
            entries={
                "A": _track(
                    ["create", "exist", "move"], ["-", "soil", "soil", "pond"]
                )
            },
        )
    }
    report = eval_split(
        gold,
        {("mix", "A"): ["create", "move", "move"]},
        {("mix", "A"): (True, False, True)},
    )
    assert report.explicit.accuracy == 1.0
    assert (report.explicit.n_correct, report.explicit.n_steps) == (2, 2)
    assert report.implicit.accuracy == 0.0
    assert (report.implicit.n_correct, report.implicit.n_steps) == (0, 1)


def test_split_empty_bucket_has_no_accuracy():
    gold = {
        "mix": AnnotationGrid(
            procedure_id="mix",
            entries={"A": _track(["exist"], ["?", "?"])},
        )
    }
    report = eval_split(gold, {("mix", "A"): ["exist"]}, {("mix", "A"): (True,)})
    assert report.explicit.accuracy == 1.0
    assert report.implicit.accuracy is None
    assert report.implicit.n_steps == 0


def test_generated_corpus_identity_scores_perfect():
    procedures, grids = make_corpus(5, PROPARA, seed=13)
    document = eval_document_level(grids, grids)
    sentence = eval_sentence_level(grids, grids)
    assert document.macro_f1 == 1.0
    assert sentence.macro == 1.0

"""Shared test utilities: brute-force decoding oracle and random model builders."""

from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np

from proctrack.corpus import PROPARA, StateVocabulary
from proctrack.transitions import TransitionModel

FIXTURES = Path(__file__).parent / "fixtures"

CORPUS_PROPARA = FIXTURES / "corpus_propara.jsonl"
MODEL_PROPARA = FIXTURES / "model_propara.json"
EMISSIONS_PROPARA = FIXTURES / "emissions_propara.jsonl"
GOLDEN_DIR = FIXTURES / "golden"


def brute_force_decode(emissions: np.ndarray, model: TransitionModel):
    """Exhaustive max over all label paths.

    Scores are accumulated left to right, one addition per term, so a path's
    score is bit-identical to the dynamic program's value for that path.
    Returns (best_path, best_score); best_path is None when no path has a
    finite score.
    """
    scores = np.asarray(emissions, dtype=float)
    n_steps, n_labels = scores.shape
    best_path = None
    best = -np.inf
    for path in itertools.product(range(n_labels), repeat=n_steps):
        s = model.start_scores[path[0]] + scores[0, path[0]]
        for t in range(1, n_steps):
            s = s + model.trans_scores[path[t - 1], path[t]] + scores[t, path[t]]
        if s > best:
            best = s
            best_path = path
    return best_path, float(best)


def exhaustive_best_score(emissions: np.ndarray, model: TransitionModel) -> float:
    """Max path score by scoring every one of the L**T label paths.

    Prefix scores are kept for all paths (no pruning); each extension adds
    the transition then the emission, the same association order as
    brute_force_decode and the decoder, so the max is bit-identical.
    """
    scores = np.asarray(emissions, dtype=float)
    n_steps, n_labels = scores.shape
    prefix = model.start_scores + scores[0]
    last = np.arange(n_labels)
    for t in range(1, n_steps):
        prefix = (prefix[:, None] + model.trans_scores[last]) + scores[t][None, :]
        prefix = prefix.reshape(-1)
        last = np.tile(np.arange(n_labels), last.size)
    return float(prefix.max())


def path_score(labels, emissions: np.ndarray, model: TransitionModel) -> float:
    """Score of one label-index path, same accumulation order as the decoder."""
    scores = np.asarray(emissions, dtype=float)
    s = model.start_scores[labels[0]] + scores[0, labels[0]]
    for t in range(1, len(labels)):
        s = s + model.trans_scores[labels[t - 1], labels[t]] + scores[t, labels[t]]
    return float(s)


def fuzz_vocabulary(n_labels: int) -> StateVocabulary:
    labels = tuple(f"s{i}" for i in range(n_labels))
    return StateVocabulary(
        name=f"fuzz{n_labels}", labels=labels, nonexistent_states=frozenset()
    )


def random_model(rng: np.random.Generator, n_labels: int, max_steps: int) -> TransitionModel:
    """Random scores with random impossible edges, but at least one legal path.

    A witness path of length max_steps is drawn first and its edges are forced
    finite, so every instance with n_steps <= max_steps is decodable.
    """
    start = rng.normal(size=n_labels)
    trans = rng.normal(size=(n_labels, n_labels))
    start[rng.random(n_labels) < 0.35] = -np.inf
    trans[rng.random((n_labels, n_labels)) < 0.35] = -np.inf
    witness = [int(rng.integers(n_labels)) for _ in range(max_steps)]
    if not np.isfinite(start[witness[0]]):
        start[witness[0]] = float(rng.normal())
    for a, b in zip(witness, witness[1:]):
        if not np.isfinite(trans[a, b]):
            trans[a, b] = float(rng.normal())
    return TransitionModel(
        vocabulary=fuzz_vocabulary(n_labels),
        start_scores=start,
        trans_scores=trans,
    )


def random_walk_states(
    rng: np.random.Generator, model: TransitionModel, n_steps: int
) -> list[str]:
    """Sample a state sequence along finite-scored edges of a model.

    This is the support of what the decoder can emit, which is the input
    domain the resolver sees in practice.
    """
    labels = model.vocabulary.labels
    starts = [i for i in range(len(labels)) if np.isfinite(model.start_scores[i])]
    cur = int(rng.choice(starts))
    out = [labels[cur]]
    for _ in range(n_steps - 1):
        nxt = [j for j in range(len(labels)) if np.isfinite(model.trans_scores[cur, j])]
        if not nxt:
            break
        cur = int(rng.choice(nxt))
        out.append(labels[cur])
    return out


LOCATION_PRED_POOL = (
    "none",
    "NONE",
    "unknown",
    "Unknown",
    "?",
    "-",
    "",
    "soil",
    "the soil",
    "Power Plant",
    "power plant",
    "river bed.",
    "  padded  ",
    "sediment; rock",
)


def random_location_preds(rng: np.random.Generator, n_slots: int) -> list[str]:
    return [str(rng.choice(LOCATION_PRED_POOL)) for _ in range(n_slots)]


__all__ = [
    "FIXTURES",
    "CORPUS_PROPARA",
    "MODEL_PROPARA",
    "EMISSIONS_PROPARA",
    "GOLDEN_DIR",
    "PROPARA",
    "brute_force_decode",
    "exhaustive_best_score",
    "path_score",
    "fuzz_vocabulary",
    "random_model",
    "random_walk_states",
    "random_location_preds",
    "LOCATION_PRED_POOL",
]

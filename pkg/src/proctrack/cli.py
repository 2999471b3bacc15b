"""Command-line front end.

Subcommands: stats, format-qa, estimate-transitions, synth, decode,
resolve, evaluate, tune, pipeline. Exit codes: 0 success, 2 validation
error, 3 decode error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import consistency, corpus, decoder, pipeline, qaformat, synth, transitions, tuner
from .errors import DecodeError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DECODE = 3
EXIT_IO = 4


def _add_corpus_args(sub):
    sub.add_argument("--corpus", required=True, help="corpus file (JSON lines)")
    sub.add_argument("--vocab", required=True, choices=sorted(corpus.VOCABULARIES),
                     help="state vocabulary")


def _load(args):
    vocabulary = corpus.get_vocabulary(args.vocab)
    procedures, grids = corpus.load_corpus(args.corpus, vocabulary)
    return vocabulary, procedures, grids


def _parse_grid(spec: str):
    try:
        start, stop, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise ValidationError(
            f"bad grid spec {spec!r}; expected start:stop:step") from None
    if step <= 0 or stop < start:
        raise ValidationError(f"bad grid spec {spec!r}")
    count = int(round((stop - start) / step)) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


def cmd_stats(args) -> int:
    _, procedures, _ = _load(args)
    stats = corpus.split_stats(procedures)
    print(corpus.format_stats_table({args.corpus: stats}))
    return EXIT_OK


def cmd_format_qa(args) -> int:
    vocabulary, procedures, grids = _load(args)
    kinds = tuple(k.strip() for k in args.kinds.split(",") if k.strip())
    count = qaformat.export_instances(procedures, grids, vocabulary,
                                      args.out, kinds=kinds)
    print(f"wrote {count} instances to {args.out}")
    return EXIT_OK


def cmd_estimate_transitions(args) -> int:
    vocabulary, procedures, grids = _load(args)
    model = transitions.estimate(grids.values(), vocabulary)
    transitions.save_model(model, args.out)
    if args.min_count is not None:
        rare = transitions.audit_rare_transitions(model, args.min_count)
        for p, q, count in rare:
            print(f"rare transition {p} -> {q}: seen {count} time(s)")
        if not rare:
            print(f"no transitions seen fewer than {args.min_count} times")
    print(f"wrote transition model ({model.sequence_count} sequences) to {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    vocabulary, procedures, grids = _load(args)
    bias = {}
    for key in ("explicit", "implicit", "even", "odd"):
        value = getattr(args, f"bias_{key}")
        if value:
            bias[key] = value
    config = synth.OracleConfig(
        state_noise=args.state_noise,
        location_noise=args.location_noise,
        corruption_bias=bias or None,
        seed=args.seed,
    )
    sets = synth.synth_emissions(procedures, grids, vocabulary, config)
    decoder.save_emissions(sets, args.out)
    total = sum(len(s.tracks) for s in sets.values())
    print(f"wrote emissions for {total} entities to {args.out}")
    return EXIT_OK


def cmd_decode(args) -> int:
    vocabulary, procedures, _ = _load(args)
    model = transitions.load_model(args.model)
    emissions = decoder.load_emissions(args.emissions, procedures, vocabulary)
    config = decoder.DecodeConfig(tau_exp=args.tau_exp, tau_imp=args.tau_imp)
    count = 0
    with open(args.out, "w", encoding="utf-8") as handle:
        for procedure in procedures:
            eset = emissions.get(procedure.id)
            if eset is None:
                continue
            for entity_id, track in eset.tracks.items():
                entity = procedure.entity(entity_id)
                flags = decoder.detect_mentions(procedure, entity)
                weighted = decoder.weight_emissions(track.state_logits, flags, config)
                try:
                    states, score = decoder.viterbi(weighted, model, relax=args.relax)
                except DecodeError as exc:
                    raise type(exc)(
                        f"procedure {procedure.id!r}, entity {entity_id!r}: {exc}"
                    ) from exc
                record = {
                    "procedure_id": procedure.id,
                    "entity_id": entity_id,
                    "states": states,
                    "score": score,
                }
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")
                count += 1
    print(f"decoded {count} entities to {args.out}")
    return EXIT_OK


def cmd_resolve(args) -> int:
    vocabulary, procedures, _ = _load(args)
    emissions = decoder.load_emissions(args.emissions, procedures, vocabulary)
    by_id = {p.id: p for p in procedures}
    grids: dict[str, corpus.AnnotationGrid] = {}
    with open(args.decoded, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            where = f"{args.decoded}:{lineno}"
            try:
                record = json.loads(line)
                proc_id = record["procedure_id"]
                entity_id = record["entity_id"]
                states = record["states"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValidationError(f"{where}: bad decoded record: {exc}") from None
            procedure = by_id.get(proc_id)
            if procedure is None:
                raise ValidationError(f"{where}: unknown procedure {proc_id!r}")
            eset = emissions.get(proc_id)
            track = eset.tracks.get(entity_id) if eset else None
            if track is None:
                raise ValidationError(
                    f"{where}: no emissions for ({proc_id!r}, {entity_id!r})")
            resolved = consistency.resolve(states, track.location_preds, vocabulary)
            grid = grids.setdefault(proc_id, corpus.AnnotationGrid(proc_id, {}))
            grid.entries[entity_id] = resolved.track()
    corpus.save_predictions(procedures, grids, args.out)
    total = sum(len(g.entries) for g in grids.values())
    print(f"resolved {total} tracks to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .evaluator import (eval_document_level, eval_recipes_locations,
                            eval_sentence_level)

    vocabulary, procedures, gold_grids = _load(args)
    if not gold_grids:
        raise ValidationError("evaluation needs gold grids in the corpus file")
    pred_grids, violations = corpus.load_predictions(
        args.predictions, procedures, vocabulary)
    for proc_id, violation in violations:
        logging.getLogger(__name__).warning(
            "inconsistent prediction %s/%s step %d: %s",
            proc_id, violation.entity_id, violation.step, violation.message)
    document = eval_document_level(gold_grids, pred_grids)
    payload = {"document_level": pipeline.document_dict(document)}
    sentence = eval_sentence_level(gold_grids, pred_grids)
    payload["sentence_level"] = {
        "cat1": {"score": sentence.cat1.score},
        "cat2": {"score": sentence.cat2.score},
        "cat3": {"score": sentence.cat3.score},
        "macro": sentence.macro,
        "micro": sentence.micro,
    }
    if vocabulary.name == "recipes":
        changes = eval_recipes_locations(gold_grids, pred_grids, vocabulary)
        payload["recipes_location_changes"] = pipeline.question_dict(changes)
    if args.per_procedure:
        payload["per_procedure"] = {
            proc_id: pipeline.document_dict(
                eval_document_level({proc_id: gold_grids[proc_id]},
                                    {proc_id: pred_grids.get(
                                        proc_id, corpus.AnnotationGrid(proc_id, {}))}))
            for proc_id in sorted(gold_grids)
        }
    text = json.dumps(payload, ensure_ascii=False, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
    print(text)
    return EXIT_OK


def cmd_tune(args) -> int:
    vocabulary, procedures, gold_grids = _load(args)
    model = transitions.load_model(args.model)
    emissions = decoder.load_emissions(args.emissions, procedures, vocabulary)
    grid = _parse_grid(args.grid) if args.grid else None
    result = tuner.tune(procedures, gold_grids, emissions, model, vocabulary,
                        grid=grid, relax=args.relax, jobs=args.jobs)
    payload = {
        "best": {"tau_exp": result.tau_exp, "tau_imp": result.tau_imp,
                 "macro_f1": result.f1},
        "table": [
            {"tau_exp": te, "tau_imp": ti, "macro_f1": f1}
            for te, ti, f1 in result.table
        ],
    }
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, ensure_ascii=False, indent=2)
            handle.write("\n")
    print(f"best tau_exp={result.tau_exp} tau_imp={result.tau_imp} "
          f"macro_f1={result.f1:.4f}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    vocabulary, procedures, gold_grids = _load(args)
    if not gold_grids:
        raise ValidationError("the pipeline needs gold grids to score against")
    model = transitions.load_model(args.model)
    emissions = decoder.load_emissions(args.emissions, procedures, vocabulary)
    config = decoder.DecodeConfig(tau_exp=args.tau_exp, tau_imp=args.tau_imp)
    result = pipeline.run_pipeline(
        procedures, gold_grids, emissions, model, vocabulary, config,
        relax=args.relax, jobs=args.jobs, seed=args.seed,
        per_procedure=args.per_procedure)
    pipeline.write_outputs(result, procedures, args.out)
    print(pipeline.render_report(result), end="")
    print(f"wrote predictions and reports to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proctrack",
        description="entity state tracking: QA formatting, decoding, scoring")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("stats", help="corpus size and shape")
    _add_corpus_args(sub)
    sub.set_defaults(func=cmd_stats)

    sub = commands.add_parser("format-qa", help="export QA instances")
    _add_corpus_args(sub)
    sub.add_argument("--kinds", default="state,location",
                     help="comma-separated subset of: state,location")
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_format_qa)

    sub = commands.add_parser("estimate-transitions",
                              help="count gold transitions into a model file")
    _add_corpus_args(sub)
    sub.add_argument("--out", required=True)
    sub.add_argument("--min-count", type=int, default=None,
                     help="report transitions seen fewer than this many times")
    sub.set_defaults(func=cmd_estimate_transitions)

    sub = commands.add_parser("synth", help="fabricate noisy emissions for gold")
    _add_corpus_args(sub)
    sub.add_argument("--state-noise", type=float, default=0.0)
    sub.add_argument("--location-noise", type=float, default=0.0)
    sub.add_argument("--bias-explicit", type=float, default=0.0)
    sub.add_argument("--bias-implicit", type=float, default=0.0)
    sub.add_argument("--bias-even", type=float, default=0.0)
    sub.add_argument("--bias-odd", type=float, default=0.0)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_synth)

    sub = commands.add_parser("decode", help="Viterbi-decode state sequences")
    _add_corpus_args(sub)
    sub.add_argument("--emissions", required=True)
    sub.add_argument("--model", required=True)
    sub.add_argument("--tau-exp", type=float, default=0.6)
    sub.add_argument("--tau-imp", type=float, default=0.7)
    sub.add_argument("--relax", action="store_true",
                     help="replace -inf model scores so decoding cannot fail")
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_decode)

    sub = commands.add_parser("resolve",
                              help="repair locations around decoded states")
    _add_corpus_args(sub)
    sub.add_argument("--decoded", required=True, help="output of decode")
    sub.add_argument("--emissions", required=True)
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_resolve)

    sub = commands.add_parser("evaluate", help="score prediction grids")
    _add_corpus_args(sub)
    sub.add_argument("--predictions", required=True)
    sub.add_argument("--per-procedure", action="store_true")
    sub.add_argument("--out", default=None)
    sub.set_defaults(func=cmd_evaluate)

    sub = commands.add_parser("tune", help="grid-search the emission weights")
    _add_corpus_args(sub)
    sub.add_argument("--emissions", required=True)
    sub.add_argument("--model", required=True)
    sub.add_argument("--grid", default=None, help="start:stop:step (default 0.1:1.5:0.1)")
    sub.add_argument("--relax", action="store_true")
    sub.add_argument("--jobs", type=int, default=1)
    sub.add_argument("--out", default=None)
    sub.set_defaults(func=cmd_tune)

    sub = commands.add_parser("pipeline",
                              help="decode, resolve, and score in one go")
    _add_corpus_args(sub)
    sub.add_argument("--emissions", required=True)
    sub.add_argument("--model", required=True)
    sub.add_argument("--tau-exp", type=float, default=0.6)
    sub.add_argument("--tau-imp", type=float, default=0.7)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--relax", action="store_true")
    sub.add_argument("--jobs", type=int, default=1)
    sub.add_argument("--per-procedure", action="store_true")
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DecodeError as exc:
        print(f"decode error: {exc}", file=sys.stderr)
        return EXIT_DECODE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

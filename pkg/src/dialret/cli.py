"""Command-line entry point wiring the whole pipeline.

Subcommands: synth, validate, index, train, query, igs-build, simulate,
compare, serve. Every run writes its fully resolved configuration next to
its primary output so reported numbers stay reproducible.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 runtime
failure. Errors go to stderr as a single JSON line.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from dialret.corpus import (
    EMPTY_HISTORY,
    SyntheticConfig,
    gen_synthetic,
    load_corpus,
    save_corpus,
)
from dialret.dialog import Policy, run_experiment
from dialret.encoders import (
    EncoderSpec,
    fit_encoder,
    load_encoder,
    save_encoder,
)
from dialret.errors import CorpusError, DialretError, EncoderError
from dialret.evaluation import (
    compare_policies,
    curve_obj,
    export_report,
    per_round_report,
)
from dialret.igs import build_igs_dataset, export_igs
from dialret.retrieval import (
    TrainConfig,
    build_index,
    load_index,
    save_index,
    train_linear_projection,
    vrm,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems via exit code 1."""

    def error(self, message):
        raise _UsageError(message)


def _emit_error(code: str, message: str) -> None:
    print(json.dumps({"error": code, "message": message}), file=sys.stderr)


def _write_resolved_config(output_path: str | Path, config: dict) -> None:
    side = Path(str(output_path) + ".config.json")
    with open(side, "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _encoder_spec_from_args(args) -> EncoderSpec:
    if getattr(args, "encoder_spec", None):
        raw = args.encoder_spec
        if os.path.exists(raw):
            with open(raw, encoding="utf-8") as fh:
                obj = json.load(fh)
        else:
            obj = json.loads(raw)
        return EncoderSpec.from_json_obj(obj)
    return EncoderSpec(kind="tfidf", tau=args.tau)


def _load_components(args):
    """corpus + encoder + index for the simulation-style subcommands."""
    corpus = load_corpus(args.corpus)
    if getattr(args, "encoder_file", None):
        encoder = load_encoder(args.encoder_file)
    else:
        encoder = fit_encoder(corpus, _encoder_spec_from_args(args))
    if getattr(args, "index_file", None):
        index = load_index(args.index_file)
    else:
        index = build_index(corpus, encoder)
    return corpus, encoder, index


def _policy_from_args(args) -> Policy:
    policy = Policy(kind=args.policy, seed=args.seed, k=args.k)
    policy.validate()
    return policy


def _add_component_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", required=True, help="corpus JSONL path")
    p.add_argument("--encoder-spec", help="encoder spec as inline JSON or a file path")
    p.add_argument("--encoder-file", help="fitted encoder JSON (overrides --encoder-spec)")
    p.add_argument("--index-file", help="prebuilt binary index (skips re-encoding)")
    p.add_argument("--tau", type=float, default=1.0, help="softmax temperature")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dialret",
                     description="dialog-driven retrieval engine and simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a deterministic synthetic corpus")
    p.add_argument("--n", type=int, default=100, help="number of records")
    p.add_argument("--m", type=int, default=10, help="QA pairs per record")
    p.add_argument("--vocab", type=int, default=500, help="vocabulary size")
    p.add_argument("--disc", type=int, default=1,
                   help="record-unique tokens per answer")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("-o", "--output", required=True, help="output JSONL path")

    p = sub.add_parser("validate", help="validate a corpus file")
    p.add_argument("corpus", help="corpus JSONL path")

    p = sub.add_parser("index", help="fit an encoder and build the index")
    _add_component_flags(p)
    p.add_argument("-o", "--output", required=True, help="output index path")
    p.add_argument("--save-encoder", help="also write the fitted encoder JSON here")

    p = sub.add_parser("train", help="train the linear projection encoder")
    p.add_argument("--corpus", required=True)
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, help="projection dim (default: base dim)")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("-o", "--output", required=True, help="trained encoder JSON path")

    p = sub.add_parser("query", help="run one retrieval against an index")
    _add_component_flags(p)
    p.add_argument("--text", required=True, help="query text")
    p.add_argument("--top", type=int, default=10)

    p = sub.add_parser("igs-build", help="build and export the IGS dataset")
    _add_component_flags(p)
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--strict", action="store_true",
                   help="fail on records with pools smaller than rounds")
    p.add_argument("-o", "--output", required=True, help="output JSONL path")

    p = sub.add_parser("simulate", help="full-corpus dialog simulation + report")
    _add_component_flags(p)
    p.add_argument("--policy", default="igs_oracle",
                   choices=["igs_oracle", "original_order", "random", "candidate_aware"])
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", default="json", choices=["json", "csv"])
    p.add_argument("--curve", help="also write the chart-ready curve JSON here")
    p.add_argument("-o", "--output", required=True, help="report path")

    p = sub.add_parser("compare", help="run several policies and emit one report each")
    _add_component_flags(p)
    p.add_argument("--policies", default="igs_oracle,original_order,random",
                   help="comma-separated policy kinds")
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output-dir", required=True)

    p = sub.add_parser("serve", help="start the human-in-the-loop session service")
    _add_component_flags(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--policy", default="igs_oracle",
                   choices=["igs_oracle", "original_order", "random", "candidate_aware"])
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subset", type=int,
                   help="restrict retrieval to a random subset of this size")
    p.add_argument("--subset-seed", type=int, default=0)
    p.add_argument("--data-dir", default="sessions",
                   help="session log directory")
    p.add_argument("--static-dir", help="built web UI to host at /")
    p.add_argument("--debug", action="store_true",
                   help="expose ground-truth ranks during sessions")

    return parser


def _resolved(args) -> dict:
    resolved = {k: v for k, v in vars(args).items() if k != "command"}
    resolved["subcommand"] = args.command
    return resolved


def cmd_synth(args) -> int:
    config = SyntheticConfig(
        n_videos=args.n, m_qa=args.m, vocab_size=args.vocab,
        discriminative_tokens_per_answer=args.disc, seed=args.seed,
    )
    corpus = gen_synthetic(config)
    save_corpus(corpus, args.output)
    _write_resolved_config(args.output, _resolved(args))
    print(f"wrote {len(corpus)} records to {args.output}")
    return EXIT_OK


def cmd_validate(args) -> int:
    corpus = load_corpus(args.corpus)
    corpus.validate()
    print(f"{args.corpus}: OK ({len(corpus)} records)")
    return EXIT_OK


def cmd_index(args) -> int:
    corpus = load_corpus(args.corpus)
    if args.encoder_file:
        encoder = load_encoder(args.encoder_file)
    else:
        encoder = fit_encoder(corpus, _encoder_spec_from_args(args))
    index = build_index(corpus, encoder)
    save_index(index, args.output)
    if args.save_encoder:
        save_encoder(encoder, args.save_encoder)
    _write_resolved_config(args.output, _resolved(args))
    print(f"indexed {len(index)} items (d={index.Y.shape[1]}) -> {args.output}")
    return EXIT_OK


def cmd_train(args) -> int:
    corpus = load_corpus(args.corpus)
    result = train_linear_projection(
        corpus,
        EncoderSpec(kind="tfidf"),
        TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                    learning_rate=args.learning_rate, seed=args.seed),
        projection_dim=args.dim,
        tau=args.tau,
    )
    save_encoder(result.encoder, args.output)
    _write_resolved_config(args.output, dict(_resolved(args),
                                             epoch_losses=result.epoch_losses))
    first, last = result.epoch_losses[0], result.epoch_losses[-1]
    print(f"trained {args.epochs} epochs: loss {first:.6f} -> {last:.6f}")
    return EXIT_OK


def cmd_query(args) -> int:
    corpus, encoder, index = _load_components(args)
    result = vrm(args.text, EMPTY_HISTORY, encoder, index)
    for vid, prob in result.top_k(args.top):
        print(f"{result.rank_of[vid]:4d}  {vid}  {prob:.6f}")
    return EXIT_OK


def cmd_igs_build(args) -> int:
    corpus, encoder, index = _load_components(args)
    dataset = build_igs_dataset(corpus, encoder, index, M=args.rounds,
                                k=args.k, strict=args.strict)
    export_igs(dataset, args.output)
    _write_resolved_config(args.output, _resolved(args))
    print(f"wrote {dataset.total()} targets over {args.rounds} rounds "
          f"to {args.output}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    corpus, encoder, index = _load_components(args)
    policy = _policy_from_args(args)
    experiment = run_experiment(corpus, policy, args.rounds, encoder, index)
    report = per_round_report(
        experiment,
        config={"policy": policy.label(), "rounds": args.rounds,
                "corpus": args.corpus, "skipped": experiment.skipped_ids,
                "encoder_fingerprint": index.encoder_fingerprint},
    )
    export_report(report, args.output, format=args.format)
    if args.curve:
        with open(args.curve, "w", encoding="utf-8") as fh:
            json.dump(curve_obj(report), fh, indent=2)
            fh.write("\n")
    _write_resolved_config(args.output, _resolved(args))
    for row in report.per_round:
        print(f"round {row.round}: R@1={row.r1:.1f} R@5={row.r5:.1f} "
              f"R@10={row.r10:.1f} MedianR={row.median_rank:.1f} "
              f"MeanR={row.mean_rank:.1f}")
    return EXIT_OK


def cmd_compare(args) -> int:
    corpus, encoder, index = _load_components(args)
    policies = []
    for kind in args.policies.split(","):
        kind = kind.strip()
        if kind:
            policies.append(Policy(kind=kind, seed=args.seed, k=args.k))
            policies[-1].validate()
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = compare_policies(corpus, policies, args.rounds, encoder, index)
    for label, report in table.items():
        safe = label.replace("(", "_").replace(")", "").replace("=", "-")
        export_report(report, out_dir / f"{safe}.json", format="json")
        last = report.per_round[-1]
        print(f"{label}: round-{last.round} R@1={last.r1:.1f}")
    _write_resolved_config(out_dir / "compare", _resolved(args))
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from dialret.service import ServiceConfig, create_app

    corpus, encoder, index = _load_components(args)
    config = ServiceConfig(
        policy=Policy(kind=args.policy, seed=args.seed, k=args.k),
        top_k=args.k,
        data_dir=args.data_dir,
        debug=args.debug,
        subset=args.subset,
        subset_seed=args.subset_seed,
        static_dir=args.static_dir,
    )
    app = create_app(corpus, encoder, index, config)
    _write_resolved_config(Path(args.data_dir) / "serve", _resolved(args))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


_COMMANDS = {
    "synth": cmd_synth,
    "validate": cmd_validate,
    "index": cmd_index,
    "train": cmd_train,
    "query": cmd_query,
    "igs-build": cmd_igs_build,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("DIALRET_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        _emit_error("usage", str(exc))
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (CorpusError, EncoderError) as exc:
        _emit_error("data", str(exc))
        return EXIT_DATA
    except DialretError as exc:
        _emit_error("runtime", str(exc))
        return EXIT_RUNTIME
    except OSError as exc:
        _emit_error("io", str(exc))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

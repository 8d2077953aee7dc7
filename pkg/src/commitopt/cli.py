"""Command-line entry point.

Commands: optimize, ablate, corpus build|info, calibrate, score, evaluate.
Exit codes: 0 success, 1 configuration error, 2 optimization/runtime error.
Every command runs fully offline with --mock.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from . import corpus as corpus_mod
from . import textmetrics
from .contexts import ContextCollector, ContextKind, SourceTree, classify_commit_type
from .config import RunConfig
from .diffs import commit_message, diff_for_commit, parse_unified_diff
from .errors import CommitOptError, ConfigError, UnknownTool
from .evaluate import calibrate_weights, load_calibration_file
from .optimize import optimize, optimize_no_search


def _write_atomic(path: str | Path, text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=target.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--mock", action="store_true", default=None,
                        help="run fully offline with deterministic mocks")
    parser.add_argument("--equation", choices=["even", "correlation"])
    parser.add_argument("--k", type=int, help="retrieval depth")
    parser.add_argument("--p", type=float, help="threshold percentage")
    parser.add_argument("--step-limit", type=int, dest="step_limit")
    parser.add_argument("--escalated-temperature", type=float,
                        dest="escalated_temperature")
    parser.add_argument("--corpus", dest="corpus_path", help="corpus index file")
    parser.add_argument("--weights", dest="weights_path", help="calibrated weights file")
    parser.add_argument("--model", dest="chat_model", help="chat model id")
    parser.add_argument("--trace-out", dest="trace_out", help="trace JSONL output path")


def _add_input_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--repo", help="repository working directory")
    parser.add_argument("--commit", help="commit-ish providing diff and message")
    parser.add_argument("--diff-file", help="unified diff file, '-' for stdin")
    parser.add_argument("--message", help="human-written message text")
    parser.add_argument("--message-file", help="file with the human-written message")
    parser.add_argument("--source-tree", help="post-change source tree (default: --repo)")
    parser.add_argument("--out", help="result JSON output path (also printed)")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {
        key: getattr(args, key, None)
        for key in (
            "mock",
            "equation",
            "k",
            "p",
            "step_limit",
            "escalated_temperature",
            "corpus_path",
            "weights_path",
            "chat_model",
            "trace_out",
        )
    }
    return RunConfig.load(getattr(args, "config", None), overrides)


def _read_inputs(args: argparse.Namespace) -> tuple[str, str]:
    """(diff_text, message) from flags: file/stdin or repo+commit."""
    if args.diff_file:
        diff_text = (
            sys.stdin.read()
            if args.diff_file == "-"
            else Path(args.diff_file).read_text(encoding="utf-8")
        )
    elif args.repo and args.commit:
        diff_text = diff_for_commit(args.repo, args.commit)
    else:
        raise ConfigError("provide --diff-file or --repo with --commit")

    if args.message is not None:
        message = args.message
    elif args.message_file:
        message = Path(args.message_file).read_text(encoding="utf-8").strip("\n")
    elif args.repo and args.commit:
        message = commit_message(args.repo, args.commit)
    else:
        raise ConfigError("provide --message, --message-file, or --repo with --commit")
    if not message.strip():
        raise ConfigError("the human-written message is empty")
    return diff_text, message


def _run_optimize(args: argparse.Namespace, disabled: frozenset[ContextKind],
                  no_search: bool) -> int:
    cfg = _config_from_args(args)
    diff_text, message = _read_inputs(args)
    diff = parse_unified_diff(diff_text)

    gateway = cfg.make_gateway()
    evaluator = cfg.make_evaluator(gateway)
    tree_root = args.source_tree or args.repo
    if not tree_root:
        raise ConfigError("provide --source-tree (or --repo) for context extraction")
    tree = SourceTree(tree_root)

    collector = ContextCollector(
        gateway=gateway,
        forge_config=cfg.forge_config(),
        summary_config=cfg.summary_config(),
        disabled=disabled,
    )
    warnings: list[str] = []
    contexts = collector.collect(diff, tree, message, warnings)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)

    commit_type = classify_commit_type(
        diff, message, gateway, taxonomy=cfg.taxonomy, model=cfg.chat_model
    )
    runner = optimize_no_search if no_search else optimize
    result = runner(
        diff, message, contexts, cfg.optimizer_config(), evaluator, gateway, commit_type
    )

    if cfg.trace_out:
        _write_atomic(cfg.trace_out, result.trace.to_jsonl())
    payload = result.to_json()
    if args.out:
        _write_atomic(args.out, payload + "\n")
    print(payload)
    return 0


def cmd_optimize(args: argparse.Namespace) -> int:
    return _run_optimize(args, disabled=frozenset(), no_search=False)


def cmd_ablate(args: argparse.Namespace) -> int:
    mode = args.mode
    if mode == "no-search":
        return _run_optimize(args, disabled=frozenset(), no_search=True)
    if mode.startswith("disable-tool:"):
        name = mode.split(":", 1)[1]
        try:
            kind = ContextKind(name)
        except ValueError:
            raise UnknownTool(
                f"unknown context kind {name!r}; expected one of "
                f"{[k.value for k in ContextKind]}"
            ) from None
        return _run_optimize(args, disabled=frozenset({kind}), no_search=False)
    raise ConfigError(f"unknown ablation mode {mode!r}")


def cmd_corpus(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    if args.corpus_cmd == "build":
        repos = [r for chunk in args.repos for r in chunk.split(",") if r]
        gateway = cfg.make_gateway()
        if args.filter == "llm":
            keep = corpus_mod.LlmGoodMessageFilter(gateway, model=cfg.chat_model)
        else:
            keep = corpus_mod.accept_all
        records = corpus_mod.filter_good(
            corpus_mod.mine_commits(repos, max_commits=args.max_commits), keep
        )
        index = corpus_mod.build_index(
            records, cfg.make_embed_client(), out_path=args.out, source_repos=repos
        )
        print(json.dumps(index.metadata, indent=2, sort_keys=True))
        return 0
    if args.corpus_cmd == "info":
        index = corpus_mod.load_index(args.index)
        print(json.dumps(index.metadata, indent=2, sort_keys=True))
        return 0
    raise ConfigError(f"unknown corpus subcommand {args.corpus_cmd!r}")


def cmd_calibrate(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    items = load_calibration_file(args.labeled)
    gateway = cfg.make_gateway()
    # Calibration always measures similarity, regardless of final equation.
    from .evaluate import Evaluator, EvaluatorWeights

    evaluator = Evaluator(
        gateway=gateway,
        weights=EvaluatorWeights.even(),
        embed_client=cfg.make_embed_client(),
        index=cfg.load_corpus(),
        k=cfg.k,
        model=cfg.chat_model,
    )
    weights = calibrate_weights(items, evaluator)
    doc = weights.to_json()
    if args.out:
        _write_atomic(args.out, doc + "\n")
    print(doc)
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    diff_text, message = _read_inputs(args)
    diff = parse_unified_diff(diff_text)
    gateway = cfg.make_gateway()
    evaluator = cfg.make_evaluator(gateway)
    scores, opt = evaluator.evaluate(diff, message)
    print(
        json.dumps(
            {"metric_scores": scores.as_dict(), "opt_score": opt},
            indent=2,
            sort_keys=True,
        )
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    candidates = Path(args.candidates).read_text(encoding="utf-8").splitlines()
    references = Path(args.references).read_text(encoding="utf-8").splitlines()
    if len(candidates) != len(references):
        raise ConfigError(
            f"{len(candidates)} candidates vs {len(references)} references"
        )
    reports = [
        textmetrics.report(cand, ref) for cand, ref in zip(candidates, references)
    ]
    pairs = [
        {"bleu": r.bleu, "meteor": r.meteor, "rouge_l": r.rouge_l} for r in reports
    ]
    n = len(reports) or 1
    means = {
        "bleu": sum(r.bleu for r in reports) / n,
        "meteor": sum(r.meteor for r in reports) / n,
        "rouge_l": sum(r.rouge_l for r in reports) / n,
    }
    print(json.dumps({"pairs": pairs, "means": means}, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commitopt",
        description="Optimize human-written commit messages via guided search",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="optimize a commit message")
    _add_common_flags(p_opt)
    _add_input_flags(p_opt)
    p_opt.set_defaults(func=cmd_optimize)

    p_abl = sub.add_parser("ablate", help="run an ablation variant")
    p_abl.add_argument("--mode", required=True,
                       help="no-search or disable-tool:<ContextKind>")
    _add_common_flags(p_abl)
    _add_input_flags(p_abl)
    p_abl.set_defaults(func=cmd_ablate)

    p_cor = sub.add_parser("corpus", help="build or inspect the corpus index")
    cor_sub = p_cor.add_subparsers(dest="corpus_cmd", required=True)
    p_build = cor_sub.add_parser("build")
    p_build.add_argument("--repos", action="append", required=True,
                         help="repository path/URL (repeat or comma-separate)")
    p_build.add_argument("--out", required=True)
    p_build.add_argument("--filter", choices=["accept-all", "llm"], default="accept-all")
    p_build.add_argument("--max-commits", type=int, dest="max_commits")
    _add_common_flags(p_build)
    p_build.set_defaults(func=cmd_corpus)
    p_info = cor_sub.add_parser("info")
    p_info.add_argument("--index", required=True)
    _add_common_flags(p_info)
    p_info.set_defaults(func=cmd_corpus)

    p_cal = sub.add_parser("calibrate", help="fit evaluator weights from labels")
    p_cal.add_argument("--labeled", required=True, help="JSON-lines labeled set")
    p_cal.add_argument("--out", help="weights JSON output path")
    _add_common_flags(p_cal)
    p_cal.set_defaults(func=cmd_calibrate)

    p_sco = sub.add_parser("score", help="score one message against a diff")
    _add_common_flags(p_sco)
    _add_input_flags(p_sco)
    p_sco.set_defaults(func=cmd_score)

    p_eva = sub.add_parser("evaluate", help="reference-based text metrics")
    p_eva.add_argument("--candidates", required=True)
    p_eva.add_argument("--references", required=True)
    p_eva.set_defaults(func=cmd_evaluate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnknownTool) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CommitOptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

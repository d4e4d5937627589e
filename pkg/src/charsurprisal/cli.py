"""Command-line interface.

Subcommands: segment, bpe-train, lm-train, surprisal, regress, oracle-check.
Every subcommand exits 0 on success, 1 when some rows or cells failed (an
``*.errors.json`` summary is written next to the output) and 2 on invalid
input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from . import __version__
from .analysis import (
    compute_surprisals,
    plot_rows,
    read_surprisals,
    regression_report,
    report_json,
    report_rows,
    rows_to_csv,
    surprisals_to_csv,
)
from .bpe import BPECodec, _atomic_write, train_bpe
from .data import DataError, load_dataset, load_frequencies, load_rois, load_stimuli
from .external import ENDPOINT_ENV, ExternalLMClient, ExternalTokenLM
from .lm import NGramTokenLM, train_ngram
from .marginal import CharLM
from .oracle import oracle_check
from .regression import CVConfig
from .text import DEFAULT_SPECS, Convention, Stimulus, focal_table, parse_specs, segment_rois

DEFAULT_SPEC_LIST = ",".join(s.label for s in DEFAULT_SPECS)


class UsageError(Exception):
    pass


def _conventions(value):
    if value == "both":
        return [Convention.LEADING, Convention.TRAILING]
    return [Convention.parse(value)]


def _specs(value):
    try:
        return parse_specs(value)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _existing(path, what):
    if path is None:
        raise UsageError(f"--{what} is required")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} file not found: {p}")
    return p


def _write_errors(out, errors):
    path = Path(str(out) + ".errors.json")
    _atomic_write(path, json.dumps({"errors": errors}, indent=2, ensure_ascii=False) + "\n")
    return path


def _emit(out, text):
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        _atomic_write(out, text)


# -- subcommands ---------------------------------------------------------


def cmd_segment(args) -> int:
    if args.text is not None:
        stimuli = {"s1": Stimulus("s1", args.text)}
    else:
        stimuli = load_stimuli(_existing(args.stimuli, "stimuli"))
    specs = _specs(args.specs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["stimulus_id", "convention", "focal_spec", "roi_index", "focal_yield", "status"])
    for sid, stim in stimuli.items():
        for conv in _conventions(args.convention):
            rois = segment_rois(stim, conv)
            if len(rois) < 2:
                print(f"warning: stimulus {sid!r} has a single ROI, which is skipped", file=sys.stderr)
            for spec, yields in focal_table(rois, specs).items():
                for k, y in enumerate(yields, start=2):
                    w.writerow([sid, conv.value, spec.label, k, y or "", "ok" if y else "missing"])
    _emit(args.out, buf.getvalue())
    return 0


def _read_corpus(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line for line in lines if line.strip()]


def cmd_bpe_train(args) -> int:
    corpus = _read_corpus(_existing(args.corpus, "corpus"))
    if args.vocab is None or args.merges is None:
        raise UsageError("--vocab and --merges output paths are required")
    try:
        codec, merges = train_bpe(corpus, args.vocab_size, min_frequency=args.min_frequency)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    codec.save(args.vocab, args.merges)
    print(f"vocabulary size {len(codec)} ({len(merges)} merges)")
    return 0


def heldout_split(lines, every=10):
    """Every ``every``-th line (1-based) is held out."""
    train = [s for i, s in enumerate(lines, 1) if i % every]
    held = [s for i, s in enumerate(lines, 1) if not i % every]
    return train, held


def cmd_lm_train(args) -> int:
    codec = _load_codec(args)
    corpus = _read_corpus(_existing(args.corpus, "corpus"))
    if args.lm is None:
        raise UsageError("--lm output path is required")
    if args.heldout is not None:
        train, held = corpus, _read_corpus(_existing(args.heldout, "heldout"))
    else:
        train, held = heldout_split(corpus)
    try:
        encoded = [codec.encode(s) for s in train]
        model = train_ngram(encoded, args.order, args.smoothing, len(codec))
        held_ids = [codec.encode(s) for s in held]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    model.save(args.lm)
    if held_ids:
        print(f"held-out perplexity {model.perplexity(held_ids):.4f} on {len(held_ids)} strings")
    else:
        print("no held-out strings; perplexity not computed")
    return 0


def _load_codec(args) -> BPECodec:
    vocab, merges = _existing(args.vocab, "vocab"), _existing(args.merges, "merges")
    try:
        return BPECodec.load(vocab, merges)
    except (ValueError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot load codec: {exc}") from exc


def _load_lm(args, codec):
    if args.lm is not None:
        try:
            model = NGramTokenLM.load(_existing(args.lm, "lm"))
        except (ValueError, UnicodeDecodeError) as exc:
            raise UsageError(str(exc)) from exc
        if model.vocab_size != len(codec):
            raise UsageError(f"LM vocabulary ({model.vocab_size}) differs from codec ({len(codec)})")
        return model
    try:
        return ExternalTokenLM(ExternalLMClient.from_env(len(codec)))
    except Exception as exc:  # noqa: BLE001
        raise UsageError(f"no --lm given and no usable {ENDPOINT_ENV}: {exc}") from exc


def cmd_surprisal(args) -> int:
    stimuli = load_stimuli(_existing(args.stimuli, "stimuli"))
    specs = _specs(args.specs)
    conventions = _conventions(args.convention)
    codec = _load_codec(args)
    model = _load_lm(args, codec)
    if args.beam_width < 1:
        raise UsageError("--beam-width must be >= 1")
    if args.rois is not None:
        explicit = load_rois(_existing(args.rois, "rois"), stimuli)
        rois = {c: explicit for c in conventions}
    else:
        rois = {c: {sid: segment_rois(s, c) for sid, s in stimuli.items()} for c in conventions}
    charlm = CharLM(
        codec,
        model,
        method=args.method,
        beam_width=args.beam_width,
        log_base=math.e if args.log_base == "e" else 2.0,
    )
    rows = compute_surprisals(charlm, rois, specs, include_eos=args.include_eos)
    _emit(args.out, surprisals_to_csv(rows))
    counts = {}
    for r in rows:
        counts[r.status] = counts.get(r.status, 0) + 1
    summary = ", ".join(f"{v} {k}" for k, v in sorted(counts.items())) or "no rows"
    print(f"{len(rows)} rows: {summary}", file=sys.stderr)
    errors = [
        {"stimulus_id": r.stimulus_id, "roi_index": r.roi_index, "convention": r.convention,
         "focal_spec": r.focal_spec, "error": r.error}
        for r in rows
        if r.status == "error"
    ]
    if errors:
        path = _write_errors(args.out or "surprisal", errors)
        print(f"{len(errors)} rows failed; see {path}", file=sys.stderr)
        return 1
    return 0


def cmd_regress(args) -> int:
    surprisals = read_surprisals(_existing(args.surprisals, "surprisals"))
    conventions = sorted({r.convention for r in surprisals})
    bundle = load_dataset(
        _existing(args.stimuli, "stimuli"),
        _existing(args.measurements, "measurements"),
        convention=conventions or ("leading",),
        rois_path=args.rois,
    )
    if args.frequencies is not None:
        freq = load_frequencies(_existing(args.frequencies, "frequencies"))
    else:
        raise UsageError("--frequencies is required for the Zipf predictor")
    try:
        cfg = CVConfig(
            folds=args.folds,
            seeds=args.seeds,
            permutations=args.permutations,
            llh_variance=args.llh_variance,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report = regression_report(bundle, surprisals, cfg, args.seed, freq, version=__version__)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "report.json", report_json(report))
    _atomic_write(out / "report.csv", rows_to_csv(report_rows(report)))
    _atomic_write(
        out / "plot_data.csv",
        rows_to_csv(
            plot_rows(report),
            ["measure", "convention", "focal_spec", "metric", "mean", "ci_low", "ci_high", "p_value"],
        ),
    )
    print(f"report written to {out}")
    if report["errors"]:
        path = _write_errors(out / "report", report["errors"])
        print(f"{len(report['errors'])} cells failed; see {path}", file=sys.stderr)
        return 1
    return 0


def cmd_oracle_check(args, beam_factory=None) -> int:
    kwargs = {}
    if args.vocab is not None or args.merges is not None or args.lm is not None:
        codec = _load_codec(args)
        kwargs = dict(codec=codec, lm=_load_lm(args, codec))
    if beam_factory is not None:
        kwargs["beam_factory"] = beam_factory
    if args.trials == 0:
        print("warning: 0 trials requested; nothing was checked", file=sys.stderr)
    report = oracle_check(args.trials, args.max_len, args.seed, **kwargs)
    if report.passed:
        print(f"oracle check passed: {report.trials} trials")
        return 0
    print(f"oracle check FAILED: {len(report.failures)} violation(s) in {report.trials} trials")
    for f in report.failures[:20]:
        print("  " + json.dumps(f, ensure_ascii=False))
    if args.out:
        _write_errors(args.out, report.failures)
    return 1


# -- parser --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="charsurprisal", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_flags(p):
        p.add_argument("--vocab", help="vocabulary file")
        p.add_argument("--merges", help="merge list file")
        p.add_argument("--lm", help=f"n-gram model file (default: external LM at ${ENDPOINT_ENV})")

    p = sub.add_parser("segment", help="focal-area yields of ROIs 2..K")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--text", help="a single stimulus")
    src.add_argument("--stimuli", help="stimuli CSV")
    p.add_argument("--convention", choices=["leading", "trailing", "both"], default="both")
    p.add_argument("--specs", default=DEFAULT_SPEC_LIST)
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("bpe-train", help="learn a BPE codec from a text corpus (one string per line)")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab-size", type=int, required=True)
    p.add_argument("--min-frequency", type=int, default=2)
    p.add_argument("--vocab", required=True, help="output vocabulary file")
    p.add_argument("--merges", required=True, help="output merge list file")
    p.set_defaults(func=cmd_bpe_train)

    p = sub.add_parser("lm-train", help="train a token n-gram model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--heldout", help="held-out corpus (default: every 10th corpus line)")
    p.add_argument("--vocab", required=True)
    p.add_argument("--merges", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--smoothing", type=float, default=0.01)
    p.add_argument("--lm", required=True, help="output model file")
    p.set_defaults(func=cmd_lm_train)

    p = sub.add_parser("surprisal", help="focal-area surprisal table")
    p.add_argument("--stimuli", required=True)
    p.add_argument("--rois", help="explicit ROI table (replaces whitespace segmentation)")
    model_flags(p)
    p.add_argument("--convention", choices=["leading", "trailing", "both"], default="both")
    p.add_argument("--specs", default=DEFAULT_SPEC_LIST)
    p.add_argument("--method", choices=["exact", "beam"], default="beam")
    p.add_argument("--beam-width", type=int, default=5)
    p.add_argument("--log-base", choices=["e", "2"], default="e")
    p.add_argument("--include-eos", action="store_true",
                   help="add the end-of-string surprisal to focal areas ending the stimulus")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_surprisal)

    p = sub.add_parser("regress", help="cross-validated predictive power report")
    p.add_argument("--surprisals", required=True, help="CSV written by 'surprisal'")
    p.add_argument("--stimuli", required=True)
    p.add_argument("--measurements", required=True)
    p.add_argument("--frequencies", required=True)
    p.add_argument("--rois")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--permutations", type=int, default=10_000)
    p.add_argument("--llh-variance", choices=["train", "test"], default="train")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory (default .)")
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("oracle-check", help="compare beam summing with exact enumeration")
    model_flags(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--max-len", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write violations to <out>.errors.json")
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DataError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

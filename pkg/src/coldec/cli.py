"""Command-line entry point: ``coldec {decode,eval,build-list,sweep,sample-ngrams,make-fixture}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .biasing import PurifyConfig
from .cif import TailPolicy, integrate_and_fire
from .corpus import (FrequencyTable, SamplerConfig, build_biasing_list, corpus_error_rate,
                     inject_distractors, phrase_prf, sample_ngram_phrases)
from .decoder import DecodeConfig, DecodeError, SanAsrSource, ScriptedSource
from .files import (InputError, decode_record, phrases_to_biasing_list, read_acoustic, read_corpus,
                    read_hypotheses, read_phrase_lines, read_text_lines, write_corpus, write_jsonl,
                    write_phrase_lines)
from .fineco import SelectionConfig
from .model import Model, ModelFormatError
from .pipeline import decode_utterance, encode_session
from .vocab import join_pieces

log = logging.getLogger("coldec")


class CliError(Exception):
    pass


# --------------------------------------------------------------------------
# decode


def add_decode_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--acoustic", required=True, type=Path)
    p.add_argument("--bias-list", type=Path, help="one phrase per line; omitted = no phrases")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--beam", type=int, default=10)
    p.add_argument("--fineco", choices=("off", "global", "local"), default="off")
    p.add_argument("--select-m", type=int, default=5)
    p.add_argument("--local-q", type=int, default=5)
    p.add_argument("--purify-k", type=int, default=0, help="0 disables purification")
    p.add_argument("--position", choices=("on", "off"), default="off")
    p.add_argument("--no-bias-neutral", action="store_true",
                   help="spread the CPN '#' mass over all tokens when interpolating")
    p.add_argument("--asr", choices=("san", "scripted"), default="san",
                   help="ASR probabilities from the model's SAN decoder or the acoustic file tables")
    p.add_argument("--cif-threshold", type=float, default=1.0)
    p.add_argument("--tail", choices=[t.value for t in TailPolicy], default=TailPolicy.FIRE_IF_HALF.value)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)


def decode_config(args) -> DecodeConfig:
    if args.beam < 1:
        raise CliError("--beam must be >= 1")
    if args.purify_k < 0:
        raise CliError("--purify-k must be >= 0")
    if args.lam < 0:
        raise CliError("--lambda must be >= 0")
    return DecodeConfig(
        lam=args.lam,
        beam=args.beam,
        fineco_enabled=args.fineco != "off",
        purify_enabled=args.purify_k > 0,
        position_enabled=args.position == "on",
        selection=SelectionConfig(m=args.select_m,
                                  mode="local" if args.fineco == "local" else "global",
                                  q=args.local_q),
        purify=PurifyConfig(max(args.purify_k, 1)),
        no_bias_neutral=args.no_bias_neutral,
    )


def run_decode(model: Model, records: dict, phrases, cfg: DecodeConfig, args, asr_only=False,
               source_name="acoustic") -> list:
    """Decode every utterance; returns ``[(utt_id, UtteranceResult)]`` sorted by id."""
    bank = None
    if not asr_only:
        blist = phrases_to_biasing_list(phrases, model.vocab, str(args.bias_list or "<list>"))
        bank = encode_session(model, blist, cfg)
    if args.asr == "san":
        if model.asr_decoder is None:
            raise CliError(f"{args.model}: model has no ASR decoder; use --asr scripted")
        san = SanAsrSource(model.asr_decoder)

    def one(utt):
        rec = records[utt]
        try:
            if args.asr == "scripted":
                if rec.asr_log_probs is None:
                    raise InputError("no asr_log_probs table for --asr scripted")
                steps = len(integrate_and_fire(rec.sequence, args.cif_threshold, args.tail))
                if rec.asr_log_probs.shape != (steps, len(model.vocab)):
                    raise InputError(f"asr_log_probs shape {rec.asr_log_probs.shape} != "
                                     f"({steps} CIF steps, {len(model.vocab)} tokens)")
                source = ScriptedSource(rec.asr_log_probs)
            else:
                source = san
            return utt, decode_utterance(model, rec.sequence, bank, source, cfg,
                                         args.cif_threshold, args.tail)
        except (ValueError, DecodeError) as exc:
            raise CliError(f"{source_name}: utterance {utt!r}: {exc}") from exc

    utts = sorted(records)
    if args.jobs > 1:
        with ThreadPoolExecutor(args.jobs) as pool:
            results = list(pool.map(one, utts))
    else:
        results = [one(u) for u in utts]
    return sorted(results, key=lambda r: r[0])


def fineco_dump(results) -> list:
    rows = []
    for utt, res in results:
        for step in res.fineco:
            rows.append({"utt_id": utt, "step": step.step, "selected": list(step.selected),
                         "origin": [list(o) for o in step.origin],
                         "token_weights": [float(w) for w in step.weights]})
    return rows


def cmd_decode(args) -> int:
    model = Model.load(args.model)
    records = read_acoustic(args.acoustic)
    phrases = read_phrase_lines(args.bias_list) if args.bias_list else []
    cfg = decode_config(args)
    results = run_decode(model, records, phrases, cfg, args, asr_only=args.asr_only,
                         source_name=str(args.acoustic))
    write_jsonl(args.out, [decode_record(u, r) for u, r in results])
    if args.hyp:
        write_corpus(args.hyp, {u: r.text for u, r in results})
    if args.fineco_dump:
        write_jsonl(args.fineco_dump, fineco_dump(results))
    log.info("decoded %d utterances -> %s", len(results), args.out)
    return 0


# --------------------------------------------------------------------------
# eval


def evaluate(hyps: dict, refs: dict, phrases) -> dict:
    if set(hyps) != set(refs):
        missing = sorted(set(refs) - set(hyps))[:5]
        extra = sorted(set(hyps) - set(refs))[:5]
        raise CliError(f"utterance ids differ between hypotheses and references "
                       f"(missing {missing}, unexpected {extra})")
    ids = sorted(refs)
    hyp_words = [hyps[u].split() for u in ids]
    ref_words = [refs[u].split() for u in ids]
    phrase_words = [join_pieces(p.split()).split() for p in phrases]
    report = phrase_prf(hyp_words, ref_words, phrase_words)
    report.wer = corpus_error_rate(zip(hyp_words, ref_words))
    report.cer = corpus_error_rate((list("".join(h)), list("".join(r)))
                                   for h, r in zip(hyp_words, ref_words))
    return report.to_json()


def cmd_eval(args) -> int:
    report = evaluate(read_hypotheses(args.hyp), read_corpus(args.ref),
                      read_phrase_lines(args.bias_list) if args.bias_list else [])
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


# --------------------------------------------------------------------------
# list building, sampling


def cmd_build_list(args) -> int:
    freq = FrequencyTable.from_texts(read_text_lines(args.train))
    refs = read_corpus(args.refs)
    words = build_biasing_list((refs[u] for u in sorted(refs)), freq, args.top_common, args.min_letters)
    write_phrase_lines(args.out, words)
    log.info("%d phrases -> %s", len(words), args.out)
    return 0


def cmd_sample_ngrams(args) -> int:
    import random

    cfg = SamplerConfig(args.min_order, args.max_order, args.discard, args.draws)
    refs = read_corpus(args.refs)
    rng = random.Random(args.seed)
    out = []
    for utt in sorted(refs):
        for gram in sample_ngram_phrases(refs[utt].split(), cfg, rng):
            out.append(" ".join(gram))
    write_phrase_lines(args.out, list(dict.fromkeys(out)))
    return 0


# --------------------------------------------------------------------------
# sweep

SWEEP_CONFIGS = ("purify", "purify+position+fineco")


def sweep_config(name: str, args) -> DecodeConfig:
    k = args.purify_k if args.purify_k > 0 else 2
    base = dict(lam=args.lam, beam=args.beam, purify_enabled=True, purify=PurifyConfig(k),
                no_bias_neutral=args.no_bias_neutral)
    if name == "purify":
        return DecodeConfig(**base)
    mode = args.fineco if args.fineco != "off" else "global"
    return DecodeConfig(**base, fineco_enabled=True, position_enabled=True,
                        selection=SelectionConfig(m=args.select_m, mode=mode, q=args.local_q))


def cmd_sweep(args) -> int:
    model = Model.load(args.model)
    records = read_acoustic(args.acoustic)
    base = read_phrase_lines(args.bias_list) if args.bias_list else []
    pool = [p for p in read_phrase_lines(args.pool) if p not in set(base)]
    refs = read_corpus(args.refs)
    counts = [int(c) for c in args.distractors.split(",") if c.strip()]
    if counts and max(counts) > len(pool):
        raise CliError(f"{args.pool}: pool has {len(pool)} usable phrases, need {max(counts)}")
    rows = []
    for count in counts:
        phrases = inject_distractors(base, pool, count, args.seed)
        for name in SWEEP_CONFIGS:
            results = run_decode(model, records, phrases, sweep_config(name, args), args,
                                 source_name=str(args.acoustic))
            rep = evaluate({u: r.text for u, r in results}, refs, base)
            rows.append({"config": name, "distractors": count, "list_size": len(phrases),
                         "precision": rep["precision"], "recall": rep["recall"], "f1": rep["f1"],
                         "wer": rep["wer"], "cer": rep["cer"]})
    fields = ["config", "distractors", "list_size", "precision", "recall", "f1", "wer", "cer"]
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, delimiter="\t", lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    log.info("%d sweep rows -> %s", len(rows), args.out)
    return 0


def cmd_make_fixture(args) -> int:
    from .fixture import write_toy_bundle

    paths = write_toy_bundle(args.out, args.seed)
    for name, path in paths.items():
        print(f"{name}\t{path}")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coldec", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="decode utterances with contextual biasing")
    add_decode_flags(p)
    p.add_argument("--out", required=True, type=Path, help="decode output (JSON lines)")
    p.add_argument("--hyp", type=Path, help="also write 'utt_id<TAB>text' hypotheses here")
    p.add_argument("--fineco-dump", type=Path, help="per-step FineCoS selections and token weights")
    p.add_argument("--asr-only", action="store_true", help="skip the CPN: bare ASR beam search")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="WER/CER and biasing-phrase P/R/F1")
    p.add_argument("--hyp", required=True, type=Path)
    p.add_argument("--ref", required=True, type=Path)
    p.add_argument("--bias-list", type=Path)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("build-list", help="rare-word biasing list from references")
    p.add_argument("--train", required=True, type=Path, help="training text (TSV or plain lines)")
    p.add_argument("--refs", required=True, type=Path)
    p.add_argument("--top-common", type=int, default=20000)
    p.add_argument("--min-letters", type=int, default=5)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_build_list)

    p = sub.add_parser("sample-ngrams", help="random n-gram phrases from references")
    p.add_argument("--refs", required=True, type=Path)
    p.add_argument("--min-order", type=int, default=1)
    p.add_argument("--max-order", type=int, default=3)
    p.add_argument("--discard", type=float, default=0.3)
    p.add_argument("--draws", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_sample_ngrams)

    p = sub.add_parser("sweep", help="F1 / error rate against the number of distractors")
    add_decode_flags(p)
    p.add_argument("--refs", required=True, type=Path)
    p.add_argument("--pool", required=True, type=Path)
    p.add_argument("--distractors", default="0,600,1200,1800,2400")
    p.add_argument("--out", required=True, type=Path, help="TSV table")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("make-fixture", help="write the toy bundle")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_fixture)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, InputError, ModelFormatError, DecodeError, ValueError, OSError) as exc:
        print(f"coldec {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

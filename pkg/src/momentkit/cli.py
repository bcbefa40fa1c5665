"""``momentkit`` command line.

Subcommands: gen-trace, compress, caption, modulate, assemble, eval, ablate.
Each accepts ``--config FILE`` (JSON, see :mod:`momentkit.config`); explicit
flags override the file. Module errors exit with status 1 and print their
category.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import ablation, captioning, metrics, modulation, sequence, svc, synth
from .config import load_config
from .embeddings import as_embedding, dumps_trace, read_trace
from .errors import ConfigError, MomentKitError

DEFAULT_INSTRUCTION = "Give the start and end time in seconds of the moment that matches the query."


def _floats(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _emit(text: str, out, quiet=False):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    elif not quiet:
        sys.stdout.write(text)


def _config(args, **overrides):
    cfg = load_config(args.config)
    return cfg.updated(seed=args.seed, **overrides)


def cmd_gen_trace(args):
    cfg = _config(args)
    trace = synth.gen_trace(args.n_frames, args.dimension, args.plateaus, args.noise, cfg.seed,
                            args.spacing, args.source_id)
    _emit(dumps_trace(trace), args.out)
    return 0


def cmd_compress(args):
    cfg = _config(args, theta=args.theta, rank_k=args.rank_k, anchor_update=args.anchor_update)
    trace = read_trace(args.trace)
    out, report = svc.compress_sequence(trace, cfg.svc())
    if args.out:
        Path(args.out).write_text(dumps_trace(out), encoding="utf-8")
    if not args.quiet:
        print(report.to_json())
    return 0


def _provider(args, dimension, seed):
    if args.endpoint:
        return captioning.HttpProvider(args.endpoint, timeout=args.timeout, retries=args.retries)
    if args.provider == "hash":
        return captioning.HashProvider(dimension, seed)
    answer = args.provider == "always-yes"
    return captioning.ScriptedProvider(qa=answer, embed=lambda t: captioning.hash_embedding(t, dimension, seed))


def cmd_caption(args):
    cfg = _config(args, mode=args.mode, caption_interval_sec=args.interval,
                  relevance_aggregation=args.aggregation)
    trace = read_trace(args.trace)
    segments = captioning.segment_video(trace.duration, cfg.caption_interval_sec, trace)
    provider = captioning.RecordingProvider(_provider(args, trace.dimension, cfg.seed))
    if args.write_store:
        store = captioning.build_caption_store(segments, provider, trace.source_id)
        store.save(args.write_store)
        return 0
    intent = captioning.parse_query(args.query)
    store = None
    if cfg.mode == "LE":
        if not args.store:
            raise ConfigError("LE mode needs --store")
        store = captioning.CaptionStore.load(args.store)
    caps = captioning.generate_captions(segments, intent, provider, cfg.mode, store, trace.source_id,
                                        cfg.relevance_aggregation, args.workers)
    _emit(captioning.pipeline.dumps_captions(caps), args.out)
    if not args.quiet:
        breakdown = captioning.latency_breakdown(provider.transcript, cfg.mode)
        counts = {k: provider.count(k) for k in captioning.providers.REQUEST_KINDS}
        print(json.dumps({"latency_sec": breakdown, "calls": counts}, sort_keys=True), file=sys.stderr)
    return 0


def _query_embedding(args, dimension, seed):
    if args.query_embedding:
        return as_embedding(json.loads(Path(args.query_embedding).read_text(encoding="utf-8")))
    if args.query:
        return captioning.hash_embedding(args.query, dimension, seed)
    raise ConfigError("give --query-embedding or --query")


def cmd_modulate(args):
    cfg = _config(args, alpha1=args.alpha1, alpha2=args.alpha2, vbar_form=args.vbar_form)
    trace = read_trace(args.trace)
    caps = captioning.read_captions(args.captions)
    q = _query_embedding(args, trace.dimension, cfg.seed)
    t0 = time.perf_counter()
    scored = modulation.modulate_captions(trace, caps, q, cfg.modulation())
    elapsed = time.perf_counter() - t0
    _emit(modulation.dumps_scored(scored), args.out)
    if not args.quiet:
        print(json.dumps({"latency_sec": {"IM": elapsed}}), file=sys.stderr)
    return 0


def cmd_assemble(args):
    cfg = _config(args, max_vector_slots=args.max_vector_slots)
    trace = read_trace(args.trace)
    scored = modulation.read_scored(args.scored) if args.scored else []
    seq = sequence.assemble(trace, scored, args.query, args.instruction,
                            sequence.MemoryBudget(cfg.max_vector_slots))
    if not args.out:
        raise ConfigError("assemble needs --out for the manifest path")
    sequence.write_manifest(seq, args.out)
    if not args.quiet:
        b = seq.budget
        print(json.dumps({"slots": len(seq), "used_vector_slots": b.used_vector_slots,
                          "used_text_chars": b.used_text_chars, "max_vector_slots": b.max_vector_slots}))
    return 0


def cmd_eval(args):
    _config(args)
    preds, gts = metrics.align_moments(metrics.read_moments(args.predictions),
                                       metrics.read_moments(args.ground_truth))
    res = metrics.evaluate(preds, gts, args.r1_thresholds, args.map_thresholds)
    _emit(json.dumps(res.to_dict(), sort_keys=True) + "\n", args.out, args.quiet)
    return 0


def cmd_ablate(args):
    cfg = _config(args, theta=args.theta, rank_k=args.rank_k)
    trace = read_trace(args.trace)
    if args.ground_truth:
        gt = metrics.read_moments(args.ground_truth)
        gts = [m.segment for ms in gt.values() for m in ms]
    else:
        gts = synth.plateau_segments(trace)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    rows = ablation.run_ablation(trace, gts, strategies, cfg.svc())
    _emit(ablation.format_table(rows), args.out, args.quiet)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="JSON config file; flags override its values")
    common.add_argument("--seed", type=int, help="seed for every random draw (default from config, 0)")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout where applicable)")
    common.add_argument("--quiet", action="store_true", help="suppress informational output")

    parser = argparse.ArgumentParser(prog="momentkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("gen-trace", parents=[common], help="write a synthetic embedding trace")
    p.add_argument("--n-frames", type=int, required=True, help="number of frames")
    p.add_argument("--dimension", type=int, default=64, help="embedding dimension (default 64)")
    p.add_argument("--plateaus", type=int, default=3, help="runs of near-duplicate frames (default 3)")
    p.add_argument("--noise", type=float, default=0.05, help="expected noise norm per frame (default 0.05)")
    p.add_argument("--spacing", type=float, default=1.0, help="seconds between frames (default 1)")
    p.add_argument("--source-id", help="source id in the header (default synthetic-<seed>)")
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("compress", parents=[common], help="merge redundant frames; report to stdout")
    p.add_argument("trace", help="input trace file")
    p.add_argument("--theta", type=float, help="merge threshold on cosine similarity (default 0.95)")
    p.add_argument("--rank-k", type=int, choices=(1, 2), help="truncated SVD rank (default 1)")
    p.add_argument("--anchor-update", choices=svc.ANCHOR_UPDATES, help="anchor after a merge (default compressed)")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("caption", parents=[common], help="query-guided captions for every segment")
    p.add_argument("trace", help="input trace file")
    p.add_argument("--query", help="retrieval query text (required unless --write-store)")
    p.add_argument("--provider", choices=("hash", "always-yes", "always-no"), default="hash",
                   help="built-in mock provider (default hash)")
    p.add_argument("--endpoint", metavar="URL", help="external provider URL; overrides --provider")
    p.add_argument("--timeout", type=float, default=30.0, help="external provider timeout in seconds")
    p.add_argument("--retries", type=int, default=2, help="external provider retry count")
    p.add_argument("--mode", choices=("SE", "LE"), help="SE: caption on demand; LE: use --store (default SE)")
    p.add_argument("--store", metavar="FILE", help="pre-computed generic caption store for LE mode")
    p.add_argument("--write-store", metavar="FILE", help="build a generic caption store for the trace and exit")
    p.add_argument("--interval", type=float, help="segment length in seconds (default 2)")
    p.add_argument("--aggregation", choices=("any", "all"), help="how QA answers combine (default any)")
    p.add_argument("--workers", type=int, default=1, help="concurrent segments (default 1)")
    p.set_defaults(func=cmd_caption)

    p = sub.add_parser("modulate", parents=[common], help="score and re-weight captions")
    p.add_argument("trace", help="trace whose frames pair with the captions")
    p.add_argument("captions", help="caption records file from 'caption'")
    p.add_argument("--query-embedding", metavar="FILE", help="JSON array holding the query embedding")
    p.add_argument("--query", help="query text, embedded with the hash embedder if no --query-embedding")
    p.add_argument("--alpha1", type=float, help="weight of frame-query similarity (default 0.7)")
    p.add_argument("--alpha2", type=float, help="weight of refined caption similarity (default 0.3)")
    p.add_argument("--vbar-form", choices=modulation.VBAR_FORMS, help="refined similarity form (default product)")
    p.set_defaults(func=cmd_modulate)

    p = sub.add_parser("assemble", parents=[common], help="write the interleaved manifest and vector sidecar")
    p.add_argument("trace", help="frame trace (compressed or raw)")
    p.add_argument("scored", nargs="?", help="scored captions file from 'modulate'")
    p.add_argument("--query", required=True, help="query text for the query slot")
    p.add_argument("--instruction", default=DEFAULT_INSTRUCTION, help="instruction text for the final slot")
    p.add_argument("--max-vector-slots", type=int, help="vector slot budget (default unbounded)")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("eval", parents=[common], help="R1, mAP and mIoU of a prediction file")
    p.add_argument("--predictions", required=True, help="line-delimited {query_id,start,end,confidence}")
    p.add_argument("--ground-truth", required=True, help="line-delimited {query_id,start,end}")
    p.add_argument("--r1-thresholds", type=_floats, default=(0.5, 0.7), help="comma list (default 0.5,0.7)")
    p.add_argument("--map-thresholds", type=_floats, default=(0.5, 0.75), help="comma list (default 0.5,0.75)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", parents=[common], help="compare compression strategies on a trace")
    p.add_argument("trace", help="input trace file")
    p.add_argument("--strategies", default=",".join(ablation.STRATEGIES),
                   help="comma list from frame_selection,average_pooling,svd (default all)")
    p.add_argument("--ground-truth", metavar="FILE", help="moments file; default: the trace's plateau manifest")
    p.add_argument("--theta", type=float, help="merge threshold (default 0.95)")
    p.add_argument("--rank-k", type=int, choices=(1, 2), help="truncated SVD rank (default 1)")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "caption" and not args.write_store and not args.query:
        parser.error("caption: --query is required")
    try:
        return args.func(args)
    except MomentKitError as exc:
        print(f"momentkit {args.command}: error [{exc.category}]: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        category = "io" if isinstance(exc, OSError) else "value"
        print(f"momentkit {args.command}: error [{category}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``tapid <subcommand> ...``.

Every stage reads and writes files, so a pipeline is a chain of calls::

    tapid synth --out sessions.jsonl
    tapid pretrain --sessions sessions.jsonl --out model.ckpt
    tapid embed --checkpoint model.ckpt --sessions sessions.jsonl --out cnn.emb
    tapid identify --sessions sessions.jsonl --embeddings cnn.emb --report-json cnn.json
    tapid identify --sessions sessions.jsonl --handcrafted --report-json hc.json
    tapid compare cnn.json hc.json

Seeds default to 0, or to ``$TAPID_SEED`` when that is set. With the default
``--workers 1`` every numeric library runs single-threaded and outputs are
bit-reproducible.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .classify import DEFAULT_C_GRID, PRESETS, KernelSpec
from .dataio import (
    SynthConfig,
    group_by_user,
    load_checkpoint,
    load_embeddings,
    load_sessions,
    save_checkpoint,
    save_embeddings,
    save_sessions,
    synth_generate,
)
from .encoding import IMAGE_SEQUENCE, SignalImage, SignalSequence, generate_sequence, verify_coverage, write_pgm
from .errors import FormatError, InvalidInputError
from .neuralnet import NetworkSpec, TrainConfig, write_training_log
from .neuralnet.training import LOG_FIELDS
from .pipeline import embed_sessions, encode_sessions, fewshot_tasks, handcrafted_batch, pretrain
from .protocol import FewShotCounts, IdentificationReport, compare_reports, run_identification, split_users

SEED_ENV = "TAPID_SEED"


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise InvalidInputError(f"${SEED_ENV} must be an integer, got {raw!r}") from None


def _existing_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise InvalidInputError(f"input file not found: {path}")
    return p


def _writable(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.parent.exists():
        raise InvalidInputError(f"output directory does not exist: {p.parent}")
    return p


def _counts(text: str | None) -> FewShotCounts | None:
    if text is None:
        return None
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError:
        raise InvalidInputError(f"--counts needs four integers, got {text!r}") from None
    if len(values) != 4 or min(values) < 1:
        raise InvalidInputError(f"--counts needs four positive integers, got {text!r}")
    return FewShotCounts(*values)


def _print_json(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def cmd_synth(args) -> int:
    out = _writable(args.out)
    config = SynthConfig(
        num_users=args.users,
        taps_per_user=args.taps,
        sample_rate_hz=args.sample_rate,
        jitter_std_seconds=args.jitter,
        length_range=(args.min_len, args.max_len),
        separation=args.separation,
        noise_std=args.noise,
        seed=args.seed,
    )
    sessions = synth_generate(config)
    save_sessions(sessions, out)
    print(f"wrote {len(sessions)} sessions for {config.num_users} users to {out}")
    return 0


def cmd_gen_seq(args) -> int:
    seq = SignalSequence(IMAGE_SEQUENCE) if args.fixed else generate_sequence(args.k, args.n)
    print(seq)
    print(f"length {len(seq.symbols)}")
    if args.verify:
        cov = verify_coverage(seq)
        print(f"coverage {cov.covered}/{cov.total}")
        if not cov.complete:
            print(f"missing {sorted(cov.missing)}", file=sys.stderr)
            return 1
    return 0


def cmd_encode(args) -> int:
    source = _existing_file(args.sessions)
    out_dir = Path(args.out_dir)
    if not out_dir.is_dir():
        raise InvalidInputError(f"output directory does not exist: {out_dir}")
    sessions = load_sessions(source)
    if args.limit is not None:
        sessions = sessions[: args.limit]
    images = encode_sessions(sessions, args.rescale)
    if args.format in ("pgm", "both"):
        for s, pixels in zip(sessions, images):
            with open(out_dir / f"{s.user_id}_{s.tap_index:04d}.pgm", "wb") as fh:
                write_pgm(SignalImage(pixels, s.user_id, s.tap_index), fh)
    if args.format in ("npy", "both"):
        np.save(out_dir / "images.npy", images)
        keys = [[s.user_id, s.tap_index] for s in sessions]
        (out_dir / "images_keys.json").write_text(json.dumps(keys))
    print(f"encoded {len(sessions)} sessions into {out_dir} ({args.format}, {args.rescale} rescale)")
    return 0


def _split_for(sessions, split_seed):
    return split_users(sorted(group_by_user(sessions)), seed=split_seed)


def cmd_pretrain(args) -> int:
    source = _existing_file(args.sessions)
    out = _writable(args.out)
    log_path = _writable(args.log)
    summary_path = _writable(args.summary)
    spec = NetworkSpec(
        depth_variant=args.depth, embedding_width=args.embed, dropout_rate=args.dropout
    )
    config = TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        patience=args.patience,
        seed=args.seed,
        runs=args.runs,
    )
    sessions = load_sessions(source)
    split = _split_for(sessions, args.split_seed)
    ckpt, runs = pretrain(sessions, split, spec, config, args.rescale)
    save_checkpoint(ckpt, out)
    if log_path:
        write_training_log(ckpt, log_path)

    accs = np.array([r["val_acc"] for r in runs])
    print(f"{'run':>3} {'seed':>5} {'epochs':>6} {'best':>4} {'val_acc':>8} {'val_loss':>9}")
    for r in runs:
        print(f"{r['run']:>3} {r['seed']:>5} {r['epochs_run']:>6} {r['epoch']:>4} {r['val_acc']:>8.4f} {r['val_loss']:>9.4f}")
    print(f"mean val_acc {accs.mean():.4f} (std {accs.std():.4f}) over {len(runs)} runs; best run saved to {out}")
    summary = {
        "spec": ckpt.spec.to_dict(),
        "train_config": asdict(config),
        "split_seed": args.split_seed,
        "pretrain_users": list(split.pretrain_users),
        "identification_users": list(split.identification_users),
        "runs": runs,
        "mean_val_acc": float(accs.mean()),
        "std_val_acc": float(accs.std()),
    }
    if summary_path:
        summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_embed(args) -> int:
    ckpt_path = _existing_file(args.checkpoint)
    source = _existing_file(args.sessions)
    out = _writable(args.out)
    ckpt = load_checkpoint(ckpt_path)
    sessions = load_sessions(source)
    if not args.all_users:
        keep = set(_split_for(sessions, args.split_seed).identification_users)
        sessions = [s for s in sessions if s.user_id in keep]
    batch = embed_sessions(ckpt, sessions, args.rescale)
    size = save_embeddings(batch, out)
    print(f"wrote {len(batch.keys)} embeddings of width {batch.width} to {out} ({size} bytes)")
    return 0


def cmd_identify(args) -> int:
    source = _existing_file(args.sessions)
    emb_path = None if args.handcrafted else _existing_file(args.embeddings)
    json_path = _writable(args.report_json)
    csv_path = _writable(args.report_csv)
    counts = _counts(args.counts)

    sessions = load_sessions(source)
    split = _split_for(sessions, args.split_seed)
    if args.handcrafted:
        keep = set(split.identification_users)
        batch = handcrafted_batch([s for s in sessions if s.user_id in keep])
    else:
        batch = load_embeddings(emb_path)
    provider = "handcrafted" if args.handcrafted else "cnn"

    preset_kernel, preset_c = PRESETS[provider]
    kernel = KernelSpec(args.kernel) if args.kernel else preset_kernel
    c = args.c if args.c is not None else preset_c
    c_grid = DEFAULT_C_GRID if args.grid else None

    tasks = fewshot_tasks(sessions, split, seed=args.task_seed, counts=counts)
    features = batch.as_dict()
    missing = {ref for t in tasks for ref in t.train_pos + t.train_neg + t.test_pos + t.test_neg} - set(features)
    if missing:
        raise InvalidInputError(f"{len(missing)} samples have no feature vector, e.g. {sorted(missing)[0]}")
    report = run_identification(
        tasks, features, kernel, c, provider=provider, c_grid=c_grid, grid_seed=args.seed, workers=args.workers
    )
    report.config.update(
        {"split_seed": args.split_seed, "task_seed": args.task_seed, "counts": asdict(_task_counts(tasks[0]))}
    )
    if json_path:
        report.write_json(json_path)
    if csv_path:
        report.write_csv(csv_path)

    agg = report.aggregate
    ok = sum(t.calibration_ok for t in report.tasks)
    c_text = "grid" if args.grid else f"{c:g}"
    print(f"{'provider':<12} {'kernel':<6} {'C':>6} {'tasks':>5} {'ACC':>7} {'FAR':>7} {'FRR':>7}")
    print(
        f"{provider:<12} {kernel.kind:<6} {c_text:>6} {len(report.tasks):>5} "
        f"{agg['accuracy']:>7.4f} {agg['far']:>7.4f} {agg['frr']:>7.4f}"
    )
    print(f"calibration within 1% on {ok}/{len(report.tasks)} tasks")
    _print_json({"provider": provider, "kernel": kernel.kind, "c": c_text, **agg})
    return 0


def _task_counts(task) -> FewShotCounts:
    return FewShotCounts(len(task.train_pos), len(task.train_neg), len(task.test_pos), len(task.test_neg))


def cmd_compare(args) -> int:
    paths = [_existing_file(p) for p in (args.report_a, args.report_b)]
    json_path = _writable(args.json)
    reports = []
    for p in paths:
        try:
            reports.append(IdentificationReport.from_json(json.loads(p.read_text())))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise FormatError(f"{p}: not an identification report ({exc})") from None
    a, b = reports
    result = compare_reports(a, b, alpha=args.alpha)
    print(f"{'report':<24} {'ACC':>7} {'FAR':>7} {'FRR':>7}")
    for p, r in zip(paths, reports):
        agg = r.aggregate
        print(f"{p.name:<24} {agg['accuracy']:>7.4f} {agg['far']:>7.4f} {agg['frr']:>7.4f}")
    verdict = "significant" if result.significant else "not significant"
    print(
        f"McNemar b={result.b} c={result.c} chi2={result.statistic:.3f} "
        f"p={result.p_value:.3g} -> {verdict} at alpha={result.alpha:g}"
    )
    summary = {
        "a": {"report": paths[0].name, "provider": a.provider, **a.aggregate},
        "b": {"report": paths[1].name, "provider": b.provider, **b.aggregate},
        "mcnemar": asdict(result),
    }
    if json_path:
        json_path.write_text(json.dumps(summary, indent=2, sort_keys=True))
    _print_json(summary["mcnemar"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    seed = default_seed()
    parser = argparse.ArgumentParser(prog="tapid", description="Tap-based user identification pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--workers", type=int, default=1, help="thread count; 1 keeps runs bit-reproducible")
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", help="generate synthetic tap sessions")
    p.add_argument("--out", required=True, help="output JSONL file")
    p.add_argument("--users", type=int, default=10)
    p.add_argument("--taps", type=int, default=40, help="taps per user")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--separation", type=float, default=1.0, help="0 makes all users identical")
    p.add_argument("--noise", type=float, default=0.02, help="sensor noise std")
    p.add_argument("--sample-rate", type=float, default=100.0)
    p.add_argument("--jitter", type=float, default=0.001, help="timestamp jitter std in seconds")
    p.add_argument("--min-len", type=int, default=140)
    p.add_argument("--max-len", type=int, default=160)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gen-seq", help="print the signal row sequence")
    p.add_argument("--k", type=int, default=6, help="number of signals")
    p.add_argument("--n", type=int, default=3, help="neighbourhood size to cover")
    p.add_argument("--fixed", action="store_true", help="print the fixed 25-symbol sequence used for images")
    p.add_argument("--verify", action="store_true", help="check that every n-subset appears contiguously")
    p.set_defaults(func=cmd_gen_seq)

    p = sub.add_parser("encode", help="turn sessions into 25x150 gray-scale images")
    p.add_argument("--sessions", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=("pgm", "npy", "both"), default="pgm")
    p.add_argument("--rescale", choices=("global", "per-signal"), default="global")
    p.add_argument("--limit", type=int, default=None, help="encode only the first N sessions")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("pretrain", help="train the multi-class CNN on the pre-training users")
    p.add_argument("--sessions", required=True)
    p.add_argument("--out", required=True, help="checkpoint file for the best run")
    p.add_argument("--depth", type=int, choices=(6, 9, 12), default=6)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--embed", type=int, default=256, help="embedding width")
    p.add_argument("--dropout", type=float, default=0.4)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--runs", type=int, default=1, help="independent runs with seeds seed, seed+1, ...")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--split-seed", type=int, default=seed)
    p.add_argument("--rescale", choices=("global", "per-signal"), default="global")
    p.add_argument("--log", help=f"CSV training log ({', '.join(LOG_FIELDS)})")
    p.add_argument("--summary", help="JSON summary of all runs")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("embed", help="extract CNN embeddings")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sessions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split-seed", type=int, default=seed)
    p.add_argument("--all-users", action="store_true", help="embed every user, not just the held-out half")
    p.add_argument("--rescale", choices=("global", "per-signal"), default="global")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("identify", help="few-shot identification with per-user SVMs")
    p.add_argument("--sessions", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--embeddings", help="embedding file from 'embed'")
    src.add_argument("--handcrafted", action="store_true", help="use the 102 handcrafted features")
    p.add_argument("--kernel", choices=("linear", "rbf"), help="default: preset for the feature type")
    c = p.add_mutually_exclusive_group()
    c.add_argument("--c", type=float, help="default: preset for the feature type")
    c.add_argument("--grid", action="store_true", help="pick C per task from {0.1, 1, 10, 100} by cross-validation")
    p.add_argument("--counts", help="train_pos,train_neg,test_pos,test_neg (default: scaled to taps per user)")
    p.add_argument("--seed", type=int, default=seed, help="cross-validation seed")
    p.add_argument("--split-seed", type=int, default=seed)
    p.add_argument("--task-seed", type=int, default=seed)
    p.add_argument("--report-json")
    p.add_argument("--report-csv")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("compare", help="McNemar test between two identification reports")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--json", help="write the comparison summary here")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    try:
        parser = build_parser()
    except InvalidInputError as exc:
        print(f"tapid: error: {exc}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    if args.workers < 1:
        parser.error("--workers must be at least 1")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        with threadpool_limits(limits=args.workers):
            return args.func(args)
    except (InvalidInputError, FormatError, OSError) as exc:
        print(f"tapid {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

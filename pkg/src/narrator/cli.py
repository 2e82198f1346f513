"""Command-line entry point: synth, track, train, classify, describe, eval.

Exit codes: 0 success, 1 usage error, 2 data/model error.  All randomness is
seeded, so identical inputs, config, and seeds give byte-identical outputs.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .classifier import load_bank, save_bank
from .config import Config, describe_config, load_config
from .errors import NarratorError
from .pipeline import (
    CorpusItem,
    classify_item,
    describe_scene,
    evaluate_corpus,
    load_corpus,
    train_from_corpus,
)
from .scene import parse_scene, render_scene, validate_scene
from .synth import make_script, generate_scene, render_truth
from .tracking import render_tracks, track_scene

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _build_parser() -> _Parser:
    parser = _Parser(prog="narrator")
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    parser.add_argument("--help-config", action="store_true",
                        help="list all config keys with defaults and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("synth", help="generate labeled synthetic scenes")
    p.add_argument("--class", dest="action_class", required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--noise-preset", choices=("clean", "medium", "hard"),
                   default="medium")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--duration", type=int, default=72)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("track", help="run the tracker over one scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", default="-")
    p.add_argument("--emit-raw", action="store_true")

    p = sub.add_parser("validate", help="report structural issues in a scene")
    p.add_argument("--scene", required=True)

    p = sub.add_parser("train", help="train a model bank from a labeled corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--bank", required=True)

    p = sub.add_parser("classify", help="rank action classes for a scene")
    p.add_argument("--bank", required=True)
    p.add_argument("--scene", required=True, nargs="+")
    p.add_argument("--out", default="-")

    p = sub.add_parser("describe", help="emit sentences for the top-k classes")
    p.add_argument("--bank", required=True)
    p.add_argument("--scene", required=True, nargs="+")
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--out", default="-")

    p = sub.add_parser("eval", help="per-class ROC over a labeled corpus")
    p.add_argument("--bank", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", default="-")
    return parser


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _cmd_synth(args, cfg: Config) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base_seed = cfg.seed if args.seed is None else args.seed
    for i in range(args.count):
        script = make_script(args.action_class, seed=base_seed + i,
                             preset=args.noise_preset, duration=args.duration)
        scene, truth = generate_scene(script)
        stem = f"{args.action_class}_{base_seed + i:04d}"
        (out_dir / f"{stem}.scene").write_text(render_scene(scene))
        (out_dir / f"{stem}.truth").write_text(render_truth(truth))
    return 0


def _cmd_track(args, cfg: Config) -> int:
    scene = parse_scene(Path(args.scene).read_text(), cfg.per_frame_cap)
    tracks = track_scene(scene, cfg)
    _write(args.out, render_tracks(tracks, emit_raw=args.emit_raw))
    return 0


def _cmd_validate(args, cfg: Config) -> int:
    scene = parse_scene(Path(args.scene).read_text(), cfg.per_frame_cap)
    report = validate_scene(scene)
    lines = [f"classes: {', '.join(report.classes_present) or '(none)'}"]
    for cls, gaps in sorted(report.coverage_gaps.items()):
        spans = ", ".join(f"{a}-{b}" for a, b in gaps)
        lines.append(f"gap {cls}: {spans}")
    lines.extend(f"warning: {w}" for w in report.warnings)
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def _cmd_train(args, cfg: Config) -> int:
    items = load_corpus(args.corpus, cfg.per_frame_cap)
    bank = train_from_corpus(items, cfg)
    save_bank(bank, args.bank)
    return 0


def _load_scene_file(path: str, cfg: Config):
    return parse_scene(Path(path).read_text(), cfg.per_frame_cap)


def _map_scenes(fn, paths, cfg: Config):
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(fn, paths))
    return [fn(p) for p in paths]


def _cmd_classify(args, cfg: Config) -> int:
    bank = load_bank(args.bank)

    def one(path: str) -> list[str]:
        scene = _load_scene_file(path, cfg)
        ranked = classify_item(bank, scene, cfg)
        stem = Path(path).stem
        return [
            f"{stem},{rank},{r.verb},{r.score:.6f}"
            for rank, r in enumerate(ranked, start=1)
        ]

    rows = ["scene,rank,class,score"]
    for chunk in _map_scenes(one, args.scene, cfg):
        rows.extend(chunk)
    _write(args.out, "\n".join(rows) + "\n")
    return 0


def _cmd_describe(args, cfg: Config) -> int:
    bank = load_bank(args.bank)

    def one(path: str) -> list[str]:
        scene = _load_scene_file(path, cfg)
        stem = Path(path).stem
        return [
            f"{stem}\t{rank}\t{verb}\t{sentence}"
            for rank, verb, sentence in describe_scene(bank, scene, cfg, args.top_k)
        ]

    lines: list[str] = []
    for chunk in _map_scenes(one, args.scene, cfg):
        lines.extend(chunk)
    _write(args.out, "\n".join(lines) + ("\n" if lines else ""))
    return 0


def _cmd_eval(args, cfg: Config) -> int:
    bank = load_bank(args.bank)
    items = load_corpus(args.corpus, cfg.per_frame_cap)
    results = evaluate_corpus(bank, items, cfg)
    rows = ["class,fpr,tpr"]
    for verb, (points, _) in sorted(results.items()):
        rows.extend(f"{verb},{fpr:.6f},{tpr:.6f}" for fpr, tpr in points)
    rows.append("class,auc")
    rows.extend(f"{verb},{auc:.6f}" for verb, (_, auc) in sorted(results.items()))
    _write(args.out, "\n".join(rows) + "\n")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "track": _cmd_track,
    "validate": _cmd_validate,
    "train": _cmd_train,
    "classify": _cmd_classify,
    "describe": _cmd_describe,
    "eval": _cmd_eval,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    if args.help_config:
        print(describe_config())
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    try:
        cfg = load_config(args.config, args.set)
        return _COMMANDS[args.command](args, cfg)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except NarratorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())

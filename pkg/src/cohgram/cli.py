"""Command-line entry point: ``cohgram extract|synth|split|eval|inspect``.

Exit codes: 0 success, 1 input error, 2 config error, 3 numerical or internal
failure. Logs go to stderr; machine-readable results go to files.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import extract_dataset, read_manifest
from .config import PipelineConfig, load_config
from .errors import CohgramError, ConfigError, InputError, NumericalError
from .evaluation import Hyper, evaluate, make_splits
from .ingestion import find_recordings, load_tensor, read_tensor_header
from .synth import SynthDatasetSpec, gen_labeled_dataset, write_dataset

log = logging.getLogger("cohgram")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def _config(args) -> PipelineConfig:
    return load_config(args.config) if getattr(args, "config", None) else PipelineConfig()


def _load_json(path, error=InputError):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise error(f"cannot read {path}: {exc}") from None


def cmd_extract(args) -> int:
    config = _config(args)
    inp = Path(args.input_dir)
    if not inp.is_dir():
        raise InputError(f"{inp} is not a directory")
    paths = find_recordings(inp)
    if not paths:
        raise InputError(f"no recordings (*.csv, *.rec.bin) in {inp}")
    formats = {"tensor": ("tensor",), "png8": ("png8",), "both": ("tensor", "png8")}[args.format]
    manifest = extract_dataset(paths, args.output_dir, config, jobs=args.jobs, formats=formats)
    failed = [e for e in manifest["entries"] if e["status"] == "failed"]
    ok = len(manifest["entries"]) - len(failed)
    log.info("extracted %d image(s) into %s", ok, args.output_dir)
    if failed:
        for e in failed:
            log.error("failed: %s (%s)", e["source"], e["error"])
        return EXIT_NUMERICAL if all(e.get("error_kind") == "numerical" for e in failed) else EXIT_INPUT
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SynthDatasetSpec.from_dict(_load_json(args.spec_file, ConfigError))
    recordings, manifest = gen_labeled_dataset(spec)
    path = write_dataset(recordings, manifest, args.output_dir)
    log.info("wrote %d recordings and %s", len(recordings), path)
    return EXIT_OK


def _filtered_manifest(args) -> tuple[dict, list[dict]]:
    manifest = read_manifest(args.manifest)
    entries = [e for e in manifest["entries"] if e.get("status", "ok") == "ok"]
    if args.subject:
        keep = set(args.subject)
        entries = [e for e in entries if str(e["subject_id"]) in keep]
    return manifest, entries


def cmd_split(args) -> int:
    _, entries = _filtered_manifest(args)
    seed = args.seed if args.seed is not None else _config(args).seed
    plan = make_splits(entries, args.scheme, seed, args.k)
    out = plan.to_dict()
    out["files"] = [e["file"] for e in entries]
    Path(args.out).write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")
    log.info("%s plan with %d folds written to %s", plan.scheme, len(plan.folds), args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _config(args)
    seed = args.seed if args.seed is not None else config.seed
    _, entries = _filtered_manifest(args)
    base = Path(args.manifest).parent
    missing = [e["file"] for e in entries if not e.get("file") or not (base / e["file"]).exists()]
    if missing:
        for f in missing:
            log.error("missing feature file: %s", f)
        raise InputError(f"{len(missing)} feature file(s) missing")
    plan = make_splits(entries, args.scheme, seed, args.k)
    images = np.stack([load_tensor(base / e["file"])[0] for e in entries])
    labels = np.array([int(e["label"]) for e in entries])
    if args.shuffle_labels:
        labels = np.random.default_rng(seed).permutation(labels)
    hyper = Hyper(args.lr, args.l2, args.epochs)
    report = evaluate(plan, images, labels, hyper, seed)
    Path(args.out).write_text(report.to_json(), encoding="utf-8")
    print(report.summary())
    return EXIT_OK


def cmd_inspect(args) -> int:
    if args.defaults:
        sys.stdout.write(PipelineConfig().dumps())
        return EXIT_OK
    if args.config and not args.file:
        sys.stdout.write(load_config(args.config).dumps())
        return EXIT_OK
    if not args.file:
        raise ConfigError("inspect needs --defaults, --config or a file")
    path = Path(args.file)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise InputError(str(exc)) from None
    if path.name.endswith(".json"):
        sys.stdout.write(json.dumps(json.loads(buf), indent=2) + "\n")
        return EXIT_OK
    header, offset = read_tensor_header(buf)
    header["payload_bytes"] = len(buf) - offset
    sys.stdout.write(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cohgram", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="recordings -> feature images + manifest")
    p.add_argument("input_dir")
    p.add_argument("output_dir")
    p.add_argument("--config", help="pipeline config JSON (see `inspect --defaults`)")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: CPU count)")
    p.add_argument("--format", choices=("tensor", "png8", "both"), default="tensor")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("synth", help="generate a labelled synthetic dataset")
    p.add_argument("spec_file", help="JSON synth spec")
    p.add_argument("output_dir")
    p.set_defaults(func=cmd_synth)

    for name, func, help_ in (("split", cmd_split, "write a fold plan"), ("eval", cmd_eval, "cross-validate the baseline classifier")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("manifest")
        p.add_argument("--scheme", choices=("loso", "kfold"), default="loso")
        p.add_argument("--k", type=int, default=10, help="folds for kfold")
        p.add_argument("--seed", type=int, default=None, help="defaults to the config seed")
        p.add_argument("--subject", action="append", help="restrict to this subject (repeatable)")
        p.add_argument("--config")
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)
        if name == "eval":
            p.add_argument("--epochs", type=int, default=300)
            p.add_argument("--l2", type=float, default=1e-3)
            p.add_argument("--lr", type=float, default=None)
            p.add_argument("--shuffle-labels", action="store_true", help="permutation control")

    p = sub.add_parser("inspect", help="show defaults, a config, a tensor header or a manifest")
    p.add_argument("file", nargs="?")
    p.add_argument("--defaults", action="store_true")
    p.add_argument("--config")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except InputError as exc:
        log.error("input error: %s", exc)
        return EXIT_INPUT
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except CohgramError as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

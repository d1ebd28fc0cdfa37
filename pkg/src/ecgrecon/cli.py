"""Command-line entry points.

    ecgrecon prepare      ingest raw recordings into the canonical layout
    ecgrecon train        fit a reconstruction model on a prepared dataset
    ecgrecon evaluate     score a trained checkpoint per lead / per subgroup
    ecgrecon reconstruct  run a checkpoint on one recording (3-lead or 12-lead)
    ecgrecon plot         overlay reconstructed leads on the recorded ones
    ecgrecon compare      merge several evaluation reports into one table

Every subcommand accepts ``--config FILE`` (JSON, long option names as keys);
explicit command-line flags override config-file values. Exit status is 0 on
success, 1 on any domain error, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .errors import EcgReconError, UnparseableFile
from .ingest import (DatasetManifest, SplitSpec, build_manifest, load_input_leads,
                     load_manifest, load_record, read_subgroup_table, save_record)
from .leads import ALL_12, TARGET_ROWS, split_input_target
from .metrics import R2_VARIANTS, AVG_ROW, MetricsReport
from .models import (ModelFamily, ModelSpec, DiscriminatorSpec, GeneratorSpec,
                     as_model_fn, load_checkpoint)
from .preprocess import PreprocessConfig, config_from_dict, preprocess_record
from .report import evaluate_model, limb_consistency, render_overlay, render_table
from .training import EARLY_STOP_SPLITS, TrainConfig, fit

RAW_SUFFIXES = (".ecgr", ".csv", ".txt", ".tsv", ".dat")


def dataset_hash(manifest_path) -> str:
    """Identity of a prepared dataset: sha256 over the manifest bytes."""
    return hashlib.sha256(Path(manifest_path).read_bytes()).hexdigest()


def _manifest_path(data) -> Path:
    data = Path(data)
    return data / "manifest.json" if data.is_dir() else data


def _int_list(text: str) -> tuple:
    return tuple(int(part) for part in text.split(",") if part.strip())


# ---------------------------------------------------------------------------
# subcommands

def _cmd_prepare(args) -> int:
    raw_root = Path(args.input)
    out_root = Path(args.out)
    records_dir = out_root / "records"

    paths = sorted(p for p in raw_root.rglob("*")
                   if p.suffix in RAW_SUFFIXES and p.is_file())
    if not paths:
        raise UnparseableFile(f"no recordings with suffix {RAW_SUFFIXES} under {raw_root}")

    subgroups = {}
    table_path = Path(args.subgroups) if args.subgroups else raw_root / "subgroups.csv"
    if table_path.exists():
        subgroups = read_subgroup_table(table_path)

    n = 0
    for p in paths:
        if p.name == "subgroups.csv":
            continue
        rec = load_record(p, format=args.format, fs=args.fs)
        if rec.record_id in subgroups:
            rec.subgroup = subgroups[rec.record_id]
        if args.check_limbs:
            limb_consistency(rec)
        save_record(rec, records_dir / f"{rec.record_id}.ecgr")
        n += 1

    preprocess = PreprocessConfig(fs_target=args.fs_target)
    # scan from the dataset root so manifest paths resolve relative to it
    manifest = build_manifest(
        out_root,
        SplitSpec(train=args.train, val=args.val, test=args.test, seed=args.seed),
        preprocess=preprocess.to_dict(),
        preprocess_hash=preprocess.hash(),
    )
    manifest_path = manifest.save(out_root / "manifest.json")
    counts = {s: len(manifest.entries(s)) for s in ("train", "val", "test")}
    print(f"prepared {n} records -> {manifest_path}")
    print(f"splits: {counts}  dataset_hash: {dataset_hash(manifest_path)[:16]}")
    return 0


def _resolve_preprocess(manifest: DatasetManifest, args) -> PreprocessConfig:
    cfg = config_from_dict(manifest.preprocess) if manifest.preprocess else PreprocessConfig()
    overrides = {}
    if getattr(args, "fs_target", None) is not None:
        overrides["fs_target"] = args.fs_target
    if getattr(args, "window_length", None) is not None:
        overrides["window_length"] = args.window_length
    if getattr(args, "stride", None) is not None:
        overrides["stride"] = args.stride
    if overrides:
        cfg = config_from_dict({**cfg.to_dict(), **overrides})
    return cfg


def _load_split(manifest: DatasetManifest, split: str, preprocess: PreprocessConfig):
    records = []
    for entry in manifest.entries(split):
        rec = load_record(manifest.record_path(entry))
        rec.subgroup = entry.subgroup
        prepped, _ = preprocess_record(rec, preprocess)
        records.append(prepped)
    return records


def _model_spec_from_args(args) -> ModelSpec:
    gen = GeneratorSpec(widths=_int_list(args.g_widths))
    disc = DiscriminatorSpec(widths=_int_list(args.d_widths))
    return ModelSpec(family=ModelFamily(args.model), generator=gen,
                     discriminator=disc, lstm_hidden=args.lstm_hidden,
                     lstm_layers=args.lstm_layers,
                     bottleneck_hidden=args.bottleneck_hidden)


def _cmd_train(args) -> int:
    manifest_path = _manifest_path(args.data)
    manifest = load_manifest(manifest_path)
    preprocess = _resolve_preprocess(manifest, args)

    model_spec = _model_spec_from_args(args)
    train_cfg = TrainConfig(
        max_epochs=args.max_epochs, patience=args.patience,
        batch_size=args.batch_size, lr=args.lr, beta1=args.beta1,
        lambda_recon=args.lambda_recon, seed=args.seed,
        window_length=preprocess.window_length, stride=preprocess.stride,
        early_stop_split=args.early_stop_split,
        deterministic=args.deterministic)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    run_config = {
        "command": "train",
        "data": str(manifest_path),
        "dataset_hash": dataset_hash(manifest_path),
        "model_spec": model_spec.to_dict(),
        "train_config": train_cfg.to_dict(),
        "preprocess": preprocess.to_dict(),
        "preprocess_hash": preprocess.hash(),
    }
    (out_dir / "run_config.json").write_text(
        json.dumps(run_config, sort_keys=True, indent=2) + "\n")

    train_records = _load_split(manifest, "train", preprocess)
    stop_records = _load_split(manifest, train_cfg.early_stop_split, preprocess)

    print(f"training {model_spec.family.value} "
          f"({model_spec.parameter_count():,} parameters) on "
          f"{len(train_records)} records; early stop on "
          f"{train_cfg.early_stop_split} ({len(stop_records)} records)")
    result = fit(train_records, stop_records, model_spec=model_spec,
                 config=train_cfg, preprocess_config=preprocess, out_dir=out_dir)
    print(f"done: {result.epochs_run} epochs, best epoch {result.best_epoch} "
          f"(R²={result.best_val_r2:.4f}) -> {result.best_path}")
    return 0


def _find_checkpoint(args) -> Path:
    if args.checkpoint:
        return Path(args.checkpoint)
    run = Path(args.run)
    if run.is_file():
        return run
    candidate = run / ("last.pt" if getattr(args, "use_last", False) else "best.pt")
    if not candidate.exists():
        raise UnparseableFile(f"no checkpoint at {candidate}")
    return candidate


def _cmd_evaluate(args) -> int:
    manifest_path = _manifest_path(args.data)
    manifest = load_manifest(manifest_path)
    ckpt = load_checkpoint(_find_checkpoint(args))
    report = evaluate_model(
        ckpt, manifest, split=args.split,
        model_name=args.name or ckpt.model_spec.family.value,
        dataset=args.dataset_name, r2_variant=args.r2_variant,
        dataset_hash=dataset_hash(manifest_path))

    out_json = Path(args.out_json) if args.out_json else (
        Path(args.run) / f"eval_{args.split}.json" if args.run else None)
    if out_json is not None:
        out_json.parent.mkdir(parents=True, exist_ok=True)
        out_json.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")

    table = render_table(report, fmt="markdown" if args.markdown else "csv")
    if args.out:
        Path(args.out).write_text(table)
        print(f"wrote {args.out}" + (f" and {out_json}" if out_json else ""))
    else:
        print(table, end="")
    avg = report.overall[AVG_ROW]
    print(f"# {report.model} {args.split}: R²={avg.r2:.4f} rx={avg.rx:.4f} "
          f"({avg.n_records} records)", file=sys.stderr)
    return 0


def _cmd_reconstruct(args) -> int:
    ckpt = load_checkpoint(Path(args.checkpoint))
    preprocess = config_from_dict(ckpt.preprocess_config)
    rec = load_input_leads(args.input, format=args.format, fs=args.fs)
    prepped, _ = preprocess_record(rec, preprocess)
    model_fn = as_model_fn(ckpt.build())
    inputs, _targets = split_input_target(prepped.signal)
    pred = model_fn(inputs)
    return _write_reconstruction(args, prepped, pred)


def _write_reconstruction(args, prepped, pred) -> int:
    full = prepped.signal.copy()
    for row, lead_row in enumerate(TARGET_ROWS):
        full[lead_row] = pred[row]
    out = Path(args.out)
    rec_out = prepped.with_signal(full)
    rec_out.extra["reconstructed_leads"] = [ALL_12[r] for r in TARGET_ROWS]
    rec_out.extra["normalized"] = True
    if out.suffix == ".csv":
        import pandas as pd
        frame = pd.DataFrame({lead: full[i] for i, lead in enumerate(ALL_12)})
        frame.insert(0, "time", np.arange(full.shape[1]) / prepped.fs)
        out.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out, index=False, float_format="%.6f")
    else:
        save_record(rec_out, out)
    print(f"wrote {out} ({full.shape[1]} samples at {prepped.fs:g} Hz, "
          "normalized units)")
    return 0


def _cmd_plot(args) -> int:
    rec = load_record(args.input, format=args.format, fs=args.fs)
    predictions = {}
    prepped = None
    for spec in args.checkpoint:
        name, _, path = spec.rpartition("=")
        ckpt = load_checkpoint(Path(path))
        if prepped is None:
            prepped, _ = preprocess_record(rec, config_from_dict(ckpt.preprocess_config))
        model_fn = as_model_fn(ckpt.build())
        inputs, _targets = split_input_target(prepped.signal)
        predictions[name or ckpt.model_spec.family.value] = model_fn(inputs)
    out = render_overlay(prepped, predictions, args.out, seconds=args.seconds)
    print(f"wrote {out}")
    return 0


def _cmd_compare(args) -> int:
    reports = []
    for path in args.reports:
        payload = json.loads(Path(path).read_text())
        reports.append(MetricsReport.from_dict(payload))
    hashes = {r.dataset_hash for r in reports if r.dataset_hash}
    if len(hashes) > 1:
        raise EcgReconError(
            "refusing to compare reports evaluated on different datasets: "
            + ", ".join(sorted(h[:16] for h in hashes)))
    table = render_table(reports, fmt="markdown" if args.markdown else "csv")
    if args.out:
        Path(args.out).write_text(table)
        print(f"wrote {args.out}")
    else:
        print(table, end="")
    return 0


# ---------------------------------------------------------------------------
# parser plumbing

def _add_config_flag(parser):
    parser.add_argument("--config", metavar="FILE",
                        help="JSON file of option defaults (long names as keys)")


def _apply_config_file(parser: argparse.ArgumentParser, argv: list) -> list:
    """First-phase parse: pull --config out, install its values as defaults."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return argv
    try:
        payload = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config file {known.config}: {exc}")
    if not isinstance(payload, dict):
        parser.error(f"config file {known.config} must hold a JSON object")
    dests = {a.dest for a in parser._actions}
    defaults = {}
    for key, value in payload.items():
        dest = key.replace("-", "_")
        if dest not in dests:
            parser.error(f"config file {known.config}: unknown option {key!r}")
        defaults[dest] = value
    parser.set_defaults(**defaults)
    return argv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecgrecon",
        description="Reconstruct the missing 9 leads of a 12-lead ECG from "
                    "leads I, II and V2.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="ingest raw recordings, build manifest")
    p.add_argument("--input", required=True, help="directory of raw recordings")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--format", choices=["canonical", "csv", "wfdb_text"],
                   help="force input format (default: infer from suffix)")
    p.add_argument("--fs", type=float, help="sampling rate for text files without one")
    p.add_argument("--fs-target", type=float, default=500.0,
                   help="canonical sampling rate (default 500)")
    p.add_argument("--train", type=float, default=0.8)
    p.add_argument("--val", type=float, default=0.1)
    p.add_argument("--test", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0, help="split shuffling seed")
    p.add_argument("--subgroups", help="record_id,subgroup CSV (default: input dir)")
    p.add_argument("--check-limbs", action="store_true",
                   help="warn when recorded limb leads disagree with I/II derivation")
    _add_config_flag(p)
    p.set_defaults(func=_cmd_prepare)

    p = sub.add_parser("train", help="train a reconstruction model")
    p.add_argument("--data", required=True, help="prepared dataset dir or manifest.json")
    p.add_argument("--out", required=True, help="run directory for checkpoints/logs")
    p.add_argument("--model", choices=[f.value for f in ModelFamily], default="gan")
    p.add_argument("--g-widths", default="64,128,256,512,1024,1024,1024",
                   help="encoder widths, comma separated")
    p.add_argument("--d-widths", default="64,128,256,512")
    p.add_argument("--lstm-hidden", type=int, default=64)
    p.add_argument("--lstm-layers", type=int, default=2)
    p.add_argument("--bottleneck-hidden", type=int, default=512)
    p.add_argument("--max-epochs", type=int, default=14)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--beta1", type=float, default=0.5)
    p.add_argument("--lambda-recon", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fs-target", type=float, default=None,
                   help="override the manifest preprocessing sampling rate")
    p.add_argument("--window-length", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--early-stop-split", choices=EARLY_STOP_SPLITS, default="val",
                   help="which split drives early stopping")
    p.add_argument("--deterministic", action="store_true")
    _add_config_flag(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint per lead/subgroup")
    p.add_argument("--data", required=True)
    p.add_argument("--run", help="run directory (uses best.pt)")
    p.add_argument("--checkpoint", help="explicit checkpoint path")
    p.add_argument("--use-last", action="store_true", help="use last.pt, not best.pt")
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--r2-variant", choices=list(R2_VARIANTS), default="conventional")
    p.add_argument("--name", help="model name in the output table")
    p.add_argument("--dataset-name", default="", help="dataset name in the table")
    p.add_argument("--out", help="write the table here instead of stdout")
    p.add_argument("--out-json", help="write the report JSON here")
    p.add_argument("--markdown", action="store_true", help="markdown instead of CSV")
    _add_config_flag(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("reconstruct", help="run a checkpoint on one recording")
    p.add_argument("--input", required=True, help="3-lead or 12-lead recording")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help=".ecgr or .csv output path")
    p.add_argument("--format", choices=["canonical", "csv", "wfdb_text"])
    p.add_argument("--fs", type=float)
    _add_config_flag(p)
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("plot", help="overlay reconstructions on a recording")
    p.add_argument("--input", required=True, help="12-lead recording")
    p.add_argument("--checkpoint", nargs="+", required=True,
                   metavar="[NAME=]PATH", help="one or more checkpoints")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--seconds", type=float, default=None,
                   help="plot only the first N seconds")
    p.add_argument("--format", choices=["canonical", "csv", "wfdb_text"])
    p.add_argument("--fs", type=float)
    _add_config_flag(p)
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser("compare", help="merge evaluation reports into one table")
    p.add_argument("reports", nargs="+", help="report JSON files from `evaluate`")
    p.add_argument("--out", help="write the table here instead of stdout")
    p.add_argument("--markdown", action="store_true")
    _add_config_flag(p)
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()

    # Resolve the subparser for the config-file pass (flags still win).
    if argv and not argv[0].startswith("-"):
        sub_actions = [a for a in parser._actions
                       if isinstance(a, argparse._SubParsersAction)]
        if sub_actions and argv[0] in sub_actions[0].choices:
            _apply_config_file(sub_actions[0].choices[argv[0]], argv[1:])

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EcgReconError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

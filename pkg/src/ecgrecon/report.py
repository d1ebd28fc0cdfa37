"""Evaluation and reporting: per-lead / per-subgroup metric tables, analytic
limb-lead checks, CSV/markdown rendering, and waveform overlay figures."""

from __future__ import annotations

import io
import warnings
from pathlib import Path

import numpy as np

from .errors import ConstantInput, ConstantReference, EmptySplit, LengthMismatch
from .ingest import DatasetManifest, EcgRecord, load_record
from .leads import ALL_12, TARGET_9, split_input_target
from .metrics import (AVG_ROW, LeadMetrics, MetricsReport, RecordMetrics,
                      aggregate, compute_r2, compute_rx)
from .models import Checkpoint, as_model_fn
from .preprocess import PreprocessConfig, config_from_dict, preprocess_record

LIMB_DERIVED = ("III", "aVR", "aVL", "aVF")
LIMB_CONSISTENCY_FLOOR = 0.95

TABLE_COLUMNS = ("lead", "model", "dataset", "subgroup", "r2", "rx", "n_records")


def _pair_metrics(truth: np.ndarray, pred: np.ndarray, r2_variant: str) -> LeadMetrics:
    try:
        r2 = compute_r2(truth, pred, variant=r2_variant)
    except (ConstantReference, ConstantInput):
        r2 = float("nan")
    try:
        rx = compute_rx(truth, pred)
    except ConstantInput:
        rx = float("nan")
    return LeadMetrics(r2=r2, rx=rx)


def evaluate_records(records, model_fn, *, model_name: str,
                     dataset: str = "", split: str = "",
                     r2_variant: str = "conventional",
                     dataset_hash: str = "") -> MetricsReport:
    """Score a (3, L) -> (9, L) callable on a list of normalized records."""
    if not records:
        raise EmptySplit("no records to evaluate")
    per_record = []
    for rec in records:
        inputs, targets = split_input_target(rec.signal)
        pred = np.asarray(model_fn(inputs), dtype=np.float64)
        if pred.shape != targets.shape:
            raise LengthMismatch(
                f"model produced {pred.shape}, expected {targets.shape} "
                f"for record {rec.record_id}")
        per_lead = {lead: _pair_metrics(targets[i], pred[i], r2_variant)
                    for i, lead in enumerate(TARGET_9)}
        per_record.append(RecordMetrics(record_id=rec.record_id,
                                        subgroup=rec.subgroup,
                                        per_lead=per_lead))
    return aggregate(per_record, model=model_name, dataset=dataset, split=split,
                     dataset_hash=dataset_hash, r2_variant=r2_variant)


def evaluate_model(checkpoint: Checkpoint, manifest: DatasetManifest, *,
                   split: str = "test", preprocess: PreprocessConfig | None = None,
                   model_name: str | None = None, dataset: str = "",
                   r2_variant: str = "conventional",
                   dataset_hash: str = "") -> MetricsReport:
    """Preprocess a manifest split and score a trained checkpoint on it.

    The preprocessing configuration must hash-match the one the checkpoint
    was trained under; pass ``preprocess`` explicitly only to assert it."""
    if preprocess is None:
        preprocess = config_from_dict(checkpoint.preprocess_config)
    if preprocess.hash() != checkpoint.preprocess_hash:
        from .errors import ConfigHashMismatch
        raise ConfigHashMismatch(
            f"evaluation preprocessing hash {preprocess.hash()} does not match "
            f"checkpoint hash {checkpoint.preprocess_hash}")
    entries = manifest.entries(split)
    if not entries:
        raise EmptySplit(f"manifest has no records in split {split!r}")
    records = []
    for entry in entries:
        rec = load_record(manifest.record_path(entry))
        prepped, _ = preprocess_record(rec, preprocess)
        records.append(prepped)
    model = checkpoint.build()
    name = model_name or checkpoint.model_spec.family.value
    return evaluate_records(records, as_model_fn(model), model_name=name,
                            dataset=dataset, split=split, r2_variant=r2_variant,
                            dataset_hash=dataset_hash)


def analytic_limb_reconstruction(lead_i: np.ndarray, lead_ii: np.ndarray) -> dict:
    """Derived limb leads from leads I and II via the standard identities:
    III = II - I, aVR = -(I + II)/2, aVL = I - II/2, aVF = II - I/2."""
    i = np.asarray(lead_i, dtype=np.float64).ravel()
    ii = np.asarray(lead_ii, dtype=np.float64).ravel()
    if i.shape != ii.shape:
        raise LengthMismatch(f"lead lengths differ: {i.shape[0]} vs {ii.shape[0]}")
    return {"III": ii - i,
            "aVR": -(i + ii) / 2.0,
            "aVL": i - ii / 2.0,
            "aVF": ii - i / 2.0}


def limb_consistency(record: EcgRecord) -> dict:
    """Correlation between each recorded limb lead and its analytic derivation
    from leads I and II. Values well below 1 indicate the record does not obey
    the limb identities (bad electrode bookkeeping, broken export, ...)."""
    by_name = {lead: record.signal[row] for row, lead in enumerate(ALL_12)}
    derived = analytic_limb_reconstruction(by_name["I"], by_name["II"])
    out = {}
    for lead in LIMB_DERIVED:
        try:
            rx = compute_rx(by_name[lead], derived[lead])
        except ConstantInput:
            rx = float("nan")
        out[lead] = rx
        if not np.isnan(rx) and rx < LIMB_CONSISTENCY_FLOOR:
            warnings.warn(
                f"record {record.record_id}: lead {lead} correlates only "
                f"{rx:.3f} with its derivation from I and II", stacklevel=2)
    return out


def _fmt(value: float) -> str:
    return "" if np.isnan(value) else f"{value:.4f}"


def _report_rows(report: MetricsReport):
    rows = []
    for lead in TARGET_9 + (AVG_ROW,):
        cell = report.overall.get(lead)
        if cell is not None:
            rows.append((lead, report.model, report.dataset, "ALL",
                         cell.r2, cell.rx, cell.n_records))
    for subgroup in sorted(report.subgroups):
        table = report.subgroups[subgroup]
        for lead in TARGET_9 + (AVG_ROW,):
            cell = table.get(lead)
            if cell is not None:
                rows.append((lead, report.model, report.dataset, subgroup,
                             cell.r2, cell.rx, cell.n_records))
    return rows


def render_table(reports, fmt: str = "csv") -> str:
    """Render one or more metric reports as CSV (stable bytes) or markdown.

    With several models, the markdown flavor bolds the best value per
    (row, metric)."""
    if isinstance(reports, MetricsReport):
        reports = [reports]
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(",".join(TABLE_COLUMNS) + "\n")
        for report in reports:
            for lead, model, ds, sub, r2, rx, n in _report_rows(report):
                buf.write(f"{lead},{model},{ds},{sub},{_fmt(r2)},{_fmt(rx)},{n}\n")
        return buf.getvalue()
    if fmt != "markdown":
        raise ValueError(f"unknown table format {fmt!r}")

    models = [r.model for r in reports]
    lines = ["| lead | " + " | ".join(f"{m} R² | {m} rx" for m in models) + " |",
             "|" + "---|" * (1 + 2 * len(models))]
    overall = {r.model: r.overall for r in reports}
    for lead in TARGET_9 + (AVG_ROW,):
        r2s = {m: overall[m][lead].r2 for m in models if lead in overall[m]}
        rxs = {m: overall[m][lead].rx for m in models if lead in overall[m]}
        best_r2 = max((v for v in r2s.values() if not np.isnan(v)), default=np.nan)
        best_rx = max((v for v in rxs.values() if not np.isnan(v)), default=np.nan)
        cells = []
        for m in models:
            for val, best in ((r2s.get(m, np.nan), best_r2),
                              (rxs.get(m, np.nan), best_rx)):
                text = _fmt(val)
                if len(models) > 1 and text and val == best:
                    text = f"**{text}**"
                cells.append(text)
        lines.append("| " + " | ".join([lead] + cells) + " |")
    return "\n".join(lines) + "\n"


def render_overlay(record: EcgRecord, predictions: dict, out_path, *,
                   seconds: float | None = None, dpi: int = 120) -> Path:
    """Stacked 9-panel figure of the true target leads with one overlaid trace
    per model. ``predictions`` maps model name -> (9, L) array."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    _, targets = split_input_target(record.signal)
    n = targets.shape[-1]
    if seconds is not None:
        n = min(n, int(round(seconds * record.fs)))
    t = np.arange(n) / record.fs

    fig, axes = plt.subplots(len(TARGET_9), 1, figsize=(10, 14), sharex=True)
    for i, (lead, ax) in enumerate(zip(TARGET_9, axes)):
        ax.plot(t, targets[i, :n], color="black", lw=0.9, label="recorded")
        for name, pred in predictions.items():
            pred = np.asarray(pred)
            if pred.shape[-1] < n:
                raise LengthMismatch(
                    f"prediction {name!r} shorter than plotted span")
            ax.plot(t, pred[i, :n], lw=0.8, alpha=0.8, label=name)
        ax.set_ylabel(lead)
        if i == 0:
            ax.legend(loc="upper right", fontsize=8, ncol=1 + len(predictions))
    axes[-1].set_xlabel("time (s)")
    fig.suptitle(f"record {record.record_id}")
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=dpi)
    plt.close(fig)
    return out_path

"""Load heterogeneous ECG exports into one canonical on-disk format and split them.

Canonical record file layout (little-endian):
    4-byte magic b"ECGR" | u32 version | f32 fs | u32 L | 12*L f32 samples (row-major)
plus a JSON sidecar `<stem>.json` holding ids, subgroup and optional scaling metadata.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (EmptyDataset, InconsistentLength, IoFailure, MissingLead,
                     UnparseableFile)
from .leads import ALL_12, INPUT_3, canonical_lead_name

MAGIC = b"ECGR"
FORMAT_VERSION = 1
RECORD_SUFFIX = ".ecgr"

_TIME_COLUMNS = {"time", "t", "sample", "samples", "index", "seconds", "elapsed", "ms"}


class Subgroup(str, Enum):
    HC = "HC"
    BB = "BB"
    HY = "HY"
    MI = "MI"
    VA = "VA"
    ND = "ND"
    UNKNOWN = "UNKNOWN"


@dataclass
class EcgRecord:
    """One patient recording: 12xL samples in millivolts, row order per leads.ALL_12."""

    record_id: str
    patient_id: str
    signal: np.ndarray          # float32, shape (12, L)
    fs: float                   # Hz
    subgroup: Subgroup = Subgroup.UNKNOWN
    source_db: str = ""
    extra: dict = field(default_factory=dict)   # sidecar passthrough (scaling, flags)

    def __post_init__(self):
        sig = np.asarray(self.signal, dtype=np.float32)
        if sig.ndim != 2 or sig.shape[0] != len(ALL_12):
            raise ValueError(f"signal must be 12xL, got shape {sig.shape}")
        if sig.shape[1] < 1:
            raise ValueError("signal must contain at least one sample")
        if not np.all(np.isfinite(sig)):
            raise ValueError("signal contains non-finite samples")
        if not self.fs > 0:
            raise ValueError(f"fs must be positive, got {self.fs}")
        self.signal = sig
        self.subgroup = Subgroup(self.subgroup)

    @property
    def n_samples(self) -> int:
        return self.signal.shape[1]

    def with_signal(self, signal, fs=None) -> "EcgRecord":
        return replace(self, signal=signal, fs=self.fs if fs is None else fs)


# ---------------------------------------------------------------------------
# canonical binary format

def save_record(rec: EcgRecord, path) -> Path:
    """Write the canonical binary file plus JSON sidecar. Returns the binary path."""
    path = Path(path)
    if path.suffix != RECORD_SUFFIX:
        path = path.with_suffix(RECORD_SUFFIX)
    try:
        header = MAGIC + struct.pack("<IfI", FORMAT_VERSION, rec.fs, rec.n_samples)
        body = np.ascontiguousarray(rec.signal, dtype="<f4").tobytes()
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(header + body)
        sidecar = {
            "record_id": rec.record_id,
            "patient_id": rec.patient_id,
            "subgroup": rec.subgroup.value,
            "source_db": rec.source_db,
        }
        sidecar.update(rec.extra)
        path.with_suffix(".json").write_text(
            json.dumps(sidecar, sort_keys=True, indent=2) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def _load_canonical(path: Path) -> EcgRecord:
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise UnparseableFile(f"cannot read {path}: {exc}") from exc
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise UnparseableFile(f"{path}: not a canonical record (bad magic)")
    version, fs, length = struct.unpack("<IfI", blob[4:16])
    if version != FORMAT_VERSION:
        raise UnparseableFile(f"{path}: unsupported format version {version}")
    expected = 16 + 12 * length * 4
    if len(blob) != expected:
        raise InconsistentLength(
            f"{path}: file holds {len(blob)} bytes, header implies {expected}")
    signal = np.frombuffer(blob[16:], dtype="<f4").reshape(12, length)

    sidecar_path = path.with_suffix(".json")
    meta = {}
    if sidecar_path.exists():
        try:
            meta = json.loads(sidecar_path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UnparseableFile(f"bad sidecar {sidecar_path}: {exc}") from exc
    known = {"record_id", "patient_id", "subgroup", "source_db"}
    return EcgRecord(
        record_id=meta.get("record_id", path.stem),
        patient_id=meta.get("patient_id", path.stem),
        signal=signal.copy(),
        fs=float(fs),
        subgroup=Subgroup(meta.get("subgroup", "UNKNOWN")),
        source_db=meta.get("source_db", ""),
        extra={k: v for k, v in meta.items() if k not in known},
    )


# ---------------------------------------------------------------------------
# text exports (csv and whitespace-delimited wfdb dumps)

def _load_table(path: Path, fmt: str, fs: float | None,
                required=ALL_12) -> EcgRecord:
    sep = "," if fmt == "csv" else r"\s+"
    try:
        df = pd.read_csv(path, sep=sep, engine="python")
    except Exception as exc:
        raise UnparseableFile(f"cannot parse {path}: {exc}") from exc
    if df.empty:
        raise UnparseableFile(f"{path}: no sample rows")

    columns = {}
    time_col = None
    for col in df.columns:
        lead = canonical_lead_name(str(col))
        if lead is not None:
            columns[lead] = col
        elif str(col).strip().lower() in _TIME_COLUMNS:
            time_col = col
    for lead in required:
        if lead not in columns:
            raise MissingLead(lead)

    rows = []
    present = []
    for lead in ALL_12:
        if lead not in columns:
            rows.append(None)   # zero-filled once the length is known
            continue
        series = pd.to_numeric(df[columns[lead]], errors="coerce").to_numpy(dtype=np.float64)
        if np.isnan(series).any():
            # distinguish ragged columns (NaN tail) from garbage values
            nonnan = np.flatnonzero(~np.isnan(series))
            if nonnan.size and np.isnan(series[nonnan[-1] + 1:]).all() and \
                    not np.isnan(series[:nonnan[-1] + 1]).any():
                raise InconsistentLength(
                    f"{path}: lead {lead} has {nonnan.size} samples, others have {len(series)}")
            raise UnparseableFile(f"{path}: non-numeric samples in lead {lead}")
        rows.append(series)
        present.append(lead)
    length = len(df)
    signal = np.stack([r if r is not None else np.zeros(length) for r in rows])

    meta = {}
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        try:
            meta = json.loads(sidecar.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UnparseableFile(f"bad sidecar {sidecar}: {exc}") from exc
    if fs is None:
        fs = meta.get("fs")
    if fs is None and time_col is not None:
        t = pd.to_numeric(df[time_col], errors="coerce").to_numpy(dtype=np.float64)
        dt = np.median(np.diff(t))
        if np.isfinite(dt) and dt > 0:
            fs = 1.0 / dt
    if fs is None:
        raise UnparseableFile(
            f"{path}: sampling rate unknown (no sidecar 'fs', no time column, no fs argument)")

    extra = {}
    if len(present) < len(ALL_12):
        extra["present_leads"] = present
    return EcgRecord(
        record_id=meta.get("record_id", path.stem),
        patient_id=meta.get("patient_id", path.stem),
        signal=signal,
        fs=float(fs),
        subgroup=Subgroup(meta.get("subgroup", "UNKNOWN")),
        source_db=meta.get("source_db", ""),
        extra=extra,
    )


def load_record(path, format: str | None = None, fs: float | None = None) -> EcgRecord:
    """Load one record, reordering leads into ALL_12 order regardless of source order.

    format: "canonical", "csv" or "wfdb_text"; inferred from the suffix when None.
    fs: sampling rate override for text files that carry none.
    """
    path = Path(path)
    if not path.exists():
        raise UnparseableFile(f"no such file: {path}")
    if format is None:
        format = {RECORD_SUFFIX: "canonical", ".csv": "csv"}.get(path.suffix, "wfdb_text")
    if format == "canonical":
        return _load_canonical(path)
    if format in ("csv", "wfdb_text"):
        return _load_table(path, format, fs)
    raise ValueError(f"unknown format {format!r}")


def load_input_leads(path, format: str | None = None, fs: float | None = None) -> EcgRecord:
    """Like load_record, but accept reduced recordings that carry only the
    acquisition leads (I, II, V2); absent leads come back as zero rows and are
    noted in record.extra["present_leads"]."""
    path = Path(path)
    if not path.exists():
        raise UnparseableFile(f"no such file: {path}")
    if format is None:
        format = {RECORD_SUFFIX: "canonical", ".csv": "csv"}.get(path.suffix, "wfdb_text")
    if format == "canonical":
        return _load_canonical(path)   # canonical files always hold 12 rows
    if format in ("csv", "wfdb_text"):
        return _load_table(path, format, fs, required=INPUT_3)
    raise ValueError(f"unknown format {format!r}")


# ---------------------------------------------------------------------------
# manifest

@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.8
    val: float = 0.1
    test: float = 0.1
    seed: int = 0

    def __post_init__(self):
        total = self.train + self.val + self.test
        if not np.isclose(total, 1.0):
            raise ValueError(f"split fractions must sum to 1, got {total}")


@dataclass
class ManifestEntry:
    record_id: str
    path: str                   # relative to the manifest directory
    patient_id: str
    subgroup: Subgroup
    split: str                  # train | val | test


@dataclass
class DatasetManifest:
    records: list[ManifestEntry]
    fs_canonical: float = 500.0
    format_version: int = FORMAT_VERSION
    preprocess: dict = field(default_factory=dict)
    preprocess_hash: str = ""
    root: Path | None = None    # set on load/save; not serialized

    def entries(self, split: str | None = None) -> list[ManifestEntry]:
        if split is None:
            return list(self.records)
        return [e for e in self.records if e.split == split]

    def record_path(self, entry: ManifestEntry) -> Path:
        base = self.root if self.root is not None else Path(".")
        return base / entry.path

    def to_json(self) -> str:
        payload = {
            "format_version": self.format_version,
            "fs_canonical": self.fs_canonical,
            "preprocess": self.preprocess,
            "preprocess_hash": self.preprocess_hash,
            "records": [
                {
                    "record_id": e.record_id,
                    "path": e.path,
                    "patient_id": e.patient_id,
                    "subgroup": e.subgroup.value,
                    "split": e.split,
                }
                for e in self.records
            ],
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.to_json())
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc
        self.root = path.parent
        return path


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UnparseableFile(f"cannot load manifest {path}: {exc}") from exc
    records = [
        ManifestEntry(
            record_id=r["record_id"],
            path=r["path"],
            patient_id=r["patient_id"],
            subgroup=Subgroup(r["subgroup"]),
            split=r["split"],
        )
        for r in payload["records"]
    ]
    return DatasetManifest(
        records=records,
        fs_canonical=payload["fs_canonical"],
        format_version=payload["format_version"],
        preprocess=payload.get("preprocess", {}),
        preprocess_hash=payload.get("preprocess_hash", ""),
        root=path.parent,
    )


def read_subgroup_table(path) -> dict[str, Subgroup]:
    """Read a `record_id,subgroup` CSV mapping; unknown codes raise."""
    table = {}
    df = pd.read_csv(path, dtype=str)
    cols = {c.strip().lower(): c for c in df.columns}
    if "record_id" not in cols or "subgroup" not in cols:
        raise UnparseableFile(f"{path}: expected columns record_id,subgroup")
    for _, row in df.iterrows():
        table[str(row[cols["record_id"]]).strip()] = Subgroup(str(row[cols["subgroup"]]).strip())
    return table


def _assign_splits(patients: list[str], counts: dict[str, int], spec: SplitSpec) -> dict[str, str]:
    """Patient-level greedy assignment: deterministic, record-count balanced."""
    total = sum(counts.values())
    targets = {"train": spec.train * total, "val": spec.val * total, "test": spec.test * total}
    rng = np.random.default_rng(spec.seed)
    order = list(sorted(patients))
    rng.shuffle(order)
    filled = {name: 0 for name in targets}
    assignment = {}
    for patient in order:
        # largest remaining deficit wins; ties broken by fixed split order
        deficits = {name: targets[name] - filled[name] for name in ("train", "val", "test")}
        choice = max(deficits, key=lambda name: (deficits[name], name == "train"))
        assignment[patient] = choice
        filled[choice] += counts[patient]
    return assignment


def build_manifest(root, split_spec: SplitSpec | None = None,
                   subgroup_table: dict[str, Subgroup] | None = None,
                   preprocess: dict | None = None,
                   preprocess_hash: str = "") -> DatasetManifest:
    """Scan `root` for canonical records and build patient-disjoint splits.

    A `subgroups.csv` file in root is picked up automatically when no explicit
    table is given. Deterministic for a fixed (root contents, split_spec).
    """
    root = Path(root)
    spec = split_spec or SplitSpec()
    if subgroup_table is None:
        table_path = root / "subgroups.csv"
        subgroup_table = read_subgroup_table(table_path) if table_path.exists() else {}

    paths = sorted(root.rglob(f"*{RECORD_SUFFIX}"))
    records = []
    for p in paths:
        rec = _load_canonical(p)   # validates; raises UnparseableFile on corruption
        subgroup = subgroup_table.get(rec.record_id, rec.subgroup)
        records.append((rec.record_id, p.relative_to(root).as_posix(), rec.patient_id, subgroup))
    if not records:
        raise EmptyDataset(f"no canonical records under {root}")

    counts: dict[str, int] = {}
    for _, _, patient, _ in records:
        counts[patient] = counts.get(patient, 0) + 1
    assignment = _assign_splits(list(counts), counts, spec)

    entries = [
        ManifestEntry(record_id=rid, path=rel, patient_id=pid,
                      subgroup=Subgroup(sub), split=assignment[pid])
        for rid, rel, pid, sub in sorted(records)
    ]
    return DatasetManifest(records=entries, preprocess=preprocess or {},
                           preprocess_hash=preprocess_hash, root=root)

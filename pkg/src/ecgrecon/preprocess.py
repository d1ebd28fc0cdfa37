"""Record-to-model-ready transforms: resampling, baseline removal, [-1,1]
normalization with exact inverse, crop to a multiple of 128, sliding windows."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.ndimage import median_filter
from scipy.signal import resample_poly

from .errors import RecordTooShort
from .ingest import EcgRecord
from .leads import split_input_target

FS_CANONICAL = 500.0
CROP_MULTIPLE = 128
WINDOW_LENGTH = 4992            # 39 * 128
DEFAULT_STRIDE = 2496           # 50% overlap
BASELINE_WINDOWS_S = (0.2, 0.6)


@dataclass(frozen=True)
class PreprocessConfig:
    fs_target: float = FS_CANONICAL
    baseline_windows_s: tuple[float, float] = BASELINE_WINDOWS_S
    crop_multiple: int = CROP_MULTIPLE
    window_length: int = WINDOW_LENGTH
    stride: int = DEFAULT_STRIDE
    normalization: str = "per-lead-minmax"

    def to_dict(self) -> dict:
        return {
            "fs_target": self.fs_target,
            "baseline_windows_s": list(self.baseline_windows_s),
            "crop_multiple": self.crop_multiple,
            "window_length": self.window_length,
            "stride": self.stride,
            "normalization": self.normalization,
        }

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def config_from_dict(d: dict) -> PreprocessConfig:
    d = dict(d)
    if "baseline_windows_s" in d:
        d["baseline_windows_s"] = tuple(d["baseline_windows_s"])
    return PreprocessConfig(**d)


# ---------------------------------------------------------------------------

def resample(rec: EcgRecord, fs_target: float = FS_CANONICAL) -> EcgRecord:
    """Polyphase rational resampling with anti-aliasing at min(fs, fs_target)/2.

    Output length is round(L * fs_target / fs). Equal rates return the record
    unchanged (exact identity).
    """
    if fs_target <= 0:
        raise ValueError("fs_target must be positive")
    if fs_target == rec.fs:
        return rec.with_signal(rec.signal.copy())
    ratio = Fraction(fs_target / rec.fs).limit_denominator(10_000)
    if abs(float(ratio) - fs_target / rec.fs) > 1e-9:
        raise ValueError(f"rate ratio {fs_target}/{rec.fs} is not usably rational")
    up, down = ratio.numerator, ratio.denominator
    out = resample_poly(rec.signal.astype(np.float64), up, down, axis=1)
    # resample_poly yields ceil(L*up/down); trim to the rounded contract length
    target_len = int(np.floor(rec.n_samples * up / down + 0.5))
    out = out[:, :target_len]
    return rec.with_signal(out.astype(np.float32), fs=fs_target)


def _odd_window(seconds: float, fs: float) -> int:
    k = int(round(seconds * fs))
    return k + 1 if k % 2 == 0 else k


def remove_baseline(rec: EcgRecord,
                    windows_s: tuple[float, float] = BASELINE_WINDOWS_S) -> EcgRecord:
    """Subtract a two-stage moving-median baseline estimate (0.2 s then 0.6 s).

    The first median suppresses QRS complexes, the second suppresses T waves;
    what remains is the wander, which is subtracted. Edges are replicated.
    """
    min_len = int(round(max(windows_s) * rec.fs))
    if rec.n_samples < min_len:
        raise RecordTooShort(
            f"record {rec.record_id}: {rec.n_samples} samples < {min_len} "
            f"needed for a {max(windows_s)} s median window")
    x = rec.signal.astype(np.float64)
    k1 = _odd_window(windows_s[0], rec.fs)
    k2 = _odd_window(windows_s[1], rec.fs)
    stage1 = median_filter(x, size=(1, k1), mode="nearest")
    baseline = median_filter(stage1, size=(1, k2), mode="nearest")
    return rec.with_signal((x - baseline).astype(np.float32))


@dataclass
class ScalingInfo:
    """Per-lead min/max captured after baseline correction; inverts normalize exactly."""

    minimum: np.ndarray         # float64, shape (12,)
    maximum: np.ndarray
    degenerate: np.ndarray = field(default=None)  # bool, max == min leads

    def __post_init__(self):
        self.minimum = np.asarray(self.minimum, dtype=np.float64)
        self.maximum = np.asarray(self.maximum, dtype=np.float64)
        if np.any(self.minimum > self.maximum):
            raise ValueError("per-lead minimum exceeds maximum")
        if self.degenerate is None:
            self.degenerate = self.maximum == self.minimum
        self.degenerate = np.asarray(self.degenerate, dtype=bool)

    def to_dict(self) -> dict:
        return {
            "minimum": self.minimum.tolist(),
            "maximum": self.maximum.tolist(),
            "degenerate": self.degenerate.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingInfo":
        return cls(minimum=d["minimum"], maximum=d["maximum"],
                   degenerate=np.asarray(d["degenerate"], dtype=bool))


def normalize(rec: EcgRecord) -> tuple[EcgRecord, ScalingInfo]:
    """Map each lead affinely onto [-1, 1]; constant leads map to zero."""
    x = rec.signal.astype(np.float64)
    lo = x.min(axis=1)
    hi = x.max(axis=1)
    span = hi - lo
    degenerate = span == 0
    safe_span = np.where(degenerate, 1.0, span)
    out = 2.0 * (x - lo[:, None]) / safe_span[:, None] - 1.0
    out[degenerate] = 0.0
    scaling = ScalingInfo(minimum=lo, maximum=hi, degenerate=degenerate)
    return rec.with_signal(out.astype(np.float32)), scaling


def denormalize(rec: EcgRecord, scaling: ScalingInfo) -> EcgRecord:
    x = rec.signal.astype(np.float64)
    span = scaling.maximum - scaling.minimum
    out = (x + 1.0) / 2.0 * span[:, None] + scaling.minimum[:, None]
    out[scaling.degenerate] = scaling.minimum[scaling.degenerate, None]
    return rec.with_signal(out.astype(np.float32))


def crop_to_multiple(rec: EcgRecord, multiple: int = CROP_MULTIPLE) -> EcgRecord:
    """Crop from the start down to the largest contained multiple of `multiple`."""
    kept = (rec.n_samples // multiple) * multiple
    if kept == 0:
        raise RecordTooShort(
            f"record {rec.record_id}: {rec.n_samples} samples < multiple {multiple}")
    if kept == rec.n_samples:
        return rec.with_signal(rec.signal.copy())
    return rec.with_signal(rec.signal[:, :kept].copy())


@dataclass
class Window:
    input: np.ndarray           # float32, 3 x length
    target: np.ndarray          # float32, 9 x length
    record_id: str
    start: int


@dataclass
class WindowedDataset:
    windows: list[Window]
    length: int
    stride: int

    def __len__(self) -> int:
        return len(self.windows)


def make_windows(rec: EcgRecord, length: int = WINDOW_LENGTH,
                 stride: int = DEFAULT_STRIDE) -> WindowedDataset:
    """Extract sliding windows at starts 0, stride, 2*stride, ... while they fit."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if rec.n_samples < length:
        raise RecordTooShort(
            f"record {rec.record_id}: {rec.n_samples} samples < window length {length}")
    windows = []
    for start in range(0, rec.n_samples - length + 1, stride):
        chunk = rec.signal[:, start:start + length]
        inp, tgt = split_input_target(chunk)
        windows.append(Window(input=inp.copy(), target=tgt.copy(),
                              record_id=rec.record_id, start=start))
    return WindowedDataset(windows=windows, length=length, stride=stride)


def preprocess_record(rec: EcgRecord,
                      config: PreprocessConfig = PreprocessConfig()) -> tuple[EcgRecord, ScalingInfo]:
    """Full pipeline: resample -> baseline removal -> normalize -> crop."""
    rec = resample(rec, config.fs_target)
    rec = remove_baseline(rec, config.baseline_windows_s)
    rec, scaling = normalize(rec)
    rec = crop_to_multiple(rec, config.crop_multiple)
    rec.extra["scaling"] = scaling.to_dict()
    rec.extra["normalized"] = True
    return rec, scaling

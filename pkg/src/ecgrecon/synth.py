"""Dipole-consistent synthetic 12-lead ECGs.

All 12 leads are fixed linear projections of a 3-component cardiac dipole, so
the limb-lead identities hold exactly and every target lead is a linear
function of the recorded leads (I, II, V2). Used for fixtures, oracles and
desk-scale training sanity checks.
"""

from __future__ import annotations

import numpy as np

from .ingest import EcgRecord, Subgroup
from .leads import ALL_12

# chest-lead projection of (dx, dy, dz); V2's dz weight is the largest so the
# third dipole component stays recoverable from the recorded leads
CHEST_COEFFS = {
    "V1": (-0.30, -0.10, 0.80),
    "V2": (0.10, -0.05, 1.00),
    "V3": (0.30, 0.10, 0.90),
    "V4": (0.60, 0.20, 0.70),
    "V5": (0.80, 0.25, 0.40),
    "V6": (0.90, 0.30, 0.20),
}

# per-beat waves: (center offset s, width s, amplitude) for each dipole axis
_WAVES = {
    "dx": [(-0.20, 0.025, 0.10), (-0.03, 0.010, -0.12), (0.0, 0.012, 1.00),
           (0.03, 0.010, -0.25), (0.30, 0.060, 0.30)],
    "dy": [(-0.20, 0.025, 0.06), (-0.03, 0.010, -0.06), (0.0, 0.012, 0.55),
           (0.03, 0.010, -0.30), (0.30, 0.060, 0.22)],
    "dz": [(-0.20, 0.025, 0.04), (-0.03, 0.010, 0.10), (0.0, 0.012, -0.70),
           (0.03, 0.010, 0.35), (0.30, 0.060, -0.25)],
}


def _bumps(t: np.ndarray, beat_times: np.ndarray, waves, gain: float) -> np.ndarray:
    out = np.zeros_like(t)
    for beat in beat_times:
        for offset, width, amp in waves:
            out += gain * amp * np.exp(-0.5 * ((t - beat - offset) / width) ** 2)
    return out


def dipole_components(t: np.ndarray, heart_rate: float = 60.0, gain: float = 1.0,
                      rng: np.random.Generator | None = None):
    """Return (dx, dy, dz) dipole traces over the time grid t, in millivolts."""
    period = 60.0 / heart_rate
    beats = np.arange(0.3, t[-1] + period, period)
    if rng is not None:
        beats = beats + rng.uniform(-0.02, 0.02, size=beats.shape)
    return tuple(_bumps(t, beats, _WAVES[axis], gain) for axis in ("dx", "dy", "dz"))


def synthetic_signal(fs: float = 500.0, duration_s: float = 10.0,
                     heart_rate: float = 60.0, gain: float = 1.0,
                     drift_amplitude: float = 0.0, drift_freq: float = 0.5,
                     noise: float = 0.0, seed: int | None = None) -> np.ndarray:
    """12xL float64 matrix in ALL_12 row order, millivolts."""
    rng = np.random.default_rng(seed) if seed is not None else None
    n = int(round(fs * duration_s))
    t = np.arange(n) / fs
    dx, dy, dz = dipole_components(t, heart_rate=heart_rate, gain=gain, rng=rng)

    lead_i = dx
    lead_ii = 0.5 * dx + (np.sqrt(3.0) / 2.0) * dy
    traces = {
        "I": lead_i,
        "II": lead_ii,
        "III": lead_ii - lead_i,
        "aVR": -(lead_i + lead_ii) / 2.0,
        "aVL": lead_i - lead_ii / 2.0,
        "aVF": lead_ii - lead_i / 2.0,
    }
    for name, (a, b, c) in CHEST_COEFFS.items():
        traces[name] = a * dx + b * dy + c * dz

    signal = np.stack([traces[name] for name in ALL_12])
    if drift_amplitude:
        signal = signal + drift_amplitude * np.sin(2.0 * np.pi * drift_freq * t)[None, :]
    if noise and rng is not None:
        signal = signal + rng.normal(0.0, noise, size=signal.shape)
    elif noise:
        signal = signal + np.random.default_rng(0).normal(0.0, noise, size=signal.shape)
    return signal


def synthetic_record(record_id: str, patient_id: str | None = None,
                     subgroup: Subgroup = Subgroup.UNKNOWN, fs: float = 500.0,
                     duration_s: float = 10.0, **kwargs) -> EcgRecord:
    signal = synthetic_signal(fs=fs, duration_s=duration_s, **kwargs)
    return EcgRecord(
        record_id=record_id,
        patient_id=patient_id if patient_id is not None else record_id,
        signal=signal,
        fs=fs,
        subgroup=subgroup,
        source_db="synthetic",
    )

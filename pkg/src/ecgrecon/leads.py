"""Lead vocabulary of the standard 12-lead ECG and the 3-in / 9-out partition."""

ALL_12 = ("I", "II", "III", "aVR", "aVL", "aVF",
          "V1", "V2", "V3", "V4", "V5", "V6")

# leads recorded by the reduced system
INPUT_3 = ("I", "II", "V2")

# leads reconstructed by the models, in report row order
TARGET_9 = ("III", "aVR", "aVL", "aVF", "V1", "V3", "V4", "V5", "V6")

INPUT_ROWS = tuple(ALL_12.index(name) for name in INPUT_3)
TARGET_ROWS = tuple(ALL_12.index(name) for name in TARGET_9)

# case-insensitive aliases seen in exported files (avr/AVR, lead_I, ...)
_CANON = {name.lower(): name for name in ALL_12}


def canonical_lead_name(raw: str) -> str | None:
    """Map a column header to its canonical lead name, or None if it is not a lead."""
    s = raw.strip().strip("'\"")
    if s.lower().startswith("lead"):
        s = s[4:].lstrip("_ -")
    return _CANON.get(s.lower())


def split_input_target(signal):
    """Split a 12xL matrix into the (3xL input, 9xL target) pair."""
    return signal[list(INPUT_ROWS)], signal[list(TARGET_ROWS)]

import numpy as np
import pytest

from ecgrecon.ingest import EcgRecord, Subgroup
from ecgrecon.models import DiscriminatorSpec, GeneratorSpec, ModelSpec
from ecgrecon.synth import synthetic_record

TINY_G = GeneratorSpec(widths=(8, 16, 32, 64, 64, 64, 64))
TINY_D = DiscriminatorSpec(widths=(8, 16, 32, 32))


@pytest.fixture
def tiny_spec():
    return ModelSpec(generator=TINY_G, discriminator=TINY_D,
                     lstm_hidden=16, lstm_layers=1, bottleneck_hidden=32)


@pytest.fixture
def record():
    """One 10 s dipole-consistent synthetic record at 500 Hz (5000 samples)."""
    return synthetic_record(record_id="synth0", seed=0)


@pytest.fixture
def short_record():
    return synthetic_record(record_id="synth-short", seed=1, duration_s=2.0)


@pytest.fixture
def record_set():
    """Six records from six patients across several subgroups."""
    groups = [Subgroup.HC, Subgroup.MI, Subgroup.BB, Subgroup.HC,
              Subgroup.VA, Subgroup.UNKNOWN]
    recs = []
    for i, sub in enumerate(groups):
        rec = synthetic_record(record_id=f"rec{i:02d}", seed=10 + i,
                               duration_s=2.0, heart_rate=55.0 + 7 * i)
        rec.subgroup = sub
        rec.patient_id = f"p{i:02d}"
        recs.append(rec)
    return recs


def random_record(rng, n=640, fs=500.0, record_id="rnd") -> EcgRecord:
    """Unstructured noise record; useful where waveform shape is irrelevant."""
    sig = rng.normal(scale=0.5, size=(12, n))
    return EcgRecord(record_id=record_id, patient_id=record_id,
                     signal=sig, fs=fs)

"""Reconstruction of the 9 missing leads of a 12-lead ECG (III, aVR, aVL, aVF,
V1, V3, V4, V5, V6) from a reduced 3-lead recording (I, II, V2)."""

from .errors import (BadLength, ConfigHashMismatch, ConstantInput,
                     ConstantReference, EcgReconError, EmptyCell, EmptyDataset,
                     EmptySplit, InconsistentLength, IoFailure, LengthMismatch,
                     MissingLead, NonFiniteLoss, RecordTooShort, ShapeMismatch,
                     UnparseableFile)
from .ingest import (DatasetManifest, EcgRecord, ManifestEntry, SplitSpec,
                     Subgroup, build_manifest, load_input_leads, load_manifest,
                     load_record, read_subgroup_table, save_record)
from .leads import ALL_12, INPUT_3, TARGET_9, split_input_target
from .metrics import (AVG_ROW, R2_VARIANTS, CellStats, LeadMetrics,
                      MetricsReport, RecordMetrics, aggregate, compute_r2,
                      compute_rx)
from .models import (DiscriminatorSpec, GeneratorSpec, LstmReconstructor,
                     ModelFamily, ModelSpec, PatchDiscriminator1d,
                     UnetGenerator1d, as_model_fn, build_discriminator,
                     build_lstm_unet, build_reconstructor, count_parameters,
                     load_checkpoint, patch_majority, save_checkpoint)
from .preprocess import (CROP_MULTIPLE, DEFAULT_STRIDE, FS_CANONICAL,
                         WINDOW_LENGTH, PreprocessConfig, ScalingInfo,
                         crop_to_multiple, denormalize, make_windows,
                         normalize, preprocess_record, remove_baseline,
                         resample)
from .report import (analytic_limb_reconstruction, evaluate_model,
                     evaluate_records, limb_consistency, render_overlay,
                     render_table)
from .synth import synthetic_record, synthetic_signal
from .training import TrainConfig, TrainResult, baseline_step, fit, gan_step

__version__ = "0.1.0"

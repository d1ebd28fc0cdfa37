"""Exception types shared across the toolkit."""


class EcgReconError(Exception):
    """Base class for all domain errors."""


# --- ingest ---

class MissingLead(EcgReconError):
    def __init__(self, lead: str):
        self.lead = lead
        super().__init__(f"required lead {lead!r} not found in source file")


class UnparseableFile(EcgReconError):
    pass


class InconsistentLength(EcgReconError):
    pass


class EmptyDataset(EcgReconError):
    pass


class IoFailure(EcgReconError):
    pass


# --- preprocess ---

class RecordTooShort(EcgReconError):
    pass


# --- metrics ---

class ConstantReference(EcgReconError):
    pass


class ConstantInput(EcgReconError):
    pass


class EmptyCell(EcgReconError):
    pass


# --- models ---

class BadLength(EcgReconError):
    pass


class ShapeMismatch(EcgReconError):
    pass


class LengthMismatch(EcgReconError):
    pass


# --- training / evaluation ---

class NonFiniteLoss(EcgReconError):
    pass


class EmptySplit(EcgReconError):
    pass


class ConfigHashMismatch(EcgReconError):
    pass

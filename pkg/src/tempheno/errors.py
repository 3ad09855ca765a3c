"""Exception hierarchy. Every error names the contract it enforces."""


class TemphenoError(Exception):
    """Base class for all library errors."""


# --- tensor / data model ---------------------------------------------------

class EmptyTensor(TemphenoError):
    """Tensor has no individuals, no features, or an individual with no time steps."""


class NonBinaryValue(TemphenoError):
    """An input tensor entry is not exactly 0.0 or 1.0."""

    def __init__(self, k, i, t, value):
        self.position = (k, i, t)
        self.value = value
        super().__init__(f"non-binary value {value!r} at (individual={k}, feature={i}, time={t})")


class RaggedFeatureDim(TemphenoError):
    """Individual matrices disagree on the number of feature rows."""


class RankMismatch(TemphenoError):
    """Phenotypes and pathways disagree on the number of phenotypes R."""


class UnequalLengths(TemphenoError):
    """Batched regular path called on pathways of differing temporal length."""


class ShapeMismatch(TemphenoError):
    """Two matrix collections disagree in shape."""


# --- optimizer -------------------------------------------------------------

class WindowTooLarge(TemphenoError):
    """Phenotype window exceeds the shortest individual duration."""


class NonFiniteLoss(TemphenoError):
    """Training loss became NaN/inf; signals a bad learning rate.

    Carries the last finite state in ``epoch`` and ``last_breakdown``.
    """

    def __init__(self, epoch, last_breakdown=None):
        self.epoch = epoch
        self.last_breakdown = last_breakdown
        super().__init__(f"loss became non-finite after epoch {epoch}")


class FeatureMismatch(TemphenoError):
    """Test tensor does not share the feature dimension of the trained model."""


class TooFewIndividuals(TemphenoError):
    """Split requires at least two individuals."""


# --- metrics ---------------------------------------------------------------

class ZeroNormGroundTruth(TemphenoError):
    """FIT undefined: the ground-truth collection has zero total norm."""


class RankTooSmall(TemphenoError):
    """Diversity needs at least two phenotypes."""


# --- synthetic generation --------------------------------------------------

class InfeasibleConfig(TemphenoError):
    """Generator configuration cannot produce a valid dataset."""


# --- file I/O --------------------------------------------------------------

class ParseError(TemphenoError):
    """Malformed event file; carries the offending line number."""

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class UnknownFeature(TemphenoError):
    """Event references a feature outside the configured whitelist."""


class TimeOutOfRange(TemphenoError):
    """Event time falls outside the individual's declared duration."""


class VersionMismatch(TemphenoError):
    """Model file was written with an unsupported format version."""


class CorruptFile(TemphenoError):
    """Model file failed its checksum or cannot be decoded."""

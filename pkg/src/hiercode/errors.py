"""Exception types raised by the hiercode library."""


class HiercodeError(Exception):
    """Base class for all library errors."""


class UnsupportedLanguage(HiercodeError):
    """Requested grammar is not registered."""


class UnreadableSource(HiercodeError):
    """Source bytes could not be decoded as UTF-8."""


class EmptyProgram(HiercodeError):
    """Extraction produced zero retained leaves."""


class EmptyCorpus(HiercodeError):
    """Vocabulary construction over an empty corpus."""


class ShapeMismatch(HiercodeError):
    """Tensor arguments have inconsistent shapes."""


class AllMasked(HiercodeError):
    """Mean pooling over a row with no unmasked positions."""


class UnloadedModel(HiercodeError):
    """Inference requested before parameters were loaded or trained."""


class DivergedTraining(HiercodeError):
    """Training hit a non-finite loss; model restored to last good state."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class EmptyTarget(HiercodeError):
    """Generation loss over an empty target sequence."""


class EmptyInput(HiercodeError):
    """Metric computed over zero examples."""


class DegenerateCorpus(HiercodeError):
    """Similarity analysis needs at least two non-empty categories."""


class InsufficientIdentifiers(HiercodeError):
    """Scope pair sampling needs at least two identifier occurrences."""


class MissingCheckpoint(HiercodeError):
    """Referenced checkpoint file does not exist."""


class MalformedRecord(HiercodeError):
    """A dataset record failed schema validation (strict mode)."""

    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number


class MissingFile(HiercodeError):
    """Referenced dataset file does not exist."""

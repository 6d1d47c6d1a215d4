"""Exception hierarchy shared by every stage of the pipeline."""


class MvPseudoError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(MvPseudoError, ValueError):
    """Input rejected before any computation ran (CLI exit code 2)."""


# gaussian statistics
class InvalidData(ValidationError):
    pass


class InsufficientSamples(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NotSymmetric(MvPseudoError, ValueError):
    pass


class NotPositiveSemiDefinite(MvPseudoError, ValueError):
    pass


class NumericalFailure(MvPseudoError, ArithmeticError):
    pass


# labelers and consensus
class IncompleteReference(ValidationError):
    pass


class NoClasses(ValidationError):
    pass


class UnknownClass(ValidationError):
    pass


class DuplicateItem(ValidationError):
    pass


class CoverageMismatch(ValidationError):
    pass


class ScoringError(MvPseudoError):
    """A Gaussian-statistics failure tagged with the (encoder, class) cell."""

    def __init__(self, encoder, label, cause):
        super().__init__(f"encoder={encoder!r} class={label!r}: {cause}")
        self.encoder = encoder
        self.label = label
        self.cause = cause


# classifier
class InvalidInput(ValidationError):
    pass


class DegenerateTrainingSet(MvPseudoError, ValueError):
    pass


class TrainingDiverged(MvPseudoError, ArithmeticError):
    pass


# ssl engine
class EmptyTrainingSet(MvPseudoError, ValueError):
    pass


class InvalidSplit(ValidationError):
    pass


# synthetic harness / io
class InvalidConfig(ValidationError):
    pass


class UnrecognizedFormat(MvPseudoError, ValueError):
    pass


class CorruptFile(MvPseudoError, ValueError):
    pass

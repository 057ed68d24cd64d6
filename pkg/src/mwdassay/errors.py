"""Exception types raised by the library.

Everything derives from MwdError (itself a ValueError) so callers can catch
broadly or per condition.
"""


class MwdError(ValueError):
    """Base class for all library errors."""


# -- data model / parsing ----------------------------------------------------

class MissingColumn(MwdError):
    pass


class NonMonotonicDepth(MwdError):
    """Depth column repeats, decreases, or departs from the expected grid."""


class RaggedSignals(MwdError):
    pass


class NonFiniteSample(MwdError):
    pass


class UnknownColumn(MwdError):
    pass


class NegativeAssay(MwdError):
    pass


class PercentOutOfRange(MwdError):
    pass


# -- feature extraction ------------------------------------------------------

class TooShort(MwdError):
    pass


class ZeroSignal(MwdError):
    pass


class NonPositiveSample(MwdError):
    pass


class DegenerateMatrix(MwdError):
    pass


# -- models -------------------------------------------------------------------

class DegenerateTarget(MwdError):
    pass


class IllConditionedKernel(MwdError):
    pass


class SingleClass(MwdError):
    pass


class RegistryMismatch(MwdError):
    pass


class WrongModelKind(MwdError):
    pass


# -- validation ----------------------------------------------------------------

class TooFewHoles(MwdError):
    pass


class TooFewBlasts(MwdError):
    pass


class MissingTarget(MwdError):
    pass


class AugmentEqualsTarget(MwdError):
    pass


class ConstantInput(MwdError):
    pass


class TooFewPoints(MwdError):
    pass


class LengthMismatch(MwdError):
    pass


class CodeMissing(MwdError):
    pass


# -- synthetic generator --------------------------------------------------------

class InvalidSpec(MwdError):
    pass


class MismatchedProvenance(MwdError):
    pass


# -- I/O -------------------------------------------------------------------------

class IoFailure(MwdError):
    pass

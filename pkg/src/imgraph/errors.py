"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to:
3 for input-contract violations, 4 for corrupt data, 5 for internal invariant
breaches.  Usage errors (2) are left to argparse.
"""


class PipelineError(Exception):
    exit_code = 5


class InputContractError(PipelineError, ValueError):
    exit_code = 3


class DataCorruptionError(PipelineError, ValueError):
    exit_code = 4


class BadMagic(DataCorruptionError):
    pass


class Truncated(DataCorruptionError):
    pass


class TruncatedFile(Truncated):
    pass


class CorruptRecord(DataCorruptionError):
    pass


class NonSquare(InputContractError):
    pass


class InsufficientClass(InputContractError):
    pass


class LagOutOfRange(InputContractError):
    pass


class DimMismatch(InputContractError):
    pass


class ShapeMismatch(InputContractError):
    pass


class ImageTooSmall(InputContractError):
    pass


class EmptyDataset(InputContractError):
    pass


class TagMismatch(InputContractError):
    pass


class TooLarge(InputContractError):
    pass


class InvariantBreach(PipelineError, AssertionError):
    exit_code = 5


class IoFailure(PipelineError):
    """A path could not be read or written."""

    exit_code = 3

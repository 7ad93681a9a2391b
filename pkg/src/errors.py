"""
Exception hierarchy for the retrieval engine.

Library code raises these; only the command-line entry point turns them
into exit codes.
"""
from utils.constants import EXIT_DATA, EXIT_MISMATCH, EXIT_USAGE


class CbirError(Exception):
    """Base class for every error the engine raises on purpose"""
    exit_code = EXIT_DATA


# ============================================================================
# DATA ERRORS
# ============================================================================

class DataError(CbirError):
    exit_code = EXIT_DATA


class ConfigError(CbirError):
    exit_code = EXIT_USAGE


class MalformedImage(DataError):
    pass


class UnsupportedFormat(DataError):
    pass


class NonSquareInput(DataError):
    pass


class KernelLargerThanImage(DataError):
    pass


class NonIntegerDimension(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class SingleClassData(DataError):
    pass


class NonFiniteFeature(DataError):
    pass


class FewerThanTwoClasses(DataError):
    pass


class EmptyTestSet(DataError):
    pass


class LengthMismatch(DataError):
    pass


class DuplicateId(DataError):
    pass


class BadLength(DataError):
    pass


class BadCharacter(DataError):
    pass


class MisplacedHyphen(DataError):
    pass


class EmptyInput(DataError):
    pass


class PositionNotInTable(DataError):
    pass


class MissingFile(DataError):
    pass


class MalformedRow(DataError):
    """Manifest row that cannot be parsed; carries the 1-based line number"""

    def __init__(self, path, row, reason):
        super().__init__(f"{path}:{row}: {reason}")
        self.path = path
        self.row = row
        self.reason = reason


# ============================================================================
# ARTIFACT ERRORS
# ============================================================================

class ArtifactError(CbirError):
    exit_code = EXIT_MISMATCH


class FingerprintMismatch(ArtifactError):
    def __init__(self, what, expected, found):
        super().__init__(f"{what}: fingerprint {found} does not match expected {expected}")
        self.expected = expected
        self.found = found


class UnknownClass(ArtifactError):
    def __init__(self, label):
        super().__init__(f"predicted class {label!r} has no bucket in the index")
        self.label = label


class CorruptArtifact(ArtifactError):
    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path

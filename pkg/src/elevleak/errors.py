"""Exception hierarchy.

Every error raised on purpose by the package derives from ``ElevleakError``.
The CLI maps the two middle layers onto exit codes: ``ValidationError`` -> 1,
``DataError`` -> 2, anything else -> 3.
"""


class ElevleakError(Exception):
    pass


class ValidationError(ElevleakError):
    """Bad configuration or bad arguments."""


class ConfigError(ValidationError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DataError(ElevleakError):
    """Input data violates a precondition."""


# geodata


class MalformedXml(DataError):
    pass


class MissingElevation(DataError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"track point {index} has no <ele> element")


class EmptyTrack(DataError):
    pass


# miner


class DegenerateBoundary(DataError):
    pass


class TruncatedChunk(DataError):
    pass


class InvalidCharacter(DataError):
    def __init__(self, char: str, position: int):
        self.char = char
        self.position = position
        super().__init__(f"invalid polyline character {char!r} at {position}")


class ClientError(ElevleakError):
    """A segment or elevation service call failed."""

    def __init__(self, message: str, cell: int | None = None):
        self.cell = cell
        super().__init__(message if cell is None else f"cell {cell}: {message}")


# textrep


class NonFiniteElevation(DataError):
    pass


class InvalidAlphabet(ValidationError):
    pass


class AlphabetTooSmall(ValidationError):
    pass


class UnknownValue(DataError):
    def __init__(self, value):
        self.value = value
        super().__init__(f"discrete value {value!r} is not in the codebook")


class MisalignedCorpus(DataError):
    pass


# models


class SingleClassDataset(DataError):
    pass


class DivergedLoss(ElevleakError):
    pass


class ShapeMismatch(DataError):
    pass


class EmptyRound(DataError):
    pass


# evaluation


class TooFewSamples(DataError):
    pass


class ClassTooSmall(DataError):
    def __init__(self, label, size: int, required: int):
        self.label = label
        super().__init__(f"class {label!r} has {size} samples, {required} required")


class DegenerateSplit(DataError):
    pass


class EmptyClass(DataError):
    pass


class LengthMismatch(DataError):
    pass


class MissingLabelLevel(DataError):
    pass


class UnknownSample(DataError):
    pass

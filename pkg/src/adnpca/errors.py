"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: anything wrong with the inputs
(files, shapes, parameters) exits 2, numerical breakdown exits 3.
"""


class AdnpcaError(Exception):
    """Base class for all toolkit errors."""


class MalformedFile(AdnpcaError):
    """Feature file has a bad magic, truncated header, or unparseable body."""


class NonFiniteEntry(AdnpcaError):
    """A feature value is NaN or infinite."""

    def __init__(self, row: int, col: int, value: float):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(f"non-finite entry {value!r} at row {row}, col {col}")


class DimensionMismatch(AdnpcaError):
    """Declared and actual dimensions disagree."""


class IoFailure(AdnpcaError):
    """Underlying read/write failed."""


class UnknownStage(AdnpcaError):
    """Stage index outside the 0..8 backbone range."""


class TooFewSamples(AdnpcaError):
    """Not enough samples for the requested estimate."""


class DegenerateInput(AdnpcaError):
    """Covariance is singular and no shrinkage floor was applied."""


class NumericalFailure(AdnpcaError):
    """Eigensolver or other numerical routine did not converge."""


class DegenerateSpectrum(AdnpcaError):
    """An eigenvalue is zero or negative where positivity was guaranteed."""


class KOutOfRange(AdnpcaError):
    """Retained dimension k outside 1..d."""


class PairingMismatch(AdnpcaError):
    """Normal/synthetic pairing is missing, incomplete, or not a bijection."""


class ZeroNormalScore(AdnpcaError):
    """A normal-image score is (numerically) zero; the ratio is undefined."""


class EmptyClass(AdnpcaError):
    """ROC/AUROC requested with an empty normal or anomalous class."""


class InvalidSpec(AdnpcaError):
    """Benchmark parameters violate their constraints."""

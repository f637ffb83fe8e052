"""Exception hierarchy shared across the pipeline.

Two branches matter for the CLI exit codes: ``DataError`` (bad or missing
input, exit code 2) and ``NumericFailure`` (degenerate or failed computation,
exit code 3). ``UsageError`` maps to exit code 1.
"""


class DuplexnetError(Exception):
    """Base class for all library errors."""


class UsageError(DuplexnetError):
    """Invalid command line or configuration (exit code 1)."""


class DataError(DuplexnetError):
    """Problem with input data (exit code 2)."""


class NumericFailure(DuplexnetError):
    """Degenerate or failed numeric computation (exit code 3)."""


# --- data errors ------------------------------------------------------------

class ParseError(DataError):
    """Unparseable input row; carries the 1-based line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class MissingAsset(DataError):
    """A requested ticker is absent from the input file."""


class BadPrice(DataError):
    """Non-positive closing price."""


class BadCount(DataError):
    """Negative opinion count."""


class NoOverlap(DataError):
    """Two panels share no common dates."""


class TooShort(DataError):
    """Series shorter than the window width."""


class InsufficientHistory(DataError):
    """Not enough windows for the requested training span or lag."""


class BudgetTooLarge(DataError):
    """Edge budget exceeds the number of vertex pairs."""


# --- numeric failures -------------------------------------------------------

class ShapeError(NumericFailure):
    """Mismatched or invalid array shapes."""


class DegenerateCorrelation(NumericFailure):
    """All values tied in a sequence: rank correlation undefined."""


class DegenerateGraph(NumericFailure):
    """A graph required to have edges is empty."""


class NumericError(NumericFailure):
    """Non-finite value where a finite one is required."""


class DegenerateLabels(NumericFailure):
    """All training labels identical: logistic fit undefined."""


class IncomparableFits(NumericFailure):
    """Likelihood ratio requested for fits on different training sets."""


class UndefinedAUC(NumericFailure):
    """AUC requested with only one label class present."""


class BenchmarkDegenerate(NumericFailure):
    """Relative skill undefined for a benchmark AUC at or below 0.5."""

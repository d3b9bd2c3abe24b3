class DetlinkError(Exception):
    """
    A generic detlink error.
    """


class ConfigurationError(DetlinkError, ValueError):
    """
    Raised when a configuration value (scale, cutoff, image shape...) is
    invalid or a required one is missing.
    """


class ValidationError(DetlinkError, ValueError):
    """
    Raised when a value breaks the invariants of a model type.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class RejectedDetectionError(ValidationError):
    """
    Raised when a pixel box has no positive extent after clamping.
    """

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class ParseError(DetlinkError, ValueError):
    """
    Raised for malformed lines in annotation, CSV or frames files.
    """

    def __init__(self, message, path=None, line=None):
        if path is not None and line is not None:
            message = "{}:{}: {}".format(path, line, message)
        elif path is not None:
            message = "{}: {}".format(path, message)
        super().__init__(message)
        self.path = path
        self.line = line


class ExtractionError(DetlinkError, ValueError):
    """
    Raised when a timestamp cannot be extracted from a frame name.
    """


class NumericInputError(DetlinkError, ValueError):
    """
    Raised when a score matrix holds non-finite or negative entries.
    """


class OrderingError(DetlinkError):
    """
    Raised when frame times are not strictly increasing.
    """


class PairingError(DetlinkError):
    """
    Raised when frames combined by stereo linking or consensus disagree on
    their timestamp.
    """


class UsageError(DetlinkError):
    """
    Raised for invalid command-line flag combinations.
    """

"""
Custom exception classes for the application.
"""

class DenoiserError(Exception):
    """Base exception class for this application."""
    pass

class ConfigError(DenoiserError):
    """Exception raised for errors in the run configuration or variant selection."""
    pass

class DataLoadingError(DenoiserError):
    """Exception raised for missing or unusable input data (files, splits, corpora)."""
    pass

class WavFormatError(DataLoadingError):
    """Exception raised for malformed, unsupported or multi-channel WAV files."""
    pass

class DegenerateInputError(DataLoadingError):
    """Exception raised when a signal has no energy where energy is required."""
    pass

class ShapeError(DenoiserError, ValueError):
    """Exception raised when tensor dimensions do not agree."""
    pass

class ContractError(DenoiserError):
    """Exception raised when an operation is called outside its preconditions."""
    pass

class NumericalError(DenoiserError, ArithmeticError):
    """Exception raised when a computation produces NaN or Inf."""
    pass


EXIT_CODES = (
    (ConfigError, 1),
    (DataLoadingError, 2),
    (NumericalError, 3),
)


def exit_code_for(error):
    """Maps an exception to the CLI exit code (0 is reserved for success)."""
    for error_type, code in EXIT_CODES:
        if isinstance(error, error_type):
            return code
    return 1

"""
Error types for the SepsisLens pipeline.

Every error carries the CLI exit code it maps to:
3 for data / configuration validation problems, 4 for pipeline failures.
"""

from typing import List, Optional


class SepsisLensError(Exception):
    """Base class for all pipeline errors"""

    exit_code = 4


# =====================================================
# VALIDATION ERRORS (exit code 3)
# =====================================================

class ConfigurationError(SepsisLensError):
    """Invalid configuration: unknown keys, bad values, broken cross-references"""

    exit_code = 3

    def __init__(self, message: str, issues: Optional[List[str]] = None):
        super().__init__(message)
        self.issues = list(issues or [])


class CohortValidationError(SepsisLensError):
    """One or more encounter records failed validation"""

    exit_code = 3

    def __init__(self, message: str, issues=None):
        super().__init__(message)
        self.issues = list(issues or [])


class EmbeddingFormatError(SepsisLensError):
    """Malformed GloVe-format embedding file"""

    exit_code = 3

    def __init__(self, message: str, line_number: Optional[int] = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class GeneratorSpecError(SepsisLensError):
    """Infeasible synthetic cohort settings"""

    exit_code = 3


# =====================================================
# PIPELINE ERRORS (exit code 4)
# =====================================================

class DatasetEmptyError(SepsisLensError):
    """No rows survived windowing and modality filtering"""


class SplitError(SepsisLensError):
    """Fold assignment or temporal split is impossible"""


class MetricError(SepsisLensError):
    """A metric is undefined for the given inputs"""


class RidgeSolveError(SepsisLensError):
    """The regularized normal equations could not be solved"""


class FeatureDimensionError(SepsisLensError):
    """Feature vector length does not match the model"""


class FoldTrainingError(SepsisLensError):
    def __init__(self, fold: int, cause: Exception):
        super().__init__(f"training failed on fold {fold}: {cause}")
        self.fold = fold
        self.cause = cause


class PipelineStageError(SepsisLensError):
    """Wraps any failure with the name of the stage it happened in"""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        if isinstance(cause, SepsisLensError):
            self.exit_code = cause.exit_code

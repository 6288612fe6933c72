"""Exception types shared across the package."""


class RepJudgeError(Exception):
    """Base class for all package errors."""


class RuleParseError(RepJudgeError):
    """Rule document is not syntactically valid JSON."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class RuleSchemaError(RepJudgeError):
    """Rule document is valid JSON but violates the rule-set shape."""


class GrammarError(RepJudgeError):
    """Condition string does not match the expression grammar."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class UnitMismatchError(RepJudgeError):
    """Two sides of a comparison carry incompatible unit classes."""


class MissingKeypointError(RepJudgeError):
    """A joint name cannot be resolved against the active schema."""

    def __init__(self, joint: str, message: str | None = None):
        super().__init__(message or f"keypoint not resolvable: {joint!r}")
        self.joint = joint


class MissingFeatureError(RepJudgeError):
    """A condition references a feature that is unavailable this frame."""

    def __init__(self, feature: str, reason: str = ""):
        detail = f"feature unavailable: {feature!r}"
        if reason:
            detail += f" ({reason})"
        super().__init__(detail)
        self.feature = feature
        self.reason = reason


class DegenerateGeometryError(RepJudgeError):
    """Angle computation hit a zero-length limb vector."""


class LowConfidenceError(RepJudgeError):
    """Every keypoint needed by a proxy fell below the confidence floor."""


class UndefinedSimilarityError(RepJudgeError):
    """Similarity has a zero denominator (no visible joints, zero vector)."""


class NoTargetError(RepJudgeError):
    """Target selection ran on a frame without any person instance."""


class ConfigurationError(RepJudgeError):
    """Invalid or inconsistent run configuration."""


class AnnotationError(RepJudgeError):
    """Ground-truth annotations violate their invariants."""


class PairingError(RepJudgeError):
    """Prediction and ground-truth files do not cover the same videos."""


class ProviderError(RepJudgeError):
    """An embedding provider failed."""

    def __init__(self, message: str, page_index: int | None = None):
        super().__init__(message)
        self.page_index = page_index


class DomainError(RepJudgeError):
    """A statistic received input outside its domain."""

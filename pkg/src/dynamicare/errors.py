"""Shared exception types."""


class DynamiCareError(Exception):
    """Base class for all package errors."""


class RecordValidationError(DynamiCareError):
    """A patient record failed validation; carries the full report."""

    def __init__(self, report):
        self.report = report
        super().__init__(str(report))


class GatewayError(DynamiCareError):
    """Backend could not produce a reply."""


class AuthenticationError(GatewayError):
    """Non-retryable credential / 4xx failure from the live backend."""


class ScriptMissError(GatewayError):
    """The scripted backend has no entry for a request."""


class ProtocolViolationError(DynamiCareError):
    """Model output did not follow the required format, even after repair.

    The raw reply is preserved for the transcript.
    """

    def __init__(self, message: str, raw_reply: str = ""):
        self.raw_reply = raw_reply
        super().__init__(message)


class SessionAborted(DynamiCareError):
    """A session hit an unrecoverable error; partial transcript was persisted."""

    def __init__(self, patient_id: str, reason: str):
        self.patient_id = patient_id
        self.reason = reason
        super().__init__(f"session for {patient_id} aborted: {reason}")


class PipelineError(DynamiCareError):
    """Dataset construction failure."""


class EvaluationError(DynamiCareError):
    """Metric computation failure (mismatched inputs, malformed codes)."""

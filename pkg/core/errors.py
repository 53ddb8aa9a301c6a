"""
Error hierarchy shared by every module.

Each error carries a stable ``code`` used in traces, reports and CLI output.
``infrastructure`` errors map to exit status 2, everything else to 1.
"""

from typing import Any, Dict, Optional


class ParkLensError(Exception):
    """Base class for all domain errors"""

    code = "error"
    infrastructure = False

    def __init__(self, message: str, *, detail: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.detail = detail or {}

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code, "message": self.message}

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class InvalidArgumentError(ParkLensError):
    code = "invalid-argument"


class IngestError(ParkLensError):
    code = "ingest-error"


class LineageError(ParkLensError):
    code = "lineage-error"


class NotFoundError(ParkLensError):
    code = "not-found"


class ParseError(ParkLensError):
    code = "parse-error"


class UnsupportedFormatError(ParkLensError):
    code = "unsupported-format"


class SchemaError(ParkLensError):
    code = "schema-error"


class DataError(ParkLensError):
    code = "data-error"


class PredicateError(ParkLensError):
    code = "predicate-error"


class AlignmentError(ParkLensError):
    code = "alignment-error"


class UnsupportedTransformError(ParkLensError):
    code = "unsupported-transform"


class OutOfDomainError(ParkLensError):
    code = "out-of-domain"


class EmptyRegionError(ParkLensError):
    code = "empty-region"


class BackendError(ParkLensError):
    code = "backend-error"
    infrastructure = True


class ProtocolError(ParkLensError):
    code = "protocol-error"


class PlanInvalidError(ParkLensError):
    code = "plan-invalid"


class PlanIncompleteError(ParkLensError):
    code = "plan-incomplete"


class FusionError(ParkLensError):
    code = "fusion-error"


class LoadError(ParkLensError):
    code = "load-error"


class EvalError(ParkLensError):
    code = "eval-error"
    infrastructure = True


ERRORS_BY_CODE = {
    cls.code: cls
    for cls in (
        InvalidArgumentError, IngestError, LineageError, NotFoundError, ParseError,
        UnsupportedFormatError, SchemaError, DataError, PredicateError, AlignmentError,
        UnsupportedTransformError, OutOfDomainError, EmptyRegionError, BackendError,
        ProtocolError, PlanInvalidError, PlanIncompleteError, FusionError, LoadError,
        EvalError,
    )
}


def error_from_dict(data: Dict[str, Any]) -> ParkLensError:
    """Rebuild an error recorded with ``to_dict``"""
    cls = ERRORS_BY_CODE.get(data.get("code", ""), ParkLensError)
    return cls(data.get("message", ""))

"""Exception hierarchy.

Every error carries a stable ``code`` string used in CLI reports. Subclasses of
:class:`HypothesisError` mean the input is outside the supported geometric
setting (CLI exit code 2); :class:`InternalError` subclasses indicate a bug.
"""


class ToricSasakiError(Exception):
    code = "error"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.__class__.__name__)
        self.details = details

    def to_dict(self) -> dict:
        out = {"code": self.code, "message": str(self)}
        if self.details:
            out["details"] = {k: _plain(v) for k, v in self.details.items()}
        return out


def _plain(value):
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (int, float, str, bool)) or value is None:
        return value
    return str(value)


class InputError(ToricSasakiError):
    code = "InputError"


class HypothesisError(ToricSasakiError):
    code = "HypothesisError"


class InternalError(ToricSasakiError):
    code = "InternalError"


# cone geometry
class InconsistentChernCondition(HypothesisError):
    code = "InconsistentChernCondition"


class DegenerateCone(HypothesisError):
    code = "DegenerateCone"


class ReebSignError(HypothesisError):
    code = "ReebSignError"


class EmptyCone(HypothesisError):
    code = "EmptyCone"


class ReebNotPositive(HypothesisError):
    code = "ReebNotPositive"


class InternalNormalizationError(InternalError):
    code = "InternalNormalizationError"


# polytope
class Unbounded(HypothesisError):
    code = "Unbounded"


class EmptyPolytope(HypothesisError):
    code = "Empty"


class DegenerateTriangulation(InternalError):
    code = "DegenerateTriangulation"


class InteriorityViolation(HypothesisError):
    code = "InteriorityViolation"


class NoBindingFacet(InternalError):
    code = "NoBindingFacet"


class NotCollinear(ToricSasakiError):
    code = "NotCollinear"


# potential
class BoundaryEvaluation(ToricSasakiError):
    code = "BoundaryEvaluation"


class NoConvergence(ToricSasakiError):
    code = "NoConvergence"


# Monge-Ampere solver
class NewtonDiverged(ToricSasakiError):
    code = "NewtonDiverged"


class NonConvexIterate(NewtonDiverged):
    code = "NonConvexIterate"


class GridTooSmall(ToricSasakiError):
    code = "GridTooSmall"

"""Exception hierarchy shared by the numerical modules and the commands."""

from __future__ import annotations

from typing import Any


class LevysimError(Exception):
    """Base class for every error raised by levysim.

    Attributes:
        module: Name of the module the error originates from.
    """

    module = "levysim"

    def __init__(self, message: str, *, module: str | None = None, **details: Any) -> None:
        super().__init__(message)
        if module is not None:
            self.module = module
        self.details = details

    def to_record(self) -> dict[str, Any]:
        """Machine-readable representation printed by the commands."""
        record: dict[str, Any] = {
            "error": type(self).__name__,
            "module": self.module,
            "message": str(self),
        }
        record.update(self.details)
        return record

    def __reduce__(self) -> tuple[Any, ...]:
        return _restore, (type(self), self.args, self.__dict__)


def _restore(cls: type[LevysimError], args: tuple[Any, ...], state: dict[str, Any]) -> LevysimError:
    """Rebuild an error sent back from a worker process without re-running `__init__`."""
    error = cls.__new__(cls)
    Exception.__init__(error, *args)
    error.__dict__.update(state)
    return error


class MeasureEvaluationError(LevysimError, ValueError):
    module = "levy_measure"


class ToleranceError(LevysimError, ArithmeticError):
    """Quadrature or root finding did not reach the requested tolerance."""

    module = "levy_measure"

    def __init__(self, message: str, *, estimate: float, **details: Any) -> None:
        super().__init__(message, estimate=estimate, **details)
        self.estimate = estimate


class DivergentMomentError(LevysimError, ArithmeticError):
    module = "levy_measure"


class DegenerateTailError(LevysimError, ValueError):
    module = "levy_measure"


class InfeasibleIntensityError(LevysimError, ValueError):
    module = "approx_optimizer"


class BracketingError(LevysimError, RuntimeError):
    module = "approx_optimizer"


class ConsistencyError(LevysimError, RuntimeError):
    module = "approx_optimizer"


class UnsupportedOrderError(LevysimError, ValueError):
    module = "approx_optimizer"


class InvalidMomentsError(LevysimError, ValueError):
    module = "approx_optimizer"


class UnsupportedSchemeError(LevysimError, ValueError):
    module = "continuous_schemes"


class FlowError(LevysimError, ArithmeticError):
    """Non-finite state while integrating a flow or a scheme leg."""

    module = "continuous_schemes"

    def __init__(self, message: str, *, time: float | None = None, **details: Any) -> None:
        super().__init__(message, time=time, **details)
        self.time = time


class TaintedEstimateError(LevysimError, ArithmeticError):
    module = "mc_engine"

    def __init__(self, message: str, *, path_index: int, **details: Any) -> None:
        super().__init__(message, path_index=path_index, **details)
        self.path_index = path_index


class ConfigError(LevysimError, ValueError):
    """Invalid experiment configuration; `fields` lists every offending key."""

    module = "cli"

    def __init__(self, message: str, *, fields: list[str], **details: Any) -> None:
        super().__init__(message, fields=list(fields), **details)
        self.fields = list(fields)

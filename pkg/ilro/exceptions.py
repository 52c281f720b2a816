from typing import Any, Dict, Optional, Sequence


class IlroError(Exception):
    exit_code: int = 1

    def to_dict(self) -> Dict[str, Any]:
        return {'error': type(self).__name__, 'message': str(self)}


class ConfigurationError(IlroError, ValueError):
    exit_code: int = 1

    def __init__(self, field: str, constraint: str, value: Any = None):
        self.field = field
        self.constraint = constraint
        self.value = value
        super().__init__(f"{field}: {constraint}" + ('' if value is None else f" (got {value!r})"))

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data.update({'field': self.field, 'constraint': self.constraint})
        return data


class ConfigParseError(IlroError):
    exit_code: int = 1

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        location = '' if line is None else f" at line {line}, column {column}"
        super().__init__(f"{message}{location}")

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data.update({'line': self.line, 'column': self.column})
        return data


class NumericalError(IlroError, ArithmeticError):
    exit_code: int = 2


class NoOscillationError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class SingularityError(NumericalError):
    pass


class UnlockedError(NumericalError):
    pass


class InstabilityError(NumericalError):
    def __init__(self, node: str, time: float, value: float):
        self.node = node
        self.time = time
        self.value = value
        super().__init__(f"state diverged at node {node} (t={time:.6e} s, |v|={abs(value):.3e} V)")


class StartupError(NumericalError):
    pass


class DeadNodeError(NumericalError):
    def __init__(self, node: int, amplitude: float):
        self.node = node
        self.amplitude = amplitude
        super().__init__(f"node {node} is dead (fundamental amplitude {amplitude:.3e} V)")


class PartialResultError(NumericalError):
    def __init__(self, failures: Sequence[Any], message: str = 'unlocked grid points'):
        self.failures = list(failures)
        super().__init__(f"{message}: {self.failures}")

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data['failures'] = [float(f) for f in self.failures]
        return data


class StudyInvalidError(NumericalError):
    pass


class OutputError(IlroError):
    exit_code: int = 3

    def __init__(self, path: Any, reason: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {reason}")

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data['path'] = self.path
        return data


__all__ = (
    'IlroError',
    'ConfigurationError',
    'ConfigParseError',
    'NumericalError',
    'NoOscillationError',
    'ConvergenceError',
    'SingularityError',
    'UnlockedError',
    'InstabilityError',
    'StartupError',
    'DeadNodeError',
    'PartialResultError',
    'StudyInvalidError',
    'OutputError',
)

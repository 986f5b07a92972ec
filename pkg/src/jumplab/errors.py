"""Exception hierarchy shared by every solver in the package."""


class JumpLabError(Exception):
    """Base class for all package errors."""


class InvalidModelError(JumpLabError):
    pass


class DivergenceError(JumpLabError):
    """A state or field became non-finite during time stepping."""

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class NoInverseError(JumpLabError):
    """Newton iteration for the inverse jump map did not converge."""


class SingularMapError(JumpLabError):
    """det(I + dg/dx) is numerically zero along the Newton iterates."""


class InvariantViolationError(JumpLabError):
    pass


class WrongVariantError(JumpLabError):
    """The x-independent coefficient builder was handed an x-dependent jump."""


class CFLError(JumpLabError):
    def __init__(self, message, required_dt):
        super().__init__(message)
        self.required_dt = required_dt


class InstabilityError(JumpLabError):
    pass


class ScenarioError(JumpLabError):
    """Scenario file failed to parse or validate."""

    def __init__(self, message, line=None, field=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field '{field}'")
        prefix = f"[{', '.join(loc)}] " if loc else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field

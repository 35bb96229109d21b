"""Exception hierarchy shared by the mesh, solver and CLI layers."""

from __future__ import annotations


class DJTLEDError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for this failure."""

    exit_code = 1


class MeshError(DJTLEDError, ValueError):
    """Malformed mesh text or a mesh that violates its invariants."""

    exit_code = 2

    def __init__(self, message: str, *, line: int | None = None, element: int | None = None):
        self.line = line
        self.element = element
        where = []
        if line is not None:
            where.append(f"line {line}")
        if element is not None:
            where.append(f"element {element}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ConfigError(DJTLEDError, ValueError):
    exit_code = 2


class StabilityError(DJTLEDError):
    """Time step exceeds the explicit stability bound."""

    exit_code = 3


class InversionError(DJTLEDError):
    """An element reached det(J) <= 0."""

    exit_code = 4

    def __init__(self, element: int, step: int | None = None, detail: str = ""):
        self.element = element
        self.step = step
        msg = f"element {element} inverted"
        if step is not None:
            msg += f" at step {step}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class DivergenceError(DJTLEDError):
    """Non-finite displacement encountered during time stepping."""

    exit_code = 5

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite displacement at step {step}")

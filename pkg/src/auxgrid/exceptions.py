"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array arguments have incompatible or invalid dimensions."""


class DomainError(ValueError):
    """Numeric argument outside the domain an operation can handle."""


class SingularMatrixError(ValueError):
    """Linear system is singular within the pivot threshold."""


class ConfigurationError(ValueError):
    """System or scenario configuration violates a precondition."""


class EdgeNotFoundError(KeyError):
    """Requested edge does not exist in the topology."""


class IsolationRefusedError(RuntimeError):
    """Removing the edge would disconnect the network; topology kept as is."""


class DivergenceError(RuntimeError):
    """Simulation state grew beyond the divergence limit."""

    def __init__(self, time: float, norm: float):
        self.time = time
        self.norm = norm
        super().__init__(f"state norm {norm:.3e} exceeded divergence limit at t={time:.6f} s")


class EmptyTraceError(ValueError):
    """Operation requires at least one sample."""


class ScenarioParseError(ValueError):
    """Scenario file is malformed; carries file, section and line diagnostics."""

    def __init__(self, path: str, line: int, section: str, message: str):
        self.path = path
        self.line = line
        self.section = section
        self.message = message
        where = f"[{section}]" if section else "(top level)"
        super().__init__(f"{path}:{line}: {where} {message}")

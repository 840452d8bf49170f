"""Exception hierarchy for shapepbdw."""


class ShapePBDWError(Exception):
    """Base class for all library errors."""


class GeometryError(ShapePBDWError, ValueError):
    """Invalid geometry descriptor or degenerate channel profile."""


class DomainError(ShapePBDWError, ValueError):
    """Argument outside the domain of a function."""


class ContractError(ShapePBDWError, ValueError):
    """Inputs live on different meshes, kinds or metrics."""


class DimensionError(ShapePBDWError, ValueError):
    pass


class RankError(ShapePBDWError, ValueError):
    """Requested dimension exceeds numerical rank."""

    def __init__(self, message, achievable):
        super().__init__(message)
        self.achievable = achievable


class IllPosedError(ShapePBDWError, ArithmeticError):
    """PBDW minimiser is not unique (inf-sup constant numerically zero)."""

    def __init__(self, message, beta):
        super().__init__(message)
        self.beta = beta


class SolverError(ShapePBDWError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateTransportError(ShapePBDWError, RuntimeError):
    pass


class ConfigError(ShapePBDWError, ValueError):
    pass


class StageError(ShapePBDWError, RuntimeError):
    """A training stage failed; carries the stage name and template id."""

    def __init__(self, stage, template, cause):
        super().__init__(f"stage {stage!r} failed for template {template}: {cause}")
        self.stage = stage
        self.template = template

"""Exception hierarchy shared by all collapsim modules."""


class CollapsimError(Exception):
    """Base class for every error raised by the package."""


class GridError(CollapsimError, ValueError):
    pass


class PacketOutsideGridError(CollapsimError, ValueError):
    pass


class DegenerateSigmaError(CollapsimError, ValueError):
    pass


class SectorOutOfRangeError(CollapsimError, IndexError):
    pass


class UnnormalizedStateError(CollapsimError, ValueError):
    pass


class InvalidDensityMatrixError(CollapsimError, ValueError):
    pass


class GeometryError(CollapsimError, ValueError):
    pass


class StabilityError(CollapsimError, ValueError):
    pass


class BoundaryLeakError(CollapsimError, RuntimeError):
    """Amplitude reached the periodic grid edge (wrap-around would corrupt the screen)."""


class DegenerateStateError(CollapsimError, ValueError):
    pass


class NoFringeError(CollapsimError, ValueError):
    pass


class EmptyWindowError(CollapsimError, ValueError):
    pass


class EmptyMaximaError(CollapsimError, ValueError):
    pass


class SingleClassError(CollapsimError, ValueError):
    pass


class ZeroVarianceError(CollapsimError, ValueError):
    pass


class InsufficientDataError(CollapsimError, ValueError):
    pass


class SchemaError(CollapsimError, ValueError):
    pass


class ConfigError(CollapsimError, ValueError):
    """Configuration problem; ``key`` and ``line`` locate it when known."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}" if isinstance(line, int) else str(line))
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.message = message
        self.key = key
        self.line = line

    def __reduce__(self):
        return type(self), (self.message, self.key, self.line)


class TrajectoryError(CollapsimError, RuntimeError):
    def __init__(self, trajectory_id, cause):
        super().__init__(f"trajectory {trajectory_id}: {cause}")
        self.trajectory_id = trajectory_id
        self.cause = cause

    def __reduce__(self):
        return type(self), (self.trajectory_id, self.cause)


class EnsembleError(CollapsimError, RuntimeError):
    pass

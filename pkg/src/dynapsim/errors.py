"""Exception types shared across the package."""


class DynapsimError(Exception):
    """Base class for all package errors."""


class EncodingError(DynapsimError):
    """A field does not fit its declared bit width."""

    def __init__(self, field: str, value: int, width: int):
        self.field = field
        self.value = value
        self.width = width
        super().__init__(f"field '{field}' value {value} exceeds {width}-bit width")


class RangeError(DynapsimError):
    """A packed word lies outside its declared domain."""


class ParseError(DynapsimError):
    """A text or binary input file is malformed."""

    def __init__(self, message: str, *, path: str | None = None,
                 line: int | None = None, offset: int | None = None):
        self.path = path
        self.line = line
        self.offset = offset
        where = []
        if path is not None:
            where.append(path)
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class DomainError(DynapsimError):
    """An analytic function was called outside its mathematical domain."""


class ConfigError(DynapsimError):
    """A configuration value is missing, malformed or out of range."""


class SimulationError(DynapsimError):
    """The event engine was driven outside its contract."""


class NumericalFault(SimulationError):
    """Neuron or synapse state became non-finite; the run is aborted."""


class ResourceError(DynapsimError):
    """A network cannot be mapped within the fabric's hardware bounds."""

    def __init__(self, bound: str, message: str):
        self.bound = bound
        super().__init__(f"{bound}: {message}")

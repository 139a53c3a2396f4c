"""Exception types shared across the simulator."""


class PoolSimError(Exception):
    """Base class for simulator errors."""


class ParseError(PoolSimError, ValueError):
    """Malformed input file. Carries the offending 1-based line number."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class ValidationError(PoolSimError, ValueError):
    """Input parsed fine but violates a model invariant."""


class NodeNotFound(PoolSimError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "node not found"


class Unreachable(PoolSimError):
    """No path between two nodes."""

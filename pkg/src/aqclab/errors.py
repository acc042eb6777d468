"""Exception types shared across the package."""


class ContractError(ValueError):
    """An argument violates an operation's precondition."""


class DimensionError(ContractError):
    """Operands act on different numbers of qubits."""


class SizeGuardError(ContractError):
    """A dense or exhaustive computation was requested beyond the configured qubit cap."""


class DegenerateBuilderError(ContractError):
    """A builder was asked for an operator whose ground state is not unique by construction."""


class FormatError(ValueError):
    """Malformed input file (DIMACS, energy table, config)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, best_residual=None, s=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.s = s


class IntegratorError(RuntimeError):
    """Time propagation failed (step underflow or norm drift)."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t

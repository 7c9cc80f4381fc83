"""Exception hierarchy; the CLI maps these to exit codes."""


class Fe2Error(Exception):
    """Base class for package errors."""


class MeshError(Fe2Error, ValueError):
    """Invalid mesh, microstructure or boundary bookkeeping."""


class SolverError(Fe2Error, RuntimeError):
    """Linear-algebra failure: singular or indefinite operator, failed RVE solve."""


class RveError(SolverError):
    """Failure of an RVE solve, carrying the gauss point it was attached to."""

    def __init__(self, message: str, gauss_point: tuple[int, int] | None = None):
        if gauss_point is not None:
            message = f"element {gauss_point[0]}, gauss point {gauss_point[1]}: {message}"
        super().__init__(message)
        self.gauss_point = gauss_point


class ConvergenceError(Fe2Error, RuntimeError):
    """Macroscale Newton loop exceeded its iteration cap."""

    def __init__(self, step: int, residuals: list[float]):
        self.step = step
        self.residuals = list(residuals)
        super().__init__(
            f"load step {step} did not converge after {len(residuals)} iterations; "
            f"residual history: {', '.join(f'{r:.3e}' for r in residuals)}"
        )


class ConfigError(Fe2Error, ValueError):
    """Invalid run configuration; ``errors`` lists every problem with its key path."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))

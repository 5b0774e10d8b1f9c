"""Exception types shared across the toolkit."""


class ParameterError(ValueError):
    """A numeric parameter is outside its admissible range."""


class ShapeError(ValueError):
    """Operands or operator lists have inconsistent dimensions."""


class SizeError(ValueError):
    """A dense-path size cap was exceeded."""


class DegenerateOperatorError(ValueError):
    """An operator family is degenerate (e.g. zero averaged operator)."""


class UnsupportedMetricError(ValueError):
    """A requested diagnostic needs data the model does not carry."""


class ConfigError(ValueError):
    """A run configuration failed validation."""


class DiagonalizationError(RuntimeError):
    """Eigendecomposition of the time factor failed its residual gate."""


class ShiftSolveError(RuntimeError):
    """One of the per-eigenvalue shifted spatial solves failed."""

    def __init__(self, index, shift, message=""):
        self.index = index
        self.shift = shift
        detail = f": {message}" if message else ""
        super().__init__(f"shifted solve {index} at lambda={shift}{detail}")


class SingularSystemError(RuntimeError):
    """The resolvent system defining z(mu) is singular at this mu."""

    def __init__(self, mu):
        self.mu = mu
        super().__init__(f"singular system at mu={mu}")


class NearSingularPredictionError(RuntimeError):
    """The predicted-eigenvalue denominator is numerically zero."""


class NumericalFailureError(RuntimeError):
    """NaN or Inf appeared inside an iterative solve."""


class InnerSolveError(RuntimeError):
    """The inner linear solve did not converge at some outer step."""

    def __init__(self, outer_step, iterations, residual):
        self.outer_step = outer_step
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"inner GMRES stalled at outer step {outer_step} "
            f"({iterations} iterations, relative residual {residual:.3e})"
        )


class NewtonDivergenceError(RuntimeError):
    """The nonlinear residual grew on two consecutive outer steps."""

    def __init__(self, step, history):
        self.step = step
        self.history = list(history)
        super().__init__(f"nonlinear residual increasing at step {step}")

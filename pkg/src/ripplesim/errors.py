"""Exception types shared across the package."""


class ModelError(ValueError):
    """A plant or graph description is internally inconsistent."""


class ScenarioError(ValueError):
    """A scenario file or scenario object failed validation."""


class SolverError(RuntimeError):
    """Base class for numerical solver failures."""


class PowerFlowInfeasibleError(SolverError):
    """The grid equations admit no solution for the requested injections."""


class SingularJacobianError(SolverError):
    """The solver Jacobian became singular at the current iterate."""


class HydraulicInfeasibleError(SolverError):
    """The network flow equations could not be solved to tolerance."""


class PumpReverseFlowError(SolverError):
    """A fixed-gain pump would have to carry flow against its direction."""


class PlantSolveError(SolverError):
    """A plant evaluation failed; carries the offending control vector.

    Attributes:
        control: the control vector passed to the plant.
        direction: probe direction index, when raised from a sensitivity
            probe, else None.
    """

    def __init__(self, message, control=None, direction=None):
        super().__init__(message)
        self.control = control
        self.direction = direction

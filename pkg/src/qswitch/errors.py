"""Exception hierarchy for qswitch."""


class QSwitchError(Exception):
    pass


class NotHurwitzError(QSwitchError):
    pass


class ObservabilityError(QSwitchError):
    pass


class NotPositiveDefiniteError(QSwitchError):
    pass


class UnknownModeError(QSwitchError, KeyError):
    pass


class MissingJumpError(QSwitchError, KeyError):
    pass


class InfeasibleDesignError(QSwitchError, ValueError):
    """Raised when the quantizer range cannot support the design.

    ``violations`` lists the names of the violated inequalities and
    ``minimum_M`` is the infimum of saturation ranges that would pass all
    of them (any strictly larger M works).
    """

    def __init__(self, violations, minimum_M, message=None):
        self.violations = list(violations)
        self.minimum_M = float(minimum_M)
        if message is None:
            message = (f"design infeasible: violated {', '.join(self.violations)}; "
                       f"need M > {self.minimum_M:.6g}")
        super().__init__(message)


class MarginsUndefinedError(QSwitchError):
    pass


class DivergenceError(QSwitchError):
    pass


class ScenarioError(QSwitchError):
    pass

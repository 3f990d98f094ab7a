"""Exception hierarchy.

Errors raised while certifying a system carry an ``assumption`` tag so
callers (the CLI in particular) can name the condition that failed.
"""


class RelaxStabError(Exception):
    """Base class for all package errors."""


class CertificationError(RelaxStabError):
    """A structural assumption needed for the Lyapunov construction failed."""

    assumption = "unspecified"


class NotRelaxationForm(CertificationError):
    assumption = "relaxation-form"


class SingularTransform(CertificationError):
    assumption = "relaxation-form"


class SymmetrizerFailure(CertificationError):
    assumption = "(i)"


class DissipativityFailure(CertificationError):
    assumption = "(ii)"


class NoAdmissibleDirection(CertificationError):
    assumption = "(iii)"


class Unbounded(CertificationError):
    assumption = "coupling-constant"


class DegenerateMetric(CertificationError):
    assumption = "(i)"


class ControlLawError(RelaxStabError):
    pass


class UncoveredSegment(ControlLawError):
    pass


class MapOutOfRange(ControlLawError):
    pass


class InfeasibleGains(ControlLawError):
    def __init__(self, message, violated=()):
        super().__init__(message)
        self.violated = tuple(violated)


class Supercritical(RelaxStabError):
    pass


class WrongModel(RelaxStabError):
    pass


class SolverError(RelaxStabError):
    pass


class CflViolation(SolverError):
    pass


class NonFiniteState(SolverError):
    pass


class InsufficientData(RelaxStabError):
    pass

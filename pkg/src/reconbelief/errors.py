"""Exception hierarchy shared by every module of the package."""


class ReconBeliefError(Exception):
    """Base class for all errors raised by reconbelief."""


class ValidationError(ReconBeliefError, ValueError):
    """Input failed a structural or semantic check."""


class InvalidAddress(ValidationError):
    pass


class InadmissibleConfiguration(ValidationError):
    pass


class SpaceTooLarge(ReconBeliefError):
    """The configuration space exceeds the enumeration bound.

    Supply an explicit ``admissible`` list to the space instead.
    """


class UnknownNode(ValidationError):
    pass


class SchemaViolation(ValidationError):
    pass


class EmptyCorpus(ValidationError):
    pass


class UnknownLabel(ValidationError):
    pass


class IncompleteDependencyModel(ValidationError):
    pass


class DegeneratePrior(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class MalformedRow(ValidationError):
    pass


class UnknownField(ValidationError):
    pass


class DomainViolation(ValidationError):
    pass


class DocumentError(ValidationError):
    """A serialized document is malformed, has the wrong version or unknown keys."""


class TotalEvidenceZero(ReconBeliefError):
    """Every configuration assigns zero likelihood to an observation.

    Only reachable with ``alpha == 0``. The engine refuses the update and
    keeps the prior; see :class:`TotalEvidenceZeroWarning`.
    """


class TotalEvidenceZeroWarning(UserWarning):
    pass

"""Exception hierarchy shared across the package."""


class PGraphError(Exception):
    """Base class for all errors raised by this package."""


class VariantMismatchError(PGraphError):
    """Two labels of different representation variants were combined."""


class KindMismatchError(PGraphError):
    """An action-kinded value met an observation-kinded one (or vice versa)."""


class EmptyLabelError(PGraphError):
    """A representative was requested from a label denoting the empty set."""


class NotAkinError(PGraphError):
    """Two graphs were combined whose languages start with different event kinds."""


class DocumentSyntaxError(PGraphError):
    """Input text is not valid JSON."""


class SchemaError(PGraphError):
    """A JSON document does not match the expected shape."""


class ValidationError(PGraphError):
    """A structurally well-formed document describes an invalid graph."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(str(p) for p in self.problems))


class UnmappedKindError(PGraphError):
    """A label map has no sub-map configured for the required event kind."""


class UnmappedEventError(PGraphError):
    """A finite map table has no entry for an event it was applied to."""


class NonComposableError(PGraphError):
    """The two maps cannot be composed exactly."""


class InfiniteActionSpaceError(PGraphError):
    """The operation needs a finite action space."""


class NotDeterministicError(PGraphError):
    """The operation is only defined for deterministic filters."""


class NotStateDeterminedError(PGraphError):
    """The operation requires a state-determined input graph."""


class NotASolutionError(PGraphError):
    """The given plan does not solve the given problem."""


class HomomorphicDerivationError(PGraphError):
    """The homomorphic-solution construction could not be completed."""


class TooLargeError(PGraphError):
    """The input exceeds the configured brute-force bound."""

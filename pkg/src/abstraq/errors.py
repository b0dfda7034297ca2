"""Exception hierarchy."""


class AbstraqError(Exception):
    """Base class for all library errors."""


class InvalidModel(AbstraqError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(v.message for v in self.violations)
        super().__init__(f"invalid model: {lines}")


class UnknownVariable(AbstraqError, KeyError):
    def __init__(self, name, where="model"):
        self.name = name
        super().__init__(f"unknown variable {name!r} in {where}")

    def __str__(self):
        return self.args[0]


class DomainError(AbstraqError, ValueError):
    """A value index lies outside a variable's domain."""


class OverlapError(AbstraqError, ValueError):
    """Variable sets that must be disjoint overlap."""


class ScopeMismatch(AbstraqError, ValueError):
    """A distribution or graph does not range over the expected variables."""


class ZeroProbabilityEvidence(AbstraqError):
    """Conditioning on an event whose probability is (numerically) zero."""

    def __init__(self, evidence, probability):
        self.evidence = dict(evidence)
        self.probability = probability
        super().__init__(f"P({self.evidence}) = {probability:.3g} is too small to condition on")


class NonTotalClustering(AbstraqError, ValueError):
    """A CDAG was requested for a clustering with a nonempty remainder."""


class CyclicInducedGraph(AbstraqError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("induced cluster graph is cyclic: " + " -> ".join(self.cycle))


class InconsistentAbstraction(AbstraqError):
    """The abstraction does not meet the consistency precondition of an operation."""


class HypothesisViolated(AbstraqError):
    """Some endogenous setting is not generated by any exogenous assignment."""

    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__(f"{len(self.missing)} endogenous settings have no generating exogenous assignment")


class GenerationExhausted(AbstraqError):
    pass


class InputError(AbstraqError, ValueError):
    """Malformed input document; ``field`` names the offending location."""

    def __init__(self, field, message, source=None):
        self.field = field
        self.source = source
        self.detail = message
        super().__init__(self._render())

    def _render(self):
        where = f"{self.source}: " if self.source else ""
        return f"{where}field {self.field!r}: {self.detail}"

    def with_source(self, source):
        return InputError(self.field, self.detail, source)

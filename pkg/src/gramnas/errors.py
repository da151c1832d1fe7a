"""Exception hierarchy shared by all gramnas modules."""


class GramnasError(Exception):
    """Base class for every error raised by this package."""


# grammar / structure
class GrammarError(GramnasError):
    pass


class MalformedRule(GrammarError):
    pass


class UnknownNonTerminal(GrammarError):
    def __init__(self, name, where=None):
        self.name = name
        msg = f"unknown non-terminal <{name}>"
        if where:
            msg += f" ({where})"
        super().__init__(msg)


class MalformedParamBlock(GrammarError):
    pass


class DuplicateLhs(GrammarError):
    pass


class EmptyAlternative(GrammarError):
    pass


class StructureError(GramnasError):
    """A GA structure failed validation; ``violations`` holds every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class MinExceedsMax(StructureError):
    def __init__(self, name, lo, hi):
        self.name, self.lo, self.hi = name, lo, hi
        GramnasError.__init__(self, f"{name}: min {lo} exceeds max {hi}")
        self.violations = [self]


class NonPositiveBound(StructureError):
    def __init__(self, name, lo):
        self.name, self.lo = name, lo
        GramnasError.__init__(self, f"{name}: min {lo} must be >= 1")
        self.violations = [self]


# genotype
class DepthExceeded(GramnasError):
    pass


class InvalidGenotype(GramnasError):
    pass


# operators
class StructureMismatch(GramnasError):
    pass


class Inapplicable(GramnasError):
    """A mutation cannot act on the given individual/module."""


class AtMaxLayers(Inapplicable):
    pass


class AtMinLayers(Inapplicable):
    pass


class NoEligibleSite(Inapplicable):
    pass


# phenotype
class MissingAttr(GramnasError):
    pass


class LastLayerNotDense(GramnasError):
    pass


# evaluation
class ArityMismatch(GramnasError):
    pass


class NumericalFailure(GramnasError):
    pass


# engine
class UnevaluatedIndividual(GramnasError):
    pass


class ConfigMismatch(GramnasError):
    pass

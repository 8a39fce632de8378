"""Exception types shared across the package."""


class QfactError(Exception):
    """Base class for all package-specific errors."""


class UnknownLabelError(QfactError):
    """An outcome label is not part of the law's spectrum (mis-coded outcome)."""


class EmptyLawError(QfactError):
    """Operation requires at least one recorded trial."""


class InsufficientBlocksError(QfactError):
    """Stability verdicts need at least two complete blocks."""


class DimensionMismatchError(QfactError):
    """State / observable / transform dimensions do not agree."""


class DestructiveAnnihilationError(QfactError):
    """Superposition weights cancel: the composed state has (near-)zero norm."""


class DestroyedSpecimenError(QfactError):
    """A specimen can be measured once; a fresh generation is required."""


class GuidedCodingUnavailableError(QfactError):
    """Guided coding requires a wave attachment on the specimen."""


class UnlinkedObservableError(QfactError):
    """No transform matrix links the reference observable to the target."""


class InconsistentLawsError(QfactError):
    """No phase assignment reproduces the measured laws: the law set is not
    representable as squared projections of a single state vector."""


class NodeSingularityError(QfactError):
    """Quantum potential evaluated exactly at an amplitude node."""


class ScenarioError(QfactError):
    """Scenario file failed schema validation."""

"""Exception hierarchy shared by all pipeline stages."""


class CppnMetaError(Exception):
    """Base class for every error raised by this package."""


class StructuralIntegrityError(CppnMetaError):
    """A genome violates a structural invariant (cycle, dangling reference, ...)."""


class InfeasibleDesign(CppnMetaError):
    """The genome maps to a design that cannot be analysed.

    Subclasses mark the stage at which the design was rejected. The
    evolutionary loop turns these into a constraint violation instead of
    aborting.
    """

    stage = "design"


class DegenerateFieldError(InfeasibleDesign):
    """The sampled intensity field is constant (or not finite)."""

    stage = "normalize"


class EmptyDesignError(InfeasibleDesign):
    """No material is left after thresholding or meshing."""

    stage = "label"


class MeshingError(InfeasibleDesign):
    """Triangulation failed (too few points, degenerate input)."""

    stage = "mesh"


class SolverFailure(InfeasibleDesign):
    """The periodic cell problem is singular or did not converge."""

    stage = "solve"


class DegenerateTensorError(CppnMetaError):
    """Compliance entries needed for E and nu vanish."""


class ConfigError(CppnMetaError):
    """Invalid run configuration or objective specification."""


class DuplicateKeyError(CppnMetaError):
    """An archive record with the same (run id, individual id) already exists."""


class ArchiveFormatError(CppnMetaError):
    """An archive file or record could not be decoded."""

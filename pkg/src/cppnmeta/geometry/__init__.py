"""Genome to phenotype: sampling, labelling, meshing and connectivity."""

from .constraints import ConstraintReport, check_constraints
from .field import (
    DEFAULT_RESOLUTION,
    DEFAULT_THRESHOLD,
    PointCloud,
    SampledField,
    develop,
    extract_boundary,
    label,
    make_cloud,
    normalize,
    sample_patch,
)
from .mesh import TriangularMesh, build_mesh, periodic_pairs
from .symmetry import GROUP_TAGS, SymmetryGroup, get_group

__all__ = [
    "ConstraintReport", "check_constraints", "DEFAULT_RESOLUTION", "DEFAULT_THRESHOLD",
    "PointCloud", "SampledField", "develop", "extract_boundary", "label", "make_cloud",
    "normalize", "sample_patch", "TriangularMesh", "build_mesh", "periodic_pairs",
    "GROUP_TAGS", "SymmetryGroup", "get_group",
]

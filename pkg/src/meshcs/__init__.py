"""Compressive sensing for scalar fields on unstructured point clouds.

Compress with a seeded Bernoulli projection (implicit, reproducible from
a 64-bit seed), reconstruct offline in a discrete multiwavelet basis via
stagewise orthogonal matching pursuit, at a chosen wavelet order and
detail level.
"""

from .basis import (AlpertBasis, PolynomialSpace, WaveletFactor, apply_basis,
                    apply_basis_transpose, build_basis, hierarchy_for_order,
                    local_scaling_block)
from .fields import (FieldFormatError, eval_field_f, eval_field_g, eval_field_smooth,
                     expression_field, gen_holed_mesh, polynomial_field, read_field,
                     write_field)
from .mesh import (GroupHierarchy, HierarchyNode, MeshFormatError, Partition,
                   PointCloud, build_hierarchy, partition_cloud, read_mesh, write_mesh)
from .pipeline import (ReconstructionReport, ZeroReferenceWarning, clod_levels,
                       error_norm, reconstruct_at_level, reconstruct_clod,
                       reconstruct_full, reconstruct_partitioned,
                       reconstruct_partitioned_report, write_report_csv)
from .sampler import (BernoulliSampler, BernoulliSpec, BundleFormatError,
                      IdentitySampler, SampleBundle, apply_sampler_transpose,
                      choose_sample_count, derive_rank_seed, make_bundle,
                      read_bundle, sample_field, write_bundle)
from .stomp import StompConfig, StompResult, least_squares_on_support, stomp_solve
from .vtk import VtkFormatError, export_vtk, read_vtk

__version__ = "0.1.0"

__all__ = [
    "AlpertBasis", "PolynomialSpace", "WaveletFactor", "apply_basis",
    "apply_basis_transpose", "build_basis", "hierarchy_for_order", "local_scaling_block",
    "FieldFormatError", "eval_field_f", "eval_field_g", "eval_field_smooth",
    "expression_field", "gen_holed_mesh", "polynomial_field", "read_field", "write_field",
    "GroupHierarchy", "HierarchyNode", "MeshFormatError", "Partition", "PointCloud",
    "build_hierarchy", "partition_cloud", "read_mesh", "write_mesh",
    "ReconstructionReport", "ZeroReferenceWarning", "clod_levels", "error_norm",
    "reconstruct_at_level", "reconstruct_clod", "reconstruct_full",
    "reconstruct_partitioned", "reconstruct_partitioned_report", "write_report_csv",
    "BernoulliSampler", "BernoulliSpec", "BundleFormatError", "IdentitySampler",
    "SampleBundle", "apply_sampler_transpose", "choose_sample_count", "derive_rank_seed",
    "make_bundle", "read_bundle", "sample_field", "write_bundle",
    "StompConfig", "StompResult", "least_squares_on_support", "stomp_solve",
    "VtkFormatError", "export_vtk", "read_vtk",
]

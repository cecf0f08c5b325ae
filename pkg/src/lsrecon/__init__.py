"""Level-set surface reconstruction from oriented point clouds."""

from .errors import DomainError, FitDiverged, FormatError
from .grid import GridSpec, ScalarField, VectorField, divergence, gradient, sample_trilinear
from .mollifier import delta_eps, delta_eps_prime, heaviside_eps
from .distance import (
    Box,
    DistanceField,
    OrientedPointCloud,
    Sphere,
    Torus,
    analytic_sdf,
    build_distance_field,
    sample_shape_surface,
)
from .energy import LossBreakdown, LossWeights, loss, loss_gradient, voxel_cross_entropy
from .optimizer import FitConfig, FitReport, fit, init_phi
from .surface import TriMesh, marching_cubes, mesh_area_volume, sample_mesh_surface
from .metrics import OccupancyGrid, chamfer, iou, voxelize_field, voxelize_mesh

__version__ = "0.1.0"

__all__ = [
    "Box",
    "DistanceField",
    "DomainError",
    "FitConfig",
    "FitDiverged",
    "FitReport",
    "FormatError",
    "GridSpec",
    "LossBreakdown",
    "LossWeights",
    "OccupancyGrid",
    "OrientedPointCloud",
    "ScalarField",
    "Sphere",
    "Torus",
    "TriMesh",
    "VectorField",
    "analytic_sdf",
    "build_distance_field",
    "chamfer",
    "delta_eps",
    "delta_eps_prime",
    "divergence",
    "fit",
    "gradient",
    "heaviside_eps",
    "init_phi",
    "iou",
    "loss",
    "loss_gradient",
    "marching_cubes",
    "mesh_area_volume",
    "sample_mesh_surface",
    "sample_shape_surface",
    "sample_trilinear",
    "voxel_cross_entropy",
    "voxelize_field",
    "voxelize_mesh",
]

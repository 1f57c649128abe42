"""Quadric-error losses, spatial queries and metrics for 3D point clouds and meshes."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import *  # noqa: F401,F403
from .fit_optimizer import Adam, FitConfig, FitTrace, default_config, fit_points
from .losses import (
    LOSS_NAMES,
    LossValue,
    LossWeights,
    TargetBundle,
    chamfer_loss,
    combined_loss,
    normal_loss,
    prepare_target,
    quadric_loss,
    surface_loss,
)
from .mesh_core import (
    Plane,
    PointCloud,
    TriangleMesh,
    connected_components,
    normalize_unit_sphere,
    sample_surface,
    vertex_normals,
)
from .mesh_io import load_mesh, load_points, save_mesh, save_points
from .metrics import EvalReport, MetroResult, eval_cd, eval_metro, evaluate
from .quadrics import QuadricMatrix, accumulate_vertex_quadrics, plane_quadric, vertex_quadrics
from .simplify import SimplifyResult, simplify_to
from .spatial_index import CorrespondenceMap, SpatialIndex, correspondences

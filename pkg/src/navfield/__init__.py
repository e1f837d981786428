"""navfield: a real-time TMS neuronavigation back end.

Streams coil poses in and electric-field volumes out over a byte-exact
OpenIGTLink-compatible protocol, computes fields with an analytic figure-8
coil engine behind a pluggable predictor contract, projects fields onto
brain meshes and fiber polylines, and benchmarks the full loop.
"""

from .engine import (
    AnalyticPredictor,
    CoilModel,
    CoilParams,
    Predictor,
    analytic_predictor,
    build_figure8,
    compute_dadt,
    magnitude,
    normalized_error,
    oracle_dadt,
    primary_efield,
)
from .geometry import (
    FieldUnit,
    GridSpec,
    RigidPose,
    ScalarField,
    VectorField,
    compose,
    ijk_to_world,
    invert,
    make_pose,
    pose_from_matrix,
    transform_vector_field,
    world_to_ijk,
)
from .projection import (
    ColorMap,
    FiberBundle,
    apply_colormap,
    fiber_bundle_from_json,
    field_colormap,
    project_to_fibers,
    project_to_mesh,
    sample_trilinear,
)
from .server import (
    RunTiming,
    Service,
    Session,
    SessionConfig,
    StageStats,
    default_grid,
    remote_predictor,
    serve,
)
from .volio import (
    NiftiVolume,
    SurfaceMesh,
    read_nifti,
    read_stl,
    write_nifti,
    write_stl,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticPredictor", "CoilModel", "CoilParams", "ColorMap", "FiberBundle",
    "FieldUnit", "GridSpec", "NiftiVolume", "Predictor", "RigidPose",
    "RunTiming", "ScalarField", "Service", "Session", "SessionConfig",
    "StageStats", "SurfaceMesh", "VectorField", "analytic_predictor",
    "apply_colormap", "build_figure8", "compose", "compute_dadt",
    "default_grid", "fiber_bundle_from_json", "field_colormap",
    "ijk_to_world", "invert", "magnitude", "make_pose", "normalized_error",
    "oracle_dadt", "pose_from_matrix", "primary_efield", "project_to_fibers",
    "project_to_mesh", "read_nifti", "read_stl", "remote_predictor",
    "sample_trilinear", "serve", "transform_vector_field", "world_to_ijk",
    "write_nifti", "write_stl",
]

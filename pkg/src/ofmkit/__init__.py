"""ofmkit: optical-flow manifolds — flow graphs, geodesic metrics, transport."""

from .articulation import (
    AffineIsometryReport,
    DomainGrid,
    PoseIsometryReport,
    affine_distance,
    affine_flow,
    affine_sigma,
    affine_sigma_quadrature,
    field_l2_distance,
    pose_field_gap,
    pose_flow,
    pose_flow_wp,
    pose_grid,
    pose_sigma,
    pose_theta,
    pose_wp_distance,
    rotation_from_spin,
    spin_matrix,
    unit_grid,
    verify_affine_isometry,
    verify_pose_wp,
)
from .backend import backend_name
from .curves import (
    Curve,
    CurveFlowField,
    MotionFunction,
    ParallelApprox,
    QuantizedField,
    ResampledCurve,
    approx_cost,
    best_parallel_approx,
    build_curve,
    conjugate,
    field_from_motion,
    field_gap,
    is_parallel,
    monoid_add,
    motion_of_field,
    multiscale_quantize,
    parallel_translate,
    realize_frames,
    resample_uniform,
    restricted_radius,
    saturated_field,
    target_positions,
    time_weighted_median,
    zero_field,
)
from .errors import NumericalError
from .flow import (
    ConsistencyReport,
    FlowConfig,
    FlowResult,
    check_consistency,
    estimate_flow,
    flow_between,
    flow_norm,
    flow_pair,
)
from .graph import (
    FlowEdge,
    FlowGraph,
    ambient_metric,
    build_graph,
    flow_curvature,
    flow_metric,
    flow_radius,
    geodesic_nodes,
    graph_from_weights,
)
from .image import (
    FlowField,
    Image,
    compose_flows,
    constant_flow,
    l2_distance,
    scale_flow,
    warp,
    zero_flow,
)
from .manifold import (
    Embedding,
    EstimateResult,
    KarcherResult,
    TemplateSet,
    embed,
    estimate_parameter,
    interpolate,
    interpolate_route,
    karcher_mean,
    linear_blend,
    procrustes_residual,
)
from .scenes import (
    SceneSpec,
    affine_image,
    crop_image,
    disk_coverage,
    disk_image,
    generate,
    make_texture,
    textured_disk,
)

__version__ = "0.1.0"

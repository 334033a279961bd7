"""Road planar-parallax toolkit.

Two-view geometry over a dominant road plane: warp by the plane
homography, read gamma = h/Z out of the residual parallax, and turn it
into metric depth and height.  Ships a deterministic synthetic-scene
renderer with exact ground truth, robust plane fitting, photometric and
smoothness energies, cross-view attention, bucketed metrics, and a CLI.
"""

from ._kernels import BACKEND
from .attention import AttentionParams, cross_attention_forward, default_params
from .dataio import DatasetSample, read_sample, sample_from_scene, write_sample
from .energy import (
    EnergyBreakdown,
    EnergyWeights,
    photometric_energy,
    smoothness_energy,
    sparse_gamma_energy,
    ssim_map,
    total_energy,
)
from .errors import (
    DegenerateInput,
    DegeneratePlane,
    EmptyBucket,
    EmptyMask,
    EpipoleDegeneracy,
    GridMismatch,
    IncongruentGrids,
    IoFailure,
    MalformedHeader,
    MapsToInfinity,
    MissingFile,
    NoConsensus,
    NonPositiveDepth,
    ParallaxSingularity,
    PatchTooLarge,
    RoadParallaxError,
    ShapeMismatch,
    SingularHomography,
    SingularRatio,
    SizeMismatch,
    ZeroTranslation,
)
from .geometry import (
    CameraIntrinsics,
    Epipole,
    FlowField,
    Homography,
    PlaneParams,
    RigidMotion,
    ScalarMap,
    apply_homography,
    apply_homography_masked,
    backproject,
    depth_from_gamma,
    epipole,
    gamma_of,
    height_from_gamma,
    height_of_point,
    homography_displacement,
    homography_from_motion,
    project,
    residual_flow_at,
    residual_flow_map,
    rotation_xyz,
    transform_plane,
)
from .imaging import (
    Image,
    bilinear_sample,
    colorize,
    erode_mask,
    masked_mae,
    reconstruct_target,
    warp_by_homography,
)
from .metrics import (
    BucketSpec,
    MetricReport,
    bucket_mae,
    depth_metrics,
    evaluate_pair,
    report_as_csv,
    report_as_dict,
)
from .planefit import PointCloud, RansacConfig, plane_distances, ransac_plane, refine_plane
from .solver import (
    SolverReport,
    block_match_flow,
    solve_gamma_at,
    solve_gamma_map,
    solve_gamma_tz0,
)
from .synth import Box, SceneSpec, Texture, default_scene, ground_truth, render

__version__ = "0.1.0"

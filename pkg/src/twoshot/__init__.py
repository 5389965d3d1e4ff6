"""Space-time novel view synthesis from a pair of near-duplicate photos.

Given two photos taken moments apart from almost the same spot, plus
precomputed disparity and optical flow, the package registers the pair,
splits each photo into inpainted depth layers, lifts pixel motion to 3D
scene flow, and renders novel-view frames that interpolate both camera
position and scene motion.
"""

from .alignment import (AlignmentError, CorrespondenceSet, DisparityAlignment,
                        Homography, estimate_homography, fit_disparity_alignment,
                        static_mask, warp_to_reference)
from .bundle import BundleError, read_bundle, write_bundle
from .camera import Camera, intrinsics_from_fov, reference_camera, unproject
from .config import ConfigError, PipelineConfig, load_config
from .imaging import (DenseMap, DisparityMap, RasterIOError, read_disparity,
                      read_flow, read_image, sample_bilinear, write_disparity,
                      write_flow, write_image)
from .ldi import Ldi, LdiError, LdiLayer, build_inpainted_ldi, cluster_disparity
from .paths import CameraPath, generate_path, smoothstep
from .pipeline import PipelineError, run_pipeline
from .render import (BlendResult, PointCloud, RenderError, RenderParams,
                     SplatBuffers, blend, blend_weight, displace,
                     fill_and_compose, lift_ldi, point_radius, render_frame,
                     splat)
from .sceneflow import (FlowPair, SceneFlowError, SceneFlowLayer,
                        attach_flow_to_ldi, diffuse_flow, lift_scene_flow,
                        mutual_check)

__version__ = "0.1.0"

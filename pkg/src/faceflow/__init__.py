"""Geometry and arithmetic core of 3D-guided, temporally consistent face video editing."""

from .morphable_model import (BlendshapeModel, CameraPose, Coefficients, Mesh3D, TextureMap,
                              load_model, project, recombine, reconstruct_shape, save_model,
                              synthetic_face_model)
from .rasterizer import RasterOutput, appearance_hint, facial_mask, rasterize, rasterize_projected
from .temporal_flow import (DenseFlowField, FramePairGeometry, dense_flow, interpolate_flow,
                            sparse_flow, temporal_loss, vertex_displacements, visibility_prev,
                            visibility_t, warp)
from .rcn import (RcnParams, adain_transfer, masked_moments, rcn_forward, rcn_gradients,
                  rcn_variant)
from .sampling import DatasetManifest, Provenance, SampleTriplet, make_rng, sample, sample_stats
from .losses import (AvgPoolPyramid, LossWeights, ScaleScores, adversarial_loss, appearance_loss,
                     reconstruction_loss, total_loss)

__version__ = "0.1.0"

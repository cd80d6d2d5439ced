"""srru: recursive channel-attention super-resolution, self-contained on numpy.

A two-branch x2/x4 upscaling network (learnable residual over a fixed
bicubic identity), built from first-principles conv primitives with exact
analytic gradients, plus MATLAB-compatible bicubic resampling, Y-channel
PSNR/SSIM, a training loop with binary checkpoints, and a CLI.
"""

from srru.estimator import SuperResolver
from srru.metrics import psnr_y, ssim_y
from srru.model import build_network, network_forward, param_count
from srru.resample import bicubic_resize, rgb_to_ycbcr, ycbcr_to_rgb
from srru.train import TrainingConfig, gradcheck

__version__ = "0.1.0"

__all__ = [
    "SuperResolver",
    "TrainingConfig",
    "bicubic_resize",
    "build_network",
    "gradcheck",
    "network_forward",
    "param_count",
    "psnr_y",
    "rgb_to_ycbcr",
    "ssim_y",
    "ycbcr_to_rgb",
    "__version__",
]

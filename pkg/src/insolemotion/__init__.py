"""Full-body motion reconstruction from pressure/IMU insoles with a conditional diffusion model."""

from .config import RunConfig
from .data.types import INSOLE_CHANNELS, SAMPLE_RATE, MotionSequence, Skeleton
from .denoiser import DenoiserConfig, PoseDenoiser
from .diffusion import SamplerConfig, make_schedule, q_sample, sample, sample_long
from .displacement import DispConfig, DisplacementPredictor, disp_loss, predict_displacements
from .errors import DataError, InsoleMotionError, NumericalError, ShapeError
from .synth import GaitStyle, generate

__version__ = "0.1.0"

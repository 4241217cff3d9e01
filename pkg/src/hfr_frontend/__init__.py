"""High-frame-rate speech front end.

FBANK+pitch extraction at arbitrary constant frame rates, speed-perturbation
augmentation, delay-and-sum beamforming, encoder shape arithmetic and
Kaldi-compatible archive I/O.
"""

from .audio import AudioBuffer, ResamplerConfig, read_wav, resample, write_wav
from .extract import PipelineConfig, extract_features
from .fbank import FeatureMatrix, MelFilterbank
from .framing import FramingConfig

__all__ = [
    "AudioBuffer",
    "FeatureMatrix",
    "FramingConfig",
    "MelFilterbank",
    "PipelineConfig",
    "ResamplerConfig",
    "extract_features",
    "read_wav",
    "resample",
    "write_wav",
]

__version__ = "0.1.0"

"""Multichannel enhancement front end (angle features + mask-based MVDR),
cross-modal fusion math with gradient checks, and wake-word scoring."""

from .errors import ConfigError, FormatError, InputError, ValidationError
from .fusion import (
    AttentionParams,
    FeatureMatrix,
    FusionParams,
    FusionTrace,
    attended_fusion,
    bilinear_relevance,
    fuse_forward,
    grad_check,
    init_params,
    scaled_dot_attention,
)
from .geometry import (
    ArrayGeometry,
    BeamGrid,
    LipROI,
    default_array,
    pair_phase_delta,
    region_center_angle,
    region_majority,
    region_of_roi,
)
from .masks import TFMask, load_mask, oracle_irm, save_mask
from .mvdr import (
    BeamformerWeights,
    CovarianceSet,
    apply_weights,
    enhance,
    estimate_covariances,
    solve_weights,
)
from .scoring import LabeledScores, ScoredUtterance, average_scores, score, sweep
from .simulate import (
    SceneRender,
    SceneSpec,
    SourceSpec,
    default_scene,
    delay_and_sum,
    si_snr,
    simulate,
)
from .spatial import PairSet, SpatialFeature, angle_feature, assemble_input, ipd
from .stft import Spectrogram, Waveform, istft, magnitude, stft
from .tensorfile import read_tensor, write_tensor
from .wavio import read_wav, write_wav

__version__ = "0.1.0"

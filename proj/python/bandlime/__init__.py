"""Band-masking local surrogate explanations for audio classifiers."""

from bandlime._core import (  # noqa: F401
    AudioClip,
    CramerResult,
    EmotionAggregate,
    Error,
    Explanation,
    InvalidArgument,
    IoError,
    NumericalError,
    PredictorError,
    RidgeFit,
    SingularSystem,
    aggregate,
    band_energy_features,
    band_ranges,
    cosine_distance,
    cramer_statistic,
    cramer_test,
    explain,
    fit_weighted_ridge,
    kernel_weight,
    perturb_audio,
    read_wav,
    sample_masks,
    stft,
    synth_band_noise,
    synth_tone,
    write_wav,
)

__version__ = "0.3.0"

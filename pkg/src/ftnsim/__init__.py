"""Link-level simulation of faster-than-Nyquist signalling with iterative
LMMSE equalization of the induced ISI and colored matched-filter noise."""

from .arfit import (
    ArModel,
    IllConditioned,
    NonPositiveInnovation,
    UnstableModel,
    ar_autocorrelation,
    fit_yule_walker,
    generate_ar_noise,
)
from .channel import (
    ColoredNoiseFactor,
    Constellation,
    FactorizationError,
    MatchedNoiseSampler,
    ReceivedBlock,
    apply_channel_taps,
    build_convolution_matrix,
    colored_noise_factor,
    constellation,
    hard_demap,
    modulate,
    simulate_block,
)
from .coding import ConvCode, Interleaver, app_decode, conv_encode, random_interleaver
from .equalize import (
    EqualizeResult,
    StateMatrices,
    build_state_matrices,
    complexity_probe,
    ilmmse_equalize,
    rilmmse_equalize,
)
from .harness import (
    BerPoint,
    ConfigError,
    ExperimentConfig,
    ExperimentResult,
    PRESETS,
    ebn0_to_n0,
    fig4_config,
    fig5_config,
    fig6_config,
    run_experiment,
    validate_config,
)
from .pulse import (
    IsiProfile,
    NoiseAutocorr,
    PulseSpec,
    isi_taps,
    noise_autocorr,
    rrc_amplitude,
    sampled_pulse,
    taps_from_samples,
)
from .softmap import (
    DEFAULT_LLR_CAP,
    ScalingPolicy,
    clip_llrs,
    direct_extrinsic_llr,
    extrinsic_llr,
    intrinsic_llr,
    llr_to_prior,
    moments_to_bit_llrs,
    recalculated_prior_llr,
)

__version__ = "0.1.0"

"""Multilayer sparse NMF toolkit for hyperspectral unmixing experiments.

End to end: synthetic scene generation with SNR-calibrated noise, a
multilayer nonnegative factorization solver with annealed half-power
sparsity on both factors, a simplex-projection endmember extractor for
initialization and baselining, angle-based evaluation, and a seeded
Monte-Carlo benchmark harness.
"""

from .core import (
    ASC_TOL,
    AbundanceMatrix,
    NoiseField,
    SignatureMatrix,
    SpectralCube,
    as_matrix,
    frobenius_cost,
    qnorm,
    reconstruct,
)
from .engine import (
    DENOM_FLOOR,
    POWER_FLOOR,
    LayerConfig,
    LayerResult,
    StopReason,
    alpha_schedule,
    check_stop,
    estimate_abundances,
    fcls_augment,
    layer_cost,
    run_layer,
    update_abundances,
    update_signatures,
)
from .errors import ConfigError, DataFormatError, SolverDivergenceError, UnmixError
from .initialization import InitMethod, InitResult, random_init, vca_endmembers
from .metrics import (
    EvalReport,
    aad,
    evaluate,
    evaluate_matrices,
    match_endmembers,
    rms_aad,
    rms_sad,
    sad,
)
from .multilayer import MlnmfConfig, UnmixResult, compose_signatures, run_mlnmf
from .seeding import derive_seed
from .synth import (
    GroundTruth,
    SceneSpec,
    SpectralLibrary,
    add_noise,
    demo_library,
    generate_scene,
    noise_sigma,
    sample_noise,
    synthetic_library,
)

__version__ = "0.1.0"

__all__ = [
    "ASC_TOL",
    "AbundanceMatrix",
    "ConfigError",
    "DENOM_FLOOR",
    "DataFormatError",
    "EvalReport",
    "GroundTruth",
    "InitMethod",
    "InitResult",
    "LayerConfig",
    "LayerResult",
    "MlnmfConfig",
    "NoiseField",
    "POWER_FLOOR",
    "SceneSpec",
    "SignatureMatrix",
    "SolverDivergenceError",
    "SpectralCube",
    "SpectralLibrary",
    "StopReason",
    "UnmixError",
    "UnmixResult",
    "aad",
    "add_noise",
    "alpha_schedule",
    "as_matrix",
    "check_stop",
    "compose_signatures",
    "demo_library",
    "derive_seed",
    "estimate_abundances",
    "evaluate",
    "evaluate_matrices",
    "fcls_augment",
    "frobenius_cost",
    "generate_scene",
    "layer_cost",
    "match_endmembers",
    "noise_sigma",
    "qnorm",
    "random_init",
    "reconstruct",
    "rms_aad",
    "rms_sad",
    "run_layer",
    "run_mlnmf",
    "sad",
    "sample_noise",
    "synthetic_library",
    "update_abundances",
    "update_signatures",
    "vca_endmembers",
]

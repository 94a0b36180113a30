"""Stacked factorization.

Layer 1 factors the observation matrix; every later layer re-factors the
previous layer's abundances into a square mixing correction times new
abundances.  The final signature estimate is the left-to-right product of
the per-layer mixing matrices and the final abundances are the last layer's.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .core import AbundanceMatrix, SignatureMatrix, as_matrix
from .engine import LayerConfig, LayerResult, run_layer
from .errors import ConfigError
from .initialization import InitMethod, random_init, vca_endmembers
from .seeding import derive_seed

# The per-layer tunables (delta, alpha0, epsilon) are calibrated for
# reflectance-scale observations: hundreds of bands with entries of order
# one.  Layers past the first factor abundance-scale matrices whose data
# term would otherwise be orders of magnitude below the sum-to-one
# augmentation, freezing the update dynamics.  Each inner layer's input is
# therefore rescaled to INNER_SCALE_GAIN times the original data's mean
# column norm before factoring, and the scale is folded back into that
# layer's mixing matrix so the composition X ~ A1...AL SL stays exact.
INNER_SCALE_GAIN = 30.0


@dataclass(frozen=True)
class MlnmfConfig:
    """Endmember count, layer count, per-layer tunables, and seeding."""

    p: int
    layers: int = 10
    layer: LayerConfig = field(default_factory=LayerConfig)
    init: InitMethod = InitMethod.VCA
    seed: int = 0

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if self.layers < 1:
            raise ValueError("layers must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if not isinstance(self.init, InitMethod):
            raise ValueError("init must be an InitMethod")


@dataclass(frozen=True, eq=False)
class UnmixResult:
    """Composed signatures, final abundances, and per-layer diagnostics."""

    A: SignatureMatrix
    S: AbundanceMatrix
    per_layer: tuple[LayerResult, ...]
    config_echo: MlnmfConfig


def compose_signatures(layer_as) -> np.ndarray:
    """Left-to-right product of the per-layer mixing matrices."""
    mats = [as_matrix(m) for m in layer_as]
    if not mats:
        raise ValueError("need at least one mixing matrix")
    acc = mats[0]
    for m in mats[1:]:
        if acc.shape[1] != m.shape[0]:
            raise ValueError(f"chain broken: {acc.shape} @ {m.shape}")
        acc = acc @ m
    return acc


def run_mlnmf(cube, cfg: MlnmfConfig) -> UnmixResult:
    """Run the full multilayer decomposition of ``cube``.

    Layer 1 is initialized per ``cfg.init`` (vertex extraction by default)
    and factors the observations as-is; the square layers after it start
    from seeded random factors, each layer on its own derived seed stream,
    and factor the scale-calibrated previous abundances (see
    ``INNER_SCALE_GAIN``).  Each ``per_layer`` entry stores the mixing
    matrix with the calibration already divided out, so the stored matrices
    multiply out to the composed result exactly; cost traces refer to the
    calibrated layer problem.  Deterministic: identical inputs and config
    produce bitwise identical results.
    """
    X = as_matrix(cube)
    b, n = X.shape
    if cfg.p > min(b, n):
        raise ConfigError(f"p={cfg.p} exceeds min(bands, pixels)={min(b, n)}")

    ref_scale = float(np.linalg.norm(X, axis=0).mean())
    x_l = X
    results: list[LayerResult] = []
    for layer_index in range(1, cfg.layers + 1):
        layer_seed = derive_seed(cfg.seed, "init", layer_index)
        if layer_index == 1:
            gain = 1.0
            x_in = x_l
            if cfg.init is InitMethod.VCA:
                init = vca_endmembers(x_in, cfg.p, layer_seed)
            else:
                init = random_init(b, cfg.p, n, layer_seed)
        else:
            mean_norm = float(np.linalg.norm(x_l, axis=0).mean())
            gain = INNER_SCALE_GAIN * ref_scale / mean_norm if mean_norm > 0 else 1.0
            x_in = gain * x_l
            init = random_init(cfg.p, cfg.p, n, layer_seed)
        result = run_layer(x_in, init.A0, init.S0, cfg.layer)
        if gain != 1.0:
            result = replace(result, A=SignatureMatrix(result.A.data / gain))
        results.append(result)
        x_l = result.S.data

    composed = compose_signatures([r.A.data for r in results])
    return UnmixResult(
        A=SignatureMatrix(composed),
        S=results[-1].S,
        per_layer=tuple(results),
        config_echo=cfg,
    )

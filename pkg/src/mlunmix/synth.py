"""Synthetic scene generation and noise calibration.

Scenes are built the way the classic unmixing benchmarks do it: tile the
image with single-material blocks, blur the abundance planes with a mean
filter to create mixing, wipe out any remaining near-pure pixels, then add
Gaussian noise scaled to a requested SNR.
"""

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.ndimage import uniform_filter

from .core import AbundanceMatrix, NoiseField, SignatureMatrix, SpectralCube
from .errors import ConfigError

DEMO_LIBRARY_RESOURCE = "demo_library.txt"


@dataclass(frozen=True, eq=False)
class SpectralLibrary:
    """A bank of reference signatures scenes are assembled from."""

    signatures: np.ndarray
    names: tuple[str, ...]
    wavelengths: np.ndarray | None = None

    def __post_init__(self):
        arr = np.array(self.signatures, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise ValueError("library needs a 2-D bank with at least one signature")
        if not np.isfinite(arr).all() or (arr < 0).any():
            raise ValueError("library reflectances must be finite and nonnegative")
        arr.flags.writeable = False
        object.__setattr__(self, "signatures", arr)
        names = tuple(str(s) for s in self.names)
        if len(names) != arr.shape[1]:
            raise ValueError(f"need {arr.shape[1]} names, got {len(names)}")
        object.__setattr__(self, "names", names)
        if self.wavelengths is not None:
            wl = np.array(self.wavelengths, dtype=np.float64)
            if wl.shape != (arr.shape[0],):
                raise ValueError(f"need {arr.shape[0]} wavelengths, got {wl.shape}")
            wl.flags.writeable = False
            object.__setattr__(self, "wavelengths", wl)

    @property
    def bands(self) -> int:
        return self.signatures.shape[0]

    @property
    def count(self) -> int:
        return self.signatures.shape[1]


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of the block-fill scene generator."""

    image_size: tuple[int, int] = (64, 64)
    block_size: int = 8
    filter_size: int = 9
    purity_threshold: float = 0.8
    p: int = 6
    seed: int = 0

    def __post_init__(self):
        rows, cols = (int(v) for v in self.image_size)
        object.__setattr__(self, "image_size", (rows, cols))
        if rows < 1 or cols < 1:
            raise ValueError("image size must be positive")
        if self.block_size < 1 or rows % self.block_size or cols % self.block_size:
            raise ValueError("block_size must divide both image dimensions")
        if self.filter_size < 1 or self.filter_size % 2 == 0:
            raise ValueError("filter_size must be odd and positive")
        if not 0 < self.purity_threshold <= 1:
            raise ValueError("purity_threshold must be in (0, 1]")
        if self.p < 1:
            raise ValueError("p must be at least 1")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """A generated scene with everything needed to score an unmixing run."""

    A_true: SignatureMatrix
    S_true: AbundanceMatrix
    clean_cube: SpectralCube
    noisy_cube: SpectralCube
    sigma: float
    snr_db: float


def generate_scene(lib: SpectralLibrary, spec: SceneSpec) -> GroundTruth:
    """Build the noise-free part of a scene from ``lib`` per ``spec``.

    Steps: pick ``spec.p`` library signatures at random; fill each block of
    the image with one randomly chosen endmember (every endmember is
    guaranteed at least one block); mean-filter the abundance planes with
    reflected borders and renormalize the pixel sums to one; replace any
    pixel whose largest abundance still exceeds the purity threshold with
    the uniform mixture.  The returned truth carries the clean cube in both
    cube slots (``snr_db`` is infinite); see :func:`add_noise`.
    """
    if lib.count < spec.p:
        raise ConfigError(f"library has {lib.count} signatures, scene needs {spec.p}")
    if spec.purity_threshold < 1.0 / spec.p:
        raise ConfigError(
            f"purity_threshold {spec.purity_threshold} is below the uniform level 1/{spec.p}"
        )
    rows, cols = spec.image_size
    bs = spec.block_size
    blocks_r, blocks_c = rows // bs, cols // bs
    n_blocks = blocks_r * blocks_c
    if n_blocks < spec.p:
        raise ConfigError(f"{n_blocks} blocks cannot host {spec.p} endmembers")

    rng = np.random.default_rng(spec.seed)
    chosen = rng.choice(lib.count, size=spec.p, replace=False)
    a_true = lib.signatures[:, chosen].copy()

    labels = rng.integers(0, spec.p, size=n_blocks)
    slots = rng.permutation(n_blocks)[: spec.p]
    labels[slots] = rng.permutation(spec.p)
    label_image = np.repeat(
        np.repeat(labels.reshape(blocks_r, blocks_c), bs, axis=0), bs, axis=1
    )

    planes = (label_image[None, :, :] == np.arange(spec.p)[:, None, None]).astype(
        np.float64
    )
    if spec.filter_size > 1:
        planes = np.stack(
            [uniform_filter(pl, size=spec.filter_size, mode="reflect") for pl in planes]
        )
        # the running-sum filter leaves ~1e-17 negative residue where planes are 0
        planes = np.maximum(planes, 0.0)
    planes /= planes.sum(axis=0)

    s_true = planes.reshape(spec.p, rows * cols)
    hot = s_true.max(axis=0) > spec.purity_threshold
    s_true[:, hot] = 1.0 / spec.p

    clean = a_true @ s_true
    wl = tuple(lib.wavelengths) if lib.wavelengths is not None else None
    cube = SpectralCube(clean, spatial_dims=(rows, cols), wavelengths=wl)
    return GroundTruth(
        A_true=SignatureMatrix(a_true, names=tuple(lib.names[k] for k in chosen)),
        S_true=AbundanceMatrix(s_true, normalized=True),
        clean_cube=cube,
        noisy_cube=cube,
        sigma=0.0,
        snr_db=math.inf,
    )


def sample_noise(bands: int, pixels: int, sigma: float, seed: int) -> NoiseField:
    """Draw the i.i.d. Gaussian field ``add_noise`` would add for this seed."""
    e = np.random.default_rng(seed).standard_normal((bands, pixels)) * float(sigma)
    return NoiseField(data=e, sigma=float(sigma))


def noise_sigma(clean: SpectralCube, snr_db: float) -> float:
    """Per-element noise std that realizes ``snr_db``.

    The SNR is the ratio of the mean per-pixel spectrum energy to the mean
    per-pixel noise energy; with B i.i.d. noise bands that energy is B times
    the per-element variance, hence the division by B.
    """
    x = clean.data
    mean_energy = float((x * x).sum(axis=0).mean())
    return math.sqrt(mean_energy / (x.shape[0] * 10.0 ** (snr_db / 10.0)))


def add_noise(clean: SpectralCube, snr_db: float, seed: int) -> tuple[SpectralCube, float]:
    """Add SNR-calibrated Gaussian noise to ``clean``.

    ``snr_db=inf`` is the no-noise sentinel and returns ``clean`` itself.
    Negative post-noise values are clamped to zero so the result remains a
    valid nonnegative cube; calibration checks should measure the field from
    :func:`sample_noise` before clamping.
    """
    if not (math.isfinite(snr_db) or (math.isinf(snr_db) and snr_db > 0)):
        raise ValueError("snr_db must be finite or +inf")
    if math.isinf(snr_db):
        return clean, 0.0
    sigma = noise_sigma(clean, snr_db)
    field = sample_noise(clean.bands, clean.pixels, sigma, seed)
    noisy = np.maximum(clean.data + field.data, 0.0)
    return (
        SpectralCube(noisy, spatial_dims=clean.spatial_dims, wavelengths=clean.wavelengths),
        sigma,
    )


def synthetic_library(
    bands: int = 224,
    count: int = 12,
    seed: int = 0,
    wavelength_range: tuple[float, float] = (380.0, 2500.0),
    pool: int = 200,
    max_angle: float = 0.70,
) -> SpectralLibrary:
    """Smooth random reflectance spectra for self-contained experiments.

    Mimics the angular statistics of real mineral banks: every signature
    rides a shared smooth continuum and differs by a handful of Gaussian
    absorption and reflection features.  From ``pool`` random candidates a
    greedy max-min-angle subset of ``count`` spectra is kept, capped at
    ``max_angle`` radians pairwise, so no two signatures are near-collinear
    (which would make abundances unrecoverable) and none are implausibly
    orthogonal.
    """
    if count < 1 or pool < count:
        raise ValueError("need pool >= count >= 1")
    rng = np.random.default_rng(seed)
    wl = np.linspace(wavelength_range[0], wavelength_range[1], bands)
    span = wavelength_range[1] - wavelength_range[0]
    u = (wl - wl[0]) / span
    continuum = 0.4 + 0.25 * u - 0.12 * u**2
    candidates = np.empty((bands, pool))
    for k in range(pool):
        s = continuum * rng.uniform(0.8, 1.2) + rng.uniform(-0.08, 0.08) * u
        for _ in range(int(rng.integers(3, 7))):
            amp = rng.uniform(0.08, 0.4) * rng.choice([-1.0, 1.0])
            center = rng.uniform(wl[0], wl[-1])
            width = rng.uniform(0.03, 0.18) * span
            s = s + amp * np.exp(-0.5 * ((wl - center) / width) ** 2)
        s = np.clip(s, 0.02, None)
        s /= s.max()
        candidates[:, k] = s * rng.uniform(0.55, 0.95)

    normed = candidates / np.linalg.norm(candidates, axis=0)
    angles = np.arccos(np.clip(normed.T @ normed, -1.0, 1.0))
    chosen = [int(np.argmax(angles.sum(axis=1)))]
    while len(chosen) < count:
        eligible = [
            k for k in range(pool)
            if k not in chosen and angles[k, chosen].max() <= max_angle
        ]
        if not eligible:
            raise ValueError(
                f"candidate pool exhausted under max_angle={max_angle}; "
                "increase pool or relax the cap"
            )
        chosen.append(max(eligible, key=lambda k: angles[k, chosen].min()))

    names = tuple(f"synth{k:02d}" for k in range(count))
    return SpectralLibrary(signatures=candidates[:, chosen], names=names, wavelengths=wl)


def demo_library() -> SpectralLibrary:
    """Load the library bundled with the package (224 bands, 12 signatures)."""
    from .fileio import read_library  # deferred: fileio imports this module

    path = resources.files(__package__).joinpath("data", DEMO_LIBRARY_RESOURCE)
    with resources.as_file(path) as concrete:
        return read_library(concrete)

"""First-layer initialization strategies.

``vca_endmembers`` is a simplex-projection extractor: it assumes the pixel
cloud is (approximately) the convex hull of the endmember spectra and picks
the pixels sitting at its vertices.  It doubles as the standalone geometric
baseline.  ``random_init`` draws strictly positive factors for the layers
where no geometry is available.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .core import as_matrix
from .errors import ConfigError

# Below this ratio to the leading singular value, the trailing principal
# direction is considered empty of data variation (exactly-rank-deficient
# noise-free input) and its coordinate is replaced by a constant lift so the
# projected simplex stays affinely independent.
_LIFT_RTOL = 1e-8


class InitMethod(enum.Enum):
    VCA = "vca"
    RANDOM = "random"


@dataclass(frozen=True, eq=False)
class InitResult:
    """Initial factors plus how they were produced."""

    A0: np.ndarray
    S0: np.ndarray
    method: InitMethod
    selected_pixel_indices: tuple[int, ...] | None = None


def random_init(b: int, p: int, n: int, seed: int) -> InitResult:
    """Seeded i.i.d. uniform (0, 1] factors of shape (b, p) and (p, n).

    Entries are strictly positive so no element starts zero-locked.
    """
    if min(b, p, n) < 1:
        raise ValueError("all dimensions must be at least 1")
    rng = np.random.default_rng(seed)
    a0 = 1.0 - rng.random((b, p))
    s0 = 1.0 - rng.random((p, n))
    return InitResult(A0=a0, S0=s0, method=InitMethod.RANDOM)


def vca_endmembers(x, p: int, seed: int) -> InitResult:
    """Pick ``p`` pixel spectra at the vertices of the data simplex.

    The data is projected onto the top-``p`` principal directions of the
    mean-removed pixel cloud.  Vertices are then collected one at a time:
    draw a random direction, make it orthogonal to the span of the vertices
    already chosen, and take the pixel with the largest absolute projection.
    The returned signatures are verbatim columns of ``x``; the abundance
    initializer is the uniform matrix 1/p.

    Raises :class:`ConfigError` when ``p`` exceeds the numerical rank of the
    data.
    """
    X = as_matrix(x)
    b, n = X.shape
    if not 1 <= p <= min(b, n):
        raise ConfigError(f"p={p} must be between 1 and min(bands, pixels)={min(b, n)}")
    if (X < 0).any():
        raise ValueError("data must be nonnegative")
    if X.max() == 0:
        raise ValueError("data is all-zero")

    sv_x = np.linalg.svd(X, compute_uv=False)
    rank = int((sv_x > sv_x[0] * max(b, n) * np.finfo(np.float64).eps).sum())
    if p > rank:
        raise ConfigError(f"p={p} exceeds the data rank; achievable rank is {rank}")

    mu = X.mean(axis=1, keepdims=True)
    u, sv, _ = np.linalg.svd(X - mu, full_matrices=False)
    y = u[:, :p].T @ X
    if p >= 2 and sv[p - 1] <= sv[0] * _LIFT_RTOL:
        y[p - 1, :] = np.linalg.norm(y[: p - 1, :], axis=0).max()

    rng = np.random.default_rng(seed)
    indices: list[int] = []
    for _ in range(p):
        if indices:
            basis = y[:, indices]
            while True:
                w = rng.random(p)
                coeff = np.linalg.lstsq(basis, w, rcond=None)[0]
                f = w - basis @ coeff
                norm = np.linalg.norm(f)
                if norm > 1e-12:
                    break
        else:
            while True:
                f = rng.random(p)
                norm = np.linalg.norm(f)
                if norm > 1e-12:
                    break
        scores = np.abs(f / norm @ y)
        for idx in np.argsort(-scores, kind="stable"):
            if int(idx) not in indices:
                indices.append(int(idx))
                break

    a0 = X[:, indices].copy()
    s0 = np.full((p, n), 1.0 / p)
    return InitResult(
        A0=a0,
        S0=s0,
        method=InitMethod.VCA,
        selected_pixel_indices=tuple(indices),
    )

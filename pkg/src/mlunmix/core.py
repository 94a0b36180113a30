"""Shared matrix value types and reconstruction primitives.

Conventions: observations are band-by-pixel (one column per pixel),
signatures are band-by-endmember (one column per endmember), abundances are
endmember-by-pixel.  All arrays are dense float64.  The wrapper types below
are immutable after construction and safe to share between threads.
"""

from dataclasses import dataclass

import numpy as np

ASC_TOL = 1e-6  # column-sum tolerance for the "normalized" abundance flag


def as_matrix(m) -> np.ndarray:
    """Return the underlying 2-D float64 array of ``m`` (wrapper or array-like)."""
    data = getattr(m, "data", m)
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got {arr.ndim}-D")
    return arr


def _owned(values) -> np.ndarray:
    """Copy ``values`` into a read-only float64 array the wrapper owns."""
    arr = np.array(values, dtype=np.float64)
    arr.flags.writeable = False
    return arr


def _check_nonnegative(arr: np.ndarray, what: str) -> None:
    if not np.isfinite(arr).all():
        raise ValueError(f"{what} must be finite")
    if (arr < 0).any():
        raise ValueError(f"{what} must be elementwise nonnegative")


@dataclass(frozen=True, eq=False)
class SpectralCube:
    """Observed spectra, bands x pixels, optionally tied to a spatial grid."""

    data: np.ndarray
    spatial_dims: tuple[int, int] | None = None
    wavelengths: tuple[float, ...] | None = None

    def __post_init__(self):
        arr = _owned(self.data)
        if arr.ndim != 2:
            raise ValueError(f"cube data must be 2-D, got {arr.ndim}-D")
        b, n = arr.shape
        if b < 1 or n < 1:
            raise ValueError("cube needs at least one band and one pixel")
        _check_nonnegative(arr, "cube data")
        object.__setattr__(self, "data", arr)
        if self.spatial_dims is not None:
            rows, cols = (int(v) for v in self.spatial_dims)
            if rows * cols != n:
                raise ValueError(f"spatial dims {rows}x{cols} do not cover {n} pixels")
            object.__setattr__(self, "spatial_dims", (rows, cols))
        if self.wavelengths is not None:
            wl = tuple(float(w) for w in self.wavelengths)
            if len(wl) != b:
                raise ValueError(f"need {b} wavelengths, got {len(wl)}")
            object.__setattr__(self, "wavelengths", wl)

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def pixels(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class SignatureMatrix:
    """Endmember spectra, bands x endmembers."""

    data: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = _owned(self.data)
        if arr.ndim != 2:
            raise ValueError(f"signature data must be 2-D, got {arr.ndim}-D")
        _check_nonnegative(arr, "signatures")
        dead = np.flatnonzero(arr.max(axis=0) == 0)
        if dead.size:
            raise ValueError(f"all-zero signature column(s): {dead.tolist()}")
        object.__setattr__(self, "data", arr)
        if self.names is not None:
            names = tuple(str(s) for s in self.names)
            if len(names) != arr.shape[1]:
                raise ValueError(f"need {arr.shape[1]} names, got {len(names)}")
            object.__setattr__(self, "names", names)

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def count(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class AbundanceMatrix:
    """Per-pixel endmember fractions, endmembers x pixels.

    ``normalized`` asserts that every column sums to one within ``ASC_TOL``;
    solver outputs generally leave it unset because the sum-to-one constraint
    is only enforced softly.
    """

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        arr = _owned(self.data)
        if arr.ndim != 2:
            raise ValueError(f"abundance data must be 2-D, got {arr.ndim}-D")
        _check_nonnegative(arr, "abundances")
        if self.normalized:
            err = np.abs(arr.sum(axis=0) - 1.0).max() if arr.size else 0.0
            if err > ASC_TOL:
                raise ValueError(
                    f"normalized flag set but column sums deviate by {err:.3e}"
                )
        object.__setattr__(self, "data", arr)

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def pixels(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class NoiseField:
    """Additive observation noise (may be negative) and the std that drew it."""

    data: np.ndarray
    sigma: float

    def __post_init__(self):
        arr = _owned(self.data)
        if arr.ndim != 2:
            raise ValueError(f"noise data must be 2-D, got {arr.ndim}-D")
        sigma = float(self.sigma)
        if not np.isfinite(sigma) or sigma < 0:
            raise ValueError("sigma must be finite and nonnegative")
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "sigma", sigma)


def qnorm(m, q: float) -> float:
    """Sum of elementwise q-th powers of a nonnegative matrix.

    Note this is a penalty functional, not a true norm: there is no outer
    1/q root.  ``q=1/2`` is the sparsity penalty used by the solver.
    """
    arr = as_matrix(m)
    q = float(q)
    if q <= 0:
        raise ValueError("q must be positive")
    if (arr < 0).any():
        raise ValueError("qnorm is undefined for negative entries")
    return float(np.power(arr, q).sum())


def reconstruct(a, s) -> np.ndarray:
    """Mixing-model reconstruction: signatures times abundances."""
    A = as_matrix(a)
    S = as_matrix(s)
    if A.shape[1] != S.shape[0]:
        raise ValueError(f"inner dimensions disagree: {A.shape} @ {S.shape}")
    return A @ S


def frobenius_cost(x, a, s) -> float:
    """Half the squared Frobenius distance between ``x`` and its reconstruction."""
    X = as_matrix(x)
    R = reconstruct(a, s)
    if X.shape != R.shape:
        raise ValueError(f"data is {X.shape} but reconstruction is {R.shape}")
    d = X - R
    return 0.5 * float((d * d).sum())

"""Angle-based evaluation of unmixing output against ground truth.

Spectral and abundance similarity are both measured as the angle between
vectors (arccos of cosine similarity), which makes them invariant to the
scale ambiguity inherent in factorization output.  Estimated endmembers are
matched to true ones by minimum-total-angle optimal assignment before any
per-endmember number is reported.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import as_matrix


def _angle(u, v) -> float:
    a = np.asarray(u, dtype=np.float64).ravel()
    b = np.asarray(v, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"vector lengths differ: {a.shape[0]} vs {b.shape[0]}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("angle is undefined for a zero vector")
    # clamp against round-off on numerically parallel vectors
    return float(np.arccos(np.clip(float(a @ b) / (na * nb), -1.0, 1.0)))


def sad(m, m_hat) -> float:
    """Spectral angle between two signatures, radians."""
    return _angle(m, m_hat)


def aad(a, a_hat) -> float:
    """Angle between two per-pixel abundance columns, radians."""
    return _angle(a, a_hat)


def rms_sad(sads) -> float:
    """Root mean square of per-endmember spectral angles."""
    arr = np.asarray(list(sads), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("need at least one angle")
    return float(np.sqrt(np.mean(arr * arr)))


def rms_aad(aads) -> float:
    """Root mean square of per-pixel abundance angles."""
    arr = np.asarray(list(aads), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("need at least one angle")
    return float(np.sqrt(np.mean(arr * arr)))


def _angle_table(t: np.ndarray, e: np.ndarray) -> np.ndarray:
    tn = np.linalg.norm(t, axis=0)
    en = np.linalg.norm(e, axis=0)
    if (tn == 0).any() or (en == 0).any():
        raise ValueError("angle is undefined for a zero column")
    cos = (t / tn).T @ (e / en)
    return np.arccos(np.clip(cos, -1.0, 1.0))


def match_endmembers(a_true, a_est) -> tuple[int, ...]:
    """Pair estimated endmembers with true ones.

    Returns the bijection minimizing the total spectral angle, as a tuple
    mapping estimated column index to true column index.
    """
    t = as_matrix(a_true)
    e = as_matrix(a_est)
    if t.shape != e.shape:
        raise ValueError(f"signature shapes differ: {t.shape} vs {e.shape}")
    cost = _angle_table(t, e)
    rows, cols = linear_sum_assignment(cost)
    assignment = np.empty(t.shape[1], dtype=int)
    assignment[cols] = rows
    return tuple(int(v) for v in assignment)


@dataclass(frozen=True)
class EvalReport:
    """Matched per-endmember angles, their aggregates, and the matching."""

    per_endmember_sad: tuple[float, ...]
    rms_sad: float
    rms_aad: float
    assignment: tuple[int, ...]
    excluded_pixels: int = 0


def evaluate_matrices(a_true, s_true, a_est, s_est) -> EvalReport:
    """Score an estimate against ground truth at the raw-matrix level.

    Pixels whose estimated abundance column is all zero have no defined
    angle; they are dropped from the abundance aggregate and counted in
    ``excluded_pixels`` instead of failing the whole report.
    """
    at = as_matrix(a_true)
    st = as_matrix(s_true)
    ae = as_matrix(a_est)
    se = as_matrix(s_est)
    if at.shape != ae.shape:
        raise ValueError(f"signature shapes differ: {at.shape} vs {ae.shape}")
    if st.shape != se.shape:
        raise ValueError(f"abundance shapes differ: {st.shape} vs {se.shape}")
    if at.shape[1] != st.shape[0]:
        raise ValueError("signature and abundance endmember counts differ")

    assignment = match_endmembers(at, ae)
    order = np.argsort(np.asarray(assignment))  # estimated column for each true index
    am = ae[:, order]
    sm = se[order, :]

    sads = tuple(sad(at[:, i], am[:, i]) for i in range(at.shape[1]))

    true_norms = np.linalg.norm(st, axis=0)
    est_norms = np.linalg.norm(sm, axis=0)
    valid = (true_norms > 0) & (est_norms > 0)
    excluded = int(np.count_nonzero(~valid))
    if not valid.any():
        raise ValueError("every pixel has a zero abundance column; nothing to score")
    cos = (st[:, valid] * sm[:, valid]).sum(axis=0) / (
        true_norms[valid] * est_norms[valid]
    )
    aads = np.arccos(np.clip(cos, -1.0, 1.0))

    return EvalReport(
        per_endmember_sad=sads,
        rms_sad=rms_sad(sads),
        rms_aad=rms_aad(aads),
        assignment=assignment,
        excluded_pixels=excluded,
    )


def evaluate(truth, result) -> EvalReport:
    """Score an unmixing result object against a generated ground truth."""
    return evaluate_matrices(truth.A_true, truth.S_true, result.A, result.S)

"""Shared numerical primitives for validator scoring.

All kernels accumulate in float64 regardless of input dtype: stored arrays
are float32, but entropy and Gram sums over large N lose precision in 32-bit.
Every function here is pure and safe to call concurrently.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "softmax",
    "shannon_entropy",
    "row_entropies",
    "l2_normalize_rows",
    "nuclear_norm",
    "pairwise_similarity",
    "dense_rank",
]


def softmax(matrix: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Row-wise softmax with temperature, stabilized by subtracting row max."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = np.asarray(matrix, dtype=np.float64) / temperature
    if z.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {z.shape}")
    z = z - z.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def shannon_entropy(p: np.ndarray) -> float:
    """Entropy in nats of a probability vector, with the 0*log(0) = 0 convention."""
    p = np.asarray(p, dtype=np.float64)
    if (p < 0).any():
        raise ValueError("probability vector has a negative entry")
    terms = p * np.log(np.where(p > 0, p, 1.0))
    return float(-terms.sum())


def row_entropies(probs: np.ndarray) -> np.ndarray:
    """Entropy in nats of each row of a row-stochastic matrix."""
    p = np.asarray(probs, dtype=np.float64)
    if (p < 0).any():
        raise ValueError("probability matrix has a negative entry")
    terms = p * np.log(np.where(p > 0, p, 1.0))
    return -terms.sum(axis=1)


def l2_normalize_rows(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scale each row to unit Euclidean norm.

    Zero rows pass through unchanged; their indices are returned so callers
    can flag degenerate (collapsed) representations instead of erroring.

    Returns:
        (normalized matrix, indices of zero rows)
    """
    m = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    zero = norms[:, 0] == 0.0
    safe = np.where(zero[:, None], 1.0, norms)
    return m / safe, np.flatnonzero(zero)


def nuclear_norm(matrix: np.ndarray) -> float:
    """Sum of singular values, via eigendecomposition of the smaller Gram matrix.

    For an N x C input the Gram matrix is C x C when C <= N and N x N
    otherwise. Negative eigenvalues from round-off are clamped to zero.
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    n, c = a.shape
    gram = a.T @ a if c <= n else a @ a.T
    eigvals = np.linalg.eigvalsh(gram)
    return float(np.sqrt(np.clip(eigvals, 0.0, None)).sum())


def pairwise_similarity(normalized_rows: np.ndarray, atol: float = 1e-4) -> np.ndarray:
    """Cosine similarity matrix F F^T of row-normalized F.

    Rows must already be unit-norm (checked within `atol`); entries are
    clipped to [-1, 1] to absorb round-off.
    """
    f = np.asarray(normalized_rows, dtype=np.float64)
    if f.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {f.shape}")
    norms = np.linalg.norm(f, axis=1)
    worst = np.abs(norms - 1.0).max() if norms.size else 0.0
    if worst > atol:
        raise ValueError(f"rows are not L2-normalized (max norm deviation {worst:.3g})")
    return np.clip(f @ f.T, -1.0, 1.0)


def dense_rank(values: np.ndarray) -> np.ndarray:
    """Dense ranks: tied values share a rank, ranks are 1, 2, ... consecutively.

    Ties use exact 64-bit float equality so ranks are platform-independent.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if np.isnan(v).any():
        raise ValueError("cannot rank NaN values")
    _, inverse = np.unique(v, return_inverse=True)
    return inverse.astype(np.int64) + 1

"""Graph Fourier transform and frequency-response tools for polynomial filters."""

from __future__ import annotations

import numpy as np

from .exceptions import ValidationError
from .filters import FilterTaps
from .linalg import as_matrix, as_vector

DEFAULT_GRID = 10_001


def taps_of(h) -> np.ndarray:
    """Coefficient array h_0..h_{K-1} from a FilterTaps or any 1-D sequence."""
    coeffs = getattr(h, "taps", h)
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=np.float64))
    if coeffs.ndim != 1 or coeffs.size < 1:
        raise ValidationError("filter needs at least one tap")
    if not np.all(np.isfinite(coeffs)):
        raise ValidationError("filter taps must be finite")
    return coeffs


def gft(V, x) -> np.ndarray:
    """Project ``x`` onto the eigenvector basis: returns ``V^T x``."""
    V = as_matrix(V, "V")
    x = np.asarray(x, dtype=np.float64)
    if V.shape[0] != V.shape[1] or x.shape[0] != V.shape[0]:
        raise ValidationError(f"cannot transform signal of shape {x.shape} with basis {V.shape}")
    return V.T @ x


def igft(V, x_hat) -> np.ndarray:
    V = as_matrix(V, "V")
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if V.shape[0] != V.shape[1] or x_hat.shape[0] != V.shape[1]:
        raise ValidationError(f"cannot invert spectrum of shape {x_hat.shape} with basis {V.shape}")
    return V @ x_hat


def eval_response(h, lam):
    """h(lam) = sum_k h_k lam^k by Horner's rule; ``lam`` may be an array."""
    c = taps_of(h)
    lam = np.asarray(lam, dtype=np.float64)
    out = np.full(lam.shape, c[-1])
    for ck in c[-2::-1]:
        out = out * lam + ck
    return out if out.ndim else float(out)


def derivative_taps(h) -> np.ndarray:
    c = taps_of(h)
    if c.size == 1:
        return np.zeros(1)
    return c[1:] * np.arange(1, c.size)


def eval_response_deriv(h, lam):
    """h'(lam) = sum_k k h_k lam^(k-1)."""
    return eval_response(derivative_taps(h), lam)


def default_interval(eigenvalues) -> tuple[float, float]:
    """[min(0, lambda_1), lambda_N] so the region around zero is always covered."""
    lam = as_vector(eigenvalues, "eigenvalues")
    return min(0.0, float(lam.min())), float(lam.max())


def _grid(interval, grid) -> np.ndarray:
    lo, hi = (float(v) for v in interval)
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
        raise ValidationError(f"empty or invalid interval [{lo}, {hi}]")
    if grid < 2:
        raise ValidationError("grid needs at least 2 points")
    return np.linspace(lo, hi, int(grid))


def lipschitz_constant(h, interval, grid=DEFAULT_GRID) -> float:
    """max |h'(lam)| over a uniform grid on ``interval``."""
    lam = _grid(interval, grid)
    return float(np.max(np.abs(eval_response_deriv(h, lam))))


def integral_lipschitz_constant(h, interval, grid=DEFAULT_GRID) -> float:
    """max |lam h'(lam)| over a uniform grid on ``interval``."""
    lam = _grid(interval, grid)
    return float(np.max(np.abs(lam * eval_response_deriv(h, lam))))


def normalize_response(h, interval, grid=DEFAULT_GRID) -> FilterTaps:
    """Rescale taps so that max |h(lam)| on the grid equals 1."""
    c = taps_of(h)
    peak = float(np.max(np.abs(eval_response(c, _grid(interval, grid)))))
    if peak == 0.0:
        raise ValidationError("cannot normalize a response that vanishes on the interval")
    return FilterTaps(c / peak)

"""Polynomial graph convolutional filters and filter banks (node domain)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError
from .graph import gso_matrix

DEFAULT_TAPS = 5


@dataclass(frozen=True, eq=False)
class FilterTaps:
    """Coefficients h_0..h_{K-1} of the filter sum_k h_k S^k."""

    taps: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.taps, dtype=np.float64)).copy()
        if t.ndim != 1 or t.size < 1:
            raise ValidationError("filter needs at least one tap")
        if not np.all(np.isfinite(t)):
            raise ValidationError("filter taps must be finite")
        t.setflags(write=False)
        object.__setattr__(self, "taps", t)

    @property
    def K(self) -> int:
        return self.taps.size

    def __len__(self):
        return self.taps.size

    def __eq__(self, other):
        if not isinstance(other, FilterTaps):
            return NotImplemented
        return np.array_equal(self.taps, other.taps)

    __hash__ = None


# the frequency response of a filter is fully determined by its taps
FrequencyResponse = FilterTaps


@dataclass(frozen=True, eq=False)
class FilterBank:
    """F_out x F_in filters sharing K taps; ``taps[f, g]`` maps input g to output f."""

    taps: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.taps, dtype=np.float64).copy()
        if t.ndim != 3 or min(t.shape) < 1:
            raise ValidationError(f"filter bank taps must have shape (f_out, f_in, K), got {t.shape}")
        if not np.all(np.isfinite(t)):
            raise ValidationError("filter bank taps must be finite")
        t.setflags(write=False)
        object.__setattr__(self, "taps", t)

    @property
    def f_out(self) -> int:
        return self.taps.shape[0]

    @property
    def f_in(self) -> int:
        return self.taps.shape[1]

    @property
    def K(self) -> int:
        return self.taps.shape[2]

    def filter(self, f: int, g: int) -> FilterTaps:
        return FilterTaps(self.taps[f, g])

    def filters(self):
        for f in range(self.f_out):
            for g in range(self.f_in):
                yield self.filter(f, g)

    @classmethod
    def from_filters(cls, rows) -> "FilterBank":
        """Build from a nested list ``rows[f][g]`` of FilterTaps or tap sequences."""
        arr = [[np.asarray(getattr(h, "taps", h), dtype=np.float64) for h in row] for row in rows]
        lengths = {a.size for row in arr for a in row}
        if len(lengths) != 1:
            raise ValidationError(f"all filters in a bank must share K, got lengths {sorted(lengths)}")
        return cls(np.array(arr))


def _taps(h) -> np.ndarray:
    return h.taps if isinstance(h, FilterTaps) else FilterTaps(h).taps


def apply_filter(h, S, x) -> np.ndarray:
    """z = sum_k h_k S^k x, accumulated over repeated shifts (K-1 matvecs)."""
    c = _taps(h)
    A = gso_matrix(S)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[0] != A.shape[0]:
        raise ValidationError(f"signal of shape {x.shape} does not fit a {A.shape[0]}-node graph")
    z = c[0] * x
    shifted = x
    for ck in c[1:]:
        shifted = A @ shifted
        z = z + ck * shifted
    return z


def filter_matrix(h, S) -> np.ndarray:
    """Dense H(S) = sum_k h_k S^k, evaluated by Horner's rule in matrix form."""
    c = _taps(h)
    A = gso_matrix(S)
    eye = np.eye(A.shape[0])
    H = c[-1] * eye
    for ck in c[-2::-1]:
        H = A @ H + ck * eye
    return H


def shift_stack(S, X, K: int) -> np.ndarray:
    """[X, S X, ..., S^{K-1} X] stacked along a leading axis."""
    A = gso_matrix(S)
    out = np.empty((K,) + X.shape)
    out[0] = X
    for k in range(1, K):
        out[k] = A @ out[k - 1]
    return out


def apply_bank(bank: FilterBank, S, X) -> np.ndarray:
    """Column f of the result is sum_g H^{fg}(S) X[:, g]."""
    A = gso_matrix(S)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] != A.shape[0] or X.shape[1] != bank.f_in:
        raise ValidationError(
            f"input of shape {X.shape} does not fit a bank with f_in={bank.f_in} on {A.shape[0]} nodes"
        )
    Z = shift_stack(A, X, bank.K)
    return np.einsum("kng,fgk->nf", Z, bank.taps)

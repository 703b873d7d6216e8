"""Graph shift operators, node permutations, and rating-similarity graphs."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError
from .linalg import EigenSystem, check_symmetric, sym_eig

GSO_KINDS = ("adjacency", "knn-similarity", "custom")


@dataclass(frozen=True, eq=False)
class GraphShiftOperator:
    """Symmetric N x N shift operator with a lazily computed eigendecomposition.

    The matrix is stored read-only. ``eig`` is computed at most once, even
    when several threads ask for it concurrently.
    """

    matrix: np.ndarray
    kind: str = "custom"
    _eig: list = field(default_factory=list, init=False, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in GSO_KINDS:
            raise ValidationError(f"unknown GSO kind {self.kind!r}; expected one of {GSO_KINDS}")
        M = check_symmetric(self.matrix, name="shift operator").copy()
        M = 0.5 * (M + M.T)
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def eig(self) -> EigenSystem:
        if not self._eig:
            with self._lock:
                if not self._eig:
                    self._eig.append(sym_eig(self.matrix))
        return self._eig[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eig.values

    @property
    def eigenvectors(self) -> np.ndarray:
        return self.eig.vectors


def as_gso(S) -> GraphShiftOperator:
    """Accept either a GraphShiftOperator or a raw symmetric matrix."""
    if isinstance(S, GraphShiftOperator):
        return S
    return GraphShiftOperator(np.asarray(S, dtype=np.float64))


def gso_matrix(S) -> np.ndarray:
    if isinstance(S, GraphShiftOperator):
        return S.matrix
    return check_symmetric(S, name="shift operator")


@dataclass(frozen=True, eq=False)
class Permutation:
    """Node relabeling. ``mapping[i]`` is the old index placed at new position ``i``.

    As a 0/1 matrix P this realizes ``P^T x = x[mapping]`` and
    ``P^T S P = S[mapping][:, mapping]``.
    """

    mapping: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mapping)
        if m.ndim != 1 or m.size == 0:
            raise ValidationError("permutation mapping must be a nonempty 1-D index array")
        if not np.issubdtype(m.dtype, np.integer):
            if not np.all(np.equal(np.mod(m, 1), 0)):
                raise ValidationError("permutation mapping must hold integers")
        m = m.astype(np.intp)
        n = m.size
        if m.min() < 0 or m.max() >= n or np.unique(m).size != n:
            raise ValidationError("permutation mapping is not a bijection on [0, N)")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mapping", m)

    @property
    def n(self) -> int:
        return self.mapping.size

    def matrix(self) -> np.ndarray:
        P = np.zeros((self.n, self.n))
        P[self.mapping, np.arange(self.n)] = 1.0
        return P

    def inverse(self) -> "Permutation":
        return Permutation(np.argsort(self.mapping))

    def compose(self, other: "Permutation") -> "Permutation":
        """Permutation equal to applying ``self`` first, then ``other``."""
        if other.n != self.n:
            raise ValidationError("cannot compose permutations of different sizes")
        return Permutation(self.mapping[other.mapping])

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n))


def random_permutation(n: int, seed: int) -> Permutation:
    """Seeded Fisher-Yates shuffle of ``range(n)``."""
    if n < 1:
        raise ValidationError("permutation size must be at least 1")
    rng = np.random.default_rng(seed)
    mapping = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        mapping[i], mapping[j] = mapping[j], mapping[i]
    return Permutation(mapping)


def permute_gso(S, P: Permutation) -> GraphShiftOperator:
    """Relabel the nodes of ``S``: returns ``P^T S P``."""
    S = as_gso(S)
    if S.n != P.n:
        raise ValidationError(f"permutation of size {P.n} does not match graph of size {S.n}")
    m = P.mapping
    return GraphShiftOperator(S.matrix[np.ix_(m, m)], kind=S.kind)


def permute_signal(x, P: Permutation) -> np.ndarray:
    """Returns ``P^T x``. Works on vectors and on N x F feature matrices."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2):
        raise ValidationError("signal must be a vector or an N x F matrix")
    if x.shape[0] != P.n:
        raise ValidationError(f"signal of length {x.shape[0]} does not match permutation of size {P.n}")
    return x[P.mapping]


def pearson_correlation(ratings, return_diagnostics=False):
    """Item-item Pearson correlation over co-rating users.

    ``ratings`` is a RatingMatrix or a dense users x items array with 0
    marking unrated entries. Means and variances are taken over the users
    who rated both items. Pairs with fewer than two common raters, or with
    zero variance on the common support, get correlation 0; these are
    counted in the diagnostics. The diagonal is zero.
    """
    R = ratings.to_dense() if hasattr(ratings, "to_dense") else np.asarray(ratings, dtype=np.float64)
    if R.ndim != 2:
        raise ValidationError("ratings must be a users x items matrix")
    M = (R != 0).astype(np.float64)
    n_common = M.T @ M
    sum_x = R.T @ M  # [i, j] = sum of item i's ratings over users who also rated j
    sum_y = sum_x.T
    sum_xy = R.T @ R
    sum_xx = (R * R).T @ M
    sum_yy = sum_xx.T

    with np.errstate(divide="ignore", invalid="ignore"):
        cov = sum_xy - sum_x * sum_y / n_common
        var_x = sum_xx - sum_x**2 / n_common
        var_y = sum_yy - sum_y**2 / n_common
        corr = cov / np.sqrt(var_x * var_y)

    # variances below this are rounding noise from the one-pass formulas
    tiny = 1e-12 * np.maximum(1.0, sum_xx)
    few = n_common < 2
    flat = (var_x <= tiny) | (var_y <= tiny.T)
    undefined = few | flat | ~np.isfinite(corr)
    corr = np.where(undefined, 0.0, np.clip(corr, -1.0, 1.0))
    np.fill_diagonal(corr, 0.0)
    corr = 0.5 * (corr + corr.T)

    if not return_diagnostics:
        return corr
    off = ~np.eye(corr.shape[0], dtype=bool)
    diagnostics = {
        "pairs_too_few_common": int(np.sum(few & off) // 2),
        "pairs_zero_variance": int(np.sum(flat & ~few & off) // 2),
    }
    return corr, diagnostics


def build_knn_graph(similarity, k: int) -> GraphShiftOperator:
    """k-nearest-neighbor graph from a symmetric similarity matrix.

    Negative similarities are clamped to zero first. Each node keeps its
    ``k`` largest-similarity neighbors (ties go to the lower index), and an
    edge survives if either endpoint selected it. Kept edges carry the
    original symmetric weight.
    """
    W = check_symmetric(similarity, name="similarity")
    n = W.shape[0]
    if k < 0:
        raise ValidationError("k must be nonnegative")
    if k >= n:
        raise ValidationError(f"k={k} must be smaller than the number of nodes {n}")
    W = np.maximum(W, 0.0)
    np.fill_diagonal(W, 0.0)

    keep = np.zeros((n, n), dtype=bool)
    for i in range(n):
        row = W[i].copy()
        row[i] = -np.inf
        order = np.argsort(-row, kind="stable")
        keep[i, order[:k]] = True
    keep |= keep.T
    A = np.where(keep, W, 0.0)
    return GraphShiftOperator(A, kind="knn-similarity")

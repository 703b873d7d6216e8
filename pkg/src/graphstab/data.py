"""Rating data: MovieLens parsing, a synthetic generator, and labeled splits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ParseError, ValidationError
from .graph import GraphShiftOperator, build_knn_graph, pearson_correlation

SPLITS = ("train", "val", "test")
MIN_RATERS = 10
DEFAULT_K = 10


@dataclass(frozen=True, eq=False)
class RatingMatrix:
    """Sparse ratings as parallel (user, item, rating) arrays with 0-based ids."""

    n_users: int
    n_items: int
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.users, dtype=np.intp)
        i = np.asarray(self.items, dtype=np.intp)
        r = np.asarray(self.ratings, dtype=np.float64)
        if not (u.shape == i.shape == r.shape and u.ndim == 1):
            raise ValidationError("users, items and ratings must be 1-D arrays of equal length")
        if u.size:
            if u.min() < 0 or u.max() >= self.n_users or i.min() < 0 or i.max() >= self.n_items:
                raise ValidationError("rating entry outside the matrix dimensions")
            if np.any((r < 1) | (r > 5)) or not np.all(np.isfinite(r)):
                raise ValidationError("ratings must lie in [1, 5]")
            if np.unique(u * self.n_items + i).size != u.size:
                raise ValidationError("duplicate (user, item) pair")
        for a in (u, i, r):
            a.setflags(write=False)
        object.__setattr__(self, "users", u)
        object.__setattr__(self, "items", i)
        object.__setattr__(self, "ratings", r)

    @property
    def n_entries(self) -> int:
        return self.ratings.size

    def to_dense(self) -> np.ndarray:
        """users x items array, 0 where unrated."""
        R = np.zeros((self.n_users, self.n_items))
        R[self.users, self.items] = self.ratings
        return R

    def raters_per_item(self) -> np.ndarray:
        return np.bincount(self.items, minlength=self.n_items)

    def most_rated_item(self) -> int:
        """Item with the most ratings; ties go to the lowest index."""
        if self.n_items == 0:
            raise ValidationError("rating matrix has no items")
        return int(np.argmax(self.raters_per_item()))

    def subset_users(self, user_ids) -> "RatingMatrix":
        """Same shape, keeping only entries from ``user_ids``."""
        keep = np.isin(self.users, np.asarray(user_ids, dtype=np.intp))
        return RatingMatrix(self.n_users, self.n_items, self.users[keep], self.items[keep], self.ratings[keep])

    def serialize(self, path):
        """Write in the tab-separated u.data layout (1-based ids, timestamp 0)."""
        with open(path, "w") as fh:
            for u, i, r in zip(self.users, self.items, self.ratings):
                fh.write(f"{u + 1}\t{i + 1}\t{r:.17g}\t0\n")


def parse_movielens(path, integer_ratings: bool = True) -> RatingMatrix:
    """Read ``user \\t item \\t rating \\t timestamp`` lines with 1-based ids.

    Dimensions are the largest ids seen. Ratings must be integers 1..5
    unless ``integer_ratings`` is False, which admits any real in [1, 5]
    (used to reload synthetic data).
    """
    try:
        fh = open(path)
    except OSError as exc:
        raise ParseError(f"cannot open rating file: {exc.strerror}", path=str(path)) from exc
    users, items, ratings = [], [], []
    seen = {}
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(f"expected 4 tab-separated fields, got {len(parts)}", str(path), lineno)
            try:
                u, i = int(parts[0]), int(parts[1])
                int(parts[3])
            except ValueError:
                raise ParseError(f"non-integer id or timestamp in {line!r}", str(path), lineno) from None
            try:
                r = float(parts[2])
            except ValueError:
                raise ParseError(f"non-numeric rating {parts[2]!r}", str(path), lineno) from None
            if u < 1 or i < 1:
                raise ParseError("ids are 1-based and must be positive", str(path), lineno)
            valid = r in (1, 2, 3, 4, 5) if integer_ratings else 1.0 <= r <= 5.0
            if not valid:
                raise ParseError(f"rating {parts[2]} outside 1..5", str(path), lineno)
            key = (u, i)
            if key in seen:
                raise ParseError(f"duplicate pair user {u} item {i} (first on line {seen[key]})", str(path), lineno)
            seen[key] = lineno
            users.append(u - 1)
            items.append(i - 1)
            ratings.append(r)
    n_users = max(users) + 1 if users else 0
    n_items = max(items) + 1 if items else 0
    return RatingMatrix(n_users, n_items, np.array(users, dtype=np.intp), np.array(items, dtype=np.intp), np.array(ratings))


def synthetic_ratings(n_users=200, n_items=100, rank=5, noise_sd=0.5, density=0.3, seed=0) -> RatingMatrix:
    """Low-rank latent ratings: scores U W^T + noise, standardized to mean 3, clipped to [1, 5]."""
    if n_users < 1 or n_items < 1:
        raise ValidationError("n_users and n_items must be positive")
    if not 1 <= rank <= min(n_users, n_items):
        raise ValidationError(f"rank {rank} must lie in [1, min(n_users, n_items)]")
    if not 0 < density <= 1:
        raise ValidationError("density must lie in (0, 1]")
    if noise_sd < 0:
        raise ValidationError("noise_sd must be nonnegative")
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((n_users, rank))
    W = rng.standard_normal((n_items, rank))
    raw = U @ W.T + noise_sd * rng.standard_normal((n_users, n_items))
    sd = raw.std()
    scores = 3.0 + (raw - raw.mean()) / (sd if sd > 0 else 1.0)
    scores = np.clip(scores, 1.0, 5.0)
    kept = rng.random((n_users, n_items)) < density
    u, i = np.nonzero(kept)
    return RatingMatrix(n_users, n_items, u, i, scores[u, i])


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """One sample per user who rated the target; the target entry is zeroed in the signal."""

    signals: np.ndarray
    labels: np.ndarray
    target_item: int
    splits: np.ndarray
    user_ids: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.signals)[:, self.target_item] != 0):
            raise ValidationError("target entry must be zero in every signal")
        if not np.all(np.isin(self.splits, SPLITS)):
            raise ValidationError(f"split tags must be one of {SPLITS}")

    def __len__(self):
        return self.labels.size

    def mask(self, split: str) -> np.ndarray:
        return self.splits == split

    def count(self, split: str) -> int:
        return int(np.sum(self.mask(split)))

    def users_in(self, split: str) -> np.ndarray:
        return self.user_ids[self.mask(split)]


def make_labeled_dataset(ratings: RatingMatrix, target_item: int, train_frac=0.9, val_frac=0.1, seed=0) -> LabeledDataset:
    """Samples from the target's raters; split into train/val/test by a seeded shuffle.

    ``n_test = round((1 - train_frac) n)`` and ``val_frac`` is a fraction of
    the remaining training pool.
    """
    if not 0 <= target_item < ratings.n_items:
        raise ValidationError(f"target item {target_item} out of range")
    if not (0 < train_frac <= 1 and 0 <= val_frac < 1):
        raise ValidationError("need 0 < train_frac <= 1 and 0 <= val_frac < 1")
    R = ratings.to_dense()
    raters = np.flatnonzero(R[:, target_item] != 0)
    if raters.size < MIN_RATERS:
        raise ValidationError(f"target item {target_item} has {raters.size} raters, need at least {MIN_RATERS}")
    labels = R[raters, target_item].copy()
    signals = R[raters].copy()
    signals[:, target_item] = 0.0

    n = raters.size
    n_test = int(round((1.0 - train_frac) * n))
    n_val = int(round(val_frac * (n - n_test)))
    order = np.random.default_rng(seed).permutation(n)
    splits = np.empty(n, dtype="<U5")
    splits[order[:n_test]] = "test"
    splits[order[n_test : n_test + n_val]] = "val"
    splits[order[n_test + n_val :]] = "train"
    return LabeledDataset(signals, labels, int(target_item), splits, raters)


def graph_from_split(ratings: RatingMatrix, user_ids, k: int = DEFAULT_K) -> GraphShiftOperator:
    """kNN item graph from Pearson correlations over ``user_ids`` only."""
    user_ids = np.asarray(user_ids, dtype=np.intp)
    if user_ids.size == 0:
        raise ValidationError("need at least one user to estimate the graph")
    return build_knn_graph(pearson_correlation(ratings.subset_users(user_ids)), k)

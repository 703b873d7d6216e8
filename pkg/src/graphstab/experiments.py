"""End-to-end experiment pipelines shared by the command line and the tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DEFAULT_K, LabeledDataset, RatingMatrix, graph_from_split, make_labeled_dataset
from .exceptions import ValidationError
from .gnn import ARCHITECTURES, GnnModel, TrainConfig, model_for_arch, train
from .graph import GraphShiftOperator
from .linalg import operator_norm
from .perturbation import misalignment_from_bases
from .spectral import eval_response, lipschitz_constant
from .stability import bound_gnn, delta_for_model, gnn_distance

# penalty weight used by the gnn-il architecture unless overridden
DEFAULT_IL_RHO = 1.0
DEFAULT_FRACTIONS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
REFERENCE_FRACTION = 0.9


@dataclass(frozen=True, eq=False)
class Pipeline:
    """Ratings, labeled samples, and the normalized training graph."""

    ratings: RatingMatrix
    dataset: LabeledDataset
    S: GraphShiftOperator
    scale: float

    def test_signals(self) -> np.ndarray:
        """Signals of the test split, or all signals if the split is empty."""
        X = self.dataset.signals[self.dataset.mask("test")]
        X = X[np.linalg.norm(X, axis=1) > 0]
        return X if X.shape[0] else self.dataset.signals


def scaled_graph(S: GraphShiftOperator, scale: float) -> GraphShiftOperator:
    return GraphShiftOperator(S.matrix / scale, kind=S.kind)


def prepare(ratings: RatingMatrix, target=None, seed=0, k=DEFAULT_K, train_frac=0.9, val_frac=0.1) -> Pipeline:
    """Split the target's raters and build the kNN graph from training users.

    The graph is divided by its operator norm, so its spectrum lies in
    [-1, 1]; the same scale is reused for every graph compared against it.
    """
    target = ratings.most_rated_item() if target is None else int(target)
    ds = make_labeled_dataset(ratings, target, train_frac, val_frac, seed)
    S = graph_from_split(ratings, ds.users_in("train"), k)
    scale = operator_norm(S.matrix)
    if scale == 0.0:
        raise ValidationError("training graph has no edges")
    return Pipeline(ratings, ds, scaled_graph(S, scale), scale)


def arch_rho(arch: str, rho=None) -> float:
    if arch not in ARCHITECTURES:
        raise ValidationError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")
    if rho is not None:
        return float(rho)
    return DEFAULT_IL_RHO if arch == "gnn-il" else 0.0


def train_arch(pipe: Pipeline, arch: str, seed=0, epochs=40, rho=None, lr=0.005, f_hidden=64, K=5):
    """Initialize and train one architecture. Returns ``(model, loss_trace)``."""
    model = model_for_arch(arch, f_hidden, K, seed)
    config = TrainConfig(learning_rate=lr, epochs=epochs, il_penalty_weight=arch_rho(arch, rho), seed=seed)
    return train(model, pipe.S, pipe.dataset, config)


@dataclass(frozen=True)
class EstimationRow:
    fraction: float
    measured_gnn_dist: float
    bound_gnn: float
    rel_dist: float


def estimation_sweep(pipe: Pipeline, model: GnnModel, fractions=DEFAULT_FRACTIONS, seed=0, k=DEFAULT_K):
    """Compare graphs estimated from nested user subsets with the reference subset.

    Users are ordered by a seeded shuffle; fraction f keeps the first
    round(f * n_users). The reference keeps ``REFERENCE_FRACTION``. All
    graphs share the reference's scale. The bound treats the difference as
    an absolute perturbation with the Lipschitz constant of the filters.
    """
    fractions = [float(f) for f in fractions]
    if not fractions or any(not 0 < f <= 1 for f in fractions):
        raise ValidationError("fractions must lie in (0, 1]")
    R = pipe.ratings
    order = np.random.default_rng(seed).permutation(R.n_users)

    def graph_for(f):
        n = max(1, int(round(f * R.n_users)))
        return graph_from_split(R, order[:n], k)

    ref = graph_for(REFERENCE_FRACTION)
    scale = operator_norm(ref.matrix)
    if scale == 0.0:
        raise ValidationError("reference graph has no edges")
    ref = scaled_graph(ref, scale)
    lam = ref.eigenvalues
    signals = pipe.test_signals()
    rows = []
    for f in fractions:
        S_f = scaled_graph(graph_for(f), scale)
        E = S_f.matrix - ref.matrix
        eps = operator_norm(E)
        measured = gnn_distance(model, ref, S_f, signals)
        if eps == 0.0:
            bound = 0.0
        else:
            delta = misalignment_from_bases(E, ref.eigenvectors).delta
            lo = min(0.0, lam[0], S_f.eigenvalues[0])
            hi = max(lam[-1], S_f.eigenvalues[-1])
            C = max(lipschitz_constant(h, (lo, hi)) for h in model.filters())
            Delta = delta_for_model("absolute", C, delta, ref.n)
            bound = bound_gnn(Delta, model.L, model.widths[-1], eps, model.widths[0], model.widths[-1])
        rows.append(EstimationRow(f, measured, bound, eps / operator_norm(ref.matrix)))
    return rows


def demo_graph(n: int, seed: int) -> GraphShiftOperator:
    """Laplacian D - A of a random weighted graph, scaled to unit norm.

    Edges appear with probability 0.2 on top of a ring that keeps the
    graph connected. The spectrum lies in [0, 1] and the top eigenvector
    oscillates in sign, as a high-frequency mode should.
    """
    if n < 2:
        raise ValidationError("demo graph needs at least 2 nodes")
    rng = np.random.default_rng(seed)
    A = np.triu((rng.random((n, n)) < 0.2) * rng.random((n, n)), 1)
    ring = np.arange(n - 1)
    A[ring, ring + 1] = np.maximum(A[ring, ring + 1], 0.5)
    A = A + A.T
    L = np.diag(A.sum(axis=1)) - A
    return GraphShiftOperator(L / operator_norm(L))


def bump(center: float, width: float):
    """Gaussian frequency response exp(-((lam - center) / width)^2 / 2)."""
    return lambda lam: np.exp(-0.5 * ((np.asarray(lam, dtype=np.float64) - center) / width) ** 2)


def sharp_filter_pair(eigenvalues):
    """Responses for the dilation scenario.

    ``lipschitz`` is a narrow pass band at the largest eigenvalue.
    ``integral-lipschitz`` passes low frequencies and is flat at high ones.
    Its width scales with |lambda|, so |lam h'(lam)| stays bounded.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    top = float(lam[-1])
    width = 0.02 * abs(top)
    return {
        "lipschitz": bump(top, width),
        "integral-lipschitz": lambda x: 1.0 / (1.0 + (np.asarray(x, dtype=np.float64) / (0.1 * abs(top))) ** 2),
    }


def dilation_responses(response, eigenvalues, eps: float):
    """(h(lam_i), h((1 + eps) lam_i)) at every eigenvalue."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    return response(lam), response((1.0 + eps) * lam)


def dilation_distance(response, eigenvalues, eps: float) -> float:
    """||H(S) - H((1 + eps) S)|| = max_i |h(lam_i) - h((1 + eps) lam_i)| for a spectral filter."""
    before, after = dilation_responses(response, eigenvalues, eps)
    return float(np.max(np.abs(before - after)))


def polynomial_response(taps):
    return lambda lam: eval_response(taps, lam)

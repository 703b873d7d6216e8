"""Stability bounds for graph filters and GNNs, and the measured distances they cap.

Bounds keep only first-order terms in the perturbation size. The quadratic
remainder is checked separately through ``first_order_residual``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import ValidationError
from .filters import filter_matrix
from .gnn import GnnModel, hidden_output
from .graph import GraphShiftOperator, Permutation, as_gso, gso_matrix
from .linalg import operator_norm, sym_eig
from .perturbation import (
    absolute_perturb,
    dilate,
    misalignment_from_bases,
    random_diagonal_error,
    random_symmetric_error,
    relative_perturb,
)
from .spectral import integral_lipschitz_constant, lipschitz_constant, taps_of

MATCHINGS = ("identity", "eigen-greedy")
SWEEP_MODELS = ("absolute", "relative", "structural", "dilation")
TINY = 1e-15
DEFAULT_SIGNALS = 16

CSV_COLUMNS = (
    "eps",
    "measured_filter_dist",
    "measured_gnn_dist",
    "bound_filter",
    "bound_gnn",
    "C",
    "delta",
    "N",
    "L",
    "F",
    "model",
    "arch",
    "seed",
)


@dataclass(frozen=True)
class StabilityReport:
    """One sweep row. ``eps`` is the measured ||E||; ``nominal_eps`` the grid value."""

    eps: float
    nominal_eps: float
    measured_distance: float
    bound: float
    measured_filter_distance: float
    bound_filter: float
    model: str
    arch: str
    C: float
    delta: float
    N: int
    L: int
    F: int
    seed: int

    @property
    def looseness_ratio(self) -> float:
        return self.bound / max(self.measured_distance, TINY)

    @property
    def filter_looseness_ratio(self) -> float:
        return self.bound_filter / max(self.measured_filter_distance, TINY)

    def csv_row(self) -> dict:
        return {
            "eps": self.nominal_eps,
            "measured_filter_dist": self.measured_filter_distance,
            "measured_gnn_dist": self.measured_distance,
            "bound_filter": self.bound_filter,
            "bound_gnn": self.bound,
            "C": self.C,
            "delta": self.delta,
            "N": self.N,
            "L": self.L,
            "F": self.F,
            "model": self.model,
            "arch": self.arch,
            "seed": self.seed,
        }

    def as_dict(self) -> dict:
        return asdict(self)


def _same_size(A: np.ndarray, B: np.ndarray):
    if A.shape != B.shape:
        raise ValidationError(f"graphs have different sizes {A.shape} and {B.shape}")


def greedy_matching(S, S_hat) -> Permutation:
    """Pair nodes by rank of |leading eigenvector| entry (largest |eigenvalue| mode)."""
    A, B = gso_matrix(S), gso_matrix(S_hat)
    _same_size(A, B)

    def leading(M):
        lam, V = sym_eig(M)
        return np.abs(V[:, int(np.argmax(np.abs(lam)))])

    order_s = np.argsort(-leading(A), kind="stable")
    order_h = np.argsort(-leading(B), kind="stable")
    mapping = np.empty(A.shape[0], dtype=np.intp)
    mapping[order_s] = order_h
    return Permutation(mapping)


def filter_distance(h, S, S_hat, matching: str = "identity") -> float:
    """||H(S) - P^T H(S_hat) P||.

    With ``eigen-greedy`` the smaller of the identity and greedy-matched
    distances is returned; both are upper bounds on the minimum over all
    permutations.
    """
    if matching not in MATCHINGS:
        raise ValidationError(f"unknown matching {matching!r}; expected one of {MATCHINGS}")
    A, B = gso_matrix(S), gso_matrix(S_hat)
    _same_size(A, B)
    H, H_hat = filter_matrix(h, A), filter_matrix(h, B)
    d = operator_norm(H - H_hat)
    if matching == "eigen-greedy":
        m = greedy_matching(A, B).mapping
        d = min(d, operator_norm(H - H_hat[np.ix_(m, m)]))
    return d


def _check_signals(signals, n) -> np.ndarray:
    X = np.asarray(signals, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[0] == 0:
        raise ValidationError("signal set is empty")
    if X.shape[1] != n:
        raise ValidationError(f"signals of length {X.shape[1]} do not fit a {n}-node graph")
    norms = np.linalg.norm(X.reshape(X.shape[0], -1), axis=1)
    if np.any(norms == 0):
        raise ValidationError("signals must have nonzero norm")
    return X


def gnn_distance(model: GnnModel, S, S_hat, signals) -> float:
    """max over signals of ||Phi(S, x) - Phi(S_hat, x)||_F / ||x||.

    This samples the supremum over unit inputs, so it is a lower bound on
    the operator distance between the two GNNs.
    """
    A, B = gso_matrix(S), gso_matrix(S_hat)
    _same_size(A, B)
    X = _check_signals(signals, A.shape[0])
    best = 0.0
    for x in X:
        diff = hidden_output(model, A, x) - hidden_output(model, B, x)
        best = max(best, float(np.linalg.norm(diff) / np.linalg.norm(x)))
    return best


def bound_absolute(C, delta, N, eps) -> float:
    return C * (1.0 + delta * np.sqrt(N)) * eps


def bound_relative(C, delta, N, eps) -> float:
    return 2.0 * C * (1.0 + delta * np.sqrt(N)) * eps


def bound_structural(C, eps) -> float:
    return 2.0 * C * eps


def bound_gnn(Delta, L, F, eps, f_in: int = 1, f_out: int = 1) -> float:
    """Delta L F^(L-1) eps, scaled by sqrt(f_in f_out) for multi-feature input or output.

    The defaults give the single-feature form. The Frobenius norm of an
    f_out-feature output picks up sqrt(f_out); summing f_in input norms
    picks up at most sqrt(f_in).
    """
    return float(np.sqrt(f_in * f_out) * Delta * L * float(F) ** (L - 1) * eps)


def delta_for_model(model: str, C, delta, N) -> float:
    """Per-filter stability constant for each perturbation model."""
    if model == "absolute":
        return C * (1.0 + delta * np.sqrt(N))
    if model == "relative":
        return 2.0 * C * (1.0 + delta * np.sqrt(N))
    if model in ("structural", "relative-structural", "dilation"):
        return 2.0 * C
    raise ValidationError(f"unknown perturbation model {model!r}")


def first_order_term(h, S, E, model: str = "absolute") -> np.ndarray:
    """sum_k h_k sum_r S^r E' S^(k-1-r) with E' = E (absolute) or E S + S E (relative)."""
    A = gso_matrix(S)
    E = np.asarray(E, dtype=np.float64)
    _same_size(A, E)
    if model == "absolute":
        Ep = E
    elif model in ("relative", "structural"):
        Ep = E @ A + A @ E
    else:
        raise ValidationError(f"unknown perturbation model {model!r}")
    c = taps_of(h)
    K = c.size
    n = A.shape[0]
    powers = [np.eye(n)]
    for _ in range(1, K):
        powers.append(A @ powers[-1])
    T = np.zeros((n, n))
    for k in range(1, K):
        if c[k] == 0:
            continue
        acc = np.zeros((n, n))
        for r in range(k):
            acc += powers[r] @ Ep @ powers[k - 1 - r]
        T += c[k] * acc
    return T


def first_order_residual(h, S, E, model: str = "absolute") -> float:
    """||H(S_hat) - H(S) - T1(E)||, which shrinks quadratically in ||E||."""
    A = gso_matrix(S)
    E = np.asarray(E, dtype=np.float64)
    _same_size(A, E)
    if model == "absolute":
        S_hat = absolute_perturb(A, E)
    elif model in ("relative", "structural"):
        S_hat = relative_perturb(A, E)
    else:
        raise ValidationError(f"unknown perturbation model {model!r}")
    R = filter_matrix(h, S_hat) - filter_matrix(h, A) - first_order_term(h, A, E, model)
    return operator_norm(R)


def draw_perturbation(S: GraphShiftOperator, model: str, eps: float, seed: int):
    """Returns ``(S_hat, E)`` for one sweep point; E is in the model's own form."""
    n = S.n
    if model == "dilation":
        return dilate(S, eps), 0.5 * eps * np.eye(n)
    if eps == 0:
        return S, np.zeros((n, n))
    if model == "absolute":
        E = random_symmetric_error(S, eps, seed)
        return absolute_perturb(S, E), E
    if model in ("relative", "structural"):
        E = random_diagonal_error(n, eps, seed)
        return relative_perturb(S, E), E
    raise ValidationError(f"unknown sweep model {model!r}; expected one of {SWEEP_MODELS}")


def _bank_distance(bank_taps: np.ndarray, A: np.ndarray, B: np.ndarray) -> float:
    """max over the bank's filters of ||H(A) - H(B)||."""
    K = bank_taps.shape[-1]
    n = A.shape[0]
    diffs = np.empty((K, n, n))
    PA, PB = np.eye(n), np.eye(n)
    diffs[0] = 0.0
    for k in range(1, K):
        PA, PB = A @ PA, B @ PB
        diffs[k] = PA - PB
    flat = bank_taps.reshape(-1, K)
    return max(operator_norm(np.tensordot(c, diffs, axes=1)) for c in flat)


# separate seed streams for the probe signals and the per-eps perturbations
_SIGNAL_STREAM, _PERTURB_STREAM = 0, 1


def _derived_seed(seed: int, *path: int) -> int:
    return int(np.random.SeedSequence([int(seed), *path]).generate_state(1)[0])


def sweep(S, model: str, eps_list, architectures: dict, seed: int = 0, signals=None):
    """Measured distances and bounds along ``eps_list`` for every architecture.

    ``architectures`` maps a name to a GnnModel. One perturbation is drawn
    per eps, from a seed derived from ``seed`` and the grid index, and shared by all
    architectures. The same graph is reused after perturbing; nothing is
    re-estimated. C is the Lipschitz constant (absolute model) or the
    integral-Lipschitz constant (other models), maximized over every filter
    and taken on an interval covering both spectra. Signals default to
    seeded standard-normal draws.
    """
    if model not in SWEEP_MODELS:
        raise ValidationError(f"unknown sweep model {model!r}; expected one of {SWEEP_MODELS}")
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ValidationError("eps_list must be nonempty")
    if any(b < a for a, b in zip(eps_list, eps_list[1:])):
        raise ValidationError("eps_list must be ascending")
    if not architectures:
        raise ValidationError("need at least one architecture")
    S = as_gso(S)
    n = S.n
    if signals is None:
        signals = np.random.default_rng(_derived_seed(seed, _SIGNAL_STREAM)).standard_normal((DEFAULT_SIGNALS, n))
    signals = _check_signals(signals, n)
    lam = S.eigenvalues
    V = S.eigenvectors

    rows = []
    for idx, eps in enumerate(eps_list):
        S_hat, E = draw_perturbation(S, model, eps, _derived_seed(seed, _PERTURB_STREAM, idx))
        e_norm = operator_norm(E) if np.any(E) else 0.0
        if model == "dilation" or e_norm == 0.0:
            delta = 0.0
        else:
            delta = misalignment_from_bases(E, V).delta
        lam_hat = S_hat.eigenvalues
        interval = (min(0.0, lam[0], lam_hat[0]), max(lam[-1], lam_hat[-1]))
        for name, net in architectures.items():
            constant = lipschitz_constant if model == "absolute" else integral_lipschitz_constant
            C = max(constant(h, interval) for h in net.filters())
            Delta = delta_for_model(model, C, delta, n)
            d_filter = max(_bank_distance(b.taps, S.matrix, S_hat.matrix) for b in net.layers)
            d_gnn = gnn_distance(net, S, S_hat, signals)
            F = net.widths[1] if net.L > 1 else net.widths[-1]
            rows.append(
                StabilityReport(
                    eps=e_norm,
                    nominal_eps=eps,
                    measured_distance=d_gnn,
                    bound=bound_gnn(Delta, net.L, F, e_norm, f_in=net.widths[0], f_out=net.widths[-1]),
                    measured_filter_distance=d_filter,
                    bound_filter=Delta * e_norm,
                    model=model,
                    arch=name,
                    C=C,
                    delta=delta,
                    N=n,
                    L=net.L,
                    F=F,
                    seed=int(seed),
                )
            )
    return rows

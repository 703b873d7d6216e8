"""Graph perturbation models and the quantities that characterize them.

Three models are supported:

* absolute:  S_hat = S + E
* relative:  S_hat = S + E S + S E
* dilation:  S_hat = (1 + eps) S, the relative model with E = (eps/2) I
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError
from .graph import GraphShiftOperator, as_gso
from .linalg import check_symmetric, operator_norm, sym_eig

MODELS = ("absolute", "relative", "dilation")

# E is treated as c * I when its deviation from the mean diagonal is below this (relative)
SCALAR_RTOL = 1e-12


@dataclass(frozen=True)
class PerturbationSpec:
    """One perturbation draw. ``E`` is None for dilation, which uses ``factor``."""

    model: str
    E: np.ndarray | None = None
    factor: float | None = None
    nominal_eps: float = 0.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValidationError(f"unknown perturbation model {self.model!r}")
        if self.nominal_eps < 0:
            raise ValidationError("nominal_eps must be nonnegative")
        if self.model == "dilation":
            if self.factor is None:
                raise ValidationError("dilation needs a factor")
        elif self.E is None:
            raise ValidationError(f"{self.model} perturbation needs an error matrix")
        else:
            object.__setattr__(self, "E", check_symmetric(self.E, name="E"))

    def error_matrix(self, n: int) -> np.ndarray:
        """E in the model's own parametrization (dilation maps to (eps/2) I)."""
        if self.model == "dilation":
            return 0.5 * self.factor * np.eye(n)
        return self.E

    def error_norm(self, n: int) -> float:
        """||E||, always recomputed from the matrix."""
        return operator_norm(self.error_matrix(n))

    def apply(self, S) -> GraphShiftOperator:
        if self.model == "absolute":
            return absolute_perturb(S, self.E)
        if self.model == "relative":
            return relative_perturb(S, self.E)
        return dilate(S, self.factor)


@dataclass(frozen=True)
class MisalignmentReport:
    delta: float
    U_minus_V_norm: float


def _same_size(S: GraphShiftOperator, E: np.ndarray):
    if E.shape != S.matrix.shape:
        raise ValidationError(f"error matrix {E.shape} does not match graph {S.matrix.shape}")


def absolute_perturb(S, E) -> GraphShiftOperator:
    S = as_gso(S)
    E = check_symmetric(E, name="E")
    _same_size(S, E)
    return GraphShiftOperator(S.matrix + E, kind=S.kind)


def relative_perturb(S, E) -> GraphShiftOperator:
    S = as_gso(S)
    E = check_symmetric(E, name="E")
    _same_size(S, E)
    A = S.matrix
    ES = E @ A
    # E S + S E == E S + (E S)^T for symmetric E and S; keeps the sum exactly symmetric
    return GraphShiftOperator(A + (ES + ES.T), kind=S.kind)


def dilate(S, eps: float) -> GraphShiftOperator:
    """(1 + eps) S.

    Computed as S + 2 (eps/2) S, which is bit-identical to
    ``relative_perturb(S, (eps/2) I)``.
    """
    if not eps > -1:
        raise ValidationError(f"dilation factor eps={eps} must exceed -1")
    S = as_gso(S)
    half = 0.5 * eps
    ES = half * S.matrix
    return GraphShiftOperator(S.matrix + (ES + ES.T), kind=S.kind)


def random_diagonal_error(n: int, eps: float, seed: int) -> np.ndarray:
    """Diagonal E with entries i.i.d. uniform on [(1 - eps) eps, eps]."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    if not 0 < eps <= 1:
        raise ValidationError(f"eps={eps} must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    return np.diag(rng.uniform((1.0 - eps) * eps, eps, size=n))


def random_symmetric_error(S, eps: float, seed: int) -> np.ndarray:
    """Symmetric E supported on the edges and diagonal of ``S`` with ||E|| = eps.

    Used to draw absolute perturbations that respect the graph's sparsity.
    """
    S = as_gso(S)
    if eps < 0:
        raise ValidationError("eps must be nonnegative")
    n = S.n
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, n))
    G = np.triu(G)
    G = G + np.triu(G, 1).T
    support = (S.matrix != 0) | np.eye(n, dtype=bool)
    G = np.where(support, G, 0.0)
    if eps == 0:
        return np.zeros((n, n))
    return G * (eps / operator_norm(G))


def structural_gap(E) -> float:
    """min(|| E/||E|| - I ||, || E/||E|| + I ||)."""
    E = check_symmetric(E, name="E")
    norm = operator_norm(E)
    if norm == 0.0:
        raise ValidationError("structural gap is undefined for E = 0")
    D = E / norm
    eye = np.eye(E.shape[0])
    return min(operator_norm(D - eye), operator_norm(D + eye))


def _is_scalar_identity(E: np.ndarray) -> bool:
    c = np.trace(E) / E.shape[0]
    scale = max(float(np.max(np.abs(E))), np.finfo(float).tiny)
    return float(np.max(np.abs(E - c * np.eye(E.shape[0])))) <= SCALAR_RTOL * scale


def aligned_error_basis(E, V) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues m and eigenvectors U of E, aligned column-by-column with V.

    Columns follow E's ascending eigenvalues; each u_i is flipped if that
    brings it closer to v_i. When E is a multiple of the identity every
    orthonormal basis is an eigenbasis, and U := V.
    """
    E = check_symmetric(E, name="E")
    V = np.asarray(V, dtype=np.float64)
    if V.shape != E.shape:
        raise ValidationError(f"basis {V.shape} does not match error matrix {E.shape}")
    if _is_scalar_identity(E):
        c = np.trace(E) / E.shape[0]
        return np.full(E.shape[0], c), V.copy()
    m, U = sym_eig(E)
    flips = np.where(np.einsum("ij,ij->j", U, V) < 0, -1.0, 1.0)
    return m, U * flips


def misalignment_from_bases(E, V) -> MisalignmentReport:
    _, U = aligned_error_basis(E, V)
    # ||U - V|| <= ||U|| + ||V|| = 2; clip rounding above the bound
    dist = min(operator_norm(U - V), 2.0)
    return MisalignmentReport(delta=(dist + 1.0) ** 2 - 1.0, U_minus_V_norm=dist)


def eigenvector_misalignment(S, E) -> MisalignmentReport:
    """delta = (||U - V|| + 1)^2 - 1 between the eigenbases of S and E."""
    S = as_gso(S)
    E = check_symmetric(E, name="E")
    _same_size(S, E)
    return misalignment_from_bases(E, S.eigenvectors)


def lemma1_decompose(E, V) -> tuple[np.ndarray, np.ndarray]:
    """Split E = E_V + E_U with E_V = V M V^T sharing V's eigenvectors.

    M holds E's eigenvalues in the aligned order, so ``||E_U|| <= ||E|| delta``.
    """
    m, _ = aligned_error_basis(E, V)
    V = np.asarray(V, dtype=np.float64)
    E_V = (V * m) @ V.T
    E_U = np.asarray(E, dtype=np.float64) - E_V
    return E_V, E_U

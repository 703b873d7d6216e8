"""Dense real linear algebra used by the rest of the package.

Matrices are plain ``float64`` numpy arrays. The eigensolver is a cyclic
Jacobi method run in round-robin (tournament) order so that each round
applies N/2 disjoint plane rotations at once.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .exceptions import ConvergenceError, ValidationError

SYMMETRY_RTOL = 1e-12
JACOBI_OFF_RTOL = 1e-12
JACOBI_MAX_SWEEPS = 100
POWER_RTOL = 1e-10
POWER_MAX_ITER = 10_000
POWER_SEED = 20_190_924
POWER_SQUARE_EVERY = 50
POWER_MAX_SQUARINGS = 40


class EigenSystem(NamedTuple):
    """Ascending eigenvalues and matching orthonormal eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray


def as_matrix(A, name="matrix") -> np.ndarray:
    """Return ``A`` as a finite 2-D float64 array, or raise."""
    M = np.asarray(A, dtype=np.float64)
    if M.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(M))[0])
        raise ValidationError(f"{name} has a non-finite entry at {bad}")
    return M


def as_vector(x, name="vector") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValidationError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} has non-finite entries")
    return v


def check_symmetric(S, rtol=SYMMETRY_RTOL, name="matrix") -> np.ndarray:
    """Validate that ``S`` is square and symmetric to ``rtol`` of its largest entry."""
    S = as_matrix(S, name)
    n, m = S.shape
    if n != m:
        raise ValidationError(f"{name} must be square, got shape {S.shape}")
    scale = max(1.0, float(np.max(np.abs(S)))) if S.size else 1.0
    gap = np.abs(S - S.T)
    if gap.size and gap.max() > rtol * scale:
        i, j = np.unravel_index(int(np.argmax(gap)), gap.shape)
        raise ValidationError(
            f"{name} is not symmetric: entries ({i},{j})={float(S[i, j])!r} and "
            f"({j},{i})={float(S[j, i])!r} differ"
        )
    return S


def matmul(A, B) -> np.ndarray:
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape[1] != B.shape[0]:
        raise ValidationError(f"cannot multiply {A.shape} by {B.shape}")
    return A @ B


def matvec(A, x) -> np.ndarray:
    A = as_matrix(A, "A")
    x = as_vector(x, "x")
    if A.shape[1] != x.shape[0]:
        raise ValidationError(f"cannot multiply {A.shape} by vector of length {x.shape[0]}")
    return A @ x


def transpose(A) -> np.ndarray:
    return as_matrix(A, "A").T.copy()


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings for one cyclic sweep: every (p, q) with p < q appears once.

    Uses the circle method; with odd ``n`` one player sits out each round.
    """
    m = n if n % 2 == 0 else n + 1
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        ps, qs = [], []
        for k in range(m // 2):
            a, b = players[k], players[m - 1 - k]
            if a < n and b < n:
                ps.append(min(a, b))
                qs.append(max(a, b))
        rounds.append((np.array(ps, dtype=np.intp), np.array(qs, dtype=np.intp)))
        players = [players[0], players[-1], *players[1:-1]]
    return rounds


def _sign_convention(V: np.ndarray) -> np.ndarray:
    # largest-magnitude entry positive; argmax already breaks ties by lowest index
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def sym_eig(S) -> EigenSystem:
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm drops below
    ``1e-12 * ||S||_F``. Eigenvalues come back ascending; each eigenvector
    column is scaled so its largest-magnitude entry is positive.
    """
    S = check_symmetric(S, name="S")
    n = S.shape[0]
    if n == 0:
        return EigenSystem(np.zeros(0), np.zeros((0, 0)))
    A = 0.5 * (S + S.T)
    V = np.eye(n)
    fro = np.linalg.norm(A)
    threshold = JACOBI_OFF_RTOL * fro
    rounds = _round_robin(n)

    def off_norm(M):
        return float(np.linalg.norm(M - np.diag(np.diag(M))))

    sweeps = 0
    while off_norm(A) > threshold:
        if sweeps >= JACOBI_MAX_SWEEPS:
            raise ConvergenceError(
                f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps",
                estimate=EigenSystem(np.diag(A).copy(), V),
                iterations=sweeps,
            )
        for p, q in rounds:
            apq = A[p, q]
            app = A[p, p]
            aqq = A[q, q]
            active = apq != 0.0
            safe = np.where(active, apq, 1.0)
            with np.errstate(over="ignore"):
                theta = (aqq - app) / (2.0 * safe)
                t = np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0))
            t[theta == 0.0] = 1.0
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            Rp = A[p, :]
            Rq = A[q, :]
            A[p, :] = c[:, None] * Rp - s[:, None] * Rq
            A[q, :] = s[:, None] * Rp + c[:, None] * Rq
            Cp = A[:, p]
            Cq = A[:, q]
            A[:, p] = Cp * c - Cq * s
            A[:, q] = Cp * s + Cq * c
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp = V[:, p]
            Vq = V[:, q]
            V[:, p] = Vp * c - Vq * s
            V[:, q] = Vp * s + Vq * c
        sweeps += 1

    values = np.diag(A).copy()
    order = np.argsort(values, kind="stable")
    return EigenSystem(values[order], _sign_convention(V[:, order]))


def operator_norm(A, rtol=POWER_RTOL, max_iter=POWER_MAX_ITER, seed=POWER_SEED) -> float:
    """Largest singular value of ``A`` by power iteration on ``A^T A``.

    The start vector comes from a fixed-seed generator, so results are
    deterministic. The estimate is the Rayleigh quotient ``||A v||^2``.
    Iteration stops when the extrapolated remaining change of the estimate
    (geometric tail from the last two increments) is below ``rtol``
    relative. Every ``POWER_SQUARE_EVERY`` iterations without convergence
    the iteration operator is squared, which widens the gap between
    clustered top singular values.
    """
    A = as_matrix(A, "A")
    if A.size == 0 or not np.any(A):
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    B = None
    squarings = 0
    mu = 0.0
    prev_step = None
    for it in range(1, max_iter + 1):
        w = A.T @ (A @ v) if B is None else B @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return float(np.sqrt(mu))
        v = w / nw
        Av = A @ v
        mu_new = float(Av @ Av)
        step = abs(mu_new - mu)
        mu = mu_new
        if it > 1:
            tail = step
            if prev_step is not None and prev_step > 0.0 and step < prev_step:
                q = step / prev_step
                tail = step * q / (1.0 - q)
            if step <= rtol * mu and tail <= rtol * mu:
                return float(np.sqrt(mu))
        prev_step = step
        if it % POWER_SQUARE_EVERY == 0 and squarings < POWER_MAX_SQUARINGS:
            if B is None:
                B = A.T @ A
            B = B @ B
            B /= np.max(np.abs(B))
            squarings += 1
            prev_step = None
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations",
        estimate=float(np.sqrt(mu)),
        iterations=max_iter,
    )

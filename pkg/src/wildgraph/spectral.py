"""Spectral embeddings: dense eigendecomposition and low-rank factorization.

The eigensolver is a cyclic Jacobi sweep with a fixed traversal order, so
repeated runs on the same matrix are bitwise identical.  Eigenvalues are
returned in descending order with a deterministic sign convention (each
eigenvector's largest-magnitude entry is positive, ties resolved at the
lowest index); exactly equal eigenvalues are ordered by comparing the
sign-fixed vectors lexicographically.

The factorizer minimizes the squared Frobenius residual between the
normalized adjacency and F F^t by plain gradient descent with a halving
line search.  Its optimum is the sum of squared trailing eigenvalues, which
the embedding side computes independently; the two routes cross-check each
other through :func:`reconstruction_gap`.

Intended for desk-scale matrices (hundreds of vertices).  The Jacobi sweep
is O(n^3) per pass and is chosen for determinism and portability, not
throughput.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .graph import GraphBundle

__all__ = [
    "SpectralEmbedding",
    "FactorizerOptions",
    "FactorizationState",
    "ReconstructionGap",
    "SpectralError",
    "AsymmetricMatrixError",
    "FactorizationError",
    "eigendecompose",
    "closed_form_embedding",
    "embed",
    "lowrank_factorize",
    "reconstruction_gap",
    "write_trace_csv",
]

OFFDIAG_TOLERANCE = 1e-12
ASYMMETRY_TOLERANCE = 1e-10


class SpectralError(ValueError):
    pass


class AsymmetricMatrixError(SpectralError):
    pass


class FactorizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralEmbedding:
    """Top-k eigenpairs plus the degree-scaled feature rows.

    ``eigenvalues`` holds the full descending spectrum, ``V_k`` the leading
    orthonormal eigenvectors, and ``Sigma_k`` the leading eigenvalues
    clamped at zero so their square roots exist.  ``Z`` stays ``None`` until
    :func:`closed_form_embedding` supplies the degrees.
    """

    eigenvalues: np.ndarray
    V_k: np.ndarray
    Sigma_k: np.ndarray
    k: int
    Z: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        for name in ("eigenvalues", "V_k", "Sigma_k", "Z"):
            arr = getattr(self, name)
            if arr is not None:
                arr.setflags(write=False)

    def trailing_power(self) -> float:
        """Sum of squared eigenvalues beyond the leading k (the factorization optimum)."""
        return float(np.sum(self.eigenvalues[self.k :] ** 2))


def _jacobi(matrix: np.ndarray, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    w = matrix.copy()
    n = w.shape[0]
    v = np.eye(n)
    scale = float(np.linalg.norm(w))
    if scale == 0.0:
        return np.zeros(n), v
    threshold = OFFDIAG_TOLERANCE * scale
    huge = 1.0 / np.finfo(float).eps

    def offdiag_norm() -> float:
        off = w.copy()
        np.fill_diagonal(off, 0.0)
        return float(np.linalg.norm(off))

    for sweep in range(max_sweeps + 1):
        if offdiag_norm() <= threshold:
            break
        if sweep == max_sweeps:
            raise SpectralError(f"Jacobi sweep did not converge in {max_sweeps} sweeps")
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = w[p, q]
                if apq == 0.0:
                    continue
                theta = 0.5 * (w[q, q] - w[p, p]) / apq
                if abs(theta) > huge:
                    t = 0.5 / theta
                elif theta >= 0.0:
                    t = 1.0 / (theta + np.hypot(1.0, theta))
                else:
                    t = -1.0 / (-theta + np.hypot(1.0, theta))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                col_p, col_q = w[:, p].copy(), w[:, q].copy()
                w[:, p] = c * col_p - s * col_q
                w[:, q] = s * col_p + c * col_q
                row_p, row_q = w[p, :].copy(), w[q, :].copy()
                w[p, :] = c * row_p - s * row_q
                w[q, :] = s * row_p + c * row_q
                w[p, q] = 0.0
                w[q, p] = 0.0
                vec_p, vec_q = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    return np.diag(w).copy(), v


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    pivot = int(np.argmax(np.abs(vec)))
    return -vec if vec[pivot] < 0 else vec


def eigendecompose(A_tilde: np.ndarray, k: int) -> SpectralEmbedding:
    """Full symmetric eigendecomposition, keeping the top-k pairs.

    Rejects matrices whose asymmetry exceeds ``ASYMMETRY_TOLERANCE`` and
    then works on the symmetrized copy.  Output ordering and signs follow
    the deterministic convention in the module docstring.
    """
    m = np.asarray(A_tilde, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise SpectralError(f"expected a square matrix, got shape {m.shape}")
    n = m.shape[0]
    if not 1 <= k <= n:
        raise SpectralError(f"k must satisfy 1 <= k <= {n}, got {k}")
    if np.max(np.abs(m - m.T), initial=0.0) > ASYMMETRY_TOLERANCE:
        raise AsymmetricMatrixError("input matrix is not symmetric")
    lam, v = _jacobi(0.5 * (m + m.T))
    cols = [_fix_sign(v[:, i]) for i in range(n)]
    order = sorted(range(n), key=lambda i: (-lam[i], tuple(cols[i])))
    eigenvalues = np.array([lam[i] for i in order])
    vectors = np.column_stack([cols[i] for i in order])
    return SpectralEmbedding(
        eigenvalues=eigenvalues,
        V_k=vectors[:, :k].copy(),
        Sigma_k=np.clip(eigenvalues[:k], 0.0, None),
        k=k,
    )


def closed_form_embedding(bundle: GraphBundle, embedding: SpectralEmbedding) -> np.ndarray:
    """Feature rows Z with Z[x, :] = V_k[x, :] * sqrt(Sigma_k) / sqrt(D[x]).

    Negative leading eigenvalues were already clamped in ``Sigma_k``; a
    warning flags when clamping actually discarded signal.
    """
    if bundle.D.shape[0] != embedding.V_k.shape[0]:
        raise SpectralError(
            f"bundle has {bundle.D.shape[0]} vertices but embedding has "
            f"{embedding.V_k.shape[0]} rows"
        )
    clipped = embedding.eigenvalues[: embedding.k]
    if np.any(clipped < 0):
        warnings.warn(
            "negative leading eigenvalues clamped to zero before the square root",
            RuntimeWarning,
            stacklevel=2,
        )
    return embedding.V_k * np.sqrt(embedding.Sigma_k) / np.sqrt(bundle.D)[:, None]


def embed(bundle: GraphBundle, k: int) -> SpectralEmbedding:
    """Eigendecompose the bundle's normalized adjacency and attach Z."""
    embedding = eigendecompose(bundle.A_tilde, k)
    z = closed_form_embedding(bundle, embedding)
    return replace(embedding, Z=z)


@dataclass(frozen=True)
class FactorizerOptions:
    step: float = 0.5
    max_iters: int = 10000
    tol: float = 1e-14
    seed: int = 0


@dataclass(frozen=True)
class FactorizationState:
    F: np.ndarray
    loss_trace: tuple[tuple[int, float], ...]
    converged: bool

    def __post_init__(self) -> None:
        self.F.setflags(write=False)

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1][1]

    @property
    def iterations(self) -> int:
        return self.loss_trace[-1][0]


def _residual_loss(F: np.ndarray, target: np.ndarray) -> float:
    # overflow propagates to inf and is reported as FactorizationError
    with np.errstate(over="ignore", invalid="ignore"):
        r = F @ F.T - target
        return float(np.sum(r * r))


def lowrank_factorize(
    A_tilde: np.ndarray, k: int, opts: FactorizerOptions = FactorizerOptions()
) -> FactorizationState:
    """Gradient descent on ||A_tilde - F F^t||_F^2.

    The gradient is 4 (F F^t - A_tilde) F.  Each iteration restarts the line
    search at ``opts.step`` and halves until the loss strictly decreases, so
    the recorded trace is strictly decreasing after the first accepted step.
    Stops when the relative loss decrease falls below ``opts.tol``, when no
    decreasing step exists (numerical optimum), or at ``opts.max_iters``.
    Only the first two count as converged.
    """
    m = np.asarray(A_tilde, dtype=float)
    if np.max(np.abs(m - m.T), initial=0.0) > ASYMMETRY_TOLERANCE:
        raise AsymmetricMatrixError("input matrix is not symmetric")
    n = m.shape[0]
    rng = np.random.default_rng(opts.seed)
    F = rng.standard_normal((n, k)) / np.sqrt(n * k)
    loss = _residual_loss(F, m)
    if not np.isfinite(loss):
        raise FactorizationError("non-finite loss at iteration 0")
    trace = [(0, loss)]
    converged = False
    for it in range(1, opts.max_iters + 1):
        grad = 4.0 * ((F @ F.T - m) @ F)
        eta = opts.step
        accepted = None
        for _ in range(80):
            candidate = F - eta * grad
            cand_loss = _residual_loss(candidate, m)
            if not np.isfinite(cand_loss):
                raise FactorizationError(f"non-finite loss at iteration {it}")
            if cand_loss < loss:
                accepted = (candidate, cand_loss)
                break
            eta *= 0.5
        if accepted is None:
            converged = True
            break
        F, new_loss = accepted
        relative_drop = (loss - new_loss) / max(loss, np.finfo(float).tiny)
        loss = new_loss
        trace.append((it, loss))
        if relative_drop < opts.tol:
            converged = True
            break
    return FactorizationState(F=F.copy(), loss_trace=tuple(trace), converged=converged)


@dataclass(frozen=True)
class ReconstructionGap:
    loss_gap: float
    subspace_gap: float
    degenerate: bool


def reconstruction_gap(
    state: FactorizationState, embedding: SpectralEmbedding, degeneracy_tol: float = 1e-8
) -> ReconstructionGap:
    """Distance of a factorization from the spectral optimum.

    ``loss_gap`` compares the final loss against the sum of squared trailing
    eigenvalues.  ``subspace_gap`` is the Frobenius distance between the
    orthogonal projectors onto the column spans of F and V_k; when the k-th
    and (k+1)-th eigenvalues coincide the optimal subspace is not unique, so
    the gap is still reported but flagged degenerate.
    """
    k = embedding.k
    if state.F.shape[1] != k:
        raise SpectralError(f"factorization rank {state.F.shape[1]} != embedding k {k}")
    loss_gap = state.final_loss - embedding.trailing_power()
    q, _ = np.linalg.qr(state.F)
    p_f = q @ q.T
    p_v = embedding.V_k @ embedding.V_k.T
    subspace_gap = float(np.linalg.norm(p_f - p_v))
    lam = embedding.eigenvalues
    degenerate = bool(k < lam.shape[0] and abs(lam[k - 1] - lam[k]) <= degeneracy_tol)
    return ReconstructionGap(loss_gap=float(loss_gap), subspace_gap=subspace_gap, degenerate=degenerate)


def write_trace_csv(path: Union[str, Path], state: FactorizationState, header: str = "") -> None:
    """Convergence trace as ``iter,loss`` rows in scientific notation."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write("iter,loss\n")
        for it, loss in state.loss_trace:
            fh.write(f"{it},{loss:.17e}\n")

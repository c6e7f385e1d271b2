"""Proximal subgradient solver for regularized metric learning.

Minimizes c*||M|| + mean hinge loss over the pair (or triplet) sample,
with M constrained to the PSD cone for distance metrics.  Each iteration
takes a subgradient step on the loss, applies the prox of the chosen norm,
then projects onto the PSD cone.  The best iterate by objective is kept and
the zero matrix is always a fallback, which guarantees the capacity bound
||M*|| <= g0/c used by the robustness constants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    Dataset,
    KernelSpec,
    LossSpec,
    MetricModel,
    PairSet,
    TripletSet,
    empirical_loss,
    empirical_triplet_loss,
    kernel_gram,
    metric_matrix,
)

REGULARIZERS = ("fro", "l1", "l21")


@dataclass(frozen=True)
class SolverConfig:
    c: float = 1.0
    max_iters: int = 300
    step0: float = 1.0
    tol: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.step0 <= 0:
            raise ValueError("step0 must be positive")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")


def reg_norm(M: np.ndarray, reg: str) -> float:
    if reg == "fro":
        return float(np.linalg.norm(M, "fro"))
    if reg == "l1":
        return float(np.abs(M).sum())
    if reg == "l21":
        return float(np.linalg.norm(M, axis=0).sum())
    raise ValueError(f"unknown regularizer {reg!r}")


def objective(
    m: MetricModel,
    ds: Dataset,
    ps: PairSet,
    ls: LossSpec,
    reg: str,
    c: float,
) -> float:
    """c*||M||_reg + empirical pair loss.

    For kernelized models the penalized norm is the feature-space Frobenius
    norm ||K^{1/2} A K^{1/2}||_F over the anchor Gram matrix K.
    """
    if m.kind == "kernelized":
        K = kernel_gram(m.kernel, m.anchors.X)
        S = _sym_sqrt(K)
        norm = float(np.linalg.norm(S @ m.A @ S, "fro"))
    else:
        norm = reg_norm(m.M, reg)
    return c * norm + empirical_loss(m, ds, ps, ls)


def psd_project(M: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the PSD cone: symmetrize, clip eigenvalues."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("M must be square")
    S = (M + M.T) / 2.0
    try:
        w, V = np.linalg.eigh(S)
    except np.linalg.LinAlgError as e:
        raise np.linalg.LinAlgError(f"eigendecomposition failed: {e}") from e
    w = np.maximum(w, 0.0)
    out = (V * w) @ V.T
    return (out + out.T) / 2.0


def prox(M: np.ndarray, tau: float, reg: str) -> np.ndarray:
    """Proximal operator of tau*||.||_reg at M."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    M = np.asarray(M, dtype=float)
    if tau == 0.0:
        return M.copy()
    if reg == "fro":
        nrm = np.linalg.norm(M, "fro")
        if nrm <= tau:
            return np.zeros_like(M)
        return M * (1.0 - tau / nrm)
    if reg == "l1":
        return np.sign(M) * np.maximum(np.abs(M) - tau, 0.0)
    if reg == "l21":
        nrm = np.linalg.norm(M, axis=0)
        scale = np.where(nrm > tau, 1.0 - tau / np.maximum(nrm, 1e-300), 0.0)
        return M * scale[None, :]
    raise ValueError(f"unknown regularizer {reg!r}")


def _pair_weights(F: np.ndarray, Y: np.ndarray) -> np.ndarray:
    # active pairs: hinge argument y*(1-f) strictly below the margin;
    # the kink itself contributes the 0-side subgradient
    active = Y * (1.0 - F) < 1.0
    return Y * active / F.shape[0] ** 2


def _laplacian_form(X: np.ndarray, W: np.ndarray) -> np.ndarray:
    # sum_ij W_ij (x_i - x_j)(x_i - x_j)^T
    r = W.sum(axis=1)
    c = W.sum(axis=0)
    return X.T @ (np.diag(r + c) - W - W.T) @ X


def loss_subgradient(m: MetricModel, ds: Dataset, ps: PairSet, ls: LossSpec) -> np.ndarray:
    """Subgradient of the mean hinge pair loss with respect to M."""
    li = ds.label_indices()
    Y = np.where(li[:, None] == li[None, :], 1.0, -1.0)
    F = metric_matrix(m, ds.X)
    W = _pair_weights(F, Y)
    if m.kind == "bilinear":
        return ds.X.T @ W @ ds.X
    return _laplacian_form(ds.X, W)


def _subgrad_pair(X: np.ndarray, Y: np.ndarray, M: np.ndarray, kind: str) -> np.ndarray:
    if kind == "bilinear":
        F = X @ M @ X.T
        return X.T @ _pair_weights(F, Y) @ X
    G = X @ M @ X.T
    q = np.diag(G)
    F = q[:, None] + q[None, :] - G - G.T
    return _laplacian_form(X, _pair_weights(F, Y))


def _pair_losses(X: np.ndarray, Y: np.ndarray, M: np.ndarray, kind: str) -> np.ndarray:
    if kind == "bilinear":
        F = X @ M @ X.T
    else:
        G = X @ M @ X.T
        q = np.diag(G)
        F = q[:, None] + q[None, :] - G - G.T
    return np.maximum(0.0, 1.0 - Y * (1.0 - F))


def _iterate(
    X: np.ndarray,
    loss_fn,
    grad_fn,
    reg: str,
    cfg: SolverConfig,
    psd: bool,
) -> tuple[np.ndarray, dict]:
    """Shared proximal subgradient loop; starts at M = 0."""
    d = X.shape[1]
    M = np.zeros((d, d))
    best = np.zeros((d, d))
    best_obj = cfg.c * 0.0 + loss_fn(M)
    history = [best_obj]
    prev_obj = best_obj
    for t in range(1, cfg.max_iters + 1):
        step = cfg.step0 / np.sqrt(t)
        M = M - step * grad_fn(M)
        M = prox(M, step * cfg.c, reg)
        if psd:
            M = psd_project(M)
        if not np.all(np.isfinite(M)):
            raise ArithmeticError(f"non-finite iterate at iteration {t}")
        obj = cfg.c * reg_norm(M, reg) + loss_fn(M)
        if obj < best_obj:
            best_obj = obj
            best = M.copy()
        history.append(best_obj)
        if cfg.tol > 0 and abs(obj - prev_obj) <= cfg.tol * max(1.0, abs(prev_obj)):
            break
        prev_obj = obj
    info = {
        "objective": best_obj,
        "best_history": history,
        "iterations": len(history) - 1,
    }
    return best, info


def solve(
    ds: Dataset,
    ps: PairSet,
    ls: LossSpec,
    reg: str,
    cfg: SolverConfig,
    kind: str = "mahalanobis",
) -> MetricModel:
    """Minimize the pair objective; returns the best iterate (or M = 0).

    The returned model always satisfies objective <= loss at the zero
    matrix <= g0, hence ||M*||_reg <= g0/c.
    """
    if reg not in REGULARIZERS:
        raise ValueError(f"unknown regularizer {reg!r}")
    if kind not in ("mahalanobis", "bilinear"):
        raise ValueError(f"solve handles mahalanobis/bilinear, got {kind!r}")
    X = ds.X
    li = ds.label_indices()
    Y = np.where(li[:, None] == li[None, :], 1.0, -1.0)
    loss_fn = lambda M: float(_pair_losses(X, Y, M, kind).mean())
    grad_fn = lambda M: _subgrad_pair(X, Y, M, kind)
    best, info = _iterate(X, loss_fn, grad_fn, reg, cfg, psd=(kind == "mahalanobis"))
    return MetricModel(kind=kind, M=best, regularizer=reg, info=info)


def solve_triplet(
    ds: Dataset,
    ts: TripletSet,
    reg: str,
    cfg: SolverConfig,
) -> MetricModel:
    """Triplet variant: mean hinge over admissible triplets, regs fro/l21."""
    if reg not in ("fro", "l21"):
        raise ValueError("triplet solver supports regularizers 'fro' and 'l21'")
    if not ts.triplets:
        raise ValueError("degenerate input: empty triplet set")
    X = ds.X
    t = np.asarray(ts.triplets)
    i, j, k = t[:, 0], t[:, 1], t[:, 2]
    nt = len(t)

    def f_pairs(M):
        G = X @ M @ X.T
        q = np.diag(G)
        F = q[:, None] + q[None, :] - G - G.T
        return 1.0 - F[i, k] + F[i, j]

    def loss_fn(M):
        return float(np.maximum(0.0, f_pairs(M)).mean())

    def grad_fn(M):
        active = f_pairs(M) > 0.0
        n = X.shape[0]
        Wp = np.zeros((n, n))
        Wn = np.zeros((n, n))
        np.add.at(Wp, (i[active], j[active]), 1.0 / nt)
        np.add.at(Wn, (i[active], k[active]), 1.0 / nt)
        return _laplacian_form(X, Wp) - _laplacian_form(X, Wn)

    best, info = _iterate(X, loss_fn, grad_fn, reg, cfg, psd=True)
    return MetricModel(kind="mahalanobis", M=best, regularizer=reg, info=info)


def _sym_sqrt(K: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh((K + K.T) / 2.0)
    return (V * np.sqrt(np.maximum(w, 0.0))) @ V.T


def solve_kernel(
    ds: Dataset,
    ps: PairSet,
    ls: LossSpec,
    ks: KernelSpec,
    cfg: SolverConfig,
) -> MetricModel:
    """Kernelized solve with feature-space Frobenius regularization.

    Works in coordinates psi_i = K^{1/2} e_i, which reproduce all pairwise
    kernel inner products, so the pair objective reduces to a plain
    Mahalanobis problem on the psi features.  The learned H is mapped back
    to the anchor parameterization A with f = (k_1 - k_2)^T A (k_1 - k_2).
    """
    K = kernel_gram(ks, ds.X)
    if not np.all(np.isfinite(K)):
        raise ValueError("kernel Gram matrix has non-finite entries")
    w = np.linalg.eigvalsh((K + K.T) / 2.0)
    if w.min() < -1e-8 * max(1.0, w.max()):
        raise ValueError(f"Gram matrix not PSD: min eigenvalue {w.min():.3g}")
    S = _sym_sqrt(K)
    li = ds.label_indices()
    Y = np.where(li[:, None] == li[None, :], 1.0, -1.0)
    loss_fn = lambda H: float(_pair_losses(S, Y, H, "mahalanobis").mean())
    grad_fn = lambda H: _subgrad_pair(S, Y, H, "mahalanobis")
    H, info = _iterate(S, loss_fn, grad_fn, "fro", cfg, psd=True)
    Sp = np.linalg.pinv(S, rcond=1e-10)
    A = Sp @ H @ Sp
    A = (A + A.T) / 2.0
    # pinv round trip can leave eigenvalues a hair below zero
    A = psd_project(A)
    info["feature_norm"] = float(np.linalg.norm(S @ A @ S, "fro"))
    return MetricModel(
        kind="kernelized", A=A, kernel=ks, anchors=ds, regularizer="fro", info=info
    )

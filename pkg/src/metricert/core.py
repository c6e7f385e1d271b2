"""Domain types, pair/triplet construction and the margin-loss machinery.

The learned metric is either a d x d matrix (Mahalanobis distance or bilinear
similarity) or an n x n coefficient matrix over kernel coordinates.  The loss
is the hinge g(t) = max(0, 1 - t) applied to y_ij * (1 - f(M, x_i, x_j)),
which gives Lipschitz constant U = 1 and zero-matrix loss g0 = 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ATOL = 1e-8


@dataclass(frozen=True)
class LabeledExample:
    x: np.ndarray
    y: object


@dataclass
class Dataset:
    """An ordered sample of labeled points inside the radius-R ball."""

    X: np.ndarray            # (n, d) float64
    y: list                  # n labels from a finite set
    R: float
    labels: tuple = ()       # sorted label set; derived when empty

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            raise ValueError("X must be a 2-D array of shape (n, d)")
        if len(self.y) != self.X.shape[0]:
            raise ValueError("label count does not match point count")
        if self.X.shape[0] < 1:
            raise ValueError("dataset must contain at least one example")
        if not self.labels:
            self.labels = tuple(sorted(set(self.y), key=str))
        missing = set(self.y) - set(self.labels)
        if missing:
            raise ValueError(f"labels {missing} outside the declared label set")
        norms = np.linalg.norm(self.X, axis=1)
        if norms.max() > self.R + ATOL:
            raise ValueError(
                f"point norm {norms.max():.6g} exceeds declared radius R={self.R}"
            )

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> LabeledExample:
        return LabeledExample(self.X[i], self.y[i])

    def label_indices(self) -> np.ndarray:
        lookup = {lab: k for k, lab in enumerate(self.labels)}
        return np.array([lookup[lab] for lab in self.y], dtype=int)


@dataclass
class PairSet:
    pairs: list  # (i, j) index pairs, row-major over the full n^2 grid


@dataclass
class TripletSet:
    triplets: list  # (i, j, k) with y_i == y_j and y_i != y_k


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"        # "linear" or "rbf"
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and self.sigma <= 0:
            raise ValueError("rbf bandwidth sigma must be positive")


@dataclass
class MetricModel:
    """A learned metric.

    kind "mahalanobis": f(x, x') = (x - x')^T M (x - x'), M symmetric PSD.
    kind "bilinear":    f(x, x') = x^T M x', no PSD constraint.
    kind "kernelized":  f(x, x') = (k(x) - k(x'))^T A (k(x) - k(x')) where
    k(x) is the kernel vector against the anchor points and A is PSD.
    """

    kind: str
    M: np.ndarray | None = None
    A: np.ndarray | None = None
    kernel: KernelSpec | None = None
    anchors: "Dataset | None" = None
    regularizer: str = "fro"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("mahalanobis", "bilinear", "kernelized"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == "kernelized":
            if self.A is None or self.kernel is None or self.anchors is None:
                raise ValueError("kernelized model needs A, kernel and anchors")
            self.A = np.asarray(self.A, dtype=float)
            _check_sym_psd(self.A, "A")
        else:
            if self.M is None:
                raise ValueError(f"{self.kind} model needs a matrix M")
            self.M = np.asarray(self.M, dtype=float)
            if self.M.shape[0] != self.M.shape[1]:
                raise ValueError("M must be square")
            if self.kind == "mahalanobis":
                _check_sym_psd(self.M, "M")

    @property
    def d(self) -> int:
        if self.kind == "kernelized":
            return self.anchors.d
        return self.M.shape[0]


def _check_sym_psd(M: np.ndarray, name: str) -> None:
    if not np.allclose(M, M.T, atol=1e-7):
        raise ValueError(f"{name} must be symmetric")
    w = np.linalg.eigvalsh((M + M.T) / 2.0)
    if w.min() < -ATOL:
        raise ValueError(f"{name} has negative eigenvalue {w.min():.3g}")


@dataclass(frozen=True)
class LossSpec:
    """Hinge margin loss: g(t) = max(0, 1 - t)."""

    margin: float = 1.0
    U: float = 1.0
    g0: float = 2.0

    def g(self, t):
        return np.maximum(0.0, self.margin - np.asarray(t, dtype=float))


def hinge(t):
    return np.maximum(0.0, 1.0 - np.asarray(t, dtype=float))


# ---------------------------------------------------------------------------
# pair / triplet construction


def build_pairs(ds: Dataset) -> PairSet:
    """All n^2 ordered index pairs, self-pairs included, row-major order."""
    n = ds.n
    return PairSet([(i, j) for i in range(n) for j in range(n)])


def build_triplets(ds: Dataset) -> TripletSet:
    """All admissible (i, j, k): y_i == y_j, y_i != y_k, lexicographic order.

    i == j is allowed; the triplet loss is well defined for it.
    """
    n = ds.n
    y = ds.y
    out = []
    for i in range(n):
        for j in range(n):
            if y[i] != y[j]:
                continue
            for k in range(n):
                if y[i] != y[k]:
                    out.append((i, j, k))
    return TripletSet(out)


# ---------------------------------------------------------------------------
# metric evaluation


def kernel_gram(ks: KernelSpec, X1: np.ndarray, X2: np.ndarray | None = None) -> np.ndarray:
    """Gram matrix k(x1_i, x2_j); X2 defaults to X1."""
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = X1 if X2 is None else np.atleast_2d(np.asarray(X2, dtype=float))
    if ks.kind == "linear":
        return X1 @ X2.T
    sq = (
        np.sum(X1 * X1, axis=1)[:, None]
        + np.sum(X2 * X2, axis=1)[None, :]
        - 2.0 * X1 @ X2.T
    )
    return np.exp(-np.maximum(sq, 0.0) / (2.0 * ks.sigma**2))


def kernel_coords(m: MetricModel, X: np.ndarray) -> np.ndarray:
    """Kernel feature rows k(x)_i = k(anchor_i, x) for each row x of X."""
    return kernel_gram(m.kernel, np.atleast_2d(X), m.anchors.X)


def metric_eval(m: MetricModel, x1: np.ndarray, x2: np.ndarray) -> float:
    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x1.shape != x2.shape:
        raise ValueError("input vectors have mismatched dimensions")
    if m.kind == "kernelized":
        if x1.shape[0] != m.anchors.d:
            raise ValueError(
                f"expected dimension {m.anchors.d}, got {x1.shape[0]}"
            )
        kd = (kernel_coords(m, x1) - kernel_coords(m, x2)).ravel()
        return float(kd @ m.A @ kd)
    if x1.shape[0] != m.M.shape[0]:
        raise ValueError(f"expected dimension {m.M.shape[0]}, got {x1.shape[0]}")
    if m.kind == "bilinear":
        return float(x1 @ m.M @ x2)
    diff = x1 - x2
    return float(diff @ m.M @ diff)


def metric_matrix(m: MetricModel, X1: np.ndarray, X2: np.ndarray | None = None) -> np.ndarray:
    """All-pairs metric values f(x1_i, x2_j), vectorized."""
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = X1 if X2 is None else np.atleast_2d(np.asarray(X2, dtype=float))
    if m.kind == "bilinear":
        return X1 @ m.M @ X2.T
    if m.kind == "kernelized":
        F1, F2 = kernel_coords(m, X1), kernel_coords(m, X2)
        return _sq_form_matrix(m.A, F1, F2)
    return _sq_form_matrix(m.M, X1, X2)


def _sq_form_matrix(M: np.ndarray, F1: np.ndarray, F2: np.ndarray) -> np.ndarray:
    # (f1_i - f2_j)^T M (f1_i - f2_j) for symmetric M
    G = F1 @ M @ F2.T
    q1 = np.einsum("ij,jk,ik->i", F1, M, F1)
    q2 = np.einsum("ij,jk,ik->i", F2, M, F2)
    return q1[:, None] + q2[None, :] - 2.0 * G


# ---------------------------------------------------------------------------
# losses


def pair_loss(m: MetricModel, ls: LossSpec, z1: LabeledExample, z2: LabeledExample) -> float:
    y12 = 1.0 if z1.y == z2.y else -1.0
    f = metric_eval(m, z1.x, z2.x)
    return float(ls.g(y12 * (1.0 - f)))


def triplet_loss(m: MetricModel, z1: LabeledExample, z2: LabeledExample, z3: LabeledExample) -> float:
    """Hinge of 1 - f(x1, x3) + f(x1, x2); zero for non-admissible triples."""
    if not (z1.y == z2.y and z1.y != z3.y):
        return 0.0
    f13 = metric_eval(m, z1.x, z3.x)
    f12 = metric_eval(m, z1.x, z2.x)
    return float(max(0.0, 1.0 - f13 + f12))


def pair_loss_matrix(m: MetricModel, ls: LossSpec, ds: Dataset) -> np.ndarray:
    """n x n matrix of pair losses over a dataset's points."""
    F = metric_matrix(m, ds.X)
    li = ds.label_indices()
    Y = np.where(li[:, None] == li[None, :], 1.0, -1.0)
    return ls.g(Y * (1.0 - F))


def empirical_loss(m: MetricModel, ds: Dataset, ps: PairSet, ls: LossSpec) -> float:
    """Mean pair loss over the pair sample (1/n^2 for the full grid)."""
    if not ps.pairs:
        raise ValueError("empty pair set")
    L = pair_loss_matrix(m, ls, ds)
    idx = np.asarray(ps.pairs)
    return float(L[idx[:, 0], idx[:, 1]].mean())


def empirical_triplet_loss(m: MetricModel, ds: Dataset, ts: TripletSet) -> float:
    """Mean triplet hinge loss over the admissible triplet sample."""
    if not ts.triplets:
        raise ValueError("empty triplet set (fewer than two labels?)")
    F = metric_matrix(m, ds.X)
    t = np.asarray(ts.triplets)
    args = 1.0 - F[t[:, 0], t[:, 2]] + F[t[:, 0], t[:, 1]]
    return float(np.maximum(0.0, args).mean())


def loss_bound_B(ls: LossSpec, R: float, c: float, kind: str = "mahalanobis") -> float:
    """Uniform loss bound from the capacity inequality ||M*|| <= g0/c.

    |f| <= F_max with F_max = 4 R^2 g0/c for squared-distance metrics
    (||x - x'|| <= 2R) and R^2 g0/c for the bilinear similarity, so the
    hinge never exceeds g0 + F_max.
    """
    if c <= 0:
        raise ValueError("regularization weight c must be positive")
    if R <= 0:
        raise ValueError("radius R must be positive")
    if kind in ("mahalanobis", "kernelized", "triplet"):
        f_max = 4.0 * R * R * ls.g0 / c
    elif kind == "bilinear":
        f_max = R * R * ls.g0 / c
    else:
        raise ValueError(f"unknown metric kind {kind!r}")
    return ls.g0 + f_max

"""Robustness constants, empirical robustness estimation and the
generalization bounds (pair, triplet and pseudo-robust variants), plus a
Monte-Carlo check of the multinomial concentration inequality."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, LossSpec, MetricModel, metric_matrix, pair_loss_matrix
from .cover import Partition, assign_cells

FAMILIES = (
    "fro",
    "l1",
    "l21",
    "bilinear",
    "kernel-rbf",
    "triplet-fro",
    "triplet-l21",
)


@dataclass(frozen=True)
class RobustnessQuery:
    family: str
    U: float
    R: float
    gamma: float
    g0: float
    c: float
    sigma: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        for name in ("U", "R", "g0", "c"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.family == "kernel-rbf" and self.sigma <= 0:
            raise ValueError("kernel-rbf requires sigma > 0")


def rbf_fH(gamma: float, sigma: float) -> float:
    """sup of k(a,a) + k(b,b) - 2k(a,b) over ||a - b|| <= gamma for the rbf
    kernel; monotone in the distance, so the sup is at distance gamma."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    return 2.0 * (1.0 - math.exp(-(gamma**2) / (2.0 * sigma**2)))


def epsilon_theoretical(q: RobustnessQuery) -> float:
    """Certified loss-deviation constant for cell-matched pairs."""
    base = q.U * q.g0 / q.c
    if q.family in ("fro", "l1", "l21"):
        return 8.0 * q.R * q.gamma * base
    if q.family == "bilinear":
        return 2.0 * q.R * q.gamma * base
    if q.family in ("triplet-fro", "triplet-l21"):
        return 16.0 * q.R * q.gamma * base
    # kernel-rbf: feature-space radius B_gamma = max sqrt(k(x,x)) = 1
    return 8.0 * 1.0 * math.sqrt(rbf_fH(q.gamma, q.sigma)) * base


@dataclass(frozen=True)
class BoundQuery:
    epsilon: float
    B: float
    K: int
    n: int
    delta: float
    mode: str = "pair"        # "pair", "triplet" or "pseudo"
    p_hat: int = 0            # pseudo mode only, in [0, n^2]

    def __post_init__(self):
        if self.epsilon < 0 or self.B < 0:
            raise ValueError("epsilon and B must be nonnegative")
        if self.K < 1 or self.n < 1:
            raise ValueError("K and n must be positive integers")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.mode not in ("pair", "triplet", "pseudo"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "pseudo" and not 0 <= self.p_hat <= self.n**2:
            raise ValueError("p_hat must lie in [0, n^2]")


def bound_value(q: BoundQuery) -> float:
    """Generalization bound on |true loss - empirical loss|."""
    root = math.sqrt((2.0 * q.K * math.log(2.0) + 2.0 * math.log(1.0 / q.delta)) / q.n)
    if q.mode == "pair":
        return q.epsilon + 2.0 * q.B * root
    if q.mode == "triplet":
        return q.epsilon + 3.0 * q.B * root
    n2 = q.n**2
    return (q.p_hat / n2) * q.epsilon + q.B * ((n2 - q.p_hat) / n2 + 2.0 * root)


# ---------------------------------------------------------------------------
# empirical robustness


@dataclass(frozen=True)
class EpsilonEstimate:
    value: float
    excluded_probes: int

    def __float__(self) -> float:
        return self.value


def _cell_extrema(ids1, ids2, L, K):
    """Per cell-pair min/max of the loss matrix L, keyed by id1*K + id2.

    Rows/columns with id -1 (out of cover) are dropped by the caller.
    """
    keys = (ids1[:, None] * K + ids2[None, :]).ravel()
    vals = L.ravel()
    lo = np.full(K * K, np.inf)
    hi = np.full(K * K, -np.inf)
    np.minimum.at(lo, keys, vals)
    np.maximum.at(hi, keys, vals)
    return lo, hi


def _pair_cell_data(m, ls, p, ds, probe):
    ids_tr = assign_cells(p, ds.X, ds.y)
    if (ids_tr < 0).any():
        raise ValueError("training points outside the cover")
    ids_pr = assign_cells(p, probe.X, probe.y)
    keep = ids_pr >= 0
    excluded = int((~keep).sum())
    L_tr = pair_loss_matrix(m, ls, ds)
    sub = Dataset(probe.X[keep], [probe.y[i] for i in np.flatnonzero(keep)],
                  probe.R, probe.labels) if keep.any() else None
    L_pr = pair_loss_matrix(m, ls, sub) if sub is not None else None
    return ids_tr, L_tr, (ids_pr[keep] if sub is not None else None), L_pr, excluded


def empirical_epsilon(
    m: MetricModel,
    ls: LossSpec,
    p: Partition,
    ds: Dataset,
    probe: Dataset,
) -> EpsilonEstimate:
    """Max loss deviation between training pairs and cell-matched probe pairs.

    Exhaustive over all n^2 training pairs and all matched probe pairs;
    probe points outside the cover are excluded and counted.
    """
    ids_tr, L_tr, ids_pr, L_pr, excluded = _pair_cell_data(m, ls, p, ds, probe)
    if ids_pr is None or len(ids_pr) == 0:
        return EpsilonEstimate(0.0, excluded)
    lo_t, hi_t = _cell_extrema(ids_tr, ids_tr, L_tr, p.K)
    lo_p, hi_p = _cell_extrema(ids_pr, ids_pr, L_pr, p.K)
    both = np.isfinite(hi_t) & np.isfinite(hi_p)
    if not both.any():
        return EpsilonEstimate(0.0, excluded)
    dev = np.maximum(hi_t[both] - lo_p[both], hi_p[both] - lo_t[both])
    return EpsilonEstimate(float(max(dev.max(), 0.0)), excluded)


def pseudo_robust_count(
    m: MetricModel,
    ls: LossSpec,
    p: Partition,
    ds: Dataset,
    probe: Dataset,
    epsilon: float,
) -> int:
    """Number of training pairs whose every cell-matched probe pair deviates
    by at most epsilon (vacuously robust pairs count)."""
    ids_tr, L_tr, ids_pr, L_pr, _ = _pair_cell_data(m, ls, p, ds, probe)
    n = ds.n
    if ids_pr is None or len(ids_pr) == 0:
        return n * n
    lo_p, hi_p = _cell_extrema(ids_pr, ids_pr, L_pr, p.K)
    keys = ids_tr[:, None] * p.K + ids_tr[None, :]
    matched = np.isfinite(hi_p[keys])
    dev = np.maximum(L_tr - lo_p[keys], hi_p[keys] - L_tr)
    ok = ~matched | (dev <= epsilon + 1e-12)
    return int(ok.sum())


def empirical_epsilon_triplet(
    m: MetricModel,
    p: Partition,
    ds: Dataset,
    probe: Dataset,
    triplets,
) -> EpsilonEstimate:
    """Triplet analogue of empirical_epsilon over the admissible training
    triplets and cell-matched admissible probe triplets."""
    ids_tr = assign_cells(p, ds.X, ds.y)
    if (ids_tr < 0).any():
        raise ValueError("training points outside the cover")
    ids_pr = assign_cells(p, probe.X, probe.y)
    keep = np.flatnonzero(ids_pr >= 0)
    excluded = int(len(ids_pr) - len(keep))

    def grouped(X, y, ids, trips):
        F = metric_matrix(m, X)
        out = {}
        for i, j, k in trips:
            loss = max(0.0, 1.0 - F[i, k] + F[i, j])
            key = (ids[i], ids[j], ids[k])
            lo, hi = out.get(key, (np.inf, -np.inf))
            out[key] = (min(lo, loss), max(hi, loss))
        return out

    from .core import build_triplets  # local import avoids cycle at module load

    tr = grouped(ds.X, ds.y, ids_tr, triplets.triplets)
    if len(keep) == 0:
        return EpsilonEstimate(0.0, excluded)
    sub_y = [probe.y[i] for i in keep]
    sub = Dataset(probe.X[keep], sub_y, probe.R, probe.labels)
    pr = grouped(sub.X, sub.y, ids_pr[keep], build_triplets(sub).triplets)
    dev = 0.0
    for key, (lo_t, hi_t) in tr.items():
        if key in pr:
            lo_p, hi_p = pr[key]
            dev = max(dev, hi_t - lo_p, hi_p - lo_t)
    return EpsilonEstimate(float(max(dev, 0.0)), excluded)


# ---------------------------------------------------------------------------
# Bretagnolle-Huber-Carol simulation


@dataclass(frozen=True)
class BhcResult:
    empirical_tail: float
    cap: float
    std_error: float
    violated: bool


def bhc_simulate(
    K: int,
    mu,
    n: int,
    lam: float,
    trials: int = 100_000,
    seed: int = 0,
) -> BhcResult:
    """Monte-Carlo tail of sum_i |N_i/n - mu_i| against the 2^K exp(-n lam^2/2)
    cap; flags a violation beyond 3 Monte-Carlo standard errors."""
    mu = np.asarray(mu, dtype=float)
    if len(mu) != K:
        raise ValueError("mu must have length K")
    if (mu < 0).any() or abs(mu.sum() - 1.0) > 1e-12:
        raise ValueError("mu must be a probability vector summing to 1")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n, mu, size=trials)
    stat = np.abs(counts / n - mu[None, :]).sum(axis=1)
    tail = float((stat >= lam).mean())
    cap = float(2.0**K * math.exp(-n * lam * lam / 2.0))
    se = math.sqrt(max(tail * (1.0 - tail), 1.0 / trials) / trials)
    return BhcResult(tail, cap, se, tail > cap + 3.0 * se)


# ---------------------------------------------------------------------------
# report


@dataclass
class BoundReport:
    family: str
    U: float
    R: float
    gamma: float
    g0: float
    c: float
    K_theoretical: int
    K_empirical: int
    B: float
    epsilon_theoretical: float
    epsilon_empirical: float
    bound_pair: float
    empirical_gap: float
    holds: bool
    excluded_probes: int
    seed: int
    bound_pseudo: float | None = None
    bound_triplet: float | None = None
    extra: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out = {
            "family": self.family,
            "U": self.U,
            "R": self.R,
            "gamma": self.gamma,
            "g0": self.g0,
            "c": self.c,
            "K_theoretical": self.K_theoretical,
            "K_empirical": self.K_empirical,
            "B": self.B,
            "epsilon_theoretical": self.epsilon_theoretical,
            "epsilon_empirical": self.epsilon_empirical,
            "bound_pair": self.bound_pair,
            "empirical_gap": self.empirical_gap,
            "holds": self.holds,
            "excluded_probes": self.excluded_probes,
            "seed": self.seed,
        }
        if self.bound_pseudo is not None:
            out["bound_pseudo"] = self.bound_pseudo
        if self.bound_triplet is not None:
            out["bound_triplet"] = self.bound_triplet
        out.update(self.extra)
        return out

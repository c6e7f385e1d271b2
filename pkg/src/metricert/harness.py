"""Synthetic data generation and end-to-end train/certify/validate runs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bounds import (
    BoundQuery,
    BoundReport,
    RobustnessQuery,
    bound_value,
    empirical_epsilon,
    empirical_epsilon_triplet,
    epsilon_theoretical,
    pseudo_robust_count,
)
from .core import (
    Dataset,
    KernelSpec,
    LossSpec,
    MetricModel,
    build_pairs,
    build_triplets,
    empirical_loss,
    empirical_triplet_loss,
    loss_bound_B,
    metric_matrix,
)
from .cover import CoverConfig, build_partition, covering_number_upper_bound
from .solver import SolverConfig, solve, solve_kernel, solve_triplet

TRIPLET_G0 = 1.0  # zero-matrix triplet hinge loss


@dataclass(frozen=True)
class SyntheticSpec:
    """Equal-weight Gaussian mixture, rejection-sampled into the R-ball."""

    d: int = 2
    n: int = 100
    classes: int = 2
    means: tuple = ()         # one vector per class; defaults to +/- axis means
    cov_scale: float = 0.3
    R: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.d < 1 or self.n < 1 or self.classes < 1:
            raise ValueError("d, n and classes must be positive")
        if self.cov_scale < 0:
            raise ValueError("cov_scale must be nonnegative")
        if self.R <= 0:
            raise ValueError("R must be positive")
        means = self.means if self.means else _default_means(self.classes, self.d, self.R)
        means = tuple(tuple(float(v) for v in mvec) for mvec in means)
        if len(means) != self.classes:
            raise ValueError("need one mean per class")
        for mvec in means:
            if len(mvec) != self.d:
                raise ValueError("mean dimension mismatch")
            if np.linalg.norm(mvec) > self.R + 1e-9:
                raise ValueError("class means must lie inside the R-ball")
        object.__setattr__(self, "means", means)

    @property
    def label_names(self) -> tuple:
        return tuple(f"c{k}" for k in range(self.classes))


def _default_means(classes: int, d: int, R: float):
    means = np.zeros((classes, d))
    for k in range(classes):
        means[k, k % d] = (0.5 * R) * (1.0 if (k // d) % 2 == 0 else -1.0)
    return means


def gen_synthetic(spec: SyntheticSpec, seed: int | None = None) -> Dataset:
    """n IID draws: uniform class, Gaussian around the class mean, resampled
    until inside the R-ball.  Deterministic under the seed."""
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    means = np.asarray(spec.means)
    X = np.empty((spec.n, spec.d))
    y = []
    attempts = 0
    accepted = 0
    for i in range(spec.n):
        k = int(rng.integers(spec.classes))
        while True:
            attempts += 1
            x = means[k] + spec.cov_scale * rng.standard_normal(spec.d)
            if np.linalg.norm(x) <= spec.R:
                accepted += 1
                break
            if attempts > 100 * (accepted + 1) and attempts > 1000:
                raise ValueError(
                    "rejection rate above 99%; increase R or shrink cov_scale"
                )
        X[i] = x
        y.append(spec.label_names[k])
    return Dataset(X, y, spec.R, spec.label_names)


def _sample_points(spec: SyntheticSpec, count: int, rng) -> tuple[np.ndarray, list]:
    tmp = replace(spec, n=count)
    ds = gen_synthetic(tmp, seed=int(rng.integers(2**32)))
    return ds.X, ds.y


def true_loss_estimate(
    m: MetricModel,
    ls: LossSpec,
    spec: SyntheticSpec,
    M_mc: int,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte-Carlo mean pair loss over independent draws, with its SE."""
    if M_mc < 2:
        raise ValueError("M_mc must be at least 2")
    rng = np.random.default_rng(seed)
    X1, y1 = _sample_points(spec, M_mc, rng)
    X2, y2 = _sample_points(spec, M_mc, rng)
    f = np.array([_metric_rowwise(m, X1, X2)]).ravel()
    same = np.array([a == b for a, b in zip(y1, y2)])
    ysign = np.where(same, 1.0, -1.0)
    losses = ls.g(ysign * (1.0 - f))
    return float(losses.mean()), float(losses.std(ddof=1) / math.sqrt(M_mc))


def _metric_rowwise(m: MetricModel, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
    # f(x1_i, x2_i) for matched rows without forming the full matrix
    if m.kind == "bilinear":
        return np.einsum("ij,jk,ik->i", X1, m.M, X2)
    if m.kind == "kernelized":
        from .core import kernel_coords

        D = kernel_coords(m, X1) - kernel_coords(m, X2)
        return np.einsum("ij,jk,ik->i", D, m.A, D)
    D = X1 - X2
    return np.einsum("ij,jk,ik->i", D, m.M, D)


def _true_triplet_loss_estimate(m, spec, M_mc, seed):
    rng = np.random.default_rng(seed)
    X1, y1 = _sample_points(spec, 3 * M_mc, rng)
    a, b, c = X1[:M_mc], X1[M_mc : 2 * M_mc], X1[2 * M_mc :]
    ya, yb, yc = y1[:M_mc], y1[M_mc : 2 * M_mc], y1[2 * M_mc :]
    f13 = _metric_rowwise(m, a, c)
    f12 = _metric_rowwise(m, a, b)
    admissible = np.array(
        [p == q and p != r for p, q, r in zip(ya, yb, yc)]
    )
    losses = np.where(admissible, np.maximum(0.0, 1.0 - f13 + f12), 0.0)
    return float(losses.mean()), float(losses.std(ddof=1) / math.sqrt(M_mc))


@dataclass(frozen=True)
class ExperimentConfig:
    synthetic: SyntheticSpec = SyntheticSpec()
    solver: SolverConfig = SolverConfig()
    cover: CoverConfig = CoverConfig(gamma=0.5)
    family: str = "fro"
    delta: float = 0.05
    probe_size: int = 100
    mc_size: int = 20_000
    repetitions: int = 1
    pseudo_eps_scale: float = 0.5  # pseudo-robust epsilon as a fraction of the certified one

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.probe_size < 1 or self.mc_size < 1 or self.repetitions < 1:
            raise ValueError("probe_size, mc_size, repetitions must be >= 1")


def _solve_family(ds: Dataset, family: str, ls: LossSpec, cfg: SolverConfig, sigma: float):
    ps = build_pairs(ds)
    if family in ("fro", "l1", "l21"):
        return solve(ds, ps, ls, family, cfg), ps, None
    if family == "bilinear":
        return solve(ds, ps, ls, "fro", cfg, kind="bilinear"), ps, None
    if family == "kernel-rbf":
        return solve_kernel(ds, ps, ls, KernelSpec("rbf", sigma), cfg), ps, None
    if family in ("triplet-fro", "triplet-l21"):
        ts = build_triplets(ds)
        return solve_triplet(ds, ts, family.split("-")[1], cfg), ps, ts
    raise ValueError(f"unknown family {family!r}")


def certify(
    model: MetricModel,
    ds: Dataset,
    probe: Dataset,
    family: str,
    cover_cfg: CoverConfig,
    c: float,
    delta: float,
    sigma: float = 1.0,
    seed: int = 0,
    gap: float | None = None,
    pseudo_eps_scale: float = 0.5,
    triplets=None,
) -> BoundReport:
    """Build the partition and assemble all certified quantities."""
    is_triplet = family.startswith("triplet")
    ls = LossSpec()
    g0 = TRIPLET_G0 if is_triplet else ls.g0
    part = build_partition(ds, cover_cfg, probe=probe)
    q = RobustnessQuery(
        family=family, U=ls.U, R=ds.R, gamma=cover_cfg.gamma, g0=g0, c=c,
        sigma=sigma if family == "kernel-rbf" else 0.0,
    )
    eps_theo = epsilon_theoretical(q)
    if is_triplet:
        ts = triplets if triplets is not None else build_triplets(ds)
        est = empirical_epsilon_triplet(model, part, ds, probe, ts)
        B = TRIPLET_G0 + 4.0 * ds.R**2 * TRIPLET_G0 / c
    else:
        est = empirical_epsilon(model, ls, part, ds, probe)
        bkind = {
            "bilinear": "bilinear",
            "kernel-rbf": "kernelized",
        }.get(family, "mahalanobis")
        bR = 1.0 if family == "kernel-rbf" else ds.R  # rbf feature radius is 1
        B = loss_bound_B(ls, bR, c, bkind)
    radius = cover_cfg.gamma / 2.0
    K_theo = len(ds.labels) * covering_number_upper_bound(
        ds.R, radius, ds.d, cover_cfg.norm
    )
    n = ds.n
    bq = BoundQuery(epsilon=eps_theo, B=B, K=K_theo, n=n, delta=delta, mode="pair")
    bound_pair = bound_value(bq)
    bound_triplet = None
    if is_triplet:
        bound_triplet = bound_value(
            BoundQuery(epsilon=eps_theo, B=B, K=K_theo, n=n, delta=delta, mode="triplet")
        )
    pseudo_eps = pseudo_eps_scale * eps_theo
    if is_triplet:
        bound_pseudo = None
    else:
        p_hat = pseudo_robust_count(model, ls, part, ds, probe, pseudo_eps)
        bound_pseudo = bound_value(
            BoundQuery(
                epsilon=pseudo_eps, B=B, K=K_theo, n=n, delta=delta,
                mode="pseudo", p_hat=p_hat,
            )
        )
    gap_val = float(gap) if gap is not None else 0.0
    certified = bound_triplet if is_triplet else bound_pair
    return BoundReport(
        family=family,
        U=ls.U,
        R=ds.R,
        gamma=cover_cfg.gamma,
        g0=g0,
        c=c,
        K_theoretical=K_theo,
        K_empirical=part.K,
        B=B,
        epsilon_theoretical=eps_theo,
        epsilon_empirical=est.value,
        bound_pair=bound_pair,
        bound_pseudo=bound_pseudo,
        bound_triplet=bound_triplet,
        empirical_gap=gap_val,
        holds=bool(gap_val <= certified),
        excluded_probes=est.excluded_probes,
        seed=seed,
    )


def run_repetition(cfg: ExperimentConfig, rep_seed: int) -> BoundReport:
    spec = replace(cfg.synthetic, seed=rep_seed)
    ds = gen_synthetic(spec)
    ls = LossSpec()
    scfg = replace(cfg.solver, seed=rep_seed)
    sigma = 1.0
    model, ps, ts = _solve_family(ds, cfg.family, ls, scfg, sigma)
    probe_spec = replace(spec, n=cfg.probe_size, seed=rep_seed + 10_000)
    probe = gen_synthetic(probe_spec)
    if cfg.family.startswith("triplet"):
        l_emp = empirical_triplet_loss(model, ds, ts)
        true_est, _se = _true_triplet_loss_estimate(model, spec, cfg.mc_size, rep_seed + 20_000)
    else:
        l_emp = empirical_loss(model, ds, ps, ls)
        true_est, _se = true_loss_estimate(model, ls, spec, cfg.mc_size, rep_seed + 20_000)
    gap = abs(true_est - l_emp)
    report = certify(
        model, ds, probe, cfg.family, cfg.cover, cfg.solver.c, cfg.delta,
        sigma=sigma, seed=rep_seed, gap=gap,
        pseudo_eps_scale=cfg.pseudo_eps_scale,
        triplets=ts,
    )
    report.extra["empirical_loss"] = l_emp
    report.extra["true_loss_estimate"] = true_est
    report.extra["true_loss_se"] = _se
    return report


def run_experiment(cfg: ExperimentConfig) -> tuple[list[BoundReport], dict]:
    """Per-repetition reports plus a summary with the holds fraction."""
    reports = []
    for rep in range(cfg.repetitions):
        reports.append(run_repetition(cfg, cfg.synthetic.seed + rep))
    frac = sum(r.holds for r in reports) / len(reports)
    summary = {
        "repetitions": cfg.repetitions,
        "holds_fraction": frac,
        "mean_gap": float(np.mean([r.empirical_gap for r in reports])),
        "mean_bound": float(np.mean([r.bound_pair for r in reports])),
    }
    return reports, summary


def gap_curve(cfg: ExperimentConfig, n_ladder: list[int]) -> list[dict]:
    """Mean empirical gap and bound per sample size; also emits the pure
    sqrt concentration term for the closed-form rate check."""
    if any(b <= a for a, b in zip(n_ladder, n_ladder[1:])):
        raise ValueError("n ladder must be strictly increasing")
    rows = []
    for n in n_ladder:
        sub = replace(cfg, synthetic=replace(cfg.synthetic, n=n))
        reports, summary = run_experiment(sub)
        r0 = reports[0]
        root = math.sqrt(
            (2.0 * r0.K_theoretical * math.log(2.0) + 2.0 * math.log(1.0 / cfg.delta)) / n
        )
        rows.append(
            {
                "n": n,
                "gap": summary["mean_gap"],
                "bound": summary["mean_bound"],
                "sqrt_term": 2.0 * r0.B * root,
            }
        )
    return rows


def knn_eval(m: MetricModel, train: Dataset, test: Dataset, k: int) -> float:
    """k-nearest-neighbor accuracy under the learned metric.

    Bilinear similarities rank by largest value; neighbor ties go to the
    lowest training index, vote ties to the smallest label in sort order.
    """
    if k < 1 or k > train.n:
        raise ValueError("k must satisfy 1 <= k <= train size")
    if test.n == 0:
        raise ValueError("empty test set")
    F = metric_matrix(m, test.X, train.X)
    if m.kind == "bilinear":
        F = -F
    order = np.argsort(F, axis=1, kind="stable")[:, :k]
    label_order = sorted(set(train.y), key=str)
    correct = 0
    for i in range(test.n):
        votes = {}
        for j in order[i]:
            votes[train.y[j]] = votes.get(train.y[j], 0) + 1
        top = max(votes.values())
        winner = next(lab for lab in label_order if votes.get(lab, 0) == top)
        correct += winner == test.y[i]
    return correct / test.n

"""Cohorts, ranking-quality metrics and the logistic-regression combiner."""
from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata

from .graph import AccountMeta, FollowGraph

SECONDS_PER_WEEK = 7 * 86400


@dataclass(frozen=True)
class Cohort:
    accounts: frozenset[int]
    weeks: int
    min_followers: int
    active_only: bool = False

    @property
    def label(self) -> str:
        base = f"T{self.weeks}_{self.min_followers}"
        return base + ("_active" if self.active_only else "")


def extract_cohort(g: FollowGraph, meta: Mapping[int, AccountMeta],
                   snapshot_time: int, weeks: int, min_followers: int,
                   active_only: bool = False) -> Cohort:
    """Accounts at most ``weeks`` old holding at least ``min_followers``.

    ``meta`` is keyed by dense id; the cohort holds dense ids.  Accounts
    created after ``snapshot_time`` are never members.
    """
    max_age = weeks * SECONDS_PER_WEEK
    members = set()
    for u, rec in meta.items():
        age = snapshot_time - rec.created_at
        if not 0 <= age <= max_age:
            continue
        if g.in_degree(u) < min_followers:
            continue
        if active_only and not rec.active_at_horizon:
            continue
        members.add(u)
    return Cohort(frozenset(members), weeks, min_followers, active_only)


# ---- metrics ---------------------------------------------------------------

def _aligned(a, b) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(a, Mapping) or isinstance(b, Mapping):
        if not (isinstance(a, Mapping) and isinstance(b, Mapping)):
            raise TypeError("pass two mappings or two sequences")
        if a.keys() != b.keys():
            raise ValueError("score tables cover different accounts")
        keys = sorted(a)
        return (np.array([a[k] for k in keys], dtype=np.float64),
                np.array([b[k] for k in keys], dtype=np.float64))
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("score sequences must be 1-d and equally long")
    return x, y


def spearman_rho(scores_a, scores_b) -> float:
    """Pearson correlation of mid-ranks.

    Returns NaN when either side is constant (the coefficient is undefined).
    """
    x, y = _aligned(scores_a, scores_b)
    if len(x) < 2:
        raise ValueError("need at least 2 accounts")
    rx = rankdata(x) - (len(x) + 1) / 2.0
    ry = rankdata(y) - (len(y) + 1) / 2.0
    sxx = float(rx @ rx)
    syy = float(ry @ ry)
    if sxx == 0.0 or syy == 0.0:
        return math.nan
    rho = float(rx @ ry) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, rho))


def ndcg_at_k(ranking: Sequence[int], gains: Mapping[int, float], k: int) -> float:
    """nDCG over the top ``k`` of ``ranking`` (account ids, best first).

    When every gain is zero any order is ideal and the result is 1.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    order = list(ranking)
    missing = [a for a in order if a not in gains]
    if missing:
        raise KeyError(f"no gain for account(s): {missing[:5]}")
    k = min(k, len(order))
    discounts = 1.0 / np.log2(np.arange(2, k + 2))
    got = np.array([gains[a] for a in order[:k]], dtype=np.float64)
    ideal = np.sort(np.array([gains[a] for a in order], dtype=np.float64))[::-1][:k]
    idcg = float(ideal @ discounts)
    if idcg == 0.0:
        return 1.0
    return float(got @ discounts) / idcg


def descending_midranks(values: Sequence[float]) -> np.ndarray:
    """Rank 1 = largest; ties share the average rank."""
    return rankdata(-np.asarray(values, dtype=np.float64))


# ---- logistic combiner -----------------------------------------------------

def median_labels(gains: Mapping[int, float], quantile: float = 0.5) -> dict[int, int]:
    """1 when the gain is strictly above the given quantile of the cohort."""
    if not gains:
        return {}
    cut = float(np.quantile(np.array(list(gains.values()), dtype=np.float64), quantile))
    return {a: int(x > cut) for a, x in gains.items()}


@dataclass
class LogisticFit:
    coef: np.ndarray
    intercept: float
    converged: bool
    iterations: int


def fit_logistic(x: np.ndarray, y: np.ndarray, max_iter: int = 500,
                 tol: float = 1e-8) -> LogisticFit:
    """Maximum-likelihood logistic regression by damped Newton steps.

    Stops once the mean log-likelihood gradient norm drops below ``tol``.
    Separable data never converges; the last iterate is returned flagged.
    """
    n, d = x.shape
    xb = np.hstack([np.ones((n, 1)), x])
    beta = np.zeros(d + 1)

    def loglik(b: np.ndarray) -> float:
        z = xb @ b
        return float(y @ z - np.logaddexp(0.0, z).sum())

    ll = loglik(beta)
    for it in range(1, max_iter + 1):
        p = expit(xb @ beta)
        grad = xb.T @ (y - p)
        if np.linalg.norm(grad) / n < tol:
            return LogisticFit(beta[1:].copy(), float(beta[0]), True, it - 1)
        w = p * (1.0 - p)
        hess = xb.T @ (xb * w[:, None])
        step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        if not np.any(step):
            step = grad
        t = 1.0
        while True:
            cand = beta + t * step
            ll_new = loglik(cand)
            if ll_new >= ll or t < 1e-12:
                break
            t *= 0.5
        if ll_new < ll:
            break
        beta, ll = cand, ll_new
    p = expit(xb @ beta)
    converged = bool(np.linalg.norm(xb.T @ (y - p)) / n < tol)
    return LogisticFit(beta[1:].copy(), float(beta[0]), converged, max_iter)


def rank_normalize(values: Sequence[float]) -> np.ndarray:
    """Mid-ranks mapped to ``[0, 1]`` (smallest value -> 0)."""
    v = np.asarray(values, dtype=np.float64)
    if len(v) < 2:
        return np.zeros(len(v))
    return (rankdata(v) - 1.0) / (len(v) - 1.0)


def fold_assignment(n: int, folds: int, seed: int = 42) -> np.ndarray:
    perm = np.random.default_rng(seed).permutation(n)
    out = np.empty(n, dtype=np.int64)
    out[perm] = np.arange(n) % folds
    return out


@dataclass
class CombineResult:
    scores: dict[int, float]
    coefficients: list[float]
    intercept: float
    converged: bool
    fold_converged: list[bool] = field(default_factory=list)
    seed: int = 42
    folds: int = 10


def logistic_combine(feature_tables: Sequence[Mapping[int, float]],
                     labels: Mapping[int, int], folds: int = 10,
                     seed: int = 42) -> CombineResult:
    """Out-of-fold logistic-regression probabilities over rank-normalized features.

    Constant features get coefficient 0 (with a warning) and exact duplicate
    columns share one fitted weight equally.
    """
    if not feature_tables:
        raise ValueError("need at least one feature table")
    if folds < 2:
        raise ValueError("folds must be >= 2")
    accounts = sorted(labels)
    for i, table in enumerate(feature_tables):
        missing = [a for a in accounts if a not in table]
        if missing:
            raise KeyError(f"feature {i} lacks account(s) {missing[:5]}")
    n = len(accounts)
    if n < folds:
        raise ValueError(f"{n} labeled accounts cannot fill {folds} folds")
    y = np.array([labels[a] for a in accounts], dtype=np.float64)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    cols = [rank_normalize([t[a] for a in accounts]) for t in feature_tables]

    # constant features drop out; identical columns collapse onto one
    groups: list[list[int]] = []
    for j, col in enumerate(cols):
        if np.all(col == col[0]):
            warnings.warn(f"feature {j} is constant; coefficient set to 0")
            continue
        for grp in groups:
            if np.array_equal(cols[grp[0]], col):
                grp.append(j)
                break
        else:
            groups.append([j])

    n_feat = len(feature_tables)
    if not groups:
        x = np.zeros((n, 0))
    else:
        x = np.column_stack([cols[grp[0]] for grp in groups])

    assign = fold_assignment(n, folds, seed)
    oof = np.zeros(n)
    fold_ok = []
    for f in range(folds):
        test = assign == f
        fit = fit_logistic(x[~test], y[~test])
        fold_ok.append(fit.converged)
        oof[test] = expit(fit.intercept + x[test] @ fit.coef)

    full = fit_logistic(x, y)
    coef = [0.0] * n_feat
    for grp, b in zip(groups, full.coef):
        for j in grp:
            coef[j] = float(b) / len(grp)
    converged = full.converged and all(fold_ok)
    if not converged:
        warnings.warn("logistic fit did not converge; scores flagged as partial")
    return CombineResult({a: float(s) for a, s in zip(accounts, oof)}, coef,
                         full.intercept, converged, fold_ok, seed, folds)


# ---- exports ---------------------------------------------------------------

def scatter_export(scores: Mapping[int, float], gains: Mapping[int, float],
                   path: str | os.PathLike) -> None:
    """TSV of score rank versus gain rank per account, rank 1 = highest."""
    if scores.keys() != gains.keys():
        raise ValueError("score and gain tables cover different accounts")
    accounts = sorted(scores)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# account_id\tscore_rank\tgain_rank\n")
        if not accounts:
            return
        sr = descending_midranks([scores[a] for a in accounts])
        gr = descending_midranks([gains[a] for a in accounts])
        for a, r1, r2 in zip(accounts, sr, gr):
            fh.write(f"{a}\t{r1:g}\t{r2:g}\n")


def write_metric_report(rows: Iterable[tuple[str, str, str, float]],
                        path: str | os.PathLike | None = None,
                        comments: Sequence[str] = ()) -> str:
    """``metric, method, cohort, value`` lines; returns the text written."""
    lines = [f"# {c}" for c in comments]
    for metric, method, cohort, value in rows:
        lines.append(f"{metric}\t{method}\t{cohort}\t{value!r}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text

"""Comparison methods: degree counts, HITS, PageRank and Adamic/Adar."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import FollowGraph

METHODS = ("FW", "FW_nr", "FR", "FR_nr", "HITS", "HITS_nr", "PR", "PR_nr",
           "AD_sum", "AD_mean")

CLI_NAMES = {
    "fw": "FW", "fw-nr": "FW_nr", "fr": "FR", "fr-nr": "FR_nr",
    "hits": "HITS", "hits-nr": "HITS_nr", "pr": "PR", "pr-nr": "PR_nr",
    "ad-sum": "AD_sum", "ad-mean": "AD_mean",
}


@dataclass(frozen=True)
class BaselineConfig:
    method: str = "FW"
    hits_iters: int = 10
    pr_iters: int = 100
    pr_damping: float = 0.9

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.hits_iters < 1 or self.pr_iters < 1:
            raise ValueError("iteration counts must be >= 1")
        if not 0.0 < self.pr_damping < 1.0:
            raise ValueError("damping must be in (0, 1)")


def degree_score(g: FollowGraph, v: int, method: str) -> int:
    if method == "FW":
        return g.in_degree(v)
    if method == "FW_nr":
        return len(g.followers_nr(v))
    if method == "FR":
        return g.out_degree(v)
    if method == "FR_nr":
        return len(g.friends_nr(v))
    raise ValueError(f"not a degree method: {method!r}")


def adjacency(g: FollowGraph, nonreciprocal_only: bool = False) -> sp.csr_matrix:
    """Row = follower, column = followee.  Every node kept either way."""
    src, dst = g.edge_src, g.edge_dst
    if nonreciprocal_only:
        keep = g.nonreciprocal_mask()
        src, dst = src[keep], dst[keep]
    data = np.ones(len(src), dtype=np.float64)
    return sp.csr_matrix((data, (src, dst)), shape=(g.n, g.n))


def _unit(x: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(x)
    if norm == 0.0:
        return np.zeros_like(x)
    return x / norm


def hits(g: FollowGraph, nonreciprocal_only: bool = False, iters: int = 10
         ) -> tuple[np.ndarray, np.ndarray]:
    """Authority and hub vectors after ``iters`` L2-normalized sweeps."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if g.n == 0:
        return np.zeros(0), np.zeros(0)
    a = adjacency(g, nonreciprocal_only)
    at = a.T.tocsr()
    hub = np.full(g.n, 1.0 / math.sqrt(g.n))
    auth = np.zeros(g.n)
    for _ in range(iters):
        auth = _unit(at @ hub)
        hub = _unit(a @ auth)
    return auth, hub


def pagerank(g: FollowGraph, nonreciprocal_only: bool = False,
             damping: float = 0.9, iters: int = 100) -> np.ndarray:
    """Power iteration with uniform teleport; dangling mass spread uniformly."""
    if not 0.0 < damping < 1.0:
        raise ValueError("damping must be in (0, 1)")
    n = g.n
    if n == 0:
        return np.zeros(0)
    a = adjacency(g, nonreciprocal_only)
    out = np.asarray(a.sum(axis=1)).ravel()
    dangling = out == 0
    inv = np.zeros(n)
    inv[~dangling] = 1.0 / out[~dangling]
    # column-stochastic transition on non-dangling rows
    pt = (sp.diags(inv) @ a).T.tocsr()
    x = np.full(n, 1.0 / n)
    for _ in range(iters):
        spread = x[dangling].sum() / n
        x = damping * (pt @ x + spread) + (1.0 - damping) / n
    return x


def adamic_adar(g: FollowGraph, v: int, mode: str = "sum") -> float:
    """Adamic/Adar between ``v`` and every follower of ``v``'s friends.

    Shared friends are the common items; each weighs ``1/ln(followers)``.
    """
    if mode not in ("sum", "mean"):
        raise ValueError(f"mode must be 'sum' or 'mean', got {mode!r}")
    index: dict[int, float] = {}
    for z in g.friends(v):
        deg = g.in_degree(z)
        weight = 1.0 / math.log(deg) if deg >= 2 else 0.0
        for w in g.followers(z):
            if w != v:
                index[w] = index.get(w, 0.0) + weight
    return aggregate_aa(list(index.values()), mode)


def aggregate_aa(values: list[float], mode: str = "sum") -> float:
    """Sum or mean of per-candidate scores; 0 for no candidates."""
    if not values:
        return 0.0
    total = math.fsum(values)
    return total if mode == "sum" else total / len(values)


def baseline_scores(g: FollowGraph, config: BaselineConfig,
                    targets: list[int] | None = None) -> dict[int, float]:
    """Scores for ``targets`` (dense ids; all accounts when None)."""
    nodes = range(g.n) if targets is None else targets
    m = config.method
    if m in ("FW", "FW_nr", "FR", "FR_nr"):
        return {v: float(degree_score(g, v, m)) for v in nodes}
    if m in ("HITS", "HITS_nr"):
        auth, _ = hits(g, m == "HITS_nr", config.hits_iters)
        return {v: float(auth[v]) for v in nodes}
    if m in ("PR", "PR_nr"):
        pr = pagerank(g, m == "PR_nr", config.pr_damping, config.pr_iters)
        return {v: float(pr[v]) for v in nodes}
    mode = "sum" if m == "AD_sum" else "mean"
    return {v: adamic_adar(g, v, mode) for v in nodes}

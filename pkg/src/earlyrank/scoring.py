"""Imitation ratios, early-adopter scores and future-popularity scores."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .graph import FollowGraph
from .imitation import FactorSet, NO_FACTORS

E_VARIANTS = ("E1", "E2")
AGGREGATIONS = ("sum", "sum_union", "g_index")

# hand-tuned g-index parameters keyed by (E variant, reciprocity, similarity)
DEFAULT_G_PARAM = {
    ("E1", False, False): 50000.0,
    ("E1", True, False): 100000.0,
    ("E1", False, True): 50000.0,
    ("E1", True, True): 50000.0,
    ("E2", False, False): 1.0,
    ("E2", True, False): 10.0,
    ("E2", False, True): 1.0,
    ("E2", True, True): 10.0,
}


def default_g_param(e_variant: str, factors: FactorSet) -> float:
    return DEFAULT_G_PARAM[(e_variant, factors.use_nonrec, factors.use_sim)]


@dataclass(frozen=True)
class ScoreConfig:
    e_variant: str = "E2"
    agg: str = "sum"
    factors: FactorSet = NO_FACTORS
    g_param_c: float | None = None

    def __post_init__(self):
        if self.e_variant not in E_VARIANTS:
            raise ValueError(f"e_variant must be one of {E_VARIANTS}")
        if self.agg not in AGGREGATIONS:
            raise ValueError(f"agg must be one of {AGGREGATIONS}")
        if self.agg == "sum_union" and self.e_variant != "E1":
            raise ValueError("sum_union is only defined for E1")
        if self.g_param_c is not None and not self.g_param_c > 0:
            raise ValueError("g_param_c must be positive")

    @property
    def c(self) -> float:
        if self.g_param_c is not None:
            return self.g_param_c
        return default_g_param(self.e_variant, self.factors)

    @classmethod
    def from_name(cls, name: str, factors: FactorSet = NO_FACTORS,
                  c: float | None = None) -> "ScoreConfig":
        """``f1-sum``, ``f1-sum-union``, ``f1-g``, ``f2-sum`` or ``f2-g``."""
        table = {
            "f1-sum": ("E1", "sum"),
            "f1-sum-union": ("E1", "sum_union"),
            "f1-g": ("E1", "g_index"),
            "f2-sum": ("E2", "sum"),
            "f2-g": ("E2", "g_index"),
        }
        if name not in table:
            raise ValueError(f"unknown score {name!r}; choose from {sorted(table)}")
        e, agg = table[name]
        return cls(e, agg, factors, c)

    @property
    def label(self) -> str:
        name = {"sum": "sum", "sum_union": "sum-union", "g_index": "g"}[self.agg]
        return f"f{self.e_variant[1]}-{name}({self.factors.label})"


@dataclass
class Ranking:
    """Accounts (external ids) by descending score, ties by ascending id."""
    entries: list[tuple[int, float]] = field(default_factory=list)
    method: str = ""

    @classmethod
    def from_scores(cls, scores: dict[int, float], method: str = "") -> "Ranking":
        for acc, s in scores.items():
            if not math.isfinite(s):
                raise ValueError(f"non-finite score for account {acc}")
        entries = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls([(a, float(s)) for a, s in entries], method)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def accounts(self) -> list[int]:
        return [a for a, _ in self.entries]

    def scores(self) -> dict[int, float]:
        return dict(self.entries)

    def write(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            if self.method:
                fh.write(f"# method={self.method}\n")
            for rank, (acc, score) in enumerate(self.entries, start=1):
                fh.write(f"{rank}\t{acc}\t{score!r}\n")

    @classmethod
    def read(cls, path: str | os.PathLike) -> "Ranking":
        method = ""
        scores: dict[int, float] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\r\n")
                if line.startswith("#"):
                    if line.startswith("# method="):
                        method = line[len("# method="):].strip()
                    continue
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 3 fields")
                try:
                    acc, score = int(parts[1]), float(parts[2])
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: malformed ranking line") from None
                if acc in scores:
                    raise ValueError(f"{path}:{lineno}: duplicate account {acc}")
                scores[acc] = score
        return cls.from_scores(scores, method)


# ---- per-account scores ----------------------------------------------------

def imitation_ratios(g: FollowGraph, cf: np.ndarray) -> np.ndarray:
    """``I(u)`` for all accounts, clamped to ``[0, 1]``; 0 where undefined."""
    deg_in = np.fromiter((len(x) for x in g.follower_pos), dtype=np.float64, count=g.n)
    deg_out = np.fromiter((len(x) for x in g.friend_pos), dtype=np.float64, count=g.n)
    denom = deg_in * deg_out
    out = np.zeros(g.n, dtype=np.float64)
    np.divide(cf, denom, out=out, where=denom > 0)
    return np.clip(out, 0.0, 1.0)


def imitation_ratio(g: FollowGraph, cf: Sequence[float], u: int) -> float:
    denom = g.in_degree(u) * g.out_degree(u)
    if denom == 0:
        return 0.0
    return min(1.0, max(0.0, float(cf[u]) / denom))


def _followers_not_shared(g: FollowGraph, u: int, v: int) -> int:
    fu = g.follower_pos[u]
    return len(fu) - len(fu.keys() & g.follower_pos[v].keys())


def early_adopter_score(g: FollowGraph, cf: Sequence[float], u: int, v: int,
                        variant: str = "E2") -> float:
    ratio = imitation_ratio(g, cf, u)
    if variant == "E2":
        return ratio
    if variant == "E1":
        if ratio == 0.0:
            return 0.0
        return ratio * _followers_not_shared(g, u, v)
    raise ValueError(f"unknown early-adopter variant {variant!r}")


def _follower_scores(g: FollowGraph, ratios: np.ndarray, v: int,
                     variant: str) -> list[float]:
    fol = g.followers(v)
    if variant == "E2":
        return [float(ratios[u]) for u in fol]
    if variant == "E1":
        return [float(ratios[u]) * _followers_not_shared(g, u, v) if ratios[u] else 0.0
                for u in fol]
    raise ValueError(f"unknown early-adopter variant {variant!r}")


def future_popularity_sum(g: FollowGraph, cf: Sequence[float], v: int,
                          e_variant: str = "E2") -> float:
    return math.fsum(early_adopter_score(g, cf, u, v, e_variant)
                     for u in g.followers(v))


def future_popularity_sum_union(g: FollowGraph, cf: Sequence[float], v: int) -> float:
    """Expected number of second-hop followers that copy at least one link to ``v``.

    Copy events of one second-hop follower are treated as independent, each
    with probability ``I(u)`` of the intermediary ``u``.
    """
    fol_v = g.follower_pos[v]
    ratio = {u: imitation_ratio(g, cf, u) for u in fol_v}
    second: set[int] = set()
    for u in fol_v:
        second.update(g.follower_pos[u])
    terms = []
    for w in sorted(second):
        miss = 1.0
        for u in g.friend_pos[w].keys() & fol_v.keys():
            miss *= 1.0 - ratio[u]
        terms.append(1.0 - miss)
    return math.fsum(terms)


def rational_g_index(values: Iterable[float], c: float = 1.0) -> float:
    """Rational g-index of non-negative values with parameter ``c``.

    The integer part is the largest ``g`` with ``g**2 <= c * sum(top g)``,
    padding with zeros past the end of the list.  The fraction interpolates
    linearly between the squares ``g**2`` and ``(g+1)**2``.
    """
    if not c > 0 or not math.isfinite(c):
        raise ValueError("c must be a positive finite number")
    vals = sorted((float(x) for x in values), reverse=True)
    for x in vals:
        if not math.isfinite(x) or x < 0:
            raise ValueError(f"values must be finite and non-negative, got {x}")
    prefix = [0.0]
    for x in vals:
        prefix.append(prefix[-1] + x)
    n = len(vals)

    def s(k: int) -> float:
        return prefix[min(k, n)]

    # c*S(g) - g**2 is concave in g, so the feasible g form a prefix
    g = 0
    while g < n and (g + 1) ** 2 <= c * s(g + 1):
        g += 1
    if g == n and n > 0:
        # zero padding: S stays at its total, so g = floor(sqrt(c * S(n)))
        total = c * prefix[n]
        g = max(n, int(math.sqrt(total)))
        while (g + 1) ** 2 <= total:
            g += 1
        while g ** 2 > total:
            g -= 1
    frac = (c * s(g + 1) - g * g) / ((g + 1) ** 2 - g * g)
    return g + min(1.0, max(0.0, frac))


def future_popularity_g(g: FollowGraph, cf: Sequence[float], v: int,
                        e_variant: str = "E2", c: float = 1.0) -> float:
    return rational_g_index(
        (early_adopter_score(g, cf, u, v, e_variant) for u in g.followers(v)), c)


# ---- ranking ---------------------------------------------------------------

def score_targets(g: FollowGraph, cf: np.ndarray, targets: Iterable[int],
                  config: ScoreConfig) -> dict[int, float]:
    """Configured future-popularity score per target (dense ids)."""
    ratios = imitation_ratios(g, cf)
    out: dict[int, float] = {}
    for v in targets:
        if config.agg == "sum_union":
            out[v] = future_popularity_sum_union(g, cf, v)
            continue
        vals = _follower_scores(g, ratios, v, config.e_variant)
        if config.agg == "sum":
            out[v] = math.fsum(vals)
        else:
            out[v] = rational_g_index(vals, config.c)
    return out


def rank_accounts(g: FollowGraph, cf: np.ndarray, targets: Iterable[int],
                  config: ScoreConfig) -> Ranking:
    """Rank targets, given as external ids, by the configured score."""
    targets = list(targets)
    unknown = [t for t in targets if t not in g.index]
    if unknown:
        raise KeyError(f"unknown target account(s): {', '.join(map(str, unknown))}")
    dense = [g.index[t] for t in dict.fromkeys(targets)]
    scores = score_targets(g, cf, dense, config)
    return Ranking.from_scores({g.ids[v]: s for v, s in scores.items()}, config.label)

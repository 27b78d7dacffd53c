"""Link-copy detection over triadic closures.

A link ``w -> v`` is a candidate copy of ``u -> v`` when ``w`` also follows
``u``.  Each candidate ``u`` gets a weight from the enabled factors (creation
order, reciprocity, friend-set similarity); weights are normalized per copied
link and summed per imitated account into ``cf``.
"""
from __future__ import annotations

import math
import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .graph import FollowGraph

NONREC_VARIANTS = ("original_link", "copied_link", "both")


@dataclass(frozen=True)
class FactorSet:
    use_time: bool = False
    use_nonrec: bool = False
    use_sim: bool = False
    nonrec_variant: str = "original_link"

    def __post_init__(self):
        if self.nonrec_variant not in NONREC_VARIANTS:
            raise ValueError(f"nonrec_variant must be one of {NONREC_VARIANTS}")

    @classmethod
    def parse(cls, text: str, nonrec_variant: str = "original_link") -> "FactorSet":
        """Parse ``none`` or a comma set of ``t``, ``r``, ``s``."""
        text = text.strip()
        flags: set[str] = set()
        if text and text != "none":
            flags = {f.strip() for f in text.split(",")}
            unknown = flags - {"t", "r", "s"}
            if unknown:
                raise ValueError(f"unknown factor(s): {','.join(sorted(unknown))}")
        return cls("t" in flags, "r" in flags, "s" in flags, nonrec_variant)

    @property
    def label(self) -> str:
        flags = [f for f, on in (("t", self.use_time), ("r", self.use_nonrec),
                                 ("s", self.use_sim)) if on]
        return ",".join(flags) if flags else "none"


NO_FACTORS = FactorSet()


def structure(g: FollowGraph, u: int, v: int, w: int) -> bool:
    """True when ``u->v``, ``w->v`` and ``w->u`` all exist."""
    if u == v or v == w or u == w:
        return False
    fp = g.friend_pos
    return v in fp[u] and v in fp[w] and u in fp[w]


def time_ok(g: FollowGraph, u: int, v: int, w: int) -> bool:
    """``w->v`` is newer than both ``w->u`` and ``u->v``."""
    if not structure(g, u, v, w):
        raise ValueError(f"no candidate triangle for u={u}, v={v}, w={w}")
    fw = g.friend_pos[w]
    fv = g.follower_pos[v]
    return fw[v] < fw[u] and fv[w] < fv[u]


def nonrec(g: FollowGraph, u: int, v: int, w: int,
           variant: str = "original_link") -> bool:
    fp = g.friend_pos
    if variant == "original_link":
        return u not in fp[v]
    if variant == "copied_link":
        return w not in fp[v]
    if variant == "both":
        return u not in fp[v] and w not in fp[v]
    raise ValueError(f"unknown nonrec variant {variant!r}")


def sim(g: FollowGraph, a: int, b: int) -> float:
    """Jaccard similarity of friend sets; 0 when both are empty."""
    fa = g.friend_pos[a]
    fb = g.friend_pos[b]
    inter = len(fa.keys() & fb.keys())
    union = len(fa) + len(fb) - inter
    if union == 0:
        return 0.0
    return inter / union


def _candidates(g: FollowGraph, w: int, v: int, factors: FactorSet):
    """Candidates of edge ``w->v`` with their unnormalized weights.

    Returns ``(cands, weights)``; ``weights`` is None when all weights are 1.
    """
    fp = g.friend_pos
    if factors.use_nonrec and factors.nonrec_variant != "original_link":
        # copied link must be non-reciprocal
        if w in fp[v]:
            return (), None
    if factors.use_nonrec and factors.nonrec_variant != "copied_link":
        back = fp[v]
        cands = [u for u in g.follower_pos[v].keys() & fp[w].keys()
                 if u not in back]
    else:
        cands = g.follower_pos[v].keys() & fp[w].keys()
    if factors.use_time and cands:
        fw = fp[w]
        fv = g.follower_pos[v]
        pv = fw[v]
        pw = fv[w]
        cands = [u for u in cands if pv < fw[u] and pw < fv[u]]
    if not cands:
        return (), None
    if not factors.use_sim:
        return cands, None
    weights = [sim(g, u, v) * sim(g, w, u) for u in cands]
    return cands, weights


def copy_prob(g: FollowGraph, w: int, v: int,
              factors: FactorSet = NO_FACTORS) -> list[tuple[int, float]]:
    """Normalized copy probabilities over the candidates of edge ``w->v``.

    Sorted by candidate id.  Empty when no candidate carries weight.
    """
    if not g.has_edge(w, v):
        raise ValueError(f"edge {w}->{v} not in graph")
    cands, weights = _candidates(g, w, v, factors)
    pairs = _normalize(cands, weights)
    return sorted(pairs)


def _normalize(cands, weights) -> list[tuple[int, float]]:
    if not cands:
        return []
    if weights is None:
        p = 1.0 / len(cands)
        return [(u, p) for u in cands]
    total = math.fsum(weights)
    if total == 0.0:
        return []
    return [(u, x / total) for u, x in zip(cands, weights) if x > 0.0]


# ---- global computation ----------------------------------------------------

_WORKER_GRAPH: FollowGraph | None = None


def _scan(g: FollowGraph, lo: int, hi: int, factors: FactorSet
          ) -> tuple[np.ndarray, np.ndarray]:
    """Per-candidate contributions for seq-ordered edges ``lo..hi``."""
    us: list[int] = []
    ps: list[float] = []
    src = g.edge_src[lo:hi].tolist()
    dst = g.edge_dst[lo:hi].tolist()
    if factors == NO_FACTORS:
        # fast path: plain intersection, uniform weights
        fol = g.follower_pos
        fri = g.friend_pos
        for w, v in zip(src, dst):
            cands = fol[v].keys() & fri[w].keys()
            if cands:
                us.extend(cands)
                ps.extend([1.0 / len(cands)] * len(cands))
    else:
        for w, v in zip(src, dst):
            cands, weights = _candidates(g, w, v, factors)
            if not cands:
                continue
            pairs = _normalize(cands, weights)
            us.extend(u for u, _ in pairs)
            ps.extend(p for _, p in pairs)
    return np.asarray(us, dtype=np.int64), np.asarray(ps, dtype=np.float64)


def _scan_worker(args):
    lo, hi, factors = args
    return _scan(_WORKER_GRAPH, lo, hi, factors)


def _chunks(m: int, size: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + size, m)) for lo in range(0, m, size)]


def iter_contributions(g: FollowGraph, factors: FactorSet = NO_FACTORS,
                       workers: int = 1, chunk_size: int = 50_000
                       ) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(candidates, probabilities)`` arrays chunk by chunk, in seq order."""
    chunks = _chunks(g.m, chunk_size)
    if workers <= 1 or len(chunks) <= 1:
        for lo, hi in chunks:
            yield _scan(g, lo, hi, factors)
        return
    global _WORKER_GRAPH
    _WORKER_GRAPH = g
    try:
        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            yield from pool.map(_scan_worker,
                                [(lo, hi, factors) for lo, hi in chunks])
    finally:
        _WORKER_GRAPH = None


def cf_all(g: FollowGraph, factors: FactorSet = NO_FACTORS, workers: int = 1,
           deterministic: bool = True, chunk_size: int = 50_000) -> np.ndarray:
    """Expected imitation count of every account.

    Edges are visited in ascending seq order.  In deterministic mode each
    account's contributions are added one at a time in that order, so the
    result does not depend on ``workers`` or ``chunk_size``.  Fast mode sums
    per-chunk partial tables instead.
    """
    cf = np.zeros(g.n, dtype=np.float64)
    for us, ps in iter_contributions(g, factors, workers, chunk_size):
        if deterministic:
            np.add.at(cf, us, ps)
        else:
            cf += np.bincount(us, weights=ps, minlength=g.n)
    return cf


def cf_local(g: FollowGraph, u: int, factors: FactorSet = NO_FACTORS) -> float:
    """``cf`` of a single account from its followers' friend lists.

    Every edge ``w->v`` with ``w`` a follower of ``u`` and ``v`` a friend of
    ``u`` is a link ``u`` may have been copied on; the full candidate set of
    that edge is still needed for normalization.
    """
    fp = g.friend_pos
    mine = g.friends(u)
    found: list[tuple[int, int, int]] = []
    for w in g.followers(u):
        fw = fp[w]
        for v in mine:
            if v in fw and v != w:
                found.append((g.seq_of(w, v), w, v))
    found.sort()
    total = 0.0
    for _, w, v in found:
        cands, weights = _candidates(g, w, v, factors)
        for x, p in _normalize(cands, weights):
            if x == u:
                total += p
    return total


def explain_edges(g: FollowGraph, factors: FactorSet = NO_FACTORS
                  ) -> Iterator[tuple[int, int, int, int, float]]:
    """``(seq, w, v, candidate, probability)`` rows for every copied-link candidate."""
    for s, w, v in g.edges():
        for x, p in copy_prob(g, w, v, factors):
            yield s, w, v, x, p


def default_workers() -> int:
    env = os.environ.get("EARLYRANK_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"EARLYRANK_WORKERS must be an integer, got {env!r}") from None
    return 1

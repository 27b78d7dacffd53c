"""Synthetic follow graphs with planted link copies.

Each event picks a random actor ``w``.  The actor looks at a random friend
``u`` and, with ``u``'s copy propensity, copies one of ``u``'s newest
non-reciprocal links ``u -> v`` by creating ``w -> v``.  That copy is planted
ground truth.  Otherwise ``w`` creates a fresh link: preferential attachment
on follower counts (plus an offset) thinned by the target's latent appeal.
Designated adopters never copy by default.  They often discover a recently
created account instead and are choosier about appeal, which is what makes
them worth imitating.  Fresh links may be followed back.

The first ``n_events`` events form the snapshot; ``horizon_events`` more
events run afterwards and only feed the future non-reciprocal follower counts.
"""
from __future__ import annotations

import os
import random
from dataclasses import dataclass, field
from pathlib import Path

from .graph import AccountMeta, FollowGraph

COPY_RETRIES = 5
ATTACH_RETRIES = 50


@dataclass(frozen=True)
class SynthParams:
    n_accounts: int = 2000
    n_events: int = 30000
    adopter_fraction: float = 0.1
    copy_prob_adopter: float = 0.6
    copy_prob_other: float = 0.0
    horizon_events: int = 30000
    seed: int = 0
    reciprocation_prob: float = 0.1
    discovery_prob: float = 1.0
    recent_fraction: float = 0.1
    initial_fraction: float = 0.05
    inactive_fraction: float = 0.1
    reciprocal_noise: float = 0.0
    seconds_per_event: int = 600
    taste: float = 3.5
    copy_window: int = 2
    attach_offset: int = 100
    established_adopters: bool = True
    adopters_copy: bool = False

    def __post_init__(self):
        for name in ("adopter_fraction", "copy_prob_adopter", "copy_prob_other",
                     "reciprocation_prob", "discovery_prob", "recent_fraction",
                     "initial_fraction", "inactive_fraction", "reciprocal_noise"):
            x = getattr(self, name)
            if not 0.0 <= x <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {x}")
        if self.copy_prob_adopter < self.copy_prob_other:
            raise ValueError("copy_prob_adopter must be >= copy_prob_other")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.n_accounts < 2:
            raise ValueError("n_accounts must be at least 2")
        if self.n_events < self.n_accounts:
            raise ValueError("n_events must be >= n_accounts")
        if self.horizon_events < 0:
            raise ValueError("horizon_events must be >= 0")
        if self.copy_window < 1:
            raise ValueError("copy_window must be >= 1")
        if self.attach_offset < 1:
            raise ValueError("attach_offset must be >= 1")
        if self.taste < 0:
            raise ValueError("taste must be >= 0")
        if self.seconds_per_event <= 0:
            raise ValueError("seconds_per_event must be positive")

    @property
    def snapshot_time(self) -> int:
        return self.n_events * self.seconds_per_event


@dataclass
class CopyEvent:
    copied_seq: int
    original_seq: int
    imitated: int


@dataclass
class SynthResult:
    params: SynthParams
    edges: list[tuple[int, int, int]]
    meta: list[AccountMeta]
    copy_events: list[CopyEvent]
    adopters: frozenset[int]
    true_copy_count: dict[int, int] = field(default_factory=dict)
    appeal: list[float] = field(default_factory=list)

    def graph(self) -> FollowGraph:
        return FollowGraph.build(self.edges, accounts=[r.account for r in self.meta])

    def write(self, out_dir: str | os.PathLike, prefix: str = "synth"
              ) -> tuple[Path, Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        edge_path = out / f"{prefix}.edges.tsv"
        meta_path = out / f"{prefix}.meta.tsv"
        truth_path = out / f"{prefix}.truth.tsv"
        with open(edge_path, "w", encoding="utf-8") as fh:
            for s, a, b in self.edges:
                fh.write(f"{s}\t{a}\t{b}\n")
        with open(meta_path, "w", encoding="utf-8") as fh:
            fh.write(f"# snapshot_time={self.params.snapshot_time}\n")
            for r in self.meta:
                fh.write(f"{r.account}\t{r.created_at}\t{int(r.active_at_horizon)}"
                         f"\t{r.fw_nr_horizon}\n")
        with open(truth_path, "w", encoding="utf-8") as fh:
            fh.write("# copied_seq\toriginal_seq\timitated_account\n")
            for e in self.copy_events:
                fh.write(f"{e.copied_seq}\t{e.original_seq}\t{e.imitated}\n")
        return edge_path, meta_path, truth_path


def read_truth(path: str | os.PathLike) -> list[CopyEvent]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip() or line.startswith("#"):
                continue
            a, b, c = line.rstrip("\n").split("\t")
            events.append(CopyEvent(int(a), int(b), int(c)))
    return events


class _World:
    """Mutable generator state.  Accounts are ``0..n-1``."""

    def __init__(self, params: SynthParams, rng: random.Random):
        self.p = params
        self.rng = rng
        n = params.n_accounts
        self.friends: list[list[int]] = [[] for _ in range(n)]
        self.friend_set: list[set[int]] = [set() for _ in range(n)]
        self.followers: list[set[int]] = [set() for _ in range(n)]
        self.seq_of: dict[tuple[int, int], int] = {}
        self.copy_edges: set[tuple[int, int]] = set()
        self.present: list[int] = []
        self.attach_pool: list[int] = []
        self.next_seq = 1
        self.edges: list[tuple[int, int, int]] = []
        self.copies: list[CopyEvent] = []
        self.in_horizon = False
        self.active = [True] * n
        self.copy_prob = [params.copy_prob_other] * n
        self.adopter = [False] * n
        self.appeal = [1.0] * n

    def arrive(self, a: int) -> None:
        self.present.append(a)
        self.attach_pool.extend([a] * self.p.attach_offset)

    def add_edge(self, a: int, b: int) -> int:
        s = self.next_seq
        self.next_seq += 1
        self.friends[a].append(b)
        self.friend_set[a].add(b)
        self.followers[b].add(a)
        self.seq_of[(a, b)] = s
        self.attach_pool.append(b)
        if not self.in_horizon:
            self.edges.append((s, a, b))
        return s

    def usable(self, a: int) -> bool:
        return not self.in_horizon or self.active[a]

    def can_link(self, w: int, t: int) -> bool:
        # never turn a planted copy into a reciprocal pair
        return (t != w and t not in self.friend_set[w]
                and (t, w) not in self.copy_edges and self.usable(t))

    def try_copy(self, w: int) -> bool:
        rng = self.rng
        u = rng.choice(self.friends[w])
        fu = self.friends[u]
        if not fu or rng.random() >= self.copy_prob[u]:
            return False
        lo = max(0, len(fu) - self.p.copy_window)
        for _ in range(COPY_RETRIES):
            v = fu[rng.randrange(lo, len(fu))]
            if (v != w and v not in self.friend_set[w]
                    and u not in self.friend_set[v]
                    and w not in self.friend_set[v] and self.usable(v)):
                s = self.add_edge(w, v)
                self.copy_edges.add((w, v))
                if not self.in_horizon:
                    self.copies.append(CopyEvent(s, self.seq_of[(u, v)], u))
                return True
        return False

    def try_noise(self, w: int) -> bool:
        """Friend-circle closure: reciprocal triangle, not a copy."""
        rng = self.rng
        u = rng.choice(self.friends[w])
        if not self.friends[u]:
            return False
        v = rng.choice(self.friends[u])
        if not self.can_link(w, v) or not self.can_link(v, w):
            return False
        self.add_edge(w, v)
        self.add_edge(v, w)
        return True

    def fresh(self, w: int, recent: list[int]) -> None:
        rng = self.rng
        p = self.p
        discover = self.adopter[w] and recent and rng.random() < p.discovery_prob
        power = p.taste if discover else 1.0
        for _ in range(ATTACH_RETRIES):
            t = rng.choice(recent) if discover else rng.choice(self.attach_pool)
            if self.can_link(w, t) and rng.random() < self.appeal[t] ** power:
                break
        else:
            return
        self.add_edge(w, t)
        if rng.random() < p.reciprocation_prob and self.can_link(t, w):
            self.add_edge(t, w)

    def step(self, recent: list[int]) -> None:
        rng = self.rng
        w = rng.choice(self.present)
        if not self.usable(w):
            return
        if self.friends[w]:
            if (self.p.reciprocal_noise and rng.random() < self.p.reciprocal_noise
                    and self.try_noise(w)):
                return
            # adopters find links themselves unless told otherwise
            if (self.p.adopters_copy or not self.adopter[w]) and self.try_copy(w):
                return
        # infeasible copies fall through to a fresh link
        self.fresh(w, recent)


def generate(params: SynthParams) -> SynthResult:
    """Run the event loop.  Same params (seed included) give identical output."""
    rng = random.Random(params.seed)
    n = params.n_accounts
    world = _World(params, rng)

    # arrival schedule: a few accounts at t=0, the rest spread over the snapshot
    n_initial = max(2, round(params.initial_fraction * n))
    arrivals = list(range(n))
    rng.shuffle(arrivals)
    arrival_time = {a: 0 for a in arrivals[:n_initial]}
    for a in arrivals[n_initial:]:
        arrival_time[a] = rng.randrange(params.n_events)
    schedule = sorted(arrivals, key=lambda a: (arrival_time[a], a))

    n_adopters = round(params.adopter_fraction * n)
    if params.established_adopters:
        adopters = frozenset(schedule[:n_adopters])
    else:
        adopters = frozenset(rng.sample(range(n), n_adopters))
    for a in adopters:
        world.adopter[a] = True
        world.copy_prob[a] = params.copy_prob_adopter
    for a in range(n):
        world.active[a] = rng.random() >= params.inactive_fraction
        world.appeal[a] = rng.random()

    recent_len = max(1, round(params.recent_fraction * n))
    k = 0
    recent: list[int] = []
    for t in range(params.n_events + params.horizon_events):
        if t == params.n_events:
            world.in_horizon = True
        if k < n and arrival_time[schedule[k]] <= t:
            while k < n and arrival_time[schedule[k]] <= t:
                world.arrive(schedule[k])
                k += 1
            recent = world.present[-recent_len:]
        world.step(recent)

    snapshot_edges = world.edges
    fw_nr = [sum(1 for f in world.followers[a] if f not in world.friend_set[a])
             for a in range(n)]
    meta = [AccountMeta(a, arrival_time[a] * params.seconds_per_event,
                        world.active[a], fw_nr[a]) for a in range(n)]
    counts: dict[int, int] = {}
    for e in world.copies:
        counts[e.imitated] = counts.get(e.imitated, 0) + 1
    return SynthResult(params, snapshot_edges, meta, world.copies, adopters, counts,
                       world.appeal)

"""Directed follow graph with creation-ordered adjacency.

Accounts carry a dense internal id ``0..n-1`` and the external id found in
the meta file.  Every edge has a global creation sequence number; friend and
follower lists are kept newest-first, which is the order a crawler gets back
from the follow API.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

KINDS = ("friends", "followers", "friends_nr", "followers_nr")


class SnapshotError(ValueError):
    """Malformed snapshot input.  The message names the file and line."""

    def __init__(self, message: str, path: str | os.PathLike | None = None,
                 line: int | None = None):
        where = ""
        if path is not None:
            where = f"{os.fspath(path)}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


@dataclass(frozen=True)
class AccountMeta:
    account: int
    created_at: int
    active_at_horizon: bool
    fw_nr_horizon: int | None = None


class FollowGraph:
    """Immutable follow graph.

    Build it with :meth:`build` or :func:`load_snapshot`.  Node arguments to
    every query method are dense ids; ``external_id``/``dense_id`` translate.
    """

    def __init__(self, ids: Sequence[int], src: np.ndarray, dst: np.ndarray,
                 seq: np.ndarray):
        # src/dst/seq already validated and sorted by ascending seq
        self.ids: list[int] = list(ids)
        self.index: dict[int, int] = {x: i for i, x in enumerate(self.ids)}
        self.n = len(self.ids)
        self.m = int(len(src))
        self.edge_src = src
        self.edge_dst = dst
        self.edge_seq = seq

        friends: list[list[int]] = [[] for _ in range(self.n)]
        followers: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in zip(src[::-1].tolist(), dst[::-1].tolist()):
            friends[u].append(v)
            followers[v].append(u)
        self._friends = [tuple(x) for x in friends]
        self._followers = [tuple(x) for x in followers]
        # position maps double as O(1) membership sets
        self.friend_pos: list[dict[int, int]] = [
            {v: i for i, v in enumerate(lst)} for lst in self._friends]
        self.follower_pos: list[dict[int, int]] = [
            {v: i for i, v in enumerate(lst)} for lst in self._followers]

    @classmethod
    def build(cls, edges: Iterable[tuple[int, int, int]],
              accounts: Iterable[int] | None = None,
              path: str | os.PathLike | None = None,
              lines: Sequence[int] | None = None) -> "FollowGraph":
        """Validate ``(seq, follower, followee)`` triples given in external ids.

        ``accounts`` fixes the node universe; when omitted it is every id that
        appears in an edge.  Dense ids follow ascending external id.
        """
        edges = list(edges)
        if accounts is None:
            universe = {x for _, a, b in edges for x in (a, b)}
        else:
            accounts = list(accounts)
            universe = set(accounts)
            if len(universe) != len(accounts):
                raise SnapshotError("duplicate account id in account list", path)
        ids = sorted(universe)
        index = {x: i for i, x in enumerate(ids)}

        def where(k: int) -> int | None:
            return lines[k] if lines is not None else None

        seen_pairs: set[tuple[int, int]] = set()
        seen_seq: set[int] = set()
        src = np.empty(len(edges), dtype=np.int64)
        dst = np.empty(len(edges), dtype=np.int64)
        seq = np.empty(len(edges), dtype=np.int64)
        for k, (s, a, b) in enumerate(edges):
            if a == b:
                raise SnapshotError(f"self-loop on account {a}", path, where(k))
            if a not in index or b not in index:
                bad = a if a not in index else b
                raise SnapshotError(f"unknown account {bad}", path, where(k))
            if (a, b) in seen_pairs:
                raise SnapshotError(f"duplicate edge {a}->{b}", path, where(k))
            if s in seen_seq:
                raise SnapshotError(f"non-unique seq {s}", path, where(k))
            if s < 0:
                raise SnapshotError(f"negative seq {s}", path, where(k))
            seen_pairs.add((a, b))
            seen_seq.add(s)
            src[k] = index[a]
            dst[k] = index[b]
            seq[k] = s
        order = np.argsort(seq, kind="stable")
        return cls(ids, src[order], dst[order], seq[order])

    # ---- id mapping ------------------------------------------------------

    def external_id(self, u: int) -> int:
        return self.ids[u]

    def dense_id(self, account: int) -> int:
        try:
            return self.index[account]
        except KeyError:
            raise KeyError(f"unknown account {account}") from None

    def _check(self, u: int) -> None:
        if not (isinstance(u, (int, np.integer)) and 0 <= u < self.n):
            raise IndexError(f"invalid account index {u!r}")

    # ---- adjacency -------------------------------------------------------

    def friends(self, u: int) -> tuple[int, ...]:
        """Accounts ``u`` follows, newest link first."""
        self._check(u)
        return self._friends[u]

    def followers(self, u: int) -> tuple[int, ...]:
        """Accounts following ``u``, newest link first."""
        self._check(u)
        return self._followers[u]

    def friends_nr(self, u: int) -> list[int]:
        self._check(u)
        back = self.follower_pos[u]
        return [v for v in self._friends[u] if v not in back]

    def followers_nr(self, u: int) -> list[int]:
        self._check(u)
        out = self.friend_pos[u]
        return [v for v in self._followers[u] if v not in out]

    def neighbors(self, u: int, kind: str) -> list[int]:
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
        return list(getattr(self, kind)(u))

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.friend_pos[u]

    def reciprocal(self, u: int, v: int) -> bool:
        return v in self.friend_pos[u] and u in self.friend_pos[v]

    def idx(self, owner: int, kind: str, member: int) -> int | None:
        """0-based position of ``member`` in ``owner``'s list (0 = newest)."""
        self._check(owner)
        if kind == "friends":
            return self.friend_pos[owner].get(member)
        if kind == "followers":
            return self.follower_pos[owner].get(member)
        raise ValueError(f"kind must be 'friends' or 'followers', got {kind!r}")

    def out_degree(self, u: int) -> int:
        return len(self._friends[u])

    def in_degree(self, u: int) -> int:
        return len(self._followers[u])

    @cached_property
    def _seq_lookup(self) -> dict[tuple[int, int], int]:
        return dict(zip(zip(self.edge_src.tolist(), self.edge_dst.tolist()),
                        self.edge_seq.tolist()))

    def seq_of(self, u: int, v: int) -> int:
        """Creation sequence number of edge ``u->v``."""
        return self._seq_lookup[(u, v)]

    def edges(self) -> Iterable[tuple[int, int, int]]:
        """``(seq, follower, followee)`` in dense ids, ascending seq."""
        return zip(self.edge_seq.tolist(), self.edge_src.tolist(),
                   self.edge_dst.tolist())

    def nonreciprocal_mask(self) -> np.ndarray:
        """Boolean mask over the seq-ordered edge arrays: reverse edge absent."""
        fp = self.friend_pos
        return np.fromiter(
            (u not in fp[v] for u, v in zip(self.edge_src.tolist(),
                                            self.edge_dst.tolist())),
            dtype=bool, count=self.m)

    def __repr__(self) -> str:
        return f"FollowGraph(n={self.n}, m={self.m})"


# ---- file formats ----------------------------------------------------------

def _data_lines(path: str | os.PathLike):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, line


def _parse_int(text: str, what: str, path, lineno: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise SnapshotError(f"bad {what} {text!r}", path, lineno) from None


def read_meta(path: str | os.PathLike) -> dict[int, AccountMeta]:
    """Meta TSV: ``account_id, created_at, active{0,1}, fw_nr_horizon``."""
    table: dict[int, AccountMeta] = {}
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if len(parts) == 3:
            parts.append("")
        if len(parts) != 4:
            raise SnapshotError(f"expected 4 fields, got {len(parts)}", path, lineno)
        acc = _parse_int(parts[0], "account id", path, lineno)
        if acc < 0:
            raise SnapshotError(f"negative account id {acc}", path, lineno)
        created = _parse_int(parts[1], "created_at", path, lineno)
        if parts[2] not in ("0", "1"):
            raise SnapshotError(f"active flag must be 0 or 1, got {parts[2]!r}",
                                path, lineno)
        horizon = None
        if parts[3].strip():
            horizon = _parse_int(parts[3], "fw_nr_horizon", path, lineno)
            if horizon < 0:
                raise SnapshotError("negative fw_nr_horizon", path, lineno)
        if acc in table:
            raise SnapshotError(f"duplicate account {acc}", path, lineno)
        table[acc] = AccountMeta(acc, created, parts[2] == "1", horizon)
    return table


def read_edges(path: str | os.PathLike) -> tuple[list[tuple[int, int, int]], list[int]]:
    edges: list[tuple[int, int, int]] = []
    lines: list[int] = []
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if len(parts) != 3:
            raise SnapshotError(f"expected 3 fields, got {len(parts)}", path, lineno)
        edges.append((_parse_int(parts[0], "seq", path, lineno),
                      _parse_int(parts[1], "follower id", path, lineno),
                      _parse_int(parts[2], "followee id", path, lineno)))
        lines.append(lineno)
    return edges, lines


def load_snapshot(edge_path: str | os.PathLike, meta_path: str | os.PathLike
                  ) -> tuple[FollowGraph, dict[int, AccountMeta]]:
    """Load a graph and its meta table.

    The returned meta dict is keyed by dense id.
    """
    meta_ext = read_meta(meta_path)
    edges, lines = read_edges(edge_path)
    g = FollowGraph.build(edges, accounts=list(meta_ext), path=edge_path,
                          lines=lines)
    meta = {g.index[acc]: rec for acc, rec in meta_ext.items()}
    return g, meta


def write_edges(g: FollowGraph, path: str | os.PathLike) -> None:
    ids = g.ids
    with open(path, "w", encoding="utf-8") as fh:
        for s, u, v in g.edges():
            fh.write(f"{s}\t{ids[u]}\t{ids[v]}\n")


def write_meta(records: Iterable[AccountMeta], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in sorted(records, key=lambda r: r.account):
            horizon = "" if r.fw_nr_horizon is None else str(r.fw_nr_horizon)
            fh.write(f"{r.account}\t{r.created_at}\t{int(r.active_at_horizon)}"
                     f"\t{horizon}\n")

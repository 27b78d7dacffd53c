"""Command-line entry point.

Every command that writes a file also writes ``<file>.manifest.json`` with the
resolved flags, input checksums and tool version.  Exit status is 0 on
success, 1 on a usage error and 2 on a data error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .baselines import CLI_NAMES, BaselineConfig, baseline_scores
from .evaluation import (extract_cohort, logistic_combine, median_labels, ndcg_at_k,
                         scatter_export, spearman_rho, write_metric_report)
from .graph import SnapshotError, load_snapshot, read_meta
from .imitation import NONREC_VARIANTS, FactorSet, cf_all, default_workers, explain_edges
from .scoring import Ranking, ScoreConfig, rank_accounts
from .synthgen import SynthParams, generate

SCORES = ("f1-sum", "f1-sum-union", "f1-g", "f2-sum", "f2-g")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---- helpers ---------------------------------------------------------------

def sha256_of(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out: str | os.PathLike, command: str, args: argparse.Namespace,
                   inputs: Sequence[str | os.PathLike], seeds: dict | None = None) -> Path:
    flags = {k: v for k, v in sorted(vars(args).items())
             if k not in ("func", "command")}
    manifest = {
        "command": command,
        "flags": flags,
        "inputs": {str(p): sha256_of(p) for p in inputs},
        "version": __version__,
        "seeds": seeds or {},
    }
    path = Path(f"{out}.manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n",
                    encoding="utf-8")
    return path


def read_accounts(path: str | os.PathLike) -> list[int]:
    """One external account id per line; ``#`` lines and blanks skipped."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                out.append(int(line))
            except ValueError:
                raise SnapshotError(f"bad account id {line!r}", path, lineno) from None
    return out


def meta_snapshot_time(path: str | os.PathLike) -> int | None:
    """Value of a ``# snapshot_time=N`` header line, if the meta file has one."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            if key.strip() == "snapshot_time":
                return int(value)
    return None


def _factors(args) -> FactorSet:
    try:
        return FactorSet.parse(args.factors, args.nonrec_variant)
    except ValueError as exc:
        raise UsageError(f"--factors: {exc}") from None


def _target_ids(g, args) -> list[int]:
    if args.targets is None:
        return list(g.ids)
    return read_accounts(args.targets)


# ---- commands --------------------------------------------------------------

def cmd_rank(args) -> int:
    factors = _factors(args)
    try:
        config = ScoreConfig.from_name(args.score, factors, args.gc)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    g, _ = load_snapshot(args.edges, args.meta)
    cf = cf_all(g, factors, workers=args.workers)
    ranking = rank_accounts(g, cf, _target_ids(g, args), config)
    ranking.write(args.out)
    write_manifest(args.out, "rank", args, _inputs(args, "edges", "meta", "targets"))
    return 0


def cmd_baseline(args) -> int:
    config = BaselineConfig(CLI_NAMES[args.method], hits_iters=args.iters or 10,
                            pr_iters=args.iters or 100, pr_damping=args.damping)
    g, _ = load_snapshot(args.edges, args.meta)
    targets = _target_ids(g, args)
    unknown = [t for t in targets if t not in g.index]
    if unknown:
        raise DataError(f"unknown target account(s): {unknown[:5]}")
    scores = baseline_scores(g, config, [g.index[t] for t in dict.fromkeys(targets)])
    ranking = Ranking.from_scores({g.ids[v]: s for v, s in scores.items()},
                                  config.method)
    ranking.write(args.out)
    write_manifest(args.out, "baseline", args, _inputs(args, "edges", "meta", "targets"))
    return 0


def _gains(meta_path, accounts) -> dict[int, float]:
    meta = read_meta(meta_path)
    gains = {}
    for a in accounts:
        rec = meta.get(a)
        if rec is None:
            raise DataError(f"account {a} is missing from {meta_path}")
        if rec.fw_nr_horizon is None:
            raise DataError(f"account {a} has no fw_nr_horizon in {meta_path}")
        gains[a] = float(rec.fw_nr_horizon)
    return gains


def cmd_eval(args) -> int:
    ranking = Ranking.read(args.ranking)
    if len(ranking) == 0:
        raise DataError(f"{args.ranking}: empty ranking")
    gains = _gains(args.meta, ranking.accounts)
    if args.metric == "spearman":
        scores = ranking.scores()
        value = spearman_rho(scores, {a: gains[a] for a in scores})
    else:
        value = ndcg_at_k(ranking.accounts, gains, args.k)
    metric = args.metric if args.metric == "spearman" else f"ndcg@{args.k}"
    method = ranking.method or Path(args.ranking).name
    text = write_metric_report([(metric, method, args.cohort, value)], args.out)
    sys.stdout.write(text)
    if args.scatter:
        scatter_export(ranking.scores(), gains, args.scatter)
    if args.out:
        write_manifest(args.out, "eval", args, _inputs(args, "ranking", "meta"))
    return 0


def cmd_cohort(args) -> int:
    g, meta = load_snapshot(args.edges, args.meta)
    t = args.snapshot_time
    if t is None:
        t = meta_snapshot_time(args.meta)
    if t is None:
        t = max((r.created_at for r in meta.values()), default=0)
    cohort = extract_cohort(g, meta, t, args.weeks, args.min_followers,
                            args.active_only)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(f"# cohort={cohort.label} snapshot_time={t}\n")
        for acc in sorted(g.ids[u] for u in cohort.accounts):
            fh.write(f"{acc}\n")
    args.snapshot_time = t
    write_manifest(args.out, "cohort", args, _inputs(args, "edges", "meta"))
    return 0


def cmd_cf(args) -> int:
    factors = _factors(args)
    g, _ = load_snapshot(args.edges, args.meta)
    cf = cf_all(g, factors, workers=args.workers)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(f"# factors={factors.label} nonrec_variant={factors.nonrec_variant}\n")
        for u in range(g.n):
            fh.write(f"{g.ids[u]}\t{float(cf[u])!r}\n")
    write_manifest(args.out, "cf", args, _inputs(args, "edges", "meta"))
    if args.explain:
        ids = g.ids
        with open(args.explain, "w", encoding="utf-8") as fh:
            for s, w, v, x, p in explain_edges(g, factors):
                fh.write(f"{s}\t{ids[w]}\t{ids[v]}\t{ids[x]}\t{p!r}\n")
        write_manifest(args.explain, "cf", args, _inputs(args, "edges", "meta"))
    return 0


def cmd_combine(args) -> int:
    tables = [Ranking.read(p) for p in args.features]
    common = set(tables[0].accounts)
    for t in tables[1:]:
        common &= set(t.accounts)
    if args.targets:
        common &= set(read_accounts(args.targets))
    if not common:
        raise DataError("feature tables share no accounts")
    meta = read_meta(args.meta)
    labeled = {a: float(meta[a].fw_nr_horizon) for a in sorted(common)
               if a in meta and meta[a].fw_nr_horizon is not None}
    if not 0.0 < args.label_quantile < 1.0:
        raise UsageError("--label-quantile must be in (0, 1)")
    labels = median_labels(labeled, args.label_quantile)
    try:
        result = logistic_combine([t.scores() for t in tables], labels,
                                  folds=args.folds, seed=args.seed)
    except (ValueError, KeyError) as exc:
        raise DataError(str(exc)) from None
    names = [t.method or Path(p).name for t, p in zip(tables, args.features)]
    ranking = Ranking.from_scores(result.scores, "lr(" + "+".join(names) + ")")
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(f"# method={ranking.method}\n")
        fh.write(f"# fold_seed={result.seed} folds={result.folds}\n")
        fh.write(f"# label = 1 if fw_nr_horizon > quantile {args.label_quantile:g} "
                 "of labeled accounts else 0\n")
        coefs = " ".join(f"{n}={c!r}" for n, c in zip(names, result.coefficients))
        fh.write(f"# intercept={result.intercept!r} {coefs}\n")
        fh.write(f"# converged={int(result.converged)}\n")
        for rank, (acc, score) in enumerate(ranking, start=1):
            fh.write(f"{rank}\t{acc}\t{score!r}\n")
    write_manifest(args.out, "combine", args,
                   _inputs(args, "meta", "targets") + list(args.features),
                   seeds={"fold_seed": args.seed})
    return 0


def cmd_synth(args) -> int:
    try:
        params = SynthParams(
            n_accounts=args.n_accounts, n_events=args.n_events,
            adopter_fraction=args.adopter_fraction,
            copy_prob_adopter=args.copy_prob_adopter,
            copy_prob_other=args.copy_prob_other,
            horizon_events=args.horizon_events, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = generate(params)
    paths = result.write(args.out_dir, args.prefix)
    for p in paths:
        write_manifest(p, "synth", args, [], seeds={"synth_seed": args.seed})
    return 0


def _inputs(args, *names) -> list[str]:
    return [getattr(args, n) for n in names if getattr(args, n, None)]


# ---- parser ----------------------------------------------------------------

def _add_snapshot(p: argparse.ArgumentParser) -> None:
    p.add_argument("--edges", required=True, help="edge TSV: seq, follower, followee")
    p.add_argument("--meta", required=True, help="meta TSV")


def _add_factors(p: argparse.ArgumentParser) -> None:
    p.add_argument("--factors", default="none",
                   help="'none' or a comma set of t (time), r (reciprocity), s (similarity)")
    p.add_argument("--nonrec-variant", choices=NONREC_VARIANTS, default="original_link")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $EARLYRANK_WORKERS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="earlyrank",
                     description="Rank new accounts by the imitation behaviour of their followers.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rank", help="rank target accounts by a future-popularity score")
    _add_snapshot(p)
    _add_factors(p)
    p.add_argument("--score", choices=SCORES, default="f2-sum")
    p.add_argument("--gc", type=float, default=None, help="g-index parameter c")
    p.add_argument("--targets", help="file of account ids (default: every account)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("baseline", help="rank target accounts by a baseline method")
    _add_snapshot(p)
    p.add_argument("--method", choices=sorted(CLI_NAMES), required=True)
    p.add_argument("--iters", type=int, default=None,
                   help="iterations (default: 10 for HITS, 100 for PageRank)")
    p.add_argument("--damping", type=float, default=0.9)
    p.add_argument("--targets")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("eval", help="score a ranking against fw_nr_horizon")
    p.add_argument("--ranking", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--metric", choices=("spearman", "ndcg"), default="spearman")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--cohort", default="all", help="label echoed in the report")
    p.add_argument("--scatter", help="also write a rank-vs-rank TSV here")
    p.add_argument("--out", help="also write the report line here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cohort", help="list new accounts with enough followers")
    _add_snapshot(p)
    p.add_argument("--weeks", type=int, required=True)
    p.add_argument("--min-followers", type=int, required=True)
    p.add_argument("--active-only", action="store_true")
    p.add_argument("--snapshot-time", type=int, default=None,
                   help="default: the meta header, else the newest created_at")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cohort)

    p = sub.add_parser("cf", help="export expected copy counts")
    _add_snapshot(p)
    _add_factors(p)
    p.add_argument("--explain", help="also dump per-edge candidate probabilities here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cf)

    p = sub.add_parser("combine", help="logistic-regression combination of score tables")
    p.add_argument("--features", nargs="+", required=True, help="ranking/score TSVs")
    p.add_argument("--meta", required=True)
    p.add_argument("--targets")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--label-quantile", type=float, default=0.5,
                   help="positive label threshold on fw_nr_horizon (default: median)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_combine)

    p = sub.add_parser("synth", help="generate a synthetic graph with planted copies")
    defaults = SynthParams()
    p.add_argument("--n-accounts", type=int, default=defaults.n_accounts)
    p.add_argument("--n-events", type=int, default=defaults.n_events)
    p.add_argument("--adopter-fraction", type=float, default=defaults.adopter_fraction)
    p.add_argument("--copy-prob-adopter", type=float, default=defaults.copy_prob_adopter)
    p.add_argument("--copy-prob-other", type=float, default=defaults.copy_prob_other)
    p.add_argument("--horizon-events", type=int, default=defaults.horizon_events)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--prefix", default="synth")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "workers", 0) is None:
            args.workers = default_workers()
        if getattr(args, "workers", 1) < 1:
            raise UsageError("--workers must be >= 1")
        if getattr(args, "k", 1) < 1:
            raise UsageError("--k must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (SnapshotError, DataError, KeyError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"earlyrank: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

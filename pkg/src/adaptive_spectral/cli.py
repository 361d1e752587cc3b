"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import evaluation as ev
from .minhash import (
    DEFAULT_K,
    FastaError,
    SketchFormatError,
    collision_from_sketches,
    draw_seeds,
    jaccard_exact,
    parse_fasta,
    read_sketches,
    sketch_many,
    write_sketches,
)
from .spectral import EstimatorMethod, SpectralConfig, VNormSource, estimate
from .synthdata import gen_crowd_instance

CSV_HEADER = ["algorithm", "budget", "trials", "exact_error", "exact_error_se", "top2k_recall", "mean_pulls", "seed"]
PROG = "adaptive-spectral"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    subcommand: str
    flags: Dict[str, object] = field(default_factory=dict)
    seed: int = 0
    out: str = "-"

    def echo(self) -> str:
        parts = [f"{k}={_fmt_flag(v)}" for k, v in sorted(self.flags.items()) if k not in ("func", "config", "threads", "out")]
        return f"# {PROG} {self.subcommand} " + " ".join(parts)


def _fmt_flag(v) -> str:
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt_flag(x) for x in v)
    return str(v)


def _number_list(text: str) -> List[float]:
    try:
        vals = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _budget_list(text: str) -> List[int]:
    vals = _number_list(text)
    out = [int(round(v)) for v in vals]
    if any(abs(o - v) > 1e-9 * max(1.0, abs(v)) for o, v in zip(out, vals)):
        raise argparse.ArgumentTypeError("budgets must be integers")
    return out


def _optional_float(text: str) -> Optional[float]:
    if str(text).lower() in ("none", "off", ""):
        return None
    return float(text)


def _method(text: str) -> EstimatorMethod:
    try:
        return EstimatorMethod(str(text).lower().replace("-", "_"))
    except ValueError:
        choices = ", ".join(m.value for m in EstimatorMethod)
        raise argparse.ArgumentTypeError(f"unknown estimator {text!r} (choose from {choices})") from None


def _add_common(p: argparse.ArgumentParser, out_required: bool = False) -> None:
    p.add_argument("--seed", type=int, default=0, help="root seed")
    p.add_argument("--out", default=None if out_required else "-", required=out_required, help="output path ('-' = stdout)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads for trials")
    p.add_argument("--config", default=None, help="file of 'key = value' lines; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Adaptive spectral top-k and thresholding experiments.")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)

    p = sub.add_parser("crowd-topk", help="synthetic crowdsourcing top-k curves")
    _add_common(p)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--budgets", type=_budget_list, default=[1_000_000, 2_000_000, 5_000_000])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--calibration", type=int, default=20, help="gold questions per worker")
    p.add_argument("--m-max-factor", type=_optional_float, default=10.0, help="per-item cap m_max = factor*sqrt(T); 'none' disables")
    p.add_argument("--estimator", type=_method, default=EstimatorMethod.FULL_SVD)
    p.add_argument("--beta-a", type=float, default=1.0)
    p.add_argument("--beta-b", type=float, default=5.0)
    p.add_argument("--metrics", default="exact,top2k", help="subset of exact,top2k")
    p.set_defaults(func=cmd_crowd_topk)

    p = sub.add_parser("crowd-threshold", help="synthetic crowdsourcing thresholding")
    _add_common(p)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.5, help="reject items with p below this")
    p.add_argument("--beta", type=float, default=0.65, help="accept items with p above this")
    p.add_argument("--scales", type=_number_list, default=[2000.0, 5000.0, 10000.0], help="constant scales (each one is a budget point)")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--calibration", type=int, default=20)
    p.add_argument("--c-lower", type=float, default=0.5)
    p.set_defaults(func=cmd_crowd_threshold)

    p = sub.add_parser("sketch", help="FASTA to binary min-hash sketch file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--k", type=int, default=DEFAULT_K, help="k-mer length")
    p.add_argument("--hashes", type=int, default=1000)
    p.add_argument("--canonical", action="store_true", help="hash canonical (strand-independent) k-mers")
    _add_common(p, out_required=True)
    p.set_defaults(func=cmd_sketch)

    p = sub.add_parser("align-topk", help="top-k overlaps of a reference read")
    _add_common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--synthetic", action="store_true", help="planted synthetic genome and reads")
    src.add_argument("--fasta", dest="reads_fasta", default=None, help="FASTA of reads; the first record is the reference")
    p.add_argument("--calibration-fasta", default=None, help="FASTA of random calibration reads")
    p.add_argument("--genome", type=int, default=20000)
    p.add_argument("--reads", dest="n_reads", type=int, default=300, help="number of synthetic reads")
    p.add_argument("--len", dest="read_len", type=int, default=1000)
    p.add_argument("--k-top", type=int, default=5)
    p.add_argument("--k", dest="kmer", type=int, default=DEFAULT_K, help="k-mer length")
    p.add_argument("--hashes", type=int, default=3000, help="hash functions in the pool")
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--calibration", type=int, default=20)
    p.add_argument("--repeat-copies", type=int, default=40)
    p.add_argument("--budgets", type=_budget_list, default=[12000, 24000, 48000, 96000])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--m-max-factor", type=_optional_float, default=10.0)
    p.add_argument("--canonical", action="store_true")
    p.add_argument("--metrics", default="exact,top2k")
    p.set_defaults(func=cmd_align_topk)

    p = sub.add_parser("estimate", help="one-shot spectral estimate from a sketch file")
    _add_common(p)
    p.add_argument("--sketches", required=True)
    p.add_argument("--reference", required=True, help="id of the reference read")
    p.add_argument("--calibration-prefix", default=None, help="ids with this prefix are calibration reads")
    p.add_argument("--method", type=_method, default=EstimatorMethod.SPLIT_SVD)
    p.add_argument("--c-lower", type=float, default=0.5)
    p.add_argument("--constant-scale", type=float, default=1.0)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("hardness", help="gap and H2 report of an instance")
    _add_common(p)
    srcs = p.add_mutually_exclusive_group(required=True)
    srcs.add_argument("--values", default=None, help="file of item values (whitespace or comma separated)")
    srcs.add_argument("--crowd", type=int, default=None, help="draw a crowd instance with this many items")
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(func=cmd_hardness)
    return parser


# config files


def read_config(path: str) -> Dict[str, str]:
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise DataError(f"{path}:{lineno}: expected 'key = value'")
                key, value = (s.strip() for s in line.split("=", 1))
                out[key.replace("-", "_")] = value
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from None
    return out


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.subcommand is None:
        raise UsageError(f"{PROG}: a subcommand is required")
    if getattr(args, "config", None) is None:
        return args
    values = read_config(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.subcommand]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        if key not in actions or key in ("config", "func", "help"):
            raise UsageError(f"{args.config}: unknown key {key!r} for {args.subcommand}")
        act = actions[key]
        if isinstance(act, argparse._StoreTrueAction):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
            continue
        try:
            defaults[key] = act.type(raw) if act.type else raw
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"{args.config}: bad value for {key}: {exc}") from None
    for key in defaults:
        actions[key].required = False
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# validation helpers


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise UsageError(message)


def _metrics_flags(text: str):
    names = {s.strip() for s in text.split(",") if s.strip()}
    _require(bool(names) and names <= {"exact", "top2k"}, f"--metrics must name exact and/or top2k, got {text!r}")
    return "exact" in names, "top2k" in names


def _fnum(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return repr(float(x))


def _open_out(path: str):
    if path == "-":
        return sys.stdout, False
    try:
        return open(path, "w", newline="", encoding="utf-8"), True
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from None


def write_curve_csv(points: Sequence[ev.CurvePoint], cfg: RunConfig) -> None:
    fh, close = _open_out(cfg.out)
    try:
        fh.write(cfg.echo() + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in points:
            w.writerow(
                [
                    p.algorithm,
                    p.budget,
                    p.trials,
                    _fnum(p.exact_topk_error_rate),
                    _fnum(p.se),
                    _fnum(p.top2k_recall_mean),
                    _fnum(p.mean_pulls_consumed),
                    p.seed,
                ]
            )
    finally:
        if close:
            fh.close()


def _summary(points: Sequence[ev.CurvePoint]) -> str:
    parts = []
    for p in points:
        parts.append(f"{p.algorithm}@{p.budget}: err={p.exact_topk_error_rate:.3g} recall={p.top2k_recall_mean:.3g}")
    return "; ".join(parts)


# subcommands


def cmd_crowd_topk(args, cfg: RunConfig) -> str:
    _require(args.n >= 2, "--n must be >= 2")
    _require(1 <= args.k and 2 * args.k <= args.n, "--k must satisfy 1 <= k and 2k <= n")
    _require(args.trials >= 1, "--trials must be >= 1")
    _require(all(b >= args.n for b in args.budgets), "every budget must be >= n")
    _require(args.calibration >= 0, "--calibration must be >= 0")
    _require(args.beta_a > 0 and args.beta_b > 0, "Beta parameters must be positive")
    _require(args.m_max_factor is None or args.m_max_factor > 0, "--m-max-factor must be positive or 'none'")
    exact, top2k = _metrics_flags(args.metrics)
    if top2k:
        _require(4 * args.k <= args.n, "top2k needs 4k <= n")
    exp = ev.crowd_experiment(
        args.n,
        args.k,
        n_calibration=args.calibration,
        method=args.estimator,
        m_max_factor=args.m_max_factor,
        beta_a=args.beta_a,
        beta_b=args.beta_b,
        measure_exact=exact,
        measure_top2k=top2k,
    )
    points = ev.run_experiment(exp, args.budgets, args.trials, args.seed, args.threads)
    write_curve_csv(points, cfg)
    return _summary(points)


def cmd_crowd_threshold(args, cfg: RunConfig) -> str:
    _require(args.n >= 2, "--n must be >= 2")
    _require(0.0 <= args.alpha < args.beta <= 1.0, "need 0 <= alpha < beta <= 1")
    _require(all(s > 0 for s in args.scales), "--scales must be positive")
    _require(args.trials >= 1, "--trials must be >= 1")
    _require(args.calibration >= 1, "--calibration must be >= 1 (thresholding needs ||v||)")
    _require(0.0 < args.c_lower < 1.0, "--c-lower must lie in (0, 1)")
    pts = ev.run_crowd_threshold(
        args.n,
        args.alpha,
        args.beta,
        args.scales,
        args.trials,
        args.seed,
        n_calibration=args.calibration,
        c_lower=args.c_lower,
        threads=args.threads,
    )
    curve = [ev.CurvePoint(p.algorithm, p.budget, p.trials, p.error_rate, math.nan, p.mean_pulls, p.seed) for p in pts]
    write_curve_csv(curve, cfg)
    return "; ".join(f"{p.algorithm}@{p.budget}: err={p.error_rate:.3g} pulls={p.mean_pulls:.4g}" for p in pts)


def cmd_sketch(args, cfg: RunConfig) -> str:
    _require(1 <= args.k <= 32, "--k must lie in 1..32")
    _require(args.hashes >= 1, "--hashes must be >= 1")
    reads = parse_fasta(args.input)
    short = [r.id for r in reads if len(r) < args.k]
    if short:
        raise DataError(f"{args.input}: read {short[0]!r} is shorter than k={args.k}")
    seeds = draw_seeds(args.hashes, args.seed)
    sketches = sketch_many(reads, args.k, seeds, args.canonical)
    try:
        with open(args.out, "wb") as fh:
            write_sketches(sketches, fh)
    except OSError as exc:
        raise DataError(f"cannot write {args.out}: {exc}") from None
    return f"sketched {len(reads)} reads with {args.hashes} hashes (k={args.k}) into {args.out}"


def _real_pool(args) -> ev.CollisionPool:
    from .minhash import collision_matrix

    reads = parse_fasta(args.reads_fasta)
    if len(reads) < 2:
        raise DataError(f"{args.reads_fasta}: need a reference and at least one read")
    cal = []
    if args.calibration_fasta:
        cal = [replace(r, is_calibration=True) for r in parse_fasta(args.calibration_fasta)]
    reference, data = reads[0], reads[1:]
    for r in [reference, *data, *cal]:
        if len(r) < args.kmer:
            raise DataError(f"read {r.id!r} is shorter than k={args.kmer}")
    if len(data) < 2 * args.k_top:
        raise DataError(f"need at least 2k = {2 * args.k_top} reads besides the reference")
    js = np.array([jaccard_exact(reference.sequence, r.sequence, args.kmer) for r in data])
    order = np.lexsort((np.arange(js.size), -js))
    if js[order[args.k_top - 1]] == js[order[args.k_top]]:
        raise DataError("exact Jaccard ties at the top-k boundary; the truth is not well defined")
    seeds = draw_seeds(args.hashes, args.seed)
    cm = collision_matrix(reference, data + cal, args.kmer, seeds, args.canonical)
    mask = np.array([False] * len(data) + [True] * len(cal))
    return ev.pool_from_collisions(cm.Y, mask, np.sort(order[: args.k_top]), cm.read_ids)


def cmd_align_topk(args, cfg: RunConfig) -> str:
    _require(args.k_top >= 1, "--k-top must be >= 1")
    _require(1 <= args.kmer <= 32, "--k must lie in 1..32")
    _require(args.hashes >= 1, "--hashes must be >= 1")
    _require(args.trials >= 1, "--trials must be >= 1")
    _require(all(b >= 1 for b in args.budgets), "budgets must be positive")
    _require(args.m_max_factor is None or args.m_max_factor > 0, "--m-max-factor must be positive or 'none'")
    exact, top2k = _metrics_flags(args.metrics)
    if args.synthetic:
        _require(args.read_len >= args.kmer, "--len must be >= k")
        _require(args.genome >= 2 * args.read_len, "--genome must be at least twice --len")
        _require(args.n_reads >= 4 * args.k_top, "--reads must be >= 4 * k-top")
        _require(0.0 <= args.noise < 1.0, "--noise must lie in [0, 1)")
        _require(args.calibration >= 0 and args.repeat_copies >= 0, "counts must be >= 0")
        setup = ev.AlignmentSetup(
            G=args.genome,
            n_reads=args.n_reads,
            L=args.read_len,
            kmer=args.kmer,
            k_top=args.k_top,
            noise_rate=args.noise,
            n_calibration=args.calibration,
            n_hashes=args.hashes,
            repeat_copies=args.repeat_copies,
            repeat_length=min(300, args.read_len),
            repeat_anchor=min(600, args.read_len - min(300, args.read_len)),
            canonical=args.canonical,
            seed=args.seed,
        )
        pool = ev.build_collision_pool(setup)
    else:
        pool = _real_pool(args)
    n = pool.X.shape[0]
    need = 4 * args.k_top if top2k else 2 * args.k_top
    _require(n >= need, f"need at least {need} reads for k-top={args.k_top}")
    for b in args.budgets:
        if b < n:
            raise UsageError(f"budget {b} is below the number of reads {n}")
        if b // n > pool.X.shape[1]:
            raise UsageError(f"budget {b} needs {b // n} hashes per read but the pool has {pool.X.shape[1]}")
    exp = ev.alignment_experiment(
        pool, args.k_top, m_max_factor=args.m_max_factor, measure_exact=exact, measure_top2k=top2k
    )
    points = ev.run_experiment(exp, args.budgets, args.trials, args.seed, args.threads)
    write_curve_csv(points, cfg)
    return _summary(points)


def cmd_estimate(args, cfg: RunConfig) -> str:
    _require(0.0 < args.c_lower < 1.0, "--c-lower must lie in (0, 1)")
    _require(args.constant_scale > 0, "--constant-scale must be positive")
    try:
        with open(args.sketches, "rb") as fh:
            sketches = read_sketches(fh)
    except OSError as exc:
        raise DataError(f"cannot read {args.sketches}: {exc}") from None
    by_id = {s.read_id: s for s in sketches}
    if args.reference not in by_id:
        raise DataError(f"{args.sketches}: no read with id {args.reference!r}")
    ref = by_id[args.reference]
    others = [s for s in sketches if s.read_id != args.reference]
    if args.calibration_prefix:
        cal = [s for s in others if s.read_id.startswith(args.calibration_prefix)]
        data = [s for s in others if not s.read_id.startswith(args.calibration_prefix)]
    else:
        cal, data = [], others
    if len(data) < 2:
        raise DataError("need at least two non-calibration reads")
    X = 1.0 - collision_from_sketches(ref, data).Y.astype(float)
    cal_rows = 1.0 - collision_from_sketches(ref, cal).Y.astype(float) if cal else None
    v_norm = None if cal_rows is None else float(np.linalg.norm(cal_rows.mean(axis=0)))
    if v_norm == 0.0:
        raise DataError("calibration reads collide with the reference on every hash")
    spec = SpectralConfig(
        c_lower=args.c_lower,
        constant_scale=args.constant_scale,
        v_hat_method=args.method,
        v_norm_source=VNormSource.CALIBRATION if cal else VNormSource.NONE,
    )
    reference = None if cal_rows is None else cal_rows.mean(axis=0)
    res = estimate(X, v_norm, spec, reference=reference, support_rows=cal_rows)
    fh, close = _open_out(cfg.out)
    try:
        fh.write(cfg.echo() + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["read_id", "u_hat", "overlap_score", "ci_half_width"])
        ci = "nan" if res.ci_half_width is None else _fnum(res.ci_half_width)
        for s, u in zip(data, res.u_hat):
            w.writerow([s.read_id, _fnum(u), _fnum(1.0 - u) if v_norm is not None else "nan", ci])
    finally:
        if close:
            fh.close()
    best = data[int(np.argmin(res.u_hat))].read_id
    return f"estimated {len(data)} reads against {args.reference} ({res.method.value}); strongest overlap: {best}"


def _read_values(path: str) -> np.ndarray:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    vals = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        for tok in line.replace(",", " ").split():
            try:
                vals.append(float(tok))
            except ValueError:
                raise DataError(f"{path}:{lineno}: not a number: {tok!r}") from None
    if not vals:
        raise DataError(f"{path}: no values")
    return np.array(vals)


def cmd_hardness(args, cfg: RunConfig) -> str:
    _require(args.k >= 1, "--k must be >= 1")
    if args.crowd is not None:
        _require(args.crowd > args.k, "--crowd must exceed k")
        u = gen_crowd_instance(args.crowd, args.seed).u
    else:
        u = _read_values(args.values)
    if not args.k < u.size:
        raise DataError(f"need more than k={args.k} values, got {u.size}")
    try:
        h = ev.instance_hardness(u, args.k)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    fh, close = _open_out(cfg.out)
    try:
        fh.write(cfg.echo() + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "k", "u_k", "positive_gap", "H2", "lower_bound", "upper_bound"])
        n = u.size
        g = h.positive_gap
        w.writerow([n, args.k, _fnum(h.sorted_values[args.k - 1]), _fnum(g), _fnum(h.H2), _fnum((args.k + 1) / g**2), _fnum(n / g**2)])
    finally:
        if close:
            fh.close()
    return f"n={u.size} k={args.k} gap={h.positive_gap:.4g} H2={h.H2:.4g}"


def execute(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be >= 1")
        flags = {k: (v.value if hasattr(v, "value") else v) for k, v in vars(args).items() if k not in ("func", "subcommand")}
        cfg = RunConfig(args.subcommand, flags, args.seed, args.out)
        summary = args.func(args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FastaError, SketchFormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    print(summary, file=sys.stderr)
    return 0


def main() -> None:
    sys.exit(execute())

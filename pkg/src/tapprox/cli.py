"""Command-line front end: tensor files, run reports, and five subcommands.

    tapprox info FILE
    tapprox gen OUT --dims M1,M2,M3 --mlrank P,Q,R [--noise S] [--seed N]
    tapprox bsta FILE P Q R OUT_PREFIX [options]
    tapprox flrta FILE P Q R OUT_PREFIX [options]
    tapprox bench FILE P,Q,R [P,Q,R ...] [options]

Tensor files are plain text: optional '#' comment lines, a header
``t3 m1 m2 m3``, then ``m1*m2*m3`` whitespace-separated reals in
lexicographic order (third index fastest).  Matrices use the same layout
with a ``m2 rows cols`` header.  Values are written with 17 significant
digits, so write/read round-trips are bit-exact.

All reports are deterministic given flags, seeds and input files;
measured wall time is printed to stderr only, never into a report.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .bsta import BstaOptions, bsta_solve
from .flrta import DEFAULT_TRIALS, SelectionError, flrta_approx, select_indices
from .tensor_core import DenseTensor3, as_matrix, hs_norm, multilinear_rank

DEFAULT_SEED = 12345
SEED_ENV_VAR = "TAPPROX_SEED"


# ---------------------------------------------------------------------------
# formatting helpers

def _fmt_float(x: float) -> str:
    return f"{float(x):.17g}"


def _fmt_floats(xs) -> str:
    return ",".join(_fmt_float(x) for x in xs)


def _fmt_dims(xs) -> str:
    return "x".join(str(int(x)) for x in xs)


def _fmt_ints(xs) -> str:
    return ",".join(str(int(x)) for x in xs)


def _fmt_bool(x: bool) -> str:
    return "true" if x else "false"


@dataclass
class RunReport:
    """Ordered key=value record of one command.

    Serialized reports never contain wall-clock time or file paths, so a
    rerun with the same flags, seed and input produces identical bytes.
    """

    entries: list[tuple[str, str]] = field(default_factory=list)

    def add(self, key: str, value: str) -> None:
        self.entries.append((key, value))

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.entries)

    def to_json(self) -> str:
        return json.dumps(dict(self.entries), indent=2) + "\n"


# ---------------------------------------------------------------------------
# tensor / matrix files

def _read_numeric_file(path: str, magic: str, ndims: int):
    dims: tuple[int, ...] | None = None
    expected = 0
    values: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if dims is None:
                want = f"'{magic} " + " ".join(f"n{d + 1}" for d in range(ndims)) + "'"
                if tokens[0] != magic or len(tokens) != 1 + ndims:
                    raise ValueError(
                        f"{path}: line {lineno}: expected header {want}, got {line!r}"
                    )
                try:
                    dims = tuple(int(tok) for tok in tokens[1:])
                except ValueError:
                    raise ValueError(
                        f"{path}: line {lineno}: header dimensions must be "
                        f"integers, got {line!r}"
                    ) from None
                if min(dims) < 1:
                    raise ValueError(
                        f"{path}: line {lineno}: dimensions must be positive, got {dims}"
                    )
                expected = int(np.prod(dims))
                continue
            for tok in tokens:
                try:
                    val = float(tok)
                except ValueError:
                    raise ValueError(
                        f"{path}: line {lineno}: could not parse {tok!r} as a real number"
                    ) from None
                if not np.isfinite(val):
                    raise ValueError(f"{path}: line {lineno}: non-finite value {tok!r}")
                if len(values) >= expected:
                    raise ValueError(
                        f"{path}: line {lineno}: more than {expected} values"
                    )
                values.append(val)
    if dims is None:
        raise ValueError(f"{path}: missing '{magic}' header line")
    if len(values) != expected:
        raise ValueError(f"{path}: expected {expected} values, found {len(values)}")
    return dims, np.array(values, dtype=np.float64)


def read_tensor_file(path: str) -> DenseTensor3:
    """Read a ``t3`` tensor file."""
    dims, values = _read_numeric_file(path, "t3", 3)
    return DenseTensor3.from_flat(values, dims)


def write_tensor_file(path: str, t: DenseTensor3, comments=()) -> None:
    """Write a ``t3`` tensor file (one mode-3 fiber per line, 17 digits)."""
    m1, m2, m3 = t.dims
    lines = [f"# {c}" for c in comments]
    lines.append(f"t3 {m1} {m2} {m3}")
    flat = t.data.reshape(m1 * m2, m3)
    lines.extend(" ".join(_fmt_float(v) for v in row) for row in flat)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix_file(path: str) -> np.ndarray:
    """Read an ``m2`` matrix file."""
    dims, values = _read_numeric_file(path, "m2", 2)
    return values.reshape(dims)


def write_matrix_file(path: str, m, comments=()) -> None:
    """Write an ``m2`` matrix file (one row per line, 17 digits)."""
    arr = as_matrix(m)
    lines = [f"# {c}" for c in comments]
    lines.append(f"m2 {arr.shape[0]} {arr.shape[1]}")
    lines.extend(" ".join(_fmt_float(v) for v in row) for row in arr)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# shared argument plumbing

def _triple(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"expected three comma-separated integers, got {text!r}"
        )
    try:
        return tuple(int(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected three comma-separated integers, got {text!r}"
        ) from None


def _resolve_seed(flag_value: int | None) -> int:
    if flag_value is not None:
        return flag_value
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValueError(
                f"{SEED_ENV_VAR} must be an integer, got {env!r}"
            ) from None
    return DEFAULT_SEED


def _rel_error(error: float, norm: float) -> float:
    return error / norm if norm > 0.0 else 0.0


def _emit_report(report: RunReport, prefix: str | None, as_json: bool) -> None:
    text = report.to_text()
    sys.stdout.write(text)
    if prefix is not None:
        with open(prefix + ".report.txt", "w", encoding="utf-8") as fh:
            fh.write(text)
        if as_json:
            with open(prefix + ".report.json", "w", encoding="utf-8") as fh:
                fh.write(report.to_json())


# ---------------------------------------------------------------------------
# subcommands

def cmd_info(args: argparse.Namespace) -> int:
    t = read_tensor_file(args.file)
    report = RunReport()
    report.add("command", "info")
    report.add("dims", _fmt_dims(t.dims))
    report.add("values", str(t.size))
    report.add("hs_norm", _fmt_float(hs_norm(t)))
    report.add("multilinear_rank", _fmt_dims(multilinear_rank(t)))
    sys.stdout.write(report.to_text())
    return 0


def cmd_gen(args: argparse.Namespace) -> int:
    dims, mlrank = args.dims, args.mlrank
    for k, m in zip(mlrank, dims):
        if not 1 <= k <= m:
            raise ValueError(f"mlrank {mlrank} out of range for dims {dims}")
    if args.noise < 0.0:
        raise ValueError(f"noise standard deviation must be >= 0, got {args.noise}")
    seed = _resolve_seed(args.seed)

    rng = np.random.default_rng(seed)
    core = rng.standard_normal(mlrank)
    qs = [np.linalg.qr(rng.standard_normal((m, k)))[0] for m, k in zip(dims, mlrank)]
    data = np.einsum("abc,ia,jb,kc->ijk", core, *qs, optimize=True)
    if args.noise > 0.0:
        data = data + args.noise * rng.standard_normal(dims)
    t = DenseTensor3(data)

    write_tensor_file(
        args.out,
        t,
        comments=[
            f"random tensor: dims={_fmt_dims(dims)} mlrank={_fmt_dims(mlrank)} "
            f"noise_sigma={_fmt_float(args.noise)} seed={seed}"
        ],
    )
    report = RunReport()
    report.add("command", "gen")
    report.add("dims", _fmt_dims(dims))
    report.add("mlrank", _fmt_dims(mlrank))
    report.add("noise_sigma", _fmt_float(args.noise))
    report.add("seed", str(seed))
    report.add("hs_norm", _fmt_float(hs_norm(t)))
    sys.stdout.write(report.to_text())
    return 0


def _bsta_report(t, opts, result) -> RunReport:
    norm = hs_norm(t)
    storage_dense = t.size
    storage_fact = result.core.size + sum(
        m * k for m, k in zip(t.dims, opts.target_ranks)
    )
    report = RunReport()
    report.add("command", "bsta")
    report.add("dims", _fmt_dims(t.dims))
    report.add("target_ranks", _fmt_dims(opts.target_ranks))
    report.add("init", opts.init)
    report.add("seed", str(opts.seed))
    report.add("max_sweeps", str(opts.max_sweeps))
    report.add("rel_tol", _fmt_float(opts.rel_tol))
    report.add("crit_tol", _fmt_float(opts.crit_tol))
    report.add("hs_norm", _fmt_float(norm))
    report.add("objective_final", _fmt_float(result.objective_history[-1]))
    report.add("sweeps", str(result.sweeps))
    report.add("converged", _fmt_bool(result.converged))
    report.add(
        "critical_point_residual", _fmt_float(result.critical_point_residual)
    )
    report.add("error_abs", _fmt_float(result.approx_error))
    report.add("error_rel", _fmt_float(_rel_error(result.approx_error, norm)))
    report.add("storage_dense", str(storage_dense))
    report.add("storage_factorized", str(storage_fact))
    report.add("storage_ratio", _fmt_float(storage_fact / storage_dense))
    report.add("objective_history", _fmt_floats(result.objective_history))
    return report


def cmd_bsta(args: argparse.Namespace) -> int:
    t = read_tensor_file(args.file)
    opts = BstaOptions(
        target_ranks=(args.p, args.q, args.r),
        max_sweeps=args.max_sweeps,
        rel_tol=args.rel_tol,
        init=args.init,
        seed=_resolve_seed(args.seed),
        crit_tol=args.crit_tol,
    )
    start = time.perf_counter()
    result = bsta_solve(t, opts)
    wall = time.perf_counter() - start

    prefix = args.out_prefix
    write_matrix_file(prefix + ".x.mat", result.subspaces.x.frame)
    write_matrix_file(prefix + ".y.mat", result.subspaces.y.frame)
    write_matrix_file(prefix + ".z.mat", result.subspaces.z.frame)
    write_tensor_file(prefix + ".core.t3", result.core)
    _emit_report(_bsta_report(t, opts, result), prefix, args.json)
    print(f"wall_time_s={wall:.6f}", file=sys.stderr)
    return 0


def cmd_flrta(args: argparse.Namespace) -> int:
    t = read_tensor_file(args.file)
    sizes = (args.p, args.q, args.r)
    seed = _resolve_seed(args.seed)

    start = time.perf_counter()
    degenerate = False
    try:
        sel = select_indices(t, sizes, trials=args.trials, seed=seed)
    except SelectionError as exc:
        # Every trial was singular; continue with the best-effort pick so
        # degenerate inputs (e.g. the zero tensor) still produce output.
        print(f"warning: {exc}", file=sys.stderr)
        sel = exc.selection
        degenerate = True
    fac = flrta_approx(t, sel, pinv_tol=args.pinv_tol)
    approx = fac.reconstruct()
    wall = time.perf_counter() - start

    norm = hs_norm(t)
    error = float(np.linalg.norm(t.data - approx.data))
    conds = sel.chosen_conditions

    prefix = args.out_prefix
    write_matrix_file(prefix + ".c1.mat", fac.factors[0])
    write_matrix_file(prefix + ".c2.mat", fac.factors[1])
    write_matrix_file(prefix + ".c3.mat", fac.factors[2])
    write_tensor_file(prefix + ".core.t3", fac.core)

    report = RunReport()
    report.add("command", "flrta")
    report.add("dims", _fmt_dims(t.dims))
    report.add("section_sizes", _fmt_dims(sizes))
    report.add("trials", str(args.trials))
    report.add("seed", str(seed))
    report.add(
        "pinv_tol", "auto" if args.pinv_tol is None else _fmt_float(args.pinv_tol)
    )
    report.add("degenerate", _fmt_bool(degenerate))
    report.add("i_set", _fmt_ints(sel.i_set))
    report.add("j_set", _fmt_ints(sel.j_set))
    report.add("k_set", _fmt_ints(sel.k_set))
    report.add("cond_outer", _fmt_float(conds.cond_outer))
    report.add("cond_slices", _fmt_floats(conds.cond_slices))
    report.add("hs_norm", _fmt_float(norm))
    report.add("error_abs", _fmt_float(error))
    report.add("error_rel", _fmt_float(_rel_error(error, norm)))
    report.add("storage_dense", str(t.size))
    report.add("storage_factorized", str(fac.storage_count()))
    report.add("storage_ratio", _fmt_float(fac.storage_count() / t.size))
    _emit_report(report, prefix, args.json)
    print(f"wall_time_s={wall:.6f}", file=sys.stderr)
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    t = read_tensor_file(args.file)
    norm = hs_norm(t)
    seed = _resolve_seed(args.seed)

    rows = []
    for ranks in args.ranks:
        start = time.perf_counter()
        result = bsta_solve(t, BstaOptions(target_ranks=ranks, seed=seed))
        wall = time.perf_counter() - start
        storage = result.core.size + sum(m * k for m, k in zip(t.dims, ranks))
        rows.append(
            (
                "bsta",
                ranks,
                _rel_error(result.approx_error, norm),
                f"{result.sweeps} sweeps",
                storage / t.size,
                wall,
            )
        )

        start = time.perf_counter()
        try:
            sel = select_indices(t, ranks, trials=args.trials, seed=seed)
        except SelectionError as exc:
            print(f"warning: {exc}", file=sys.stderr)
            sel = exc.selection
        fac = flrta_approx(t, sel)
        error = float(np.linalg.norm(t.data - fac.reconstruct().data))
        wall = time.perf_counter() - start
        rows.append(
            (
                "flrta",
                ranks,
                _rel_error(error, norm),
                f"{args.trials} trials",
                fac.storage_count() / t.size,
                wall,
            )
        )

    header = f"{'method':<8}{'ranks':<12}{'rel_error':<18}{'work':<14}{'storage':<12}{'wall_s':<10}"
    print(header)
    for method, ranks, rel, work, ratio, wall in rows:
        print(
            f"{method:<8}{_fmt_dims(ranks):<12}{rel:<18.9e}{work:<14}"
            f"{ratio:<12.6f}{wall:<10.3f}"
        )
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tapprox",
        description="Best subspace and fiber-sampling approximations of dense 3-tensors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_info = sub.add_parser("info", help="print dims, norm and multilinear rank")
    p_info.add_argument("file", help="tensor file (t3 format)")
    p_info.set_defaults(func=cmd_info)

    p_gen = sub.add_parser("gen", help="generate a random low-multilinear-rank tensor")
    p_gen.add_argument("out", help="output tensor file")
    p_gen.add_argument("--dims", type=_triple, required=True, metavar="M1,M2,M3")
    p_gen.add_argument("--mlrank", type=_triple, required=True, metavar="P,Q,R")
    p_gen.add_argument("--noise", type=float, default=0.0, metavar="SIGMA",
                       help="stddev of added i.i.d. Gaussian noise (default 0)")
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.set_defaults(func=cmd_gen)

    p_bsta = sub.add_parser("bsta", help="best subspace approximation by alternating relaxation")
    p_bsta.add_argument("file", help="tensor file (t3 format)")
    p_bsta.add_argument("p", type=int)
    p_bsta.add_argument("q", type=int)
    p_bsta.add_argument("r", type=int)
    p_bsta.add_argument("out_prefix", help="prefix for frames, core and report files")
    p_bsta.add_argument("--max-sweeps", type=int, default=BstaOptions.max_sweeps)
    p_bsta.add_argument("--rel-tol", type=float, default=BstaOptions.rel_tol)
    p_bsta.add_argument("--init", choices=("hosvd", "random"), default="hosvd")
    p_bsta.add_argument("--seed", type=int, default=None)
    p_bsta.add_argument("--crit-tol", type=float, default=BstaOptions.crit_tol)
    p_bsta.add_argument("--json", action="store_true", help="also write a JSON report")
    p_bsta.set_defaults(func=cmd_bsta)

    p_flrta = sub.add_parser("flrta", help="fiber-sampling low-rank approximation")
    p_flrta.add_argument("file", help="tensor file (t3 format)")
    p_flrta.add_argument("p", type=int)
    p_flrta.add_argument("q", type=int)
    p_flrta.add_argument("r", type=int)
    p_flrta.add_argument("out_prefix", help="prefix for factors, core and report files")
    p_flrta.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    p_flrta.add_argument("--seed", type=int, default=None)
    p_flrta.add_argument("--pinv-tol", type=float, default=None)
    p_flrta.add_argument("--json", action="store_true", help="also write a JSON report")
    p_flrta.set_defaults(func=cmd_flrta)

    p_bench = sub.add_parser("bench", help="compare both methods over a list of ranks")
    p_bench.add_argument("file", help="tensor file (t3 format)")
    p_bench.add_argument("ranks", type=_triple, nargs="+", metavar="P,Q,R")
    p_bench.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

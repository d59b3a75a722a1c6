"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 numeric failure, 4 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import biaxial, circle, uniaxial
from .dynamics import FLOW_VARIANTS, FlowParams, integrate
from .errors import ConvergenceError, DomainError, InputFormatError, NotUniaxialError, TableFormatError
from .piecewise import Table1D
from .quadrature import tail_l2
from .tables import TABLE_DIR_ENV, load_table, resolve_table_path, save_table
from .tensor import UNIQUE_2D_LABELS, UNIQUE_3D_LABELS
from .validation import validate_table

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

DOMAINS = {"circle": "circle", "sphere-uni": "sphere_uniaxial", "sphere-bi": "sphere_biaxial"}
SHORT = {v: k for k, v in DOMAINS.items()}
BATCH_COLUMNS = {2: ("m11", "m12"), 3: ("m11", "m22", "m33", "m12", "m13", "m23")}
FIGURES = ("eta-mu-2d", "coeff-decay-2d", "coeff-decay-uni", "coeff-decay-bi")


class UsageError(Exception):
    pass


def _say(*parts, file=None):
    print(*parts, file=file or sys.stdout)


def _fmt(v) -> str:
    return repr(float(v))


# -- tables ---------------------------------------------------------------------


def _default_table_path(domain: str, variant: str) -> Path:
    name = f"{SHORT[domain]}-{variant}.json"
    base = os.environ.get(TABLE_DIR_ENV)
    return Path(base) / name if base else Path(name)


def _open_table(name):
    path = resolve_table_path(name)
    try:
        return load_table(path)
    except FileNotFoundError:
        raise OSError(f"table not found: {name} (also searched ${TABLE_DIR_ENV})") from None


def _build(domain: str, variant: str, args):
    if domain == "sphere_biaxial":
        if args.n1 is None and args.n2 is None:
            return biaxial.build_table_biaxial(variant, None, args.quad_n, args.tol)
        if variant == "piecewise":
            # one uniform degree pair for every block and eta
            n1 = args.n1 if args.n1 is not None else 26
            n2 = args.n2 if args.n2 is not None else 26
            blocks = tuple((xr, yr, ((n1, n2),) * 3) for xr, yr, _ in biaxial.PIECEWISE_BLOCKS)
            return biaxial.build_table_biaxial(variant, None, args.quad_n, args.tol, blocks)
        d1, d2 = biaxial.GLOBAL_DEGREES
        degrees = (args.n1 if args.n1 is not None else d1, args.n2 if args.n2 is not None else d2)
        return biaxial.build_table_biaxial(variant, degrees, args.quad_n, args.tol)
    build = circle.build_table if domain == "circle" else uniaxial.build_table_uni
    return build(variant, args.nl, args.quad_n, None, args.tol)


def _report_table(table, seconds: float):
    _say(f"domain: {table.domain}")
    _say(f"variant: {table.variant}")
    _say(f"build_seconds: {seconds:.2f}")
    if isinstance(table, Table1D):
        _say("piece\tlo\thi\tdegree\tquad_n\tnewton_max\tresidual")
        for i, (s, r, d) in enumerate(zip(table.series, table.residuals, table.metadata["pieces"])):
            _say(f"{i}\t{s.lo:.6g}\t{s.hi:.6g}\t{s.degree}\t{d['quad_n']}\t{d['newton_iterations_max']}\t{r:.3e}")
        worst = max(table.residuals)
    else:
        _say("block\tx_range\ty_range\tdegrees\tquad_n\tnewton_max\tresidual_eta1\tresidual_eta2\tresidual_eta3")
        for i, (b, d) in enumerate(zip(table.blocks, table.metadata["blocks"])):
            degs = ",".join(f"{a}x{c}" for a, c in d["degrees"])
            res = "\t".join(f"{r:.3e}" for r in b.residuals)
            _say(f"{i}\t[{b.x_range[0]:.6g},{b.x_range[1]:.6g}]\t[{b.y_range[0]:.6g},{b.y_range[1]:.6g}]"
                 f"\t{degs}\t{d['quad_n']}\t{d['newton_iterations_max']}\t{res}")
        worst = max(max(r) for r in table.residuals)
    _say(f"max_residual: {worst:.3e}")


def cmd_gen_table(args) -> int:
    domain = DOMAINS[args.domain]
    if domain == "sphere_biaxial" and args.nl is not None:
        raise UsageError("--nl applies to circle and sphere-uni; use --n1/--n2 for sphere-bi")
    if domain != "sphere_biaxial" and (args.n1 is not None or args.n2 is not None):
        raise UsageError("--n1/--n2 apply to sphere-bi only; use --nl")
    t0 = time.perf_counter()
    try:
        table = _build(domain, args.variant, args)
    except (DomainError, ConvergenceError):
        raise
    except ValueError as exc:
        # inconsistent degree / quadrature flags
        raise UsageError(str(exc)) from None
    seconds = time.perf_counter() - t0
    out = Path(args.output) if args.output else _default_table_path(domain, args.variant)
    save_table(table, out)
    _report_table(table, seconds)
    _say(f"wrote: {out}")
    return EXIT_OK


# -- batch evaluation --------------------------------------------------------------


def read_batch(fh, dim: int) -> np.ndarray:
    """Read a moment batch (header row, then one tensor per row) into ``(n, d, d)``."""
    cols = BATCH_COLUMNS[dim]
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise InputFormatError("line 1: empty input, a header row is required") from None
    names = tuple(h.strip().lower() for h in header)
    if names != cols:
        raise InputFormatError(f"line 1: header must be {','.join(cols)}, got {','.join(header)}")
    rows = []
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(cols):
            raise InputFormatError(f"line {line}: expected {len(cols)} values, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise InputFormatError(f"line {line}: non-numeric value in {row}") from None
        if not all(np.isfinite(vals)):
            raise InputFormatError(f"line {line}: non-finite value")
        rows.append(vals)
    a = np.array(rows, dtype=float).reshape(-1, len(cols))
    M = np.empty((a.shape[0], dim, dim))
    if dim == 2:
        M[:, 0, 0], M[:, 0, 1] = a[:, 0], a[:, 1]
        M[:, 1, 0] = a[:, 1]
        M[:, 1, 1] = 1.0 - a[:, 0]
    else:
        for k, (i, j) in enumerate(((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))):
            M[:, i, j] = M[:, j, i] = a[:, k]
    return M


def close_batch(table, M: np.ndarray) -> np.ndarray:
    if table.domain == "circle":
        return circle.close_2d(M, table)
    if table.domain == "sphere_uniaxial":
        return uniaxial.close_3d_uniaxial(M, table)
    return biaxial.close_3d(M, table)


def _table_dim(table) -> int:
    return 2 if table.domain == "circle" else 3


def cmd_eval(args) -> int:
    table = _open_table(args.table)
    dim = _table_dim(table)
    if args.dim is not None and args.dim != dim:
        raise UsageError(f"--dim {args.dim} does not match the {table.domain} table (dimension {dim})")
    if args.input == "-":
        M = read_batch(sys.stdin, dim)
    else:
        with open(args.input, newline="", encoding="utf-8") as fh:
            M = read_batch(fh, dim)
    Q = close_batch(table, M) if len(M) else np.empty((0, 5 if dim == 2 else 15))
    labels = UNIQUE_2D_LABELS if dim == 2 else UNIQUE_3D_LABELS
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(labels)
    for row in Q:
        w.writerow([_fmt(v) for v in row])
    _write_text(args.output, buf.getvalue())
    return EXIT_OK


def _write_text(target, text: str):
    if target in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(target).write_text(text, encoding="utf-8")


# -- validation and benchmarks -----------------------------------------------------


def cmd_validate(args) -> int:
    table = _open_table(args.table)
    report = validate_table(table, args.samples, args.seed, workers=args.workers)
    for line in report.lines():
        _say(line)
    if args.max_error is not None and report.max_error > args.max_error:
        _say(f"FAIL: max error {report.max_error:.3e} exceeds {args.max_error:.3e}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def bench_inputs(domain: str, n: int, seed: int = 0):
    """Deterministic random arguments for table evaluation."""
    rng = np.random.default_rng(seed)
    if domain == "circle":
        return (rng.uniform(0.0, 1.0, n),)
    if domain == "sphere_uniaxial":
        return (rng.uniform(0.0, 2.0, n),)
    return biaxial.map_xy_to_mu(rng.uniform(-1.0, 1.0, n), rng.uniform(-1.0, 1.0, n))


def eval_table(table, *args):
    if table.domain == "circle":
        return circle.eval_eta(table, *args)
    if table.domain == "sphere_uniaxial":
        return uniaxial.eval_eta_uni(table, *args)
    return biaxial.eval_eta123(table, *args)


def time_eval(table, batch: int, repeat: int, seed: int = 0) -> float:
    """Best wall time over ``repeat`` evaluations of ``batch`` random points."""
    inputs = bench_inputs(table.domain, batch, seed)
    eval_table(table, *(a[:16] for a in inputs))
    best = float("inf")
    for _ in range(max(1, repeat)):
        t0 = time.perf_counter()
        eval_table(table, *inputs)
        best = min(best, time.perf_counter() - t0)
    return best


def cmd_bench(args) -> int:
    if len(args.table) > 2:
        raise UsageError("give one table, or two tables (global and piecewise) to compare")
    results = []
    for name in args.table:
        path = resolve_table_path(name)
        t0 = time.perf_counter()
        table = _open_table(path)
        cold = time.perf_counter() - t0
        t0 = time.perf_counter()
        _open_table(path)
        warm = time.perf_counter() - t0
        best = time_eval(table, args.batch, args.repeat)
        results.append((table, best))
        _say(f"table: {path}")
        _say(f"  domain: {table.domain}  variant: {table.variant}")
        _say(f"  load_seconds_cold: {cold:.4f}  load_seconds_warm: {warm:.4f}")
        _say(f"  batch: {args.batch}  best_seconds: {best:.4f}  evals_per_second: {args.batch / best:.4g}"
             f"  ns_per_eval: {1e9 * best / args.batch:.1f}")
    if len(results) == 2:
        (a, ta), (b, tb) = results
        if a.domain != b.domain:
            raise UsageError("tables to compare must share a domain")
        by = {t.variant: s for t, s in results}
        if set(by) == {"global", "piecewise"}:
            _say(f"speedup_piecewise_vs_global: {by['global'] / by['piecewise']:.2f}")
        else:
            _say(f"speedup_first_vs_second: {tb / ta:.2f}")
    return EXIT_OK


# -- dynamics --------------------------------------------------------------------


def _parse_m0(values):
    if values == ["iso"]:
        return np.eye(3) / 3.0
    if len(values) != 6:
        raise UsageError("--m0 takes 6 numbers (m11 m22 m33 m12 m13 m23) or 'iso'")
    try:
        v = [float(x) for x in values]
    except ValueError:
        raise UsageError("--m0 values must be numbers") from None
    M = np.diag(v[:3])
    for k, (i, j) in enumerate(((0, 1), (0, 2), (1, 2))):
        M[i, j] = M[j, i] = v[3 + k]
    return M


def _closure_table(name):
    if name:
        table = _open_table(name)
    else:
        path = resolve_table_path("sphere-bi-piecewise.json")
        if path.exists():
            table = load_table(path)
        else:
            _say("note: no --table given and none found; building the piecewise biaxial table", file=sys.stderr)
            table = biaxial.build_table_biaxial("piecewise")
    if table.domain != "sphere_biaxial":
        raise UsageError(f"simulate needs a sphere-bi table, got {table.domain}")
    return table


def cmd_simulate(args) -> int:
    M0 = _parse_m0(args.m0)
    kappa = np.zeros((3, 3)) if args.kappa is None else np.array(args.kappa, dtype=float).reshape(3, 3)
    params = FlowParams(args.de, args.u0, kappa)
    table = _closure_table(args.table)
    traj = integrate(M0, params, table, args.dt, args.t_end, args.flow_variant,
                     project=not args.no_project, record_every=args.record_every)
    if args.output in (None, "-"):
        traj.to_csv(sys.stdout)
    else:
        traj.to_csv(args.output)
    return EXIT_OK


# -- figure data -------------------------------------------------------------------


def _figure_table(args, domain: str):
    if args.table:
        table = _open_table(args.table)
        if table.domain != domain:
            raise UsageError(f"--figure {args.figure} needs a {SHORT[domain]} table, got {table.domain}")
        return table
    _say(f"note: building the global {SHORT[domain]} table", file=sys.stderr)
    if domain == "circle":
        return circle.build_table("global")
    if domain == "sphere_uniaxial":
        return uniaxial.build_table_uni("global")
    return biaxial.build_table_biaxial("global")


def _decay_rows_1d(table):
    if table.variant != "global":
        raise UsageError("coefficient decay data needs a global table")
    full = np.concatenate([table.series[0].coef, table.metadata["pieces"][0]["tail_coef"]])
    yield ("k", "abs_coef", "residual")
    for k, c in enumerate(full):
        yield (k, _fmt(abs(c)), _fmt(tail_l2(full, k)))


def _decay_rows_bi(table):
    if table.variant != "global":
        raise UsageError("coefficient decay data needs a global table")
    decay = table.metadata["blocks"][0]["coef_decay"]
    head = ["k"]
    for i in (1, 2, 3):
        head += [f"eta{i}_max_abs_s", f"eta{i}_max_abs_t", f"eta{i}_residual_square"]
    yield tuple(head)
    n = min(len(d["residual_square"]) for d in decay)
    for k in range(n):
        row = [k]
        for d in decay:
            row += [_fmt(d["s"][k]), _fmt(d["t"][k]), _fmt(d["residual_square"][k])]
        yield tuple(row)


def _eta_mu_rows(table, points: int = 201):
    mu = np.linspace(0.0, 1.0, points)
    eta = circle.eval_eta(table, mu)
    yield ("mu", "eta", "eta_minus_mu2")
    for m, e in zip(mu, eta):
        yield (_fmt(m), _fmt(e), _fmt(e - m * m))


def cmd_figure_data(args) -> int:
    fig = args.figure
    if fig == "eta-mu-2d":
        rows = _eta_mu_rows(_figure_table(args, "circle"))
    elif fig == "coeff-decay-2d":
        rows = _decay_rows_1d(_figure_table(args, "circle"))
    elif fig == "coeff-decay-uni":
        rows = _decay_rows_1d(_figure_table(args, "sphere_uniaxial"))
    else:
        rows = _decay_rows_bi(_figure_table(args, "sphere_biaxial"))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow(r)
    _write_text(args.output, buf.getvalue())
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bingham-closure", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-table", help="build and save an eta table")
    g.add_argument("--domain", required=True, choices=sorted(DOMAINS))
    g.add_argument("--variant", default="global", choices=("global", "piecewise"))
    g.add_argument("--nl", type=int, help="degree per piece (circle, sphere-uni)")
    g.add_argument("--n1", type=int, help="degree in x (sphere-bi)")
    g.add_argument("--n2", type=int, help="degree in y (sphere-bi)")
    g.add_argument("--quad-n", type=int, help="Gauss nodes per direction and piece")
    g.add_argument("--tol", type=float, default=1e-15, help="Newton tolerance")
    g.add_argument("-o", "--output", help=f"output path (default: <domain>-<variant>.json in ${TABLE_DIR_ENV} or .)")
    g.set_defaults(func=cmd_gen_table)

    e = sub.add_parser("eval", help="close a batch of second moments")
    e.add_argument("--table", required=True)
    e.add_argument("--input", required=True, help="CSV with header; '-' reads stdin")
    e.add_argument("--output", default="-")
    e.add_argument("--dim", type=int, choices=(2, 3))
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("validate", help="compare a table's closure with direct quadrature")
    v.add_argument("--table", required=True)
    v.add_argument("--samples", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--max-error", type=float, help="exit 3 if the max error exceeds this")
    v.add_argument("--workers", type=int, help="threads for the oracle quadrature (default: CPU count, up to 8)")
    v.set_defaults(func=cmd_validate)

    b = sub.add_parser("bench", help="time table evaluation")
    b.add_argument("--table", required=True, action="append", help="repeat to compare two tables")
    b.add_argument("--batch", type=int, default=1_000_000)
    b.add_argument("--repeat", type=int, default=3)
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("simulate", help="integrate the second-moment equation")
    s.add_argument("--de", type=float, default=1.0)
    s.add_argument("--u0", type=float, default=0.0)
    s.add_argument("--kappa", type=float, nargs=9, metavar="K", help="velocity gradient, row-major")
    s.add_argument("--m0", nargs="+", default=["iso"], help="6 numbers m11 m22 m33 m12 m13 m23, or 'iso'")
    s.add_argument("--dt", type=float, default=0.01)
    s.add_argument("--t-end", type=float, default=10.0)
    s.add_argument("--flow-variant", choices=sorted(FLOW_VARIANTS), default="trace-preserving")
    s.add_argument("--table")
    s.add_argument("--no-project", action="store_true", help="skip the per-step projection")
    s.add_argument("--record-every", type=int, default=1)
    s.add_argument("-o", "--output", default="-")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("figure-data", help="CSV data behind the coefficient and eta plots")
    f.add_argument("--figure", required=True, choices=FIGURES)
    f.add_argument("--table")
    f.add_argument("-o", "--output", default="-")
    f.set_defaults(func=cmd_figure_data)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        _say(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, DomainError, NotUniaxialError) as exc:
        _say(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, TableFormatError, InputFormatError) as exc:
        _say(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

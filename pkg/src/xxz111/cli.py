"""Batch command line front-end.

Every subcommand writes a CSV table: ``#`` comment lines naming the command,
the library operation and the parameters, then a column line, then rows.
``--format svg`` additionally renders the CSV with matplotlib.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, ensembles, lattice, onedim, partition, spin_exact, variational

log = logging.getLogger("xxz111")


class ConfigError(ValueError):
    """Invalid parameter; ``field`` names the offending option."""

    def __init__(self, field: str, msg: str):
        super().__init__(f"invalid {field}: {msg}")
        self.field = field


# ---------------------------------------------------------------- validation

def _q(v):
    if not 0 < v < 1:
        raise ConfigError("q", f"must lie in (0, 1), got {v}")
    return v


def _L(v):
    if v < 0 or v % 2:
        raise ConfigError("length", f"must be a non-negative even integer, got {v}")
    return v


def _positive(field, v):
    if not v > 0:
        raise ConfigError(field, f"must be positive, got {v}")
    return v


def _float_list(text: str) -> list[float]:
    return [float(t) for t in str(text).split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    return [int(t) for t in str(text).split(",") if t.strip()]


def _range_spec(field: str, text: str) -> np.ndarray:
    """``start:stop:step`` inclusive of ``stop``; an empty range is allowed."""
    try:
        start, stop, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise ConfigError(field, f"expected start:stop:step, got {text!r}") from None
    if step <= 0:
        raise ConfigError(field, "step must be positive")
    if stop < start:
        return np.zeros(0)
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def _volume(args) -> lattice.Volume:
    _L(args.length)
    if args.base == "disk":
        if args.radius is None:
            raise ConfigError("radius", "required for --base disk")
        _positive("radius", args.radius)
    if args.base == "compact" and (args.A is None or args.A < 1):
        raise ConfigError("A", "required (positive) for --base compact")
    return lattice.volume_from_spec(args.base, args.length, args.radius, args.A)


# ---------------------------------------------------------------- output

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


class Table:
    def __init__(self, command: str, operation: str, columns: list[str], params: dict):
        self.command = command
        self.operation = operation
        self.columns = columns
        self.params = params
        self.rows: list[list] = []

    def add(self, *row):
        self.rows.append(list(row))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# xxz111 {self.command}: {self.operation}\n")
        buf.write("# " + " ".join(f"{k}={_fmt(v)}" for k, v in sorted(self.params.items())) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(x) for x in r])
        return buf.getvalue()


def _render_svg(csv_text: str, path: Path, title: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    lines = [ln for ln in csv_text.splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    header, body = rows[0], rows[1:]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    numeric = []
    for j, name in enumerate(header):
        try:
            numeric.append((name, np.array([float(r[j]) for r in body])))
        except ValueError:
            continue
    if numeric:
        xname, x = numeric[0]
        for name, y in numeric[1:]:
            ax.plot(x, y, label=name, lw=1)
        ax.set_xlabel(xname)
        ax.legend(fontsize=8)
    ax.set_title(title, fontsize=9)
    plt.rcParams["svg.hashsalt"] = "xxz111"
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _emit(table: Table, args) -> None:
    text = table.to_csv()
    if args.format == "svg":
        if not args.out:
            raise ConfigError("out", "an output path is required with --format svg")
        svg = Path(args.out)
        svg.with_suffix(".csv").write_text(text)
        _render_svg(text, svg, f"{table.command}: {table.operation}")
        return
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _sweep(fn, points, threads: int):
    """Evaluate ``fn`` over ``points`` in order, logging wall time per point."""
    def timed(p):
        t = time.perf_counter()
        out = fn(p)
        log.info("point %r took %.3f s", p, time.perf_counter() - t)
        return out

    if threads > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(timed, points))
    return [timed(p) for p in points]


# ---------------------------------------------------------------- commands

def cmd_exact_check(args) -> Table:
    q = _q(args.q)
    v = _volume(args)
    sectors = [args.sector] if args.sector is not None else list(range(len(v) + 1))
    for n in sectors:
        if not 0 <= n <= len(v):
            raise ConfigError("sector", f"must lie in 0..{len(v)}")
    t = Table("exact-check", "spin_exact.kernel_residual, spin_exact.sector_gap",
              ["n", "dim", "kernel_residual", "gap"],
              dict(base=args.base, length=args.length, radius=args.radius, q=q, max_dim=args.max_dim))

    def one(n):
        dim = spin_exact.sector_dim(v, n)
        res = spin_exact.kernel_residual(v, n, q, args.max_dim)
        gap = spin_exact.sector_gap(v, n, q, args.max_dim) if dim > 1 and len(v.bond_indices) else None
        return n, dim, res, gap

    for row in _sweep(one, sectors, args.threads):
        t.add(*row)
    return t


def cmd_partition(args) -> Table:
    v = _volume(args)
    if args.rational:
        from fractions import Fraction
        q = Fraction(args.q).limit_denominator(10 ** 6)
        _q(float(q))
    else:
        q = _q(args.q)
    p = partition.partition_polynomial(v, q, rational=args.rational)
    cols = ["n", "log_Z"] + (["Z_exact"] if args.rational else [])
    t = Table("partition", "partition.partition_polynomial", cols,
              dict(base=args.base, length=args.length, radius=args.radius, q=str(q), rational=args.rational))
    for n in range(p.size + 1):
        row = [n, p.log(n)]
        if args.rational:
            row.append(str(p.exact[n]))
        t.add(*row)
    return t


def cmd_activity(args) -> Table:
    q = _q(args.q)
    L = _L(args.length)
    A = int(_positive("A", args.A))
    A0 = _positive("A0", args.A0)
    N = A * (L + 1)
    n = args.n if args.n is not None else N // 2
    if not 0 <= n <= N:
        raise ConfigError("n", f"must lie in 0..{N}")
    ks = [args.k] if args.k is not None else \
        list(range(-int(0.5 * A0 * math.sqrt(A)), int(0.5 * A0 * math.sqrt(A)) + 1))
    mu = ensembles.solve_mu(n / N, L, q) if args.mu is None else args.mu
    levels = np.tile(np.arange(-L // 2, L // 2 + 1), A)
    p = partition.partition_polynomial_from_levels(levels, q)
    t = Table("activity", "partition.activity_ratio, partition.activity_bounds",
              ["k", "log_ratio", "lower", "upper", "form", "inside"],
              dict(q=q, length=L, A=A, A0=A0, n=n, mu=mu, form=args.form))
    for k in ks:
        exact = partition.activity_ratio(p, n, k)
        w = partition.ActivityWindow(q, L, A, A0, k, mu)
        br = partition.activity_bounds(w, n, form=args.form)
        t.add(k, exact, br.lower, br.upper, br.form, br.lower <= exact <= br.upper)
    return t


def _observable(kind: str, stick: lattice.Volume, level: int) -> ensembles.Observable:
    x0 = lattice.stick_site(level)
    if kind == "occ":
        return ensembles.Observable.occupation(stick, x0)
    if kind == "yb":
        return ensembles.Observable.bond_occupancy(stick, (x0, lattice.stick_site(level + 1)))
    if kind == "identity":
        return ensembles.Observable.identity(stick)
    raise ConfigError("observable", f"unknown observable {kind!r}")


def cmd_equivalence(args) -> Table:
    q = _q(args.q)
    L = _L(args.length)
    A0 = int(_positive("A0", args.A0))
    if not 0 < args.rho < 1:
        raise ConfigError("rho", f"must lie in (0, 1), got {args.rho}")
    As = _int_list(args.A)
    for A in As:
        if A <= A0:
            raise ConfigError("A", f"must exceed A0={A0}, got {A}")
    if not -L // 2 <= args.level <= L // 2 - (args.observable == "yb"):
        raise ConfigError("level", f"outside the stick for L={L}")
    t = Table("equivalence", "ensembles.equivalence_check",
              ["A", "n", "mu", "canonical", "grand_canonical", "measured", "epsilon", "pass"],
              dict(q=q, length=L, A0=A0, rho=args.rho, observable=args.observable, level=args.level))

    def one(A):
        v = lattice.Volume(lattice.compact_base(A), L)
        v0 = v.sub_cylinder(range(A0))
        X = _observable(args.observable, v.sub_cylinder([0]), args.level)
        n = int(math.floor(args.rho * len(v)))
        r = ensembles.equivalence_check(v, v0, n, X, q)
        return A, n, r.certificate.mu, r.canonical, r.grand_canonical, r.measured, r.certificate.eps, r.passed

    for row in _sweep(one, As, args.threads):
        t.add(*row)
    return t


def cmd_onedim(args) -> Table:
    if args.figure == 4:
        q = _q(args.q if args.q is not None else math.exp(-10))
        grid = _range_spec("grid", args.grid or "-3:3:0.001")
        t = Table("onedim", "onedim.F_inf, onedim.variance_inf (sawtooth regime)",
                  ["mu", "F_inf", "sigma2"], dict(q=q, grid=args.grid or "-3:3:0.001"))
        for mu in grid:
            mu = round(float(mu), 12)
            t.add(mu, onedim.F_inf(mu, q), onedim.variance_inf(mu, q))
        return t
    qs = _float_list(args.qs)
    for q in qs:
        _q(q)
    grid = _range_spec("grid", args.grid or "0:0.99:0.01")
    t = Table("onedim", "onedim.mu_of_nu, onedim.delta_of_mu (delta versus filling)",
              ["nu"] + [f"delta_q{q:g}" for q in qs], dict(qs=args.qs, grid=args.grid or "0:0.99:0.01"))
    for nu in grid:
        nu = round(float(nu), 12)
        if not 0 <= nu < 1:
            raise ConfigError("grid", f"nu must lie in [0, 1), got {nu}")
        t.add(nu, *[onedim.delta_of_nu(nu, q) for q in qs])
    return t


def cmd_gapbound(args) -> Table:
    q = _q(args.q)
    if not 0 <= args.delta <= 0.5:
        raise ConfigError("delta", f"must lie in [0, 1/2], got {args.delta}")
    radii = _range_spec("table", args.table) if args.table else np.array([_positive("R", args.R)])
    if len(radii) and radii.min() <= 0:
        raise ConfigError("table", "radii must be positive")
    norms = variational.ProfileNorms.rounded() if args.norms == "rounded" else \
        variational.profile_norms(variational.bessel_profile())
    t = Table("gapbound", "variational.gap_bound",
              ["R", "assembled", "headline", "ratio", "holds"],
              dict(q=q, delta=args.delta, path=args.path, norms=args.norms, table=args.table, R=args.R))

    def one(R):
        r = variational.gap_bound(q, args.delta, float(R), norms, args.path)
        return float(R), r.assembled, r.headline, r.assembled / r.headline, r.headline_holds

    for row in _sweep(one, list(radii), args.threads):
        t.add(*row)
    return t


def cmd_varexact(args) -> Table:
    q = _q(args.q)
    L = _L(args.length)
    radii = _float_list(args.radius)
    for R in radii:
        _positive("radius", R)
    _positive("S", args.S)
    norms = variational.profile_norms(variational.bessel_profile())
    t = Table("varexact", "variational.variational_gap_exact, variational.gap_bound",
              ["R", "A", "n", "mu", "delta", "energy", "energy_bound", "one_minus_overlap2",
               "exact", "assembled_componentwise", "assembled_geometric"],
              dict(q=q, length=L, S=args.S, radius=args.radius))

    def one(R):
        v = lattice.Volume(lattice.disk_base(R), L)
        n = len(v) // 2
        mu = ensembles.solve_mu(n / len(v), L, q)
        d = onedim.delta_of_mu(mu)
        field = variational.PhaseField(variational.bessel_profile(), R, args.S)
        e = variational.energy_exact(v, n, q, field)
        eb = variational.energy_bound(norms, v.A, max(R, 1.0), args.S, q) if R >= 1 else None
        den = -math.expm1(variational.log_overlap_modsq_exact(v, n, q, field))
        out = [R, v.A, n, mu, d, e, eb, den, e / den]
        for path in ("componentwise", "geometric"):
            try:
                out.append(variational.gap_bound(q, d, R, norms, path).assembled)
            except partition.HypothesisError:
                out.append(None)
        return out

    for row in _sweep(one, radii, args.threads):
        t.add(*row)
    return t


def cmd_voronoi(args) -> Table:
    R = _positive("radius", args.radius)
    width = _positive("width", args.width)
    base = lattice.disk_base(R)
    f = lambda y: np.exp(-np.sum(np.asarray(y) ** 2, axis=-1) / (2 * width ** 2))  # noqa: E731
    grad_sup = math.exp(-0.5) / width
    r = variational.voronoi_check(f, base, scale=R, grad_sup=grad_sup)
    t = Table("voronoi", "variational.voronoi_check", ["A", "site_mean", "cell_mean", "lhs", "rhs", "pass"],
              dict(radius=R, width=width))
    t.add(len(base), r.site_mean, r.cell_mean, r.lhs, r.rhs, r.passed)
    return t


COMMANDS = {
    "exact-check": cmd_exact_check,
    "partition": cmd_partition,
    "activity": cmd_activity,
    "equivalence": cmd_equivalence,
    "onedim": cmd_onedim,
    "gapbound": cmd_gapbound,
    "varexact": cmd_varexact,
    "voronoi": cmd_voronoi,
}


def _add_volume(p):
    p.add_argument("--base", choices=["triangle", "disk", "stick", "compact"], default="triangle")
    p.add_argument("--length", "-L", type=int, default=2)
    p.add_argument("--radius", type=float)
    p.add_argument("--A", type=int)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=["csv", "svg"], default="csv")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--config", help="plain-text key = value file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true", help="log wall time per point")

    parser = argparse.ArgumentParser(prog="xxz111", description=__doc__.splitlines()[0],
                                     parents=[common])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact-check", parents=[common], help="kernel residual and gap per sector")
    _add_volume(p)
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--sector", type=int)
    p.add_argument("--max-dim", type=int, default=spin_exact.DEFAULT_MAX_DIM)

    p = sub.add_parser("partition", parents=[common], help="dump log Z(n)")
    _add_volume(p)
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--dump", action="store_true", help="accepted for compatibility; always dumps")
    p.add_argument("--rational", action="store_true")

    p = sub.add_parser("activity", parents=[common], help="exact Z(n)/Z(n-k) and its bracket")
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--length", "-L", type=int, default=8)
    p.add_argument("--A", type=int, default=100)
    p.add_argument("--A0", type=float, default=1.0)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--mu", type=float)
    p.add_argument("--form", default="auto", choices=["auto", "general", "rat1", "rat2", "rat2-swapped"])

    p = sub.add_parser("equivalence", parents=[common], help="canonical vs grand canonical")
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--length", "-L", type=int, default=8)
    p.add_argument("--A", default="100,200,400", help="comma-separated base sizes")
    p.add_argument("--A0", type=int, default=1)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--observable", default="occ", choices=["occ", "yb", "identity"])
    p.add_argument("--level", type=int, default=1, help="level of the site (or lower bond end)")

    p = sub.add_parser("onedim", parents=[common], help="4: F_inf and sigma^2 at q = e^-10; 5: delta versus filling")
    p.add_argument("--figure", type=int, choices=[4, 5], required=True)
    p.add_argument("--q", type=float)
    p.add_argument("--qs", default="0.1,0.3,0.5,0.9")
    p.add_argument("--grid", help="start:stop:step")

    p = sub.add_parser("gapbound", parents=[common], help="assembled vs headline gap bound")
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--R", type=float, default=71.0)
    p.add_argument("--table", help="Rmin:Rmax:step")
    p.add_argument("--path", choices=["componentwise", "geometric"], default="componentwise")
    p.add_argument("--norms", choices=["computed", "rounded"], default="computed")

    p = sub.add_parser("varexact", parents=[common], help="exact variational quotient vs bounds")
    p.add_argument("--radius", default="2,3,4,5", help="comma-separated radii")
    p.add_argument("--length", "-L", type=int, default=8)
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--S", type=float, default=0.01)

    p = sub.add_parser("voronoi", parents=[common], help="site sum vs cell integral")
    p.add_argument("--radius", type=float, default=6.0)
    p.add_argument("--width", type=float, default=0.5)
    return parser


def read_config(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for i, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"line {i}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def write_config(path: str, params: dict) -> None:
    Path(path).write_text("".join(f"{k} = {_fmt(v)}\n" for k, v in sorted(params.items())))


def _apply_config(parser, argv, cfg: dict):
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    args, _ = parser.parse_known_args(argv)
    p = sub.choices[args.command]
    known = {a.dest: a for a in p._actions}
    defaults = {}
    for k, v in cfg.items():
        if k not in known or k in ("help", "config"):
            raise ConfigError(k, "unknown configuration key")
        act = known[k]
        if isinstance(act, argparse._StoreTrueAction):
            defaults[k] = v.lower() in ("1", "true", "yes")
        else:
            defaults[k] = act.type(v) if act.type else v
    p.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.config:
            args = _apply_config(parser, argv if argv is not None else sys.argv[1:],
                                 read_config(args.config))
        if args.threads < 1:
            raise ConfigError("threads", "must be at least 1")
        table = COMMANDS[args.command](args)
        _emit(table, args)
    except ConfigError as exc:
        print(f"xxz111 {args.command}: {exc}", file=sys.stderr)
        return 2
    except (partition.HypothesisError, spin_exact.BudgetError) as exc:
        print(f"xxz111 {args.command}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

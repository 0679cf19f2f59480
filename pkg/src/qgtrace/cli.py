"""Command-line front end: ``qgtrace <command> <graph> [options]``.

Every command prints a single table (``--format tsv``, the default) or a
single JSON document (``--format json``) on stdout; diagnostics go to
stderr.  Exit codes: 0 success, 1 usage error, 2 invalid graph or coupling,
3 numerical failure, 4 no match in coupling recovery.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import (
    InvalidCouplingError,
    InvalidGraphError,
    LoopPresentError,
    NoMatchError,
    NotOrderedError,
    NumericalError,
    QGraphError,
)
from .graph_core import (
    is_simple_minimal_delta,
    minimal_operator_eigenvalue_free_delta_prime,
    validate_graph,
    vertex_valences,
)
from .inverse import SpectralTarget, recover_scalar_coupling, recover_single_unknown
from .io import SCHEMA_VERSION, GraphDocument, read_coupling, read_graph, read_target
from .mfunction import SpectralPoint, eval_m, m_limit_zero, validate_weyl_identity
from .secular import CouplingSet, Spectrum, fem_spectrum, find_spectrum
from .trace_formulae import DELTA_PRIME_TRACE_VARIANTS, asymptotic_logdet_check, isospectrality_gate, trace_report

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_NUMERICAL, EXIT_NO_MATCH = 0, 1, 2, 3, 4

MULTIPLICITY_TOL = 1e-6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


class Table:
    """Rows of a fixed column order plus document-level metadata."""

    def __init__(self, command: str, columns: Sequence[str]):
        self.command = command
        self.columns = tuple(columns)
        self.rows: list[tuple] = []
        self.meta: dict = {}

    def add(self, *row) -> None:
        if len(row) != len(self.columns):
            raise ValueError("row width does not match the header")
        self.rows.append(tuple(row))

    def tsv(self) -> str:
        lines = [f"# schema_version={SCHEMA_VERSION}\tcommand={self.command}"]
        for key, value in self.meta.items():
            if not isinstance(value, (dict, list)):
                lines.append(f"# {key}={_num(value)}")
        lines.append("\t".join(self.columns))
        lines.extend("\t".join(_num(x) for x in row) for row in self.rows)
        return "\n".join(lines) + "\n"

    def json(self) -> str:
        def plain(x):
            if isinstance(x, (np.integer,)):
                return int(x)
            if isinstance(x, (np.floating,)):
                return float(x)
            if isinstance(x, np.bool_):
                return bool(x)
            return x

        doc = {"schema_version": SCHEMA_VERSION, "command": self.command}
        doc.update(self.meta)
        doc["columns"] = list(self.columns)
        doc["rows"] = [[plain(x) for x in row] for row in self.rows]
        return json.dumps(doc, indent=2, allow_nan=False, default=plain) + "\n"


class _Context:
    def __init__(self, args):
        self.args = args
        self.quiet = args.quiet

    def note(self, message: str) -> None:
        if not self.quiet:
            print(f"qgtrace: {message}", file=sys.stderr)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _coupling_or_default(doc: GraphDocument, kind: Optional[str]) -> CouplingSet:
    if doc.coupling is not None and (kind is None or kind == doc.coupling.coupling_type):
        return doc.coupling
    return CouplingSet(kind or "delta", (0.0,) * doc.graph.vertex_count)


def cmd_check(doc: GraphDocument, ctx: _Context) -> Table:
    g = doc.graph
    table = Table("check", ("key", "value"))
    report = validate_graph(g)
    table.add("valid", report.valid)
    table.add("vertices", g.vertex_count)
    table.add("edges", g.n_edges)
    table.add("valences", ",".join(str(int(v)) for v in vertex_valences(g)))

    simple = is_simple_minimal_delta(g)
    if simple.simple is True:
        verdict = f"A_min simple: {simple.reason}"
    elif simple.simple is False:
        verdict = f"A_min NOT simple: {simple.reason}"
    else:
        verdict = "A_min simplicity INDETERMINATE: " + "; ".join(simple.warnings)
    table.add("simple", {True: "yes", False: "no", None: "indeterminate"}[simple.simple])
    table.add("witness", ",".join(simple.witness) if simple.witness else "")
    table.add("message", verdict)
    if simple.simple is not True:
        table.add("message", "M-function may miss spectrum")

    dp = minimal_operator_eigenvalue_free_delta_prime(g)
    table.add("delta_prime_zero_eigenvalue", dp.zero_eigenvalue_possible)
    table.add("delta_prime_zero_kernel_dimension", dp.zero_kernel_dimension)
    if dp.zero_eigenvalue_possible:
        table.add(
            "message",
            f"delta-prime minimal operator has eigenvalue 0 (kernel dimension {dp.zero_kernel_dimension})",
        )
    if doc.coupling is not None:
        table.add("coupling_type", doc.coupling.coupling_type)
        table.add("alpha", ",".join(_num(a) for a in doc.coupling.alpha))
    return table


def _parse_lambda(text: str) -> complex:
    parts = text.split(",")
    if len(parts) > 2:
        raise UsageError(f"--lambda expects re[,im], got {text!r}")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"--lambda expects re[,im], got {text!r}") from None
    return complex(values[0], values[1] if len(values) == 2 else 0.0)


def cmd_mfun(doc: GraphDocument, ctx: _Context) -> Table:
    args = ctx.args
    g = doc.graph
    kind = args.type or (doc.coupling.coupling_type if doc.coupling else "delta")
    lam = _parse_lambda(args.lam)
    point = SpectralPoint.from_lambda(lam)
    table = Table("mfun", ("row", "col", "re", "im"))
    table.meta.update(
        coupling_type=kind,
        variant=args.variant if kind == "delta_prime" else "",
        lambda_re=lam.real,
        lambda_im=lam.imag,
        k_re=point.k.real,
        k_im=point.k.imag,
    )
    if point.is_limit and kind == "delta":
        entries = m_limit_zero(g).astype(complex)
        table.meta["limit"] = "lambda->0"
    else:
        sample = eval_m(g, point, kind, args.variant)
        entries = sample.entries
        table.meta["pole_proximity"] = float(sample.pole_proximity)
    names = [g.vertex_name(v) for v in range(g.vertex_count)]
    for i in range(g.vertex_count):
        for j in range(g.vertex_count):
            table.add(names[i], names[j], float(entries[i, j].real), float(entries[i, j].imag))
    if args.weyl_trials:
        table.meta["weyl_residual"] = validate_weyl_identity(
            g, point, kind, trials=args.weyl_trials, variant=args.variant, seed=args.seed
        )
    return table


def _fem_in_window(g, coupling, window) -> Spectrum:
    lo, hi = window
    total = float(g.lengths.sum())
    count = int(total * math.sqrt(max(hi, 0.0)) / math.pi) + g.vertex_count + g.n_edges + 4
    for _ in range(8):
        ev = fem_spectrum(g, coupling, count)
        if ev[-1] > hi:
            break
        count *= 2
    else:
        raise NumericalError("finite element oracle could not reach the top of the window")
    inside = [float(x) for x in ev if lo <= x <= hi]
    entries: list[list] = []
    for x in inside:
        if entries and abs(x - entries[-1][0]) <= MULTIPLICITY_TOL * max(1.0, abs(x)):
            entries[-1][1] += 1
        else:
            entries.append([x, 1])
    return Spectrum(window, tuple((x, m) for x, m in entries), "fem")


def cmd_spectrum(doc: GraphDocument, ctx: _Context) -> Table:
    args = ctx.args
    g = doc.graph
    coupling = _coupling_or_default(doc, args.type)
    if not args.lmin < args.lmax:
        raise UsageError("--lmin must be smaller than --lmax")
    window = (args.lmin, args.lmax)
    oracles = ["edge", "vertex", "fem"] if args.oracle == "all" else [args.oracle]
    table = Table("spectrum", ("oracle", "index", "lambda", "multiplicity"))
    table.meta.update(coupling_type=coupling.coupling_type, lmin=args.lmin, lmax=args.lmax)
    results = {}
    for oracle in oracles:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            if oracle == "fem":
                spec = _fem_in_window(g, coupling, window)
            else:
                spec = find_spectrum(g, coupling, window, step=args.step, oracle=oracle, jobs=args.jobs)
        for w in spec.warnings:
            ctx.note(f"{oracle}: {w}")
        results[oracle] = spec
        for i, (lam, mult) in enumerate(spec.entries):
            table.add(oracle, i, lam, mult)
    if len(results) > 1:
        ref = results["edge"].eigenvalues
        for oracle in oracles[1:]:
            other = results[oracle].eigenvalues
            if len(other) == len(ref):
                dev = float(np.max(np.abs(other - ref))) if len(ref) else 0.0
                table.meta[f"max_deviation_{oracle}"] = dev
            else:
                table.meta[f"max_deviation_{oracle}"] = None
                ctx.note(f"{oracle} found {len(other)} eigenvalues, edge found {len(ref)}")
    return table


def cmd_trace(doc: GraphDocument, ctx: _Context) -> Table:
    args = ctx.args
    g = doc.graph
    names = doc.vertex_names
    B1 = read_coupling(args.b1, names)
    B2 = read_coupling(args.b2, names)
    if args.orders < 1:
        raise UsageError("--orders must be positive")
    report = trace_report(g, B1, B2, args.orders, args.variant)
    gate = isospectrality_gate(g, B1, B2, args.orders, args.variant)
    table = Table("trace", ("section", "variant", "m", "value", "reference", "discrepancy"))
    table.meta.update(
        coupling_type=report.coupling_type,
        variant=report.variant or "",
        verdict=gate.verdict,
        witness_order=gate.witness_order,
        regime=gate.corollary or "",
    )
    for m, (t, s, zero) in enumerate(zip(report.residuals, report.scales, report.vanishing()), start=1):
        table.add("residual", report.variant or "delta", m, t, s, 0.0 if zero else abs(t) / s)
    for note in gate.notes:
        ctx.note(note)
    if args.asymptotic:
        orders = min(args.orders, 3)
        asym = asymptotic_logdet_check(g, B1, B2, orders=orders)
        table.meta["fit_terms"] = asym.fit_terms
        table.meta["selected_variant"] = asym.selected or ""
        for variant, rows in asym.comparisons.items():
            for r in rows:
                table.add("asymptotic", variant, r.m, r.fitted, r.analytic, r.discrepancy)
    return table


def cmd_recover(doc: GraphDocument, ctx: _Context) -> Table:
    args = ctx.args
    g = doc.graph
    values, file_weight = read_target(args.target)
    weight = args.weight or file_weight or 10
    target = SpectralTarget(tuple(values), weight)
    kind = args.type or (doc.coupling.coupling_type if doc.coupling else "delta")
    bracket = (args.lo, args.hi)
    if not args.lo < args.hi:
        raise UsageError("--lo must be smaller than --hi")
    table = Table("recover", ("vertex", "alpha", "misfit", "label", "evaluations"))
    table.meta.update(coupling_type=kind, lo=args.lo, hi=args.hi, weight=target.weight)
    if args.scalar:
        res = recover_scalar_coupling(g, kind, target, bracket)
        table.add("*", res.alpha, res.misfit, res.label, res.evaluations)
        return table
    names = doc.vertex_names
    if args.vertex not in names:
        raise InvalidGraphError(f"unknown vertex {args.vertex!r}")
    base = _coupling_or_default(doc, kind)
    known: list = list(base.alpha)
    known[names.index(args.vertex)] = None
    res = recover_single_unknown(g, kind, known, target, bracket)
    table.add(args.vertex, res.alpha, res.misfit, res.label, res.evaluations)
    return table


COMMANDS = {
    "check": cmd_check,
    "mfun": cmd_mfun,
    "spectrum": cmd_spectrum,
    "trace": cmd_trace,
    "recover": cmd_recover,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--format", choices=("tsv", "json"), default=d("tsv"))
    parser.add_argument("--quiet", action="store_true", default=d(False))
    parser.add_argument("--seed", type=int, default=d(0))
    parser.add_argument("--jobs", type=int, default=d(1))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qgtrace", description="Spectral tools for quantum graphs with delta / delta-prime couplings.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check", parents=[common], help="validation and simplicity report")
    p.add_argument("graph")

    types = ("delta", "delta_prime")
    p = sub.add_parser("mfun", parents=[common], help="M-matrix entries at a spectral point")
    p.add_argument("graph")
    p.add_argument("--lambda", dest="lam", required=True, metavar="RE[,IM]")
    p.add_argument("--variant", choices=("verified", "printed"), default="verified")
    p.add_argument("--type", choices=types)
    p.add_argument("--weyl-trials", type=int, default=0, metavar="N")

    p = sub.add_parser("spectrum", parents=[common], help="eigenvalues in a window")
    p.add_argument("graph")
    p.add_argument("--lmin", type=float, required=True)
    p.add_argument("--lmax", type=float, required=True)
    p.add_argument("--step", type=float)
    p.add_argument("--oracle", choices=("edge", "vertex", "fem", "all"), default="edge")
    p.add_argument("--type", choices=types)

    p = sub.add_parser("trace", parents=[common], help="trace-formula residuals of two couplings")
    p.add_argument("graph")
    p.add_argument("--b1", required=True)
    p.add_argument("--b2", required=True)
    p.add_argument("--orders", type=int, default=4)
    p.add_argument("--asymptotic", action="store_true")
    p.add_argument("--variant", choices=DELTA_PRIME_TRACE_VARIANTS, default="expansion")

    p = sub.add_parser("recover", parents=[common], help="coupling recovery from a spectrum")
    p.add_argument("graph")
    p.add_argument("--target", required=True)
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--scalar", action="store_true")
    which.add_argument("--vertex", metavar="NAME")
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--weight", type=int)
    p.add_argument("--type", choices=types)
    return parser


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, NoMatchError):
        return EXIT_NO_MATCH
    if isinstance(exc, (InvalidGraphError, InvalidCouplingError, LoopPresentError, NotOrderedError)):
        return EXIT_INVALID
    # NumericalError, PoleProximityError, LimitPointError, SingularEdgeError, WindowError
    return EXIT_NUMERICAL


def run(argv: Optional[Sequence[str]] = None, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"qgtrace: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.jobs < 1:
        print("qgtrace: usage error: --jobs must be positive", file=sys.stderr)
        return EXIT_USAGE
    ctx = _Context(args)
    try:
        try:
            doc = read_graph(args.graph)
        except OSError as exc:
            raise UsageError(f"cannot read {args.graph}: {exc.strerror}") from None
        table = COMMANDS[args.command](doc, ctx)
    except UsageError as exc:
        print(f"qgtrace: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"qgtrace: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QGraphError as exc:
        print(f"qgtrace: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"qgtrace: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    stdout.write(table.json() if args.format == "json" else table.tsv())
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

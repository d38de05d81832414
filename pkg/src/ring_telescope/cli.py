"""Command-line interface: ``ring-telescope {telescope,zeilberger,verify,represent}``.

Exit codes: 0 success, 1 usage or input error, 2 no solution within the
caps, 3 verification mismatch.  Every success path re-checks its result on a
small grid before printing.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from fractions import Fraction

from .errors import NoRecurrenceFound, ParseError, RingTelescopeError, SupportBoundExceeded
from .expr import Num, Sum, Sym, free_symbols, parse_expression, substitute, to_text
from .summation_api import (
    CompileOptions,
    Compiler,
    creative_telescope,
    parse_grid,
    ratfun_to_expr,
    solve_first_order_recurrence,
    telescope,
    verify_identity,
)

EXIT_OK, EXIT_ERROR, EXIT_NO_SOLUTION, EXIT_MISMATCH = 0, 1, 2, 3


@dataclass
class CliConfig:
    """Settings shared by all subcommands."""

    params: tuple = ()
    var: str = "k"
    max_order: int = 5
    max_support: int | None = None
    factor_degree_cap: int = 2
    merge: bool = True
    grid: str | None = None
    fmt: str = "text"

    def __post_init__(self):
        for name in ("max_order", "factor_degree_cap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.max_support is not None and self.max_support < 1:
            raise ValueError("max_support must be positive")

    def options(self) -> CompileOptions:
        return CompileOptions(merge=self.merge, factor_degree_cap=self.factor_degree_cap,
                              max_support=self.max_support)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--param", action="append", default=[], help="declare a parameter (repeatable)")
    p.add_argument("--var", default="k", help="summation variable (default k)")
    p.add_argument("--max-support", type=int, default=None,
                   help="cap on monomials per Laurent level (default 20 or $RING_TELESCOPE_MAX_SUPPORT)")
    p.add_argument("--factor-degree-cap", type=int, default=2, help="largest irreducible factor degree in k")
    p.add_argument("--format", dest="fmt", choices=("text", "json"), default="text")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ring-telescope", description="Symbolic summation in difference rings.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("telescope", help="indefinite summation G(k+1) - G(k) = F(k)")
    p.add_argument("expr")
    p.add_argument("--lower", type=int, default=0, help="lower summation bound a (default 0)")
    p.add_argument("--upper", default="b", help="name of the upper bound in the printed identity")
    _common(p)

    p = sub.add_parser("zeilberger", help="recurrence for Sum(k, lo, n, F(n,k)) by creative telescoping")
    p.add_argument("expr")
    p.add_argument("--n", dest="nvar", default="n", help="recurrence variable (default n)")
    p.add_argument("--lo", type=int, default=0, help="lower summation bound (default 0)")
    p.add_argument("--hi", default=None, help="upper summation bound, n plus an integer (default n)")
    p.add_argument("--max-order", type=int, default=5)
    p.add_argument("--no-solve", action="store_true", help="do not solve an order-1 recurrence")
    _common(p)

    p = sub.add_parser("verify", help="exact comparison of two expressions on a grid")
    p.add_argument("lhs")
    p.add_argument("rhs")
    p.add_argument("--grid", required=True, help="e.g. n=2..12,b=0..n")
    p.add_argument("--param", action="append", default=[], help="extra free names with fixed values name=v")
    p.add_argument("--format", dest="fmt", choices=("text", "json"), default="text")

    p = sub.add_parser("represent", help="show the tower representing an expression")
    p.add_argument("expr")
    p.add_argument("--no-merge", action="store_true", help="one Pi-generator per shift class")
    _common(p)
    return parser


def _config(args) -> CliConfig:
    return CliConfig(
        params=tuple(args.param),
        var=args.var,
        max_order=getattr(args, "max_order", 5),
        max_support=args.max_support,
        factor_degree_cap=args.factor_degree_cap,
        merge=not getattr(args, "no_merge", False),
        fmt=args.fmt,
    )


def _params_for(text: str, cfg: CliConfig, extra=()) -> tuple:
    if cfg.params:
        return tuple(dict.fromkeys(cfg.params + tuple(p for p in extra if p not in cfg.params)))
    e = parse_expression(text, None)
    return tuple(sorted((free_symbols(e) | set(extra)) - {cfg.var}))


def _emit(doc: dict, lines: list[str], fmt: str, out):
    if fmt == "json":
        out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        out.write("\n".join(lines) + "\n")


def _report_doc(rep) -> dict:
    doc = {"verified": rep.ok, "checked": rep.checked, "mismatches": len(rep.mismatches), "poles": len(rep.poles)}
    if rep.mismatches:
        pt, l, r = rep.mismatches[0]
        doc["first_mismatch"] = {"point": {k: str(v) for k, v in pt.items()}, "lhs": str(l), "rhs": str(r)}
    return doc


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_telescope(args, out) -> int:
    cfg = _config(args)
    params = _params_for(args.expr, cfg)
    summand = parse_expression(args.expr, (cfg.var,) + params)
    res = telescope(summand, cfg.var, params, args.lower, cfg.options())
    if res is None:
        j = "j" if "j" not in params + (cfg.var,) else "j_"
        comp = Compiler(cfg.var, params, cfg.options())
        s = comp.compile(Sum(j, Num(Fraction(args.lower)), Sym(cfg.var), substitute(summand, {cfg.var: Sym(j)})))
        doc = {"status": "no telescoper", "summand": to_text(summand),
               "sum_representation": {"tower": comp.tower.render().splitlines(), "element": str(s)}}
        lines = [f"no telescoper for {to_text(summand)} in its ring;",
                 "the sum is represented by a new Sigma-generator instead:",
                 comp.tower.render(), f"Sum = {s}"]
        _emit(doc, lines, cfg.fmt, out)
        return EXIT_NO_SOLUTION
    upper = args.upper
    lhs, rhs = res.identity(upper)
    rep = res.verify(upper)
    doc = {
        "status": "ok" if rep.ok else "mismatch",
        "summand": to_text(summand),
        "tower": res.tower.render().splitlines(),
        "f": str(res.f),
        "g": str(res.g),
        "G": to_text(res.G),
        "constant": to_text(ratfun_to_expr(res.constant)),
        "identity": {"lhs": to_text(lhs), "rhs": to_text(rhs)},
        "check": _report_doc(rep),
    }
    lines = [
        "tower:", *("  " + ln for ln in res.tower.render().splitlines()),
        f"f = {res.f}",
        f"g = {res.g}",
        f"G({cfg.var}) = {to_text(res.G)}",
        f"c = {to_text(ratfun_to_expr(res.constant))}",
        f"{to_text(lhs)} = {to_text(rhs)}",
        f"check: {rep}",
    ]
    _emit(doc, lines, cfg.fmt, out)
    return EXIT_OK if rep.ok else EXIT_MISMATCH


def cmd_zeilberger(args, out) -> int:
    cfg = _config(args)
    params = _params_for(args.expr, cfg, extra=(args.nvar,))
    res = creative_telescope(args.expr, args.nvar, cfg.var, params, args.lo, args.hi,
                             cfg.max_order, cfg.options())
    rec = res.recurrence
    doc = {
        "status": "ok",
        "summand": to_text(res.summand),
        "definition": to_text(rec.definition),
        "order": rec.order,
        "coefficients": [to_text(c) for c in rec.coefficient_exprs()],
        "inhomogeneous_part": to_text(rec.rhs),
        "recurrence": str(rec),
        "certificate": to_text(res.certificate),
        "tower": res.tower.render().splitlines(),
    }
    lines = [
        f"S({args.nvar}) = {to_text(rec.definition)}",
        "tower:", *("  " + ln for ln in res.tower.render().splitlines()),
        f"order: {rec.order}",
        "coefficients: (" + ", ".join(to_text(c) for c in rec.coefficient_exprs()) + ")",
        f"recurrence: {rec}",
        f"certificate: G({cfg.var}) = {to_text(res.certificate)}",
    ]
    status = EXIT_OK
    if rec.order == 1 and not args.no_solve:
        others = [p for p in params if p != args.nvar]
        if others:
            lines.append("closed form: skipped (parameters besides the recurrence variable)")
        else:
            n0 = max(args.lo, 0)
            init = rec.value(n0, {})
            closed = solve_first_order_recurrence(rec, init, n0, cfg.options())
            rep = verify_identity(rec.definition, closed, [(args.nvar, n0, n0 + 12)], names=(args.nvar,))
            doc["closed_form"] = to_text(closed)
            doc["initial_value"] = {"n0": n0, "value": str(init)}
            doc["check"] = _report_doc(rep)
            lines.append(f"closed form: S({args.nvar}) = {to_text(closed)}")
            lines.append(f"check: {rep}")
            if not rep.ok:
                status = EXIT_MISMATCH
                doc["status"] = "mismatch"
    _emit(doc, lines, cfg.fmt, out)
    return status


def cmd_verify(args, out) -> int:
    fixed = {}
    for item in args.param:
        if "=" not in item:
            raise ValueError(f"--param for verify expects name=value, got {item!r}")
        name, val = item.split("=", 1)
        fixed[name.strip()] = Fraction(val.strip())
    grid = parse_grid(args.grid)
    names = tuple(n for n, _, _ in grid) + tuple(fixed)
    lhs = parse_expression(args.lhs, names)
    rhs = parse_expression(args.rhs, names)
    rep = verify_identity(lhs, rhs, grid, fixed=fixed, names=names)
    doc = {"lhs": to_text(lhs), "rhs": to_text(rhs), "grid": args.grid, **_report_doc(rep)}
    _emit(doc, [str(rep)], args.fmt, out)
    return EXIT_OK if rep.ok else EXIT_MISMATCH


def cmd_represent(args, out) -> int:
    cfg = _config(args)
    params = _params_for(args.expr, cfg)
    comp = Compiler(cfg.var, params, cfg.options())
    e = comp.compile(args.expr)
    back = comp.decompile(e)
    # self-check: the element and its translation agree with the input
    src = comp.parse(args.expr)
    sample = {p: 13 + 3 * i for i, p in enumerate(params)}
    names = (cfg.var,) + params
    rep = verify_identity(src, back, [(cfg.var, 0, 8)], fixed=sample, names=names)
    if rep.checked == 0:
        rep = verify_identity(src, back, [(cfg.var, 9, 20)], fixed=sample, names=names)
    doc = {"expression": to_text(src), "tower": comp.tower.render().splitlines(),
           "generators": list(comp.tower.names), "element": str(e), "decompiled": to_text(back),
           "check": _report_doc(rep)}
    lines = [comp.tower.render(), f"element: {e}", f"as expression: {to_text(back)}", f"check: {rep}"]
    _emit(doc, lines, cfg.fmt, out)
    return EXIT_OK if rep.ok else EXIT_MISMATCH


_COMMANDS = {"telescope": cmd_telescope, "zeilberger": cmd_zeilberger,
             "verify": cmd_verify, "represent": cmd_represent}


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # expressions such as "-2^n*..." are not options; a leading space keeps argparse from reading them as such
    argv = [" " + a if a.startswith("-") and not a.startswith("--") and a != "-h" else a for a in argv]
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args, out)
    except (NoRecurrenceFound, SupportBoundExceeded) as exc:
        err.write(f"{type(exc).__name__}: {exc}\n")
        return EXIT_NO_SOLUTION
    except ParseError as exc:
        err.write(f"ParseError: {exc}\n")
        return EXIT_ERROR
    except (RingTelescopeError, ValueError) as exc:
        err.write(f"{type(exc).__name__}: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""opforge command line: verification suites, complexes and homology reports.

Exit status is 0 when no check fails, 1 when some check fails and 2 on a
usage error.  Checks with status ``reported`` never affect the exit code.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from .suites import DEFAULT_SEED, SUITES, Check, SuiteConfig, run_suite, verdict

CHECK_SUITES = ("operad-axioms", "basis-count", "hopf", "koszul", "bar", "cobar", "mc", "r-functor",
                "convolution", "phi", "def", "en-action", "bar-of-def", "ce", "experiment")
COMPLEXES = ("cobar-koszul", "bar-free", "def", "ce-def")


class UsageError(Exception):
    pass


@dataclass
class SuiteReport:
    checks: List[Check] = field(default_factory=list)

    def sorted(self) -> "SuiteReport":
        return SuiteReport(sorted(self.checks, key=lambda c: c.name))

    @property
    def failed(self) -> bool:
        return any(c.status == "fail" for c in self.checks)


def report_serialize(report: SuiteReport, fmt: str = "json", timing: bool = False) -> bytes:
    """JSON is compact with sorted keys; text is one line per check.

    Timings vary between runs, so they only appear in text and only on
    request; the JSON form is byte-identical for identical inputs.
    """
    r = report.sorted()
    if fmt == "json":
        body = {"checks": [c.to_json() for c in r.checks]}
        return json.dumps(body, sort_keys=True, separators=(",", ":")).encode()
    if fmt == "text":
        lines = []
        for c in r.checks:
            line = f"{c.status.upper():8} {c.name}"
            if c.witness:
                line += f"  [{c.witness}]"
            if timing:
                line += f"  ({c.seconds:.2f}s)"
            lines.append(line)
        return ("\n".join(lines) + ("\n" if lines else "")).encode()
    raise ValueError(f"unknown format {fmt!r}")


def threads() -> int:
    raw = os.environ.get("OPFORGE_THREADS", "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        raise UsageError(f"OPFORGE_THREADS must be an integer, got {raw!r}")


def run(cfg: SuiteConfig, suites: Sequence[str]) -> SuiteReport:
    """Dispatch suites to a worker pool; the report is ordered by check name."""
    for s in suites:
        if s not in SUITES:
            raise UsageError(f"unknown suite {s!r}")
    with ThreadPoolExecutor(max_workers=threads()) as pool:
        parts = list(pool.map(lambda s: run_suite(s, cfg), suites))
    return SuiteReport([c for p in parts for c in p]).sorted()


# ---------------------------------------------------------------------------
# subcommands producing complexes

def _complex_check(name: str, cx, extra: Optional[dict] = None) -> Check:
    defect = cx.square_zero_defect()
    if defect is not None:
        return verdict(name, False, f"d^2 != 0 in degree {defect}")
    data = cx.to_json()
    if extra:
        data.update(extra)
    return verdict(name, True, "d^2 = 0", data)


def cmd_bar(cfg: SuiteConfig) -> SuiteReport:
    from .barcobar import BarComplex
    from .modules import free_algebra
    from .operads import koszul_data
    from .suites import _gen_space
    kd = koszul_data(cfg.preset, cfg.truncation())
    x = free_algebra(kd.operad, _gen_space(cfg.generators), cfg.max_weight)
    b = BarComplex(kd, x, max_k=cfg.max_arity, max_weight=cfg.max_weight)
    return SuiteReport([_complex_check(f"bar/{cfg.preset}/weight-{w}", cx) for w, cx in b.complexes(0).items()])


def cmd_cobar(cfg: SuiteConfig) -> SuiteReport:
    from .operads import CobarOperad, koszul_data
    kd = koszul_data(cfg.preset, cfg.truncation())
    cob = CobarOperad(kd.cooperad)
    return SuiteReport([_complex_check(f"cobar-koszul/{cfg.preset}/arity-{k}", cob.complex(k)[0])
                        for k in range(1, cfg.max_arity + 1)])


def build_def(cfg: SuiteConfig, source: str, target: str, mapname: str, kind: str):
    from .defcplx import def_operadic, def_plain, def_relative, end_v_map
    from .modules import OperadBimodule, free_algebra
    from .operads import koszul_data
    from .suites import END_V_STRUCTURES, _gen_space, end_v_space
    source = source or cfg.preset
    target = target or source
    kd = koszul_data(source, cfg.truncation())
    if kind == "operadic":
        if target == source:
            if mapname != "id":
                raise UsageError(f"map {mapname!r} is not available for target {target}")
            return def_operadic(kd)
        if target == "End(V)":
            if mapname not in END_V_STRUCTURES:
                raise UsageError(f"map must be one of {sorted(END_V_STRUCTURES)} for End(V)")
            c, l = END_V_STRUCTURES[mapname]
            return def_operadic(kd, end_v_map(kd, end_v_space(), c, l))
        raise UsageError(f"unsupported target {target!r}")
    if mapname != "id":
        raise UsageError("relative and plain complexes are built for the identity map")
    if kind == "relative":
        return def_relative(kd, OperadBimodule(kd.operad))
    x = free_algebra(kd.operad, _gen_space(cfg.generators), cfg.max_weight)
    return def_plain(kd, x, cfg.max_arity)


def cmd_def(cfg: SuiteConfig, args) -> SuiteReport:
    d = build_def(cfg, args.source, args.target, args.map, args.kind)
    name = f"def/{d.name}"
    if not d.check_square_zero():
        return SuiteReport([verdict(name, False, "d^2 != 0")])
    return SuiteReport([verdict(name, True, "d^2 = 0", d.to_json())])


def cmd_homology(cfg: SuiteConfig, args) -> SuiteReport:
    if args.complex == "cobar-koszul":
        rep = cmd_cobar(cfg)
    elif args.complex == "bar-free":
        rep = cmd_bar(cfg)
    elif args.complex == "def":
        d = build_def(cfg, args.source, args.target, args.map, args.kind)
        rep = SuiteReport([_complex_check(f"def/{d.name}", d.chain_complex())])
    else:
        from .defcplx import LieData, ce_chain_coalgebra, def_operadic
        from .operads import koszul_data
        d = def_operadic(koszul_data(cfg.preset, cfg.truncation()))
        c = ce_chain_coalgebra(LieData.from_def(d), cfg.max_weight)
        rep = SuiteReport([_complex_check(f"ce/{d.name}/weight-{cfg.max_weight}", c.chain_complex())])
    out = []
    for c in rep.checks:
        if c.status != "pass":
            out.append(c)
            continue
        betti = {k: v for k, v in c.data["betti"].items() if v}
        total = sum(betti.values())
        out.append(Check(c.name, "pass", f"total {total}", {"betti": betti, "total": total}))
    return SuiteReport(out)


def cmd_experiment(cfg: SuiteConfig, args) -> SuiteReport:
    return SuiteReport(run_suite("experiment", cfg))


# ---------------------------------------------------------------------------
# argument parsing

def _int(text: str) -> int:
    return int(text, 0)


def _degrees(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated degrees, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", default="e2", help="operad preset: I, comm, assoc, lie, eN, with {j} shifts")
    common.add_argument("--n", type=int, default=None, help="use the preset eN")
    common.add_argument("--max-arity", type=int, default=3)
    common.add_argument("--max-weight", type=int, default=3)
    common.add_argument("--seed", type=_int, default=DEFAULT_SEED)
    common.add_argument("--generators", type=_degrees, default=[0, 1],
                        help="degrees of free generators, comma separated")
    common.add_argument("--emit", choices=("json", "text"), default="text")
    common.add_argument("--out", default=None, help="write the report to FILE")
    common.add_argument("--timing", action="store_true", help="add timings to text output")

    p = argparse.ArgumentParser(prog="opforge", description="Exact operad, bar/cobar and deformation computations.")
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("check", parents=[common], help="run verification suites")
    c.add_argument("--suite", action="append", choices=CHECK_SUITES, help="repeatable; default all")
    c.add_argument("--instances", type=int, default=25, help="random instances per MC suite")
    c.add_argument("--triples", type=int, default=100, help="random triples per identity check")
    sub.add_parser("bar", parents=[common], help="Bar complex of a free algebra")
    sub.add_parser("cobar", parents=[common], help="operadic cobar of the Koszul dual, per arity")
    dp = sub.add_parser("def", parents=[common], help="a deformation complex as JSON")
    dp.add_argument("--source", default=None, help="defaults to the preset")
    dp.add_argument("--target", default=None, help="the source again, or End(V)")
    dp.add_argument("--map", default="id", help="id, or unital/bracket for End(V)")
    dp.add_argument("--kind", choices=("operadic", "relative", "plain"), default="operadic")
    hp = sub.add_parser("homology", parents=[common], help="Betti numbers of a complex")
    hp.add_argument("--complex", choices=COMPLEXES, required=True)
    hp.add_argument("--source", default=None)
    hp.add_argument("--target", default=None)
    hp.add_argument("--map", default="id")
    hp.add_argument("--kind", choices=("operadic", "relative", "plain"), default="operadic")
    sub.add_parser("experiment", parents=[common], help="bracket-vanishing experiment (reported only)")
    return p


def _usage(parser, ex) -> int:
    parser.print_usage(sys.stderr)
    print(f"opforge: error: {ex}", file=sys.stderr)
    return 2


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = SuiteConfig(preset=args.preset, n=args.n, max_arity=args.max_arity, max_weight=args.max_weight,
                          seed=args.seed, generators=tuple(args.generators),
                          instances=getattr(args, "instances", 25), triples=getattr(args, "triples", 100))
        threads()
    except (UsageError, ValueError) as ex:
        return _usage(parser, ex)
    commands = {"check": lambda: run(cfg, args.suite or list(CHECK_SUITES)),
                "bar": lambda: cmd_bar(cfg), "cobar": lambda: cmd_cobar(cfg),
                "def": lambda: cmd_def(cfg, args), "homology": lambda: cmd_homology(cfg, args),
                "experiment": lambda: cmd_experiment(cfg, args)}
    try:
        report = commands[args.command]()
    except UsageError as ex:
        return _usage(parser, ex)
    except Exception as ex:  # noqa: BLE001 - a crash is a failing check, not a traceback
        report = SuiteReport([Check(f"{args.command}/error", "fail", f"{type(ex).__name__}: {ex}")])
    data = report_serialize(report, args.emit, timing=args.timing)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        if args.emit == "json":
            sys.stdout.buffer.write(b"\n")
        sys.stdout.flush()
    return 1 if report.sorted().failed else 0


if __name__ == "__main__":
    sys.exit(main())

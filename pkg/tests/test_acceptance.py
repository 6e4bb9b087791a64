"""Acceptance suite: thirteen criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script.
Each criterion returns ``(ok, witness)``; the pytest wrapper prints the
line with capture suspended and then asserts.
"""
import json
import os
import sys
import tempfile
from math import factorial

import pytest

from opforge import cli
from opforge.defcplx import def_operadic, en_action_on_def
from opforge.operads import build_preset, koszul_data
from opforge.suites import SuiteConfig, run_suite
from opforge.symseq import Truncation


def _suite(name, **kw):
    checks = run_suite(name, SuiteConfig(**kw))
    bad = [c.name for c in checks if c.status == "fail"]
    return checks, bad


def _all_pass(runs):
    checks = [c for cs, _ in runs for c in cs]
    bad = [b for _, bs in runs for b in bs]
    return bool(checks) and not bad, f"{len(checks)} checks, failing {bad[:3]}"


def c01_operad_axioms():
    return _all_pass([_suite("operad-axioms", preset=p, max_arity=4) for p in ("e2", "e3")])


def c02_basis_count():
    o = build_preset("e2", Truncation(5))
    dims = [len(o.basis(k)) for k in range(1, 6)]
    ok, w = _all_pass([_suite("basis-count", preset="e2", max_arity=5)])
    return ok and dims == [factorial(k) for k in range(1, 6)], f"dims {dims}; {w}"


def c03_hopf():
    return _all_pass([_suite("hopf", preset=p, max_arity=4) for p in ("e2", "e3")])


def c04_bar():
    checks, bad = _suite("bar", preset="e2", max_arity=3, max_weight=4, generators=(0, 1))
    weights = {c.name.split("/")[2] for c in checks}
    # the carrier is reduced, so weights start at one
    ok = not bad and weights == {f"weight-{w}" for w in range(1, 5)}
    return ok, f"{len(checks)} checks over {sorted(weights)}, failing {bad[:3]}"


def c05_koszul():
    checks, bad = _suite("koszul", preset="e2", max_arity=4)
    totals = [sum(c.data["betti"].values()) for c in sorted(checks, key=lambda c: c.name)]
    return not bad and totals == [factorial(k) for k in range(1, 5)], f"totals {totals}"


def c06_prelie_jacobi():
    runs = [_suite("convolution", preset=p, max_arity=3, triples=100) for p in ("e2", "e3")]
    ok, w = _all_pass(runs)
    counts = [int(c.witness.split()[0]) for cs, _ in runs for c in cs if c.name.endswith(("pre-lie", "jacobi"))]
    return ok and len(counts) == 4 and min(counts) >= 100, f"triples {counts}; {w}"


def c07_phi():
    return _all_pass([_suite("phi", preset=p, max_arity=3) for p in ("e2", "e3")])


def c08_mc():
    checks, bad = _suite("mc", preset="e2", max_arity=3, max_weight=3, instances=25)
    names = sorted(c.name for c in checks)
    return not bad and names == ["mc/e2/plain", "mc/e2/relative"], f"{names}, failing {bad}"


def c09_def():
    checks, bad = _suite("def", preset="e2", max_arity=3)
    names = {c.name for c in checks}
    need = {f"def/e2->{t}/{k}" for t in ("id", "End(V)/unital", "End(V)/bracket") for k in ("square-zero", "leibniz")}
    need.add("def/e2/operadic-vs-relative")
    return not bad and need <= names, f"{len(checks)} checks, missing {sorted(need - names)}, failing {bad[:3]}"


def c10_en_action():
    checks, bad = _suite("en-action", preset="e2", max_arity=3)
    kd = koszul_data("e2", Truncation(2))
    d = def_operadic(kd)
    sol = en_action_on_def(d, kd).solve_homotopy(d.d)
    return not bad and sol.found, f"failing {bad[:3]}, homotopy found {sol.found}, defect {sol.defect_norm}"


def c11_r_functor():
    checks, bad = _suite("r-functor", preset="e2", max_weight=3)
    return bool(checks) and not bad, "; ".join(c.witness for c in checks)


def c12_experiment():
    checks, bad = _suite("experiment", preset="e2")
    status = {c.status for c in checks}
    return status == {"reported"}, f"statuses {sorted(status)}"


def c13_byte_identical():
    argv = ["check", "--emit", "json"]
    outs = []
    with tempfile.TemporaryDirectory() as tmp:
        for i, threads in enumerate(("1", "4")):
            path = os.path.join(tmp, f"r{i}.json")
            old = os.environ.get("OPFORGE_THREADS")
            os.environ["OPFORGE_THREADS"] = threads
            try:
                cli.main(argv + ["--out", path])
            finally:
                if old is None:
                    os.environ.pop("OPFORGE_THREADS")
                else:
                    os.environ["OPFORGE_THREADS"] = old
            with open(path, "rb") as fh:
                outs.append(fh.read())
    n = len(json.loads(outs[0])["checks"])
    return outs[0] == outs[1], f"{n} checks, {len(outs[0])} bytes"


CRITERIA = [
    (1, "operad axioms e2/e3, arity <= 4", c01_operad_axioms),
    (2, "dim e2(k) = k!, k <= 5", c02_basis_count),
    (3, "Hopf diagonal is a morphism, arity <= 4", c03_hopf),
    (4, "Bar square-zero and homology, arity 3, weight 4", c04_bar),
    (5, "Koszul cobar resolution totals k!, k <= 4", c05_koszul),
    (6, "pre-Lie and Jacobi on random triples", c06_prelie_jacobi),
    (7, "phi certificate", c07_phi),
    (8, "Maurer-Cartan roundtrips, plain and relative", c08_mc),
    (9, "Def square-zero, Leibniz, operadic vs relative", c09_def),
    (10, "e2{2}-action on Def", c10_en_action),
    (11, "R functor dimensions", c11_r_functor),
    (12, "bracket-vanishing experiment reported", c12_experiment),
    (13, "byte-identical JSON", c13_byte_identical),
]


def line(num, title, ok, witness):
    return f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {title}  [{witness}]"


@pytest.mark.parametrize("num,title,fn", CRITERIA, ids=[f"c{n:02d}" for n, _, _ in CRITERIA])
def test_criterion(num, title, fn, capsys):
    ok, witness = fn()
    with capsys.disabled():
        print("\n" + line(num, title, ok, witness))
    assert ok, witness


if __name__ == "__main__":
    failed = 0
    for num, title, fn in CRITERIA:
        ok, witness = fn()
        failed += not ok
        print(line(num, title, ok, witness), flush=True)
    sys.exit(1 if failed else 0)

import numpy as np
import pytest
import sympy as sp

from elift.geometry import Coords
from elift.lift import NaturalSystem


def symbolic_system(names, h=None, N=None, Phi=0, q=1.0, Phi1=None, box=None, name="test", xs_assume=None):
    """Build a NaturalSystem from string expressions in the coordinate names and t."""
    t = sp.Symbol("t", real=True)
    xs = tuple(sp.Symbol(n, **(xs_assume or {"real": True})) for n in names)
    loc = {n: s for n, s in zip(names, xs)}
    loc["t"] = t
    d = len(names)
    parse = lambda e: sp.sympify(e, locals=loc)
    hM = sp.eye(d) if h is None else sp.Matrix([[parse(v) for v in row] for row in h])
    Nv = [0] * d if N is None else [parse(v) for v in N]
    box = box or [(-1.0, 1.0)] * d
    return NaturalSystem.from_sympy(Coords(tuple(names)), t, xs, hM, Nv, parse(Phi), q=q,
                                    Phi1=None if Phi1 is None else parse(Phi1), domain_box=box, name=name)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def wavy_system():
    """A 2d system with every field depending on t and x (no symmetry to hide sign errors)."""
    return symbolic_system(
        ("x", "y"),
        h=[["1 + x**2/4", "x*y/5"], ["x*y/5", "2 + sin(t)/3"]],
        N=["y*cos(t)/2 + x**2/3", "-x/2 + t*y/4"],
        Phi="x**2/2 + y**2*(1 + t**2/5)/3 + x*y*t/7",
        q=0.7,
        Phi1="x*y*t/7",
        box=[(-0.8, 0.8), (-0.8, 0.8)],
        name="wavy",
    )


def pytest_terminal_summary(terminalreporter):
    rows = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            name = getattr(rep, "nodeid", "").rpartition("::")[2]
            if not name.startswith("test_criterion_"):
                continue
            n = int(name.split("_")[2])
            detail = next((t.partition(": ")[2] for k, t in getattr(rep, "user_properties", []) if k == "acceptance"),
                          "no measurement recorded")
            verdict = "PASS" if outcome == "passed" and rep.when == "call" else "FAIL"
            if rows.get(n, ("PASS",))[0] == "PASS":
                rows[n] = (verdict, detail)
    if rows:
        terminalreporter.section("acceptance criteria")
        for n in sorted(rows):
            verdict, detail = rows[n]
            terminalreporter.write_line(f"criterion {n:2d}: {verdict}  {detail}")

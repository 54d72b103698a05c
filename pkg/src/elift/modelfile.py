"""JSON model definitions.

A file either references a zoo entry::

    {"zoo": "hh", "params": {"alpha": 1, "beta": -6}}

or spells the system out with sympy-parsable strings in the coordinate names, ``t`` and the
declared constants::

    {
      "name": "aniso",
      "coords": ["x", "y"],
      "q": 1,
      "constants": {"w": 2.0},
      "h": [["1", "0"], ["0", "1"]],
      "N": ["0", "0"],
      "Phi": "(x**2 + w**2*y**2)/2",
      "Phi2": "w**2*y**2/2",
      "domain_box": [[-1, 1], [-1, 1]],
      "observables": {
        "Hx": {"ranks": {"0": "x**2/2", "2": [["1", "0"], ["0", "0"]]}},
        "Lz": {"expr": "x*Pi_y - y*Pi_x", "conserved": false}
      },
      "initial_states": [{"t": 0, "x": [0.3, 0.1], "p": [0.0, 0.2]}],
      "horizon": 20,
      "map": {"kind": "fractional_linear", "A": 0, "B": 1, "C": 1, "D": 0}
    }

Observables are polynomials in the covariant momenta ``Pi_<coord>``; the ``ranks`` form gives
the symmetric coefficient tensors with ``C = Σ_r (1/r!) C^{i1..ir} Π_i1..Π_ir``.  Missing ``h``
means the identity, missing ``N`` means zero.
"""
from __future__ import annotations

import dataclasses
import itertools
import json
import math
from pathlib import Path

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from .conformal_maps import TimeMap
from .geometry import Coords
from .lift import NaturalSystem, PhaseState
from .models import ModelEntry, ObservableEntry, get_model
from .observables import Basis, PolyObservable

__all__ = ["ModelFileError", "load_model_file", "model_from_dict", "time_map_from_dict"]


class ModelFileError(ValueError):
    pass


def _parser(names, constants):
    t = sp.Symbol("t", real=True)
    xs = tuple(sp.Symbol(n, real=True) for n in names)
    P = tuple(sp.Symbol(f"Pi_{n}", real=True) for n in names)
    local = {n: s for n, s in zip(names, xs)}
    local.update({f"Pi_{n}": s for n, s in zip(names, P)})
    local["t"] = t
    local.update({k: sp.nsimplify(v) for k, v in constants.items()})

    def parse(src):
        if isinstance(src, (int, float)):
            return sp.nsimplify(src)
        try:
            return parse_expr(str(src), local_dict=local, transformations=standard_transformations)
        except Exception as exc:  # sympy raises a zoo of exception types here
            raise ModelFileError(f"cannot parse expression {src!r}: {exc}") from exc

    return t, xs, P, parse


def _rank_term(r, data, P, parse, d):
    if r == 0:
        return parse(data)
    arr = np.asarray(data, dtype=object)
    if arr.shape != (d,) * r:
        raise ModelFileError(f"rank-{r} coefficient must have shape {(d,) * r}, got {arr.shape}")
    total = 0
    for idx in itertools.product(range(d), repeat=r):
        total += parse(arr[idx]) * sp.Mul(*[P[i] for i in idx])
    return total / math.factorial(r)


def _observables(spec, t, xs, P, parse, q):
    out = {}
    d = len(xs)
    for name, entry in (spec or {}).items():
        if "expr" in entry:
            expr = parse(entry["expr"])
        elif "ranks" in entry:
            expr = sum((_rank_term(int(r), v, P, parse, d) for r, v in entry["ranks"].items()), sp.Integer(0))
        else:
            raise ModelFileError(f"observable {name!r} needs 'expr' or 'ranks'")
        obs = PolyObservable.from_sympy(expr, t, xs, P, basis=Basis.COVARIANT_PI, q=q, name=name,
                                        order=entry.get("order"))
        out[name] = ObservableEntry(name, obs, entry.get("expected_class", "KILLING"),
                                    bool(entry.get("conserved", True)), entry.get("anchor", "user observable"))
    return out


def _states(spec):
    try:
        return tuple(PhaseState.down(s.get("t", 0.0), s["x"], s["p"]) for s in spec or ())
    except (KeyError, TypeError) as exc:
        raise ModelFileError(f"bad initial state: {exc}") from exc


def time_map_from_dict(spec: dict) -> TimeMap:
    kind = spec.get("kind", "fractional_linear")
    if kind == "fractional_linear":
        return TimeMap.fractional_linear(*(float(spec[k]) for k in "ABCD"))
    if kind == "lynden_bell":
        return TimeMap.lynden_bell(float(spec.get("omega", 1.0)))
    if kind == "power":
        return TimeMap.power(float(spec["n"]))
    if kind == "identity":
        return TimeMap.identity()
    if kind == "expr":
        t = sp.Symbol("t", real=True)
        return TimeMap.from_sympy(parse_expr(spec["expr"], local_dict={"t": t}), t)
    raise ModelFileError(f"unknown map kind {kind!r}")


def model_from_dict(spec: dict) -> ModelEntry:
    if "zoo" in spec:
        try:
            entry = get_model(spec["zoo"], **spec.get("params", {}))
        except (KeyError, TypeError) as exc:
            raise ModelFileError(str(exc)) from exc
        extra_states = _states(spec.get("initial_states"))
        if extra_states:
            entry = dataclasses.replace(entry, initial_states=extra_states)
        return entry

    names = spec.get("coords")
    if not names:
        raise ModelFileError("model file needs 'coords' or 'zoo'")
    d = len(names)
    q = float(spec.get("q", 1.0))
    t, xs, P, parse = _parser(names, spec.get("constants", {}))
    h = sp.Matrix([[parse(v) for v in row] for row in spec["h"]]) if "h" in spec else sp.eye(d)
    if h.shape != (d, d):
        raise ModelFileError(f"h must be {d}x{d}")
    N = [parse(v) for v in spec.get("N", [0] * d)]
    if len(N) != d:
        raise ModelFileError(f"N must have {d} components")
    if "Phi" in spec:
        Phi = parse(spec["Phi"])
    elif "Phi1" in spec and "Phi2" in spec:
        Phi = parse(spec["Phi1"]) + parse(spec["Phi2"])
    else:
        Phi = sp.Integer(0)
    Phi1 = None
    if "Phi1" in spec:
        Phi1 = parse(spec["Phi1"])
    elif "Phi2" in spec:
        Phi1 = Phi - parse(spec["Phi2"])
    box = spec.get("domain_box", [[-1.0, 1.0]] * d)
    if len(box) != d:
        raise ModelFileError(f"domain_box needs {d} intervals")
    name = spec.get("name", "user")
    sys = NaturalSystem.from_sympy(Coords(tuple(names)), t, xs, h, N, Phi, q=q, Phi1=Phi1, domain_box=box, name=name)
    obs = _observables(spec.get("observables"), t, xs, P, parse, q)
    return ModelEntry(name, sys, dict(spec.get("constants", {})), obs, _states(spec.get("initial_states")),
                      float(spec.get("horizon", 10.0)), tuple(spec.get("anchors", ("user model file",))),
                      spec.get("regime", ""), tuple(spec.get("t_window", (-1.0, 1.0))))


def load_model_file(path) -> ModelEntry:
    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from exc
    return model_from_dict(spec)

"""Command-line front end.

Exit codes: 0 success, 1 a verification check failed, 2 configuration error,
3 integration failure.  JSON output carries ``"schema": 1`` and is byte-stable under a fixed
seed (sorted keys, shortest round-trip float repr).
"""
from __future__ import annotations

import argparse
import inspect
import json
import math
import sys as _sys
import time
from pathlib import Path

import numpy as np

from .conformal_maps import (
    SingularMapError,
    TimeMap,
    UndefinedInvariantError,
    boost_square_invariant,
    schwarzian,
    verify_bargmann_conformal,
    verify_solution_map,
    verify_vlb_conformal,
)
from .dynamics import IntegrationError, flow_down, flow_up, project_equivalence
from .killing import AnsatzSpace, residual_generic, residual_rank2, solve_ansatz
from .lift import PhaseState, lift_state, sample_point
from .modelfile import ModelFileError, load_model_file, time_map_from_dict
from .models import REGISTRY, ModelEntry, get_model, list_models
from .observables import (
    conformal_factor,
    drift,
    eval_up,
    hamiltonian_observable_down,
    lift_observable,
    poisson_down,
    poisson_up,
    time_derivative_down,
)

SCHEMA = 1
EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_INTEGRATION = 0, 1, 2, 3

ALIASES = {
    "free-particle": "free",
    "henon-heiles": "hh",
    "quantum-dot": "dot",
    "kepler": "kepler_gt",
    "g-of-t-kepler": "kepler_gt",
    "lynden-bell": "lynden_bell",
}

DRIFT_TOL = 1e-7
OFF_REGIME_DRIFT = 1e-4
RESIDUAL_TOL = 1e-8


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- output helpers


def _plain(obj):
    """Recursively convert to JSON-native values; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def dumps(payload: dict) -> str:
    return json.dumps(_plain({"schema": SCHEMA, **payload}), sort_keys=True, indent=2, ensure_ascii=False)


def _emit(payload: dict, out_dir: Path | None, filename: str) -> None:
    text = dumps(payload)
    if out_dir is not None:
        (out_dir / filename).write_text(text + "\n")
    print(text)


# ---------------------------------------------------------------- model resolution


def _coerce(v: str):
    low = v.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def _collect_params(args, extra: list[str]) -> dict:
    params = {}
    for item in args.params or []:
        if "=" not in item:
            raise ConfigError(f"--params expects k=v, got {item!r}")
        k, v = item.split("=", 1)
        params[k.replace("-", "_")] = _coerce(v)
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        elif i + 1 < len(extra) and not extra[i + 1].startswith("--"):
            val = extra[i + 1]
            i += 2
        else:
            raise ConfigError(f"flag {tok} needs a value")
        params[key.replace("-", "_")] = _coerce(val)
    if getattr(args, "regime", None):
        params["regime"] = args.regime
    return params


def resolve_model(args, extra) -> ModelEntry:
    if getattr(args, "model_file", None):
        try:
            return load_model_file(args.model_file)
        except ModelFileError as exc:
            raise ConfigError(str(exc)) from exc
    name = args.model or args.model_pos
    if not name:
        raise ConfigError("no model given (positional MODEL, --model or --model-file)")
    mid = ALIASES.get(name, name.replace("-", "_"))
    if mid not in REGISTRY:
        raise ConfigError(f"unknown model {name!r}; run list-models")
    params = _collect_params(args, extra)
    factory = REGISTRY[mid]
    try:
        sig = inspect.signature(factory)
        accepts_kw = any(p.kind is p.VAR_KEYWORD for p in sig.parameters.values())
        if not accepts_kw:
            unknown = set(params) - set(sig.parameters)
            if unknown:
                raise ConfigError(f"model {mid!r} has no parameter(s) {sorted(unknown)}")
        return get_model(mid, **params)
    except ConfigError:
        raise
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot build model {mid!r}: {exc}") from exc


def _cfg(args, model: ModelEntry):
    over = {}
    if getattr(args, "t_end", None) is not None:
        over["t_end"] = args.t_end
    if getattr(args, "rel_tol", None) is not None:
        over["rel_tol"] = args.rel_tol
        over["abs_tol"] = args.rel_tol * 1e-2
    return model.config(**over)


def _out_dir(args) -> Path | None:
    if not getattr(args, "out", None):
        return None
    p = Path(args.out)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {p}: {exc}") from exc
    return p


def _pick_state(model: ModelEntry, index: int) -> PhaseState:
    if not model.initial_states:
        raise ConfigError(f"model {model.id!r} declares no initial states")
    if not 0 <= index < len(model.initial_states):
        raise ConfigError(f"state index {index} out of range (model has {len(model.initial_states)})")
    return model.initial_states[index]


# ---------------------------------------------------------------- commands


def cmd_list_models(args, extra) -> int:
    _emit({"command": "list-models", "models": list_models(), "aliases": ALIASES}, None, "")
    return EXIT_OK


def cmd_simulate(args, extra) -> int:
    model = resolve_model(args, extra)
    cfg = _cfg(args, model)
    state = _pick_state(model, args.state_index)
    out = _out_dir(args)
    sys = model.system
    if args.form == "up":
        tr = flow_up(sys, lift_state(sys, state), cfg)
        cons = float(np.max(np.abs(tr.constraint)))
        drifts = {}
        for name, e in model.observables.items():
            lifted = e.lifted(sys)
            vals = np.array([eval_up(lifted, sys, tr.state(k)) for k in range(len(tr))])
            dev = float(np.max(np.abs(vals - vals[0])))
            drifts[name] = dict(drift=dev, relative=dev / max(1.0, abs(vals[0])), expected_conserved=e.conserved)
    else:
        tr = flow_down(sys, state, cfg)
        cons = None
        drifts = {}
        for name, e in model.observables.items():
            r = drift(e.obs, tr, sys)
            drifts[name] = dict(drift=r.max_abs, relative=r.relative, expected_conserved=e.conserved)
    summary = dict(command="simulate", model=model.id, params=model.params, form=args.form, T=cfg.t_end,
                   steps=len(tr) - 1, constraint_drift=cons, observable_drifts=drifts, rel_tol=cfg.rel_tol)
    if out is not None:
        tr.to_csv(out / "trajectory.csv")
    if args.format == "csv" and out is None:
        tr.to_csv(_sys.stdout)
        return EXIT_OK
    _emit(summary, out, "summary.json")
    return EXIT_OK


def _check(checks: list, name: str, value, threshold: float, expect: str, **info):
    """Append a check; ``expect`` is "below" or "above"."""
    ok = value < threshold if expect == "below" else value > threshold
    checks.append(dict(name=name, value=value, threshold=threshold, expect=expect, passed=bool(ok), **info))


def _verify_observables(model: ModelEntry, cfg, checks: list, seed: int):
    sys = model.system
    trajs = []
    for i, st in enumerate(model.initial_states):
        try:
            trajs.append(flow_down(sys, st, cfg))
        except IntegrationError as exc:
            checks.append(dict(name=f"flow[{i}]", passed=False, error=str(exc)))
    rng = np.random.default_rng(seed)
    probe = []
    for _ in range(5):
        t = rng.uniform(*model.t_window)
        probe.append(PhaseState.down(t, sample_point(sys, rng), rng.normal(scale=0.5, size=sys.d)))
    lifted_states = [lift_state(sys, s) for s in probe[:4]]
    for name, e in model.observables.items():
        worst = max((drift(e.obs, tr, sys).relative for tr in trajs), default=math.nan)
        if e.conserved:
            _check(checks, f"drift.{name}", worst, DRIFT_TOL, "below")
        else:
            _check(checks, f"drift.{name}.off_regime", worst, OFF_REGIME_DRIFT, "above")
        res = residual_generic(sys, e.obs, seed=seed)
        if e.conserved:
            _check(checks, f"killing.{name}", res.max_residual, RESIDUAL_TOL, "below")
            scale = max(1.0, *(abs(v) for v in _values(e.obs, sys, probe)))
            dC = max(abs(time_derivative_down(e.obs, sys, s)) for s in probe) / scale
            _check(checks, f"bracket.{name}", dC, 1e-9, "below")
            fit = conformal_factor(e.lifted(sys), sys, lifted_states, seed=seed)
            checks.append(dict(name=f"conformal.{name}", value=fit.norm, verdict=fit.verdict,
                               expected=e.expected_class, passed=fit.verdict == e.expected_class))
        else:
            _check(checks, f"killing.{name}.off_regime", res.max_residual, 1e-6, "above")
        if e.lift_kind == "block":
            rb = residual_rank2(sys, e.lift_data, seed=seed)
            _check(checks, f"rank2_blocks.{name}", rb.max_residual, RESIDUAL_TOL, "below")


def _values(obs, sys, states):
    from .observables import eval_down

    return [eval_down(obs, sys, s) for s in states]


def _verify_solver(model: ModelEntry, checks: list, seed: int, timing: bool = False):
    for rank, deg, dim in model.solver_checks:
        t0 = time.perf_counter()
        space = AnsatzSpace.build(model.system, rank, deg, extra=model.extra_basis)
        r = solve_ansatz(model.system, space, seed=seed, t_window=model.t_window)
        row = dict(name=f"solver.rank{rank}.deg{deg}", value=r.nullspace_dim, expected=dim,
                   spectral_gap=r.spectral_gap, reliable=r.reliable, classification=r.classification,
                   passed=r.nullspace_dim == dim and r.reliable)
        if timing:
            row["seconds"] = round(time.perf_counter() - t0, 1)
        checks.append(row)


def _lb_suite(fmap: TimeMap, model: ModelEntry, cfg, checks: list, seed: int):
    sys = model.system
    rng = np.random.default_rng(seed)
    st = model.initial_states[0]
    tr = flow_down(sys, st, cfg)
    _check(checks, "solution_map", verify_solution_map(fmap, sys, tr).max_residual, 1e-7, "below")
    ts = [fmap.inverse(t) for t in rng.uniform(tr.param[0], tr.param[-1], 50)]
    sch = max(abs(schwarzian(fmap, t)) for t in ts)
    checks.append(dict(name="schwarzian.max_abs", value=sch, passed=True, info="zero for fractional-linear maps"))
    pts = np.column_stack([ts[:20], rng.uniform(-1, 1, (20, sys.d))])
    _check(checks, "bargmann_conformal", verify_bargmann_conformal(fmap, sys, pts), 1e-9, "below")
    # the boost-square quantity is conserved for the Lynden-Bell pair only
    if fmap.label.startswith("lynden_bell") and model.id == "lynden_bell":
        try:
            _, dr = boost_square_invariant(fmap, tr, sys)
            _check(checks, "boost_square.drift", dr, 1e-7, "below")
        except UndefinedInvariantError as exc:
            checks.append(dict(name="boost_square.drift", passed=True, skipped=str(exc)))
    if sch > 1e-8:
        abl = verify_solution_map(fmap, sys, tr, include_schwarzian=False).max_residual
        _check(checks, "schwarzian_ablation", abl, 1e-2, "above")


def _vlb_suite(model: ModelEntry, checks: list, seed: int):
    p = model.params
    rng = np.random.default_rng(seed)
    pts = np.column_stack([rng.uniform(-1, 1, 20), rng.uniform(-1.5, 1.5, (20, 3))])
    dev = verify_vlb_conformal(p["a"], p["b"], p["c"], p["d"], p["G0"], p["M"], pts)
    _check(checks, "vlb_conformal", dev, 1e-9, "below")


def cmd_verify(args, extra) -> int:
    model = resolve_model(args, extra)
    cfg = _cfg(args, model)
    out = _out_dir(args)
    checks: list = []
    t0 = time.perf_counter()
    if model.initial_states:
        rep = project_equivalence(model.system, model.initial_states[0], cfg)
        _check(checks, "lift_equivalence", rep.discrepancy, 1e-7, "below")
    _verify_observables(model, cfg, checks, args.seed)
    _verify_solver(model, checks, args.seed, args.timing)
    if model.id == "lynden_bell":
        _lb_suite(TimeMap.lynden_bell(model.params["omega"]), model, cfg, checks, args.seed)
    if model.id == "kepler_gt":
        _vlb_suite(model, checks, args.seed)
    passed = all(c["passed"] for c in checks)
    payload = dict(command="verify", model=model.id, params=model.params, regime=model.regime, passed=passed,
                   n_checks=len(checks), n_failed=sum(not c["passed"] for c in checks), checks=checks)
    if args.timing:
        payload["seconds"] = round(time.perf_counter() - t0, 2)
    _emit(payload, out, "verify.json")
    return EXIT_OK if passed else EXIT_CHECK


def cmd_solve_killing(args, extra) -> int:
    model = resolve_model(args, extra)
    out = _out_dir(args)
    try:
        space = AnsatzSpace.build(model.system, args.rank, args.poly_degree, extra=model.extra_basis)
        r = solve_ansatz(model.system, space, n_samples=args.samples, seed=args.seed, t_window=model.t_window,
                         classify=not args.no_classify)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    gens = [dict(coeffs=g, classification=c, residual_max=v)
            for g, c, v in zip(r.generators, r.classification, r.validation_residuals)]
    labels = [f"{e.block}{list(e.component)}:{e.expr}" for e in space.elements]
    _emit(dict(command="solve-killing", model=model.id, params=model.params, rank=args.rank,
               poly_degree=args.poly_degree, n_params=r.n_params, n_samples=r.n_samples,
               singular_values=r.singular_values, nullspace_dim=r.nullspace_dim, spectral_gap=r.spectral_gap,
               reliable=r.reliable, basis=labels, generators=gens), out, "killing.json")
    return EXIT_OK


def _observable(model: ModelEntry, name: str):
    if name == "H":
        if "H" in model.observables:
            return model.observables["H"].obs, None
        return hamiltonian_observable_down(model.system), None
    if name not in model.observables:
        raise ConfigError(f"model {model.id!r} has no observable {name!r}; known: {sorted(model.observables)}")
    e = model.observables[name]
    return e.obs, e


def cmd_bracket(args, extra) -> int:
    model = resolve_model(args, extra)
    sys = model.system
    A, ea = _observable(model, args.a)
    B, eb = _observable(model, args.b)
    LA = ea.lifted(sys) if ea is not None else lift_observable(A, sys=sys)
    LB = eb.lifted(sys) if eb is not None else lift_observable(B, sys=sys)
    rng = np.random.default_rng(args.seed)
    rows = []
    for _ in range(args.n_states):
        st = PhaseState.down(rng.uniform(*model.t_window), sample_point(sys, rng), rng.normal(scale=0.5, size=sys.d))
        up = lift_state(sys, st)
        rows.append(dict(
            t=st.t, x=st.x, p=st.p,
            down_canonical=poisson_down(A, B, sys, st, method="canonical"),
            down_covariant=poisson_down(A, B, sys, st, method="covariant"),
            up_canonical=poisson_up(LA, LB, sys, up, method="canonical"),
            up_covariant=poisson_up(LA, LB, sys, up, method="covariant"),
        ))
    spread = max(max(abs(r["down_canonical"] - r["down_covariant"]), abs(r["up_canonical"] - r["up_covariant"]))
                 for r in rows)
    _emit(dict(command="bracket", model=model.id, params=model.params, a=args.a, b=args.b, states=rows,
               route_disagreement=spread), None, "")
    return EXIT_OK


def _parse_map(args) -> TimeMap:
    vals = args.map_args or []
    try:
        if args.map == "lynden_bell":
            return TimeMap.lynden_bell(*(vals[:1] or [1.0]))
        if args.map == "fractional_linear":
            if len(vals) != 4:
                raise ConfigError("fractional_linear needs --map-args A B C D")
            return TimeMap.fractional_linear(*vals, interval=(0.0, math.inf))
        if args.map == "power":
            return TimeMap.power(*(vals[:1] or [2.0]))
        if args.map_file:
            return time_map_from_dict(json.loads(Path(args.map_file).read_text()))
    except (SingularMapError, ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown map {args.map!r}")


def cmd_conformal_check(args, extra) -> int:
    if not (args.model or args.model_pos or args.model_file):
        args.model = "lynden_bell"
    model = resolve_model(args, extra)
    cfg = _cfg(args, model)
    out = _out_dir(args)
    checks: list = []
    if model.id == "kepler_gt":
        _vlb_suite(model, checks, args.seed)
    else:
        if model.d != 3:
            raise ConfigError("the time-map checks need a d = 3 model")
        fmap = _parse_map(args)
        try:
            _lb_suite(fmap, model, cfg, checks, args.seed)
        except SingularMapError as exc:
            raise ConfigError(f"map {fmap.label} cannot pull back the {model.id} trajectory "
                              f"(t_* in [{model.initial_states[0].t}, {model.initial_states[0].t + cfg.t_end}]): {exc}") from exc
    passed = all(c["passed"] for c in checks)
    _emit(dict(command="conformal-check", model=model.id, params=model.params, map=args.map, passed=passed,
               checks=checks), out, "conformal.json")
    return EXIT_OK if passed else EXIT_CHECK


# ---------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser, model=True):
    if model:
        p.add_argument("model_pos", nargs="?", metavar="MODEL", help="model id or alias")
        p.add_argument("--model", help="model id (same as the positional)")
        p.add_argument("--model-file", help="JSON model definition")
        p.add_argument("--params", nargs="*", metavar="K=V", help="model parameters")
        p.add_argument("--regime", help="named parameter regime (Hénon-Heiles: sk, kdv5, kk, original)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="DIR", help="write reports and data files here")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="elift", description="Eisenhart-Duval lift toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list-models", help="list the model registry")
    p.set_defaults(func=cmd_list_models)

    p = sub.add_parser("simulate", help="integrate a model trajectory")
    _common(p)
    p.add_argument("--t-end", type=float)
    p.add_argument("--rel-tol", type=float)
    p.add_argument("--state-index", type=int, default=0)
    p.add_argument("--form", choices=("up", "down"), default="up")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run a model's invariant and residual suite")
    _common(p)
    p.add_argument("--t-end", type=float)
    p.add_argument("--rel-tol", type=float)
    p.add_argument("--timing", action="store_true", help="include wall time (breaks byte stability)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("solve-killing", help="search a polynomial ansatz for (conformal) Killing tensors")
    _common(p)
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--poly-degree", type=int, default=2)
    p.add_argument("--samples", type=int)
    p.add_argument("--no-classify", action="store_true")
    p.set_defaults(func=cmd_solve_killing)

    p = sub.add_parser("bracket", help="Poisson brackets of two observables by both routes")
    _common(p)
    p.add_argument("--a", required=True, help="observable name ('H' for the Hamiltonian)")
    p.add_argument("--b", default="H")
    p.add_argument("--n-states", type=int, default=3)
    p.set_defaults(func=cmd_bracket)

    p = sub.add_parser("conformal-check", help="time-reparametrisation and Bargmann conformal checks")
    _common(p)
    p.add_argument("--map", default="lynden_bell", choices=("lynden_bell", "fractional_linear", "power", "file"))
    p.add_argument("--map-args", type=float, nargs="*")
    p.add_argument("--map-file")
    p.add_argument("--t-end", type=float)
    p.add_argument("--rel-tol", type=float)
    p.set_defaults(func=cmd_conformal_check)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    if args.command == "list-models" and extra:
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    try:
        return args.func(args, extra)
    except ConfigError as exc:
        print(f"elift: configuration error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"elift: integration failed: {exc}", file=_sys.stderr)
        return EXIT_INTEGRATION


if __name__ == "__main__":
    raise SystemExit(main())

"""Upstairs null-geodesic flow, downstairs Hamiltonian flow and their comparison."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy as sp
from scipy.interpolate import CubicHermiteSpline

from .geometry import _inverse
from .lift import Form, NaturalSystem, PhaseState, hamiltonian_up, lift_state

__all__ = [
    "Scheme",
    "IntegratorConfig",
    "Trajectory",
    "IntegrationError",
    "StepUnderflowError",
    "DomainExitError",
    "flow_up",
    "flow_down",
    "project_equivalence",
    "EquivalenceReport",
    "rhs_up",
    "rhs_down",
]


class IntegrationError(RuntimeError):
    def __init__(self, msg, partial: "Trajectory | None" = None):
        super().__init__(msg)
        self.partial = partial


class StepUnderflowError(IntegrationError):
    pass


class DomainExitError(IntegrationError):
    pass


class Scheme(enum.Enum):
    EMBEDDED_RK_5_4 = "rk54"
    FIXED_STORMER_VERLET = "verlet"


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: Scheme = Scheme.EMBEDDED_RK_5_4
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    min_step: float = 1e-14
    t_end: float = 10.0
    fast: bool = True  # use the compiled sympy right-hand side when available

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.min_step < self.max_step:
            raise ValueError("min_step must be smaller than max_step")
        if self.scheme is Scheme.FIXED_STORMER_VERLET and not math.isfinite(self.max_step):
            raise ValueError("the fixed-step scheme uses max_step as its step; give a finite one")


# ---------------------------------------------------------------- state vectors


def _pack_up(s: PhaseState) -> np.ndarray:
    return np.concatenate([s.x, [s.u, s.v], s.p, [s.pu, s.pv]])


def _unpack_up(y: np.ndarray, d: int) -> PhaseState:
    return PhaseState.up(y[d], y[d + 1], y[:d].copy(), y[2 * d + 2], y[2 * d + 3], y[d + 2:2 * d + 2].copy())


def _pack_down(s: PhaseState) -> np.ndarray:
    return np.concatenate([s.x, s.p])


# ---------------------------------------------------------------- right-hand sides


def rhs_up(sys: NaturalSystem, y: np.ndarray) -> np.ndarray:
    """Hamilton's equations of 𝓗 from the field jets; y = (x, u, v, p̂_x, p̂_u, p̂_v)."""
    d, q = sys.d, sys.q
    x = y[:d]
    u = y[d]
    p = y[d + 2:2 * d + 2]
    pu, pv = y[2 * d + 2], y[2 * d + 3]
    t = -u / q
    h = sys.h.eval(t, x)
    hg = sys.h.grad(t, x)
    hinv = _inverse(h)
    N = sys.N.eval(t, x)
    Ng = sys.N.grad(t, x)
    Phi = float(sys.Phi.eval(t, x))
    Pg = sys.Phi.grad(t, x)
    Pi = p - pv * N
    P = hinv @ Pi
    # ∂_a 𝓗 for a = (t, x^k): pv² ∂Φ - ½ P ∂h P - pv P·∂N
    dH = pv ** 2 * Pg - 0.5 * np.einsum("i,ija,j->a", P, hg, P) - pv * (P @ Ng)
    out = np.empty_like(y)
    out[:d] = P
    out[d] = pv
    out[d + 1] = pu + 2.0 * Phi * pv - P @ N
    out[d + 2:2 * d + 2] = -dH[1:]
    out[2 * d + 2] = dH[0] / q  # -∂_u𝓗 = (1/q) ∂_t𝓗
    out[2 * d + 3] = 0.0
    return out


def rhs_down(sys: NaturalSystem, t: float, y: np.ndarray) -> np.ndarray:
    """Canonical flow of H = ½ΠhΠ + q²Φ with Π = p + qN; y = (x, p)."""
    d, q = sys.d, sys.q
    x, p = y[:d], y[d:]
    hinv = _inverse(sys.h.eval(t, x))
    hg = sys.h.grad(t, x)
    N = sys.N.eval(t, x)
    Ng = sys.N.grad(t, x)
    Pg = sys.Phi.grad(t, x)
    P = hinv @ (p + q * N)
    dH = -0.5 * np.einsum("i,ija,j->a", P, hg, P) + q * (P @ Ng) + q ** 2 * Pg
    return np.concatenate([P, -dH[1:]])


_COMPILED: dict[int, tuple] = {}


def _compiled(sys: NaturalSystem):
    """Lambdified (up, down) right-hand sides built symbolically, cached per system."""
    s = sys.symbolic
    if s is None:
        return None
    hit = _COMPILED.get(id(s))
    if hit is not None and hit[0] is s:
        return hit[1]
    d, q = sys.d, sp.nsimplify(sys.q) if float(sys.q).is_integer() else sp.Float(sys.q)
    u, v, pu, pv = sp.symbols("u_ v_ pu_ pv_", real=True)
    ps = sp.symbols(f"p_0:{d}", real=True)
    hinv = s.h.inv()
    sub = {s.t: -u / q}
    Phi = s.Phi.subs(sub)
    N = sp.Matrix(s.N).subs(sub)
    Pi = sp.Matrix(ps) - pv * N
    Hup = pu * pv + Phi * pv ** 2 + (Pi.T * hinv.subs(sub) * Pi)[0, 0] / 2
    qs = list(s.xs) + [u, v]
    Ps = list(ps) + [pu, pv]
    dq = [sp.diff(Hup, pp) for pp in Ps]
    dp = [-sp.diff(Hup, c) for c in qs]
    up_exprs = dq[:d] + [dq[d], dq[d + 1]] + dp[:d] + [dp[d], 0]
    f_up = sp.lambdify([*qs, *Ps], up_exprs, "numpy", cse=True)

    PiD = sp.Matrix(ps) + q * sp.Matrix(s.N)
    Hd = (PiD.T * hinv * PiD)[0, 0] / 2 + q ** 2 * s.Phi
    down_exprs = [sp.diff(Hd, pp) for pp in ps] + [-sp.diff(Hd, c) for c in s.xs]
    f_down = sp.lambdify([s.t, *s.xs, *ps], down_exprs, "numpy", cse=True)

    def up(y):
        return np.array(f_up(*y), dtype=float)

    def down(t, y):
        return np.array(f_down(t, *y), dtype=float)

    _COMPILED[id(s)] = (s, (up, down))
    return up, down


def _rhs_pair(sys: NaturalSystem, fast: bool):
    comp = _compiled(sys) if fast else None
    if comp is not None:
        return comp
    return (lambda y: rhs_up(sys, y)), (lambda t, y: rhs_down(sys, t, y))


# ---------------------------------------------------------------- trajectory


@dataclass(frozen=True)
class Trajectory:
    """Accepted samples of one integration; immutable once returned."""

    form: Form
    d: int
    param: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    step: np.ndarray
    err: np.ndarray
    constraint: np.ndarray | None
    meta: dict = field(default_factory=dict)
    coord_names: tuple = ()

    def __len__(self):
        return self.param.size

    def state(self, k: int) -> PhaseState:
        if self.form is Form.UP:
            return _unpack_up(self.y[k], self.d)
        return PhaseState.down(self.param[k], self.y[k, :self.d], self.y[k, self.d:])

    @property
    def final(self) -> PhaseState:
        return self.state(-1)

    def interpolant(self) -> Callable[[np.ndarray], np.ndarray]:
        """Cubic Hermite dense output in the parameter."""
        order = np.argsort(self.param)
        spl = CubicHermiteSpline(self.param[order], self.y[order], self.dy[order], axis=0)
        return spl

    def to_csv(self, path) -> None:
        """Write to a path or an open text stream."""
        d = self.d
        names = list(self.coord_names) or [f"x{i + 1}" for i in range(d)]
        if self.form is Form.UP:
            coords = names + ["u", "v"]
            moms = [f"p_{n}" for n in names] + ["p_u", "p_v"]
        else:
            coords = names
            moms = [f"p_{n}" for n in names]
        cons = self.constraint if self.constraint is not None else np.full(len(self), np.nan)

        def write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["param", *coords, *moms, "constraint", "step", "err"])
            for k in range(len(self)):
                row = [self.param[k], *self.y[k], cons[k], self.step[k], self.err[k]]
                w.writerow(["%.17g" % val for val in row])

        if hasattr(path, "write"):
            write(path)
        else:
            with open(path, "w", newline="") as fh:
                write(fh)


# ---------------------------------------------------------------- Dormand-Prince 5(4)

_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_BHAT = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _BHAT


def _dp54(f, s0, y0, s_end, cfg: IntegratorConfig, accept_hook):
    """Adaptive integration from s0 to s_end (either direction) with a PI controller.

    ``accept_hook(s, y)`` is called after each accepted step and may raise.
    Returns lists (s, y, dy, step, err).
    """
    direction = 1.0 if s_end >= s0 else -1.0
    span = abs(s_end - s0)
    rtol, atol = cfg.rel_tol, cfg.abs_tol
    s, y = s0, np.array(y0, float)
    k1 = f(s, y)
    out_s, out_y, out_dy, out_h, out_e = [s], [y.copy()], [k1.copy()], [0.0], [0.0]
    if span == 0:
        return out_s, out_y, out_dy, out_h, out_e

    # starting step (Hairer, Nørsett & Wanner II.4)
    sc = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean((y / sc) ** 2))
    d1 = np.sqrt(np.mean((k1 / sc) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y + direction * h0 * k1
    d2 = np.sqrt(np.mean(((f(s + direction * h0, y1) - k1) / sc) ** 2)) / h0
    h1 = max(1e-6, h0 * 1e-3) if max(d1, d2) <= 1e-15 else (0.01 / max(d1, d2)) ** 0.2
    h = min(100 * h0, h1, cfg.max_step, span)

    alpha, beta = 0.7 / 5, 0.4 / 5
    err_prev = 1e-4
    rejected = False
    K = np.empty((7, y.size))
    while direction * (s_end - s) > 0:
        if h < cfg.min_step:
            raise StepUnderflowError(f"step size {h:.3e} below min_step at parameter {s:.6g}")
        last = h >= abs(s_end - s)
        if last:
            h = abs(s_end - s)
        hs = direction * h
        K[0] = k1
        for i in range(1, 7):
            K[i] = f(s + _C[i] * hs, y + hs * (np.asarray(_A[i]) @ K[:i]))
        y_new = y + hs * (_B @ K)
        err_vec = hs * (_E @ K)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / sc) ** 2)))
        if not np.all(np.isfinite(y_new)):
            err = math.inf
        if err <= 1.0:
            s_new = s_end if last else s + hs
            accept_hook(s_new, y_new)
            s, y = s_new, y_new
            k1 = K[6].copy()  # FSAL
            out_s.append(s)
            out_y.append(y.copy())
            out_dy.append(k1.copy())
            out_h.append(h)
            out_e.append(float(np.max(np.abs(err_vec))))
            fac = 0.9 * max(err, 1e-10) ** -alpha * err_prev ** beta
            fac = min(5.0, max(0.2, fac))
            if rejected:
                fac = min(1.0, fac)
            h = min(h * fac, cfg.max_step)
            err_prev = max(err, 1e-4)
            rejected = False
        else:
            fac = 0.2 if not math.isfinite(err) else max(0.2, 0.9 * err ** -alpha)
            h *= fac
            rejected = True
    return out_s, out_y, out_dy, out_h, out_e


# ---------------------------------------------------------------- Störmer-Verlet


def _require_separable(sys: NaturalSystem):
    rng = np.random.default_rng(1)
    from .lift import sample_point

    for _ in range(3):
        x = sample_point(sys, rng)
        t = rng.uniform(-1, 1)
        if np.max(np.abs(sys.N.eval(t, x))) > 0 or np.max(np.abs(sys.h.grad(t, x))) > 0:
            raise ValueError("the splitting scheme needs N = 0 and constant h")


def _verlet_down(sys, t0, y0, t_end, cfg, hook, rhs):
    d, q = sys.d, sys.q
    hinv = _inverse(sys.h.eval(t0, y0[:d]))
    n = max(1, int(math.ceil(abs(t_end - t0) / cfg.max_step)))
    dt = (t_end - t0) / n
    x, p, t = y0[:d].copy(), y0[d:].copy(), t0
    ss, ys, dys = [t], [y0.copy()], [rhs(t, y0)]
    for _ in range(n):
        p = p - 0.5 * dt * q ** 2 * sys.Phi.grad(t, x)[1:]
        x = x + dt * (hinv @ p)
        t = t + dt
        p = p - 0.5 * dt * q ** 2 * sys.Phi.grad(t, x)[1:]
        y = np.concatenate([x, p])
        hook(t, y)
        ss.append(t)
        ys.append(y)
        dys.append(rhs(t, y))
    return ss, ys, dys, [0.0] + [abs(dt)] * n, [0.0] * (n + 1)


def _verlet_up(sys, y0, lam_end, cfg, hook, rhs):
    d, q = sys.d, sys.q
    y = y0.copy()
    hinv = _inverse(sys.h.eval(-y[d] / q, y[:d]))
    n = max(1, int(math.ceil(abs(lam_end) / cfg.max_step)))
    dl = lam_end / n
    pv = y[2 * d + 3]

    def kick(y, dt):
        t = -y[d] / q
        g = sys.Phi.grad(t, y[:d])
        y[d + 2:2 * d + 2] -= dt * pv ** 2 * g[1:]
        y[2 * d + 2] += dt * pv ** 2 * g[0] / q
        y[d + 1] += dt * 2.0 * float(sys.Phi.eval(t, y[:d])) * pv

    ss, ys, dys = [0.0], [y.copy()], [rhs(y)]
    lam = 0.0
    for _ in range(n):
        kick(y, 0.5 * dl)
        y[:d] += dl * (hinv @ y[d + 2:2 * d + 2])
        y[d] += dl * pv
        y[d + 1] += dl * y[2 * d + 2]
        kick(y, 0.5 * dl)
        lam += dl
        hook(lam, y)
        ss.append(lam)
        ys.append(y.copy())
        dys.append(rhs(y))
    return ss, ys, dys, [0.0] + [abs(dl)] * n, [0.0] * (n + 1)


# ---------------------------------------------------------------- public flows


def _domain_hook(sys: NaturalSystem, d: int, builder):
    def hook(s, y):
        if not sys.in_domain(y[:d]):
            raise DomainExitError(f"trajectory left the domain of {sys.name} at parameter {s:.6g}", builder())
    return hook


def _meta(sys, cfg, lam_or_t):
    return dict(integrator=cfg.scheme.value, rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
                model=sys.name, span=lam_or_t)


def flow_up(sys: NaturalSystem, state: PhaseState, cfg: IntegratorConfig, lam_end: float | None = None,
            check_constraint: bool = True) -> Trajectory:
    """Integrate the upstairs geodesic equations from λ = 0 to ``lam_end``.

    By default ``lam_end = -cfg.t_end`` so that downstairs time t = t0 - λ runs forward.
    """
    if state.form is not Form.UP:
        raise ValueError("flow_up needs an UP state")
    d = sys.d
    if check_constraint:
        H0 = hamiltonian_up(sys, state)
        if abs(H0) >= cfg.abs_tol * (1.0 + abs(state.pu * state.pv)):
            raise ValueError(f"initial state is not null: 𝓗 = {H0:.3e}")
    if not sys.in_domain(state.x):
        raise DomainExitError("initial state outside the domain")
    lam_end = -cfg.t_end if lam_end is None else lam_end
    f_up, _ = _rhs_pair(sys, cfg.fast)
    y0 = _pack_up(state)
    acc: list = []

    def build():
        return _finish_up(sys, cfg, [a[0] for a in acc], [a[1] for a in acc], None, None, None, lam_end)

    def hook(s, y):
        acc.append((s, y.copy()))
        _domain_hook(sys, d, build)(s, y)

    if cfg.scheme is Scheme.FIXED_STORMER_VERLET:
        _require_separable(sys)
        ss, ys, dys, hs, es = _verlet_up(sys, y0, lam_end, cfg, hook, f_up)
    else:
        ss, ys, dys, hs, es = _dp54(lambda s, y: f_up(y), 0.0, y0, lam_end, cfg, hook)
    return _finish_up(sys, cfg, ss, ys, dys, hs, es, lam_end)


def _finish_up(sys, cfg, ss, ys, dys, hs, es, lam_end):
    d = sys.d
    ys = np.array(ys, float).reshape(len(ss), 2 * d + 4)
    n = len(ss)
    if dys is None:
        f_up, _ = _rhs_pair(sys, cfg.fast)
        dys = [f_up(y) for y in ys]
        hs = es = [np.nan] * n
    cons = np.array([hamiltonian_up(sys, _unpack_up(y, d)) for y in ys])
    return Trajectory(Form.UP, d, np.array(ss, float), ys, np.array(dys, float).reshape(ys.shape),
                      np.array(hs, float), np.array(es, float), cons, _meta(sys, cfg, lam_end),
                      tuple(sys.coords.names))


def flow_down(sys: NaturalSystem, state: PhaseState, cfg: IntegratorConfig, t_end: float | None = None) -> Trajectory:
    """Integrate Hamilton's equations downstairs from ``state.t`` to ``t_end`` (default t + cfg.t_end)."""
    if state.form is not Form.DOWN:
        raise ValueError("flow_down needs a DOWN state")
    if not sys.in_domain(state.x):
        raise DomainExitError("initial state outside the domain")
    d = sys.d
    t_end = state.t + cfg.t_end if t_end is None else t_end
    _, f_down = _rhs_pair(sys, cfg.fast)
    y0 = _pack_down(state)
    acc: list = []

    def build():
        ss = [a[0] for a in acc]
        ys = np.array([a[1] for a in acc]).reshape(len(acc), 2 * d)
        dys = np.array([f_down(s, y) for s, y in zip(ss, ys)]).reshape(ys.shape)
        nan = np.full(len(ss), np.nan)
        return Trajectory(Form.DOWN, d, np.array(ss), ys, dys, nan, nan, None, _meta(sys, cfg, t_end),
                          tuple(sys.coords.names))

    def hook(s, y):
        acc.append((s, y.copy()))
        _domain_hook(sys, d, build)(s, y)

    if cfg.scheme is Scheme.FIXED_STORMER_VERLET:
        _require_separable(sys)
        ss, ys, dys, hs, es = _verlet_down(sys, state.t, y0, t_end, cfg, hook, f_down)
    else:
        ss, ys, dys, hs, es = _dp54(f_down, state.t, y0, t_end, cfg, hook)
    ys = np.array(ys, float)
    return Trajectory(Form.DOWN, d, np.array(ss, float), ys, np.array(dys, float), np.array(hs, float),
                      np.array(es, float), None, _meta(sys, cfg, t_end), tuple(sys.coords.names))


@dataclass(frozen=True)
class EquivalenceReport:
    max_dx: float
    max_dp: float
    tolerance: float
    n_compare: int

    @property
    def discrepancy(self) -> float:
        return max(self.max_dx, self.max_dp)

    @property
    def passed(self) -> bool:
        return self.discrepancy < self.tolerance


def project_equivalence(sys: NaturalSystem, down0: PhaseState, cfg: IntegratorConfig,
                        n_grid: int = 2001) -> EquivalenceReport:
    """Run both flows and compare x and p̂ + p at common times t = t0 - λ."""
    tr_down = flow_down(sys, down0, cfg)
    up0 = lift_state(sys, down0)
    tr_up = flow_up(sys, up0, cfg)
    d = sys.d
    spl_down = tr_down.interpolant()
    spl_up = tr_up.interpolant()
    ts = np.union1d(np.linspace(down0.t, down0.t + cfg.t_end, n_grid), tr_down.param)
    lam = down0.t - ts
    yd = spl_down(ts)
    yu = spl_up(lam)
    dx = np.max(np.abs(yu[:, :d] - yd[:, :d]))
    dp = np.max(np.abs(yu[:, d + 2:2 * d + 2] + yd[:, d:]))
    return EquivalenceReport(float(dx), float(dp), 100.0 * cfg.rel_tol, int(ts.size))

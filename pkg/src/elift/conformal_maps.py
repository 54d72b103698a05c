"""Time reparameterisations t_* = f(t), x_* = sqrt|f'| x and what they do to Lorentz-force motion.

Conventions: unit mass, Lorentz force ``d²x/dt² = q(E + v × B)``.  For a natural system
with ``H = ½(p + qN)² + q²Φ`` this means ``E = ∂_tN - q∇Φ`` and ``B = -∇ × N``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.optimize
import sympy as sp

from .dynamics import IntegratorConfig, Trajectory, _dp54
from .geometry import _inverse
from .lift import Form, NaturalSystem, metric_at

__all__ = [
    "MapKind",
    "TimeMap",
    "SingularMapError",
    "schwarzian",
    "transform_state",
    "inverse_transform_state",
    "transform_fields",
    "lorentz_fields",
    "integrate_lorentz",
    "verify_solution_map",
    "SolutionMapReport",
    "boost_square_invariant",
    "UndefinedInvariantError",
    "verify_bargmann_conformal",
    "pulled_back_potentials",
    "vlb_transform",
    "vlb_omega",
    "verify_vlb_conformal",
]


class SingularMapError(ValueError):
    pass


class UndefinedInvariantError(ValueError):
    pass


class MapKind(enum.Enum):
    FRACTIONAL_LINEAR = "fractional_linear"
    GENERAL = "general"


@dataclass(frozen=True)
class TimeMap:
    """``t_* = f(t)`` with its first three derivatives and an inverse on ``interval``."""

    kind: MapKind
    derivs: Callable[[float], tuple]  # t -> (f, f', f'', f''')
    interval: tuple = (-math.inf, math.inf)
    params: tuple = ()
    inverse_fn: Callable[[float], float] | None = field(default=None, compare=False)
    low_accuracy: bool = False
    label: str = "map"

    def __call__(self, t):
        return self.derivs(t)[0]

    def d(self, t) -> tuple:
        return self.derivs(t)

    def inverse(self, t_star: float) -> float:
        if self.inverse_fn is not None:
            return self.inverse_fn(t_star)
        lo, hi = self.interval
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("numeric inversion needs a finite interval")
        return scipy.optimize.brentq(lambda s: self(s) - t_star, lo, hi, xtol=1e-15, rtol=1e-15)

    # -- constructors
    @classmethod
    def fractional_linear(cls, A, B, C, D, interval=(-math.inf, math.inf)) -> "TimeMap":
        det = A * D - B * C
        if det == 0:
            raise SingularMapError("AD - BC must be non-zero")

        def derivs(t):
            den = C * t + D
            if den == 0:
                raise SingularMapError(f"pole of the fractional-linear map at t={t}")
            return ((A * t + B) / den, det / den ** 2, -2 * C * det / den ** 3, 6 * C ** 2 * det / den ** 4)

        def inv(ts):
            den = A - C * ts
            if den == 0:
                raise SingularMapError("t_* outside the image of the map")
            return (D * ts - B) / den

        return cls(MapKind.FRACTIONAL_LINEAR, derivs, interval, (A, B, C, D), inv,
                   label=f"frac({A},{B},{C},{D})")

    @classmethod
    def lynden_bell(cls, omega: float = 1.0) -> "TimeMap":
        """``t = 1/(ω² t_*)``, an involution up to ω."""
        m = cls.fractional_linear(0.0, 1.0, omega ** 2, 0.0, interval=(0.0, math.inf))
        return TimeMap(m.kind, m.derivs, m.interval, m.params, m.inverse_fn, label=f"lynden_bell({omega})")

    @classmethod
    def identity(cls) -> "TimeMap":
        return cls.fractional_linear(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def from_sympy(cls, expr, t: sp.Symbol, interval=(-math.inf, math.inf), label="general") -> "TimeMap":
        ds = [expr, sp.diff(expr, t), sp.diff(expr, t, 2), sp.diff(expr, t, 3)]
        f = sp.lambdify(t, ds, "math")
        inv_fn = None
        sols = sp.solve(sp.Eq(sp.Symbol("ts_"), expr), t)
        if len(sols) == 1:
            g = sp.lambdify(sp.Symbol("ts_"), sols[0], "math")
            inv_fn = lambda ts: float(g(ts))  # noqa: E731
        return cls(MapKind.GENERAL, lambda tt: tuple(float(v) for v in f(tt)), interval, (str(expr),), inv_fn,
                   label=label)

    @classmethod
    def from_callable(cls, fn: Callable[[float], float], interval, step: float = 1e-3, label="numeric") -> "TimeMap":
        """Derivatives by nested central differences; accuracy is limited (about 1e-6 on f''')."""

        def d1(g):
            return lambda t: (g(t - 2 * step) - 8 * g(t - step) + 8 * g(t + step) - g(t + 2 * step)) / (12 * step)

        f1 = d1(fn)
        f2 = d1(f1)
        f3 = d1(f2)
        return cls(MapKind.GENERAL, lambda t: (fn(t), f1(t), f2(t), f3(t)), interval, (), None, True, label)

    @classmethod
    def power(cls, n: float, interval=(0.1, 10.0)) -> "TimeMap":
        t = sp.Symbol("t", positive=True)
        return cls.from_sympy(t ** sp.nsimplify(n), t, interval, label=f"t^{n}")

    def compose(self, inner: "TimeMap") -> "TimeMap":
        """``self ∘ inner`` with derivatives by the chain rule."""

        def derivs(t):
            g, g1, g2, g3 = inner.derivs(t)
            f0, f1, f2, f3 = self.derivs(g)
            return (f0, f1 * g1, f2 * g1 ** 2 + f1 * g2, f3 * g1 ** 3 + 3 * f2 * g1 * g2 + f1 * g3)

        inv = None
        if self.inverse_fn is not None and inner.inverse_fn is not None:
            inv = lambda ts: inner.inverse_fn(self.inverse_fn(ts))  # noqa: E731
        kind = MapKind.FRACTIONAL_LINEAR if self.kind is inner.kind is MapKind.FRACTIONAL_LINEAR else MapKind.GENERAL
        return TimeMap(kind, derivs, inner.interval, (), inv, self.low_accuracy or inner.low_accuracy,
                       f"{self.label}∘{inner.label}")


def schwarzian(fmap: TimeMap, t: float) -> float:
    """``{f, t} = f'''/f' - (3/2)(f''/f')²``."""
    _, f1, f2, f3 = fmap.derivs(t)
    if f1 == 0:
        raise SingularMapError(f"f' = 0 at t={t}")
    return f3 / f1 - 1.5 * (f2 / f1) ** 2


def _sqrt_abs(f1):
    if f1 == 0:
        raise SingularMapError("f' = 0")
    return math.sqrt(abs(f1)), math.copysign(1.0, f1)


def transform_state(fmap: TimeMap, t: float, x, v) -> tuple[float, np.ndarray, np.ndarray]:
    """Map (t, x, dx/dt) to (t_*, x_*, dx_*/dt_*)."""
    f0, f1, f2, _ = fmap.derivs(t)
    s, sg = _sqrt_abs(f1)
    x = np.asarray(x, float)
    v = np.asarray(v, float)
    return f0, s * x, sg / s * v + 0.5 * f2 / abs(f1) ** 1.5 * x


def inverse_transform_state(fmap: TimeMap, t_star: float, x_star, v_star) -> tuple[float, np.ndarray, np.ndarray]:
    t = fmap.inverse(t_star)
    _, f1, f2, _ = fmap.derivs(t)
    s, sg = _sqrt_abs(f1)
    x = np.asarray(x_star, float) / s
    v = sg * s * (np.asarray(v_star, float) - 0.5 * f2 / abs(f1) ** 1.5 * x)
    return t, x, v


FieldFn = Callable[[float, np.ndarray], np.ndarray]


def transform_fields(fmap: TimeMap, E_star: FieldFn, B_star: FieldFn) -> tuple[FieldFn, FieldFn]:
    """Fields in the unstarred frame: ``E = |f'|^{3/2}E_* + ½(f''/√|f'|) x_* × B_*``, ``B = f' B_*``."""

    def E(t, x):
        f0, f1, f2, _ = fmap.derivs(t)
        s, _ = _sqrt_abs(f1)
        xs = s * np.asarray(x, float)
        return abs(f1) ** 1.5 * E_star(f0, xs) + 0.5 * f2 / s * np.cross(xs, B_star(f0, xs))

    def B(t, x):
        f0, f1, _, _ = fmap.derivs(t)
        s, _ = _sqrt_abs(f1)
        return f1 * B_star(f0, s * np.asarray(x, float))

    return E, B


def lorentz_fields(sys: NaturalSystem) -> tuple[FieldFn, FieldFn]:
    """E and B (d = 3) of a natural system with flat h."""
    if sys.d != 3:
        raise ValueError("Lorentz fields need d = 3")
    q = sys.q

    def E(t, x):
        return sys.N.grad(t, x)[:, 0] - q * sys.Phi.grad(t, x)[1:]

    def B(t, x):
        J = sys.N.grad(t, x)[:, 1:]  # J[i, k] = ∂_k N_i
        curl = np.array([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]])
        return -curl

    return E, B


def integrate_lorentz(E: FieldFn, B: FieldFn, t0: float, x0, v0, t1: float, cfg: IntegratorConfig,
                      q: float = 1.0, name: str = "lorentz") -> Trajectory:
    """Direct integration of ``ẍ = q(E + v × B)`` for fields without a Hamiltonian realisation.

    The returned trajectory stores velocities in its momentum slots (``meta['momenta'] = 'velocity'``).
    """

    def f(t, y):
        x, v = y[:3], y[3:]
        return np.concatenate([v, q * (E(t, x) + np.cross(v, B(t, x)))])

    ss, ys, dys, hs, es = _dp54(f, t0, np.concatenate([x0, v0]).astype(float), t1, cfg, lambda s, y: None)
    meta = dict(integrator=cfg.scheme.value, rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol, model=name,
                momenta="velocity")
    return Trajectory(Form.DOWN, 3, np.array(ss), np.array(ys), np.array(dys), np.array(hs), np.array(es), None,
                      meta, ("x", "y", "z"))


def _kinematics(traj: Trajectory, sys: NaturalSystem | None, k: int):
    """(t, x, v, a) of sample k; acceleration from the stored right-hand side."""
    t = traj.param[k]
    x = traj.y[k, :3]
    if traj.meta.get("momenta") == "velocity" or sys is None:
        return t, x, traj.y[k, 3:], traj.dy[k, 3:]
    q = sys.q
    N = sys.N.eval(t, x)
    Ng = sys.N.grad(t, x)
    hinv = _inverse(sys.h.eval(t, x))
    v = hinv @ (traj.y[k, 3:] + q * N)
    # flat h: a = d/dt (p + qN) = ṗ + q(∂_tN + (v·∇)N)
    a = hinv @ (traj.dy[k, 3:] + q * (Ng[:, 0] + Ng[:, 1:] @ v))
    return t, x, v, a


@dataclass(frozen=True)
class SolutionMapReport:
    max_residual: float
    residuals: np.ndarray = field(repr=False)
    include_schwarzian: bool = True


def verify_solution_map(fmap: TimeMap, sys_star: NaturalSystem | None, traj_star: Trajectory,
                        fields_star: tuple | None = None, include_schwarzian: bool = True) -> SolutionMapReport:
    """Map a starred solution to the unstarred frame and evaluate
    ``ẍ + ½{f,t} x - q(E + ẋ × B)`` with the transformed fields.

    ``fields_star`` gives (E_*, B_*) directly; otherwise they are derived from ``sys_star``.
    """
    if fields_star is None:
        fields_star = lorentz_fields(sys_star)
    q = sys_star.q if sys_star is not None else traj_star.meta.get("q", 1.0)
    E, B = transform_fields(fmap, *fields_star)
    res = []
    for k in range(len(traj_star)):
        ts, xs, vs, as_ = _kinematics(traj_star, sys_star, k)
        t = fmap.inverse(ts)
        _, f1, f2, f3 = fmap.derivs(t)
        s, sg = _sqrt_abs(f1)
        s1 = sg * f2 / (2 * s)
        s2 = sg * f3 / (2 * s) - sg * f2 * s1 / (2 * s ** 2)
        x = xs / s
        xd = f1 * vs / s - s1 / s ** 2 * xs
        xdd = (f2 * vs / s + f1 ** 2 * as_ / s - 2 * f1 * vs * s1 / s ** 2
               - (s2 / s ** 2 - 2 * s1 ** 2 / s ** 3) * xs)
        r = xdd - q * (E(t, x) + np.cross(xd, B(t, x)))
        if include_schwarzian:
            r = r + 0.5 * schwarzian(fmap, t) * x
        res.append(np.max(np.abs(r)))
    res = np.array(res)
    return SolutionMapReport(float(res.max()), res, include_schwarzian)


def boost_square_invariant(fmap: TimeMap, traj_star: Trajectory, sys_star: NaturalSystem | None = None,
                           t_of=None):
    """``(x_* - 2(|f'|²/f'') dx_*/dt_*)²`` along a starred trajectory; returns (values, drift).

    f and its derivatives are taken at ``t = f^{-1}(t_*)``.
    """
    vals = []
    for k in range(len(traj_star)):
        ts, xs, vs, _ = _kinematics(traj_star, sys_star, k)
        t = fmap.inverse(ts) if t_of is None else t_of(ts)
        _, f1, f2, _ = fmap.derivs(t)
        if f2 == 0:
            raise UndefinedInvariantError("f'' = 0: the invariant reduces to the plain boost")
        X = xs - 2 * f1 ** 2 / f2 * vs
        vals.append(float(X @ X))
    vals = np.array(vals)
    return vals, float(np.max(np.abs(vals - vals[0])))


def pulled_back_potentials(fmap: TimeMap, sys_star: NaturalSystem, t: float, x):
    """Unstarred (Φ, N) at (t, x): ``qΦ = q|f'|Φ_* + f''/(2|f'|) x_*·N_*``, ``N = sgn(f')√|f'| N_*``.

    When ``{f,t} ≠ 0`` the pullback also produces ``{f,t} h(x,x) / (4q²)`` in Φ, the
    potential of the ``½{f,t}x`` force; it vanishes for fractional-linear maps.
    """
    q = sys_star.q
    f0, f1, f2, _ = fmap.derivs(t)
    s, sg = _sqrt_abs(f1)
    x = np.asarray(x, float)
    xs = s * x
    Ns = sys_star.N.eval(f0, xs)
    h = sys_star.h.eval(f0, xs)
    Phi = (abs(f1) * float(sys_star.Phi.eval(f0, xs)) + f2 / (2 * abs(f1) * q) * (xs @ Ns)
           + schwarzian(fmap, t) * (x @ h @ x) / (4 * q ** 2))
    return Phi, sg * s * Ns


def _worse(a: float, b: float) -> float:
    """``max`` that lets a NaN through (a point on a singularity must not pass silently)."""
    return math.nan if math.isnan(a) or math.isnan(b) else max(a, b)


def verify_bargmann_conformal(fmap: TimeMap, sys_star: NaturalSystem, points) -> float:
    """Max component deviation of the pulled-back starred Brinkmann metric from |f'| g,
    relative to the largest pulled-back component (at least 1) at each point.

    ``points`` are rows (t, x); h must be constant.  The unstarred metric uses the
    potentials from ``pulled_back_potentials`` and the v-shift
    ``v_* = sgn(f')(v + (1/4q)(f''/f') h x x)``.
    """
    q = sys_star.q
    d = sys_star.d
    dev = 0.0
    for z in np.atleast_2d(points):
        t, x = float(z[0]), np.asarray(z[1:], float)
        f0, f1, f2, f3 = fmap.derivs(t)
        s, sg = _sqrt_abs(f1)
        h = sys_star.h.eval(f0, s * x)
        xs = s * x
        g_star, _ = metric_at(sys_star, xs, u=-q * f0)
        # Jacobian of (x, u, v) -> (x_*, u_*, v_*), with t = -u/q
        dt_du = -1.0 / q
        s1 = sg * f2 / (2 * s)
        r = f2 / f1
        r1 = f3 / f1 - r ** 2
        xhx = x @ h @ x
        J = np.zeros((d + 2, d + 2))
        J[:d, :d] = s * np.eye(d)
        J[:d, d] = x * s1 * dt_du
        J[d, d] = f1  # ∂u_*/∂u = -q f' (-1/q)
        J[d + 1, :d] = sg * r / (2 * q) * (h @ x)
        J[d + 1, d] = sg * r1 * xhx / (4 * q) * dt_du
        J[d + 1, d + 1] = sg
        pulled = J.T @ g_star @ J
        Phi, N = pulled_back_potentials(fmap, sys_star, t, x)
        g = np.zeros((d + 2, d + 2))
        g[:d, :d] = h
        g[:d, d] = g[d, :d] = N
        g[d, d + 1] = g[d + 1, d] = 1.0
        g[d, d] = -2.0 * Phi
        scale = max(1.0, float(np.max(np.abs(pulled))))
        dev = _worse(dev, float(np.max(np.abs(pulled - abs(f1) * g))) / scale)
    return dev


# ---------------------------------------------------------------- VLB transformation


def vlb_omega(a: float, b: float, u: float) -> float:
    if u + b == 0:
        raise SingularMapError("u = -b")
    return a / (u + b)


def vlb_transform(a: float, b: float, c: float, d: float, u: float, v: float, x):
    """``x_* = Ω(u)x``, ``u_* = -a²/(u+b) + c``, ``v_* = v + x²/(2(u+b)) + d``."""
    if a == 0:
        raise ValueError("a must be non-zero")
    if u + b == 0:
        raise SingularMapError("u = -b")
    x = np.asarray(x, float)
    return -a ** 2 / (u + b) + c, v + x @ x / (2 * (u + b)) + d, vlb_omega(a, b, u) * x


def verify_vlb_conformal(a, b, c, d, G0: float, M: float, points) -> float:
    """Max deviation of the pulled-back G(u_*)-Kepler Brinkmann metric from Ω(u)² times the static one.

    Metric convention ``dx² + 2du dv - 2V du²`` with ``V = -G M/|x|`` and ``G(u_*)|Ω(u_*)| = G0``.
    Rows of ``points`` are (u, x).
    """
    dev = 0.0
    for z in np.atleast_2d(points):
        u, x = float(z[0]), np.asarray(z[1:], float)
        n = x.size
        us, _, xs = vlb_transform(a, b, c, d, u, 0.0, x)
        Om = vlb_omega(a, b, u)
        Om_star = -(us - c) / a
        G = G0 / abs(Om_star)
        V_star = -G * M / np.linalg.norm(xs)
        V = -G0 * M / np.linalg.norm(x)
        gs = np.zeros((n + 2, n + 2))
        gs[:n, :n] = np.eye(n)
        gs[n, n + 1] = gs[n + 1, n] = 1.0
        gs[n, n] = -2 * V_star
        J = np.zeros((n + 2, n + 2))
        J[:n, :n] = Om * np.eye(n)
        J[:n, n] = -a / (u + b) ** 2 * x
        J[n, n] = a ** 2 / (u + b) ** 2
        J[n + 1, :n] = x / (u + b)
        J[n + 1, n] = -(x @ x) / (2 * (u + b) ** 2)
        J[n + 1, n + 1] = 1.0
        g = np.zeros_like(gs)
        g[:n, :n] = np.eye(n)
        g[n, n + 1] = g[n + 1, n] = 1.0
        g[n, n] = -2 * V
        dev = _worse(dev, float(np.max(np.abs(J.T @ gs @ J - Om ** 2 * g))))
    return dev

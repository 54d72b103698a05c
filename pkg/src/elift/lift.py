"""Natural systems, their Brinkmann lift, null projection, gauge freedom and the d+1 lift."""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from .geometry import (
    Coords,
    JetField,
    SingularMetricError,
    _inverse,
    _numeric_grad,
    constant_jet,
    make_jet_symbolic,
)

__all__ = [
    "NaturalSystem",
    "SymbolicData",
    "Form",
    "PhaseState",
    "SignatureDegeneracyError",
    "metric_at",
    "hamiltonian_up",
    "hamiltonian_down",
    "lift_state",
    "project_state",
    "gauge_transform",
    "field_strength",
    "metric_d1",
    "hamiltonian_d1",
    "covariant_momentum",
]


class SignatureDegeneracyError(ValueError):
    """The d+1 metric is undefined where Φ vanishes."""


@dataclass(frozen=True)
class SymbolicData:
    """Sympy source of a system; lets dynamics compile fast right-hand sides."""

    t: sp.Symbol
    xs: tuple
    h: sp.Matrix
    N: tuple
    Phi: sp.Expr
    Phi1: sp.Expr | None = None


@dataclass(frozen=True)
class NaturalSystem:
    coords: Coords
    h: JetField
    N: JetField
    Phi: JetField
    q: float = 1.0
    Phi1: JetField | None = None
    Phi2: JetField | None = None
    domain_box: tuple = ()
    valid: Callable[[np.ndarray], bool] | None = field(default=None, compare=False)
    symbolic: SymbolicData | None = field(default=None, compare=False, repr=False)
    name: str = "system"

    def __post_init__(self):
        if self.q == 0:
            raise ValueError("charge q must be non-zero")
        d = self.coords.d
        for f, r in ((self.h, 2), (self.N, 1), (self.Phi, 0)):
            if f.rank != r or f.d != d:
                raise ValueError(f"field of rank {f.rank}/d={f.d} where rank {r}/d={d} expected")
        if self.domain_box and len(self.domain_box) != d:
            raise ValueError("domain_box needs one interval per coordinate")

    @property
    def d(self) -> int:
        return self.coords.d

    def in_domain(self, x) -> bool:
        x = np.asarray(x, float)
        if not np.all(np.isfinite(x)):
            return False
        if self.valid is not None:
            return bool(self.valid(x))
        return True

    def potential_split(self) -> tuple[JetField, JetField, bool]:
        """``(Φ1, Φ2, defaulted)``; without declared split Φ1 := 0 and Φ2 := Φ."""
        if self.Phi1 is None and self.Phi2 is None:
            return constant_jet(0, 0.0, self.d), self.Phi, True
        if self.Phi2 is None:
            p1 = self.Phi1
            return p1, _difference(self.Phi, p1), False
        if self.Phi1 is None:
            return _difference(self.Phi, self.Phi2), self.Phi2, False
        return self.Phi1, self.Phi2, False

    def is_static(self, samples: int = 5, seed: int = 0, tol: float = 1e-12) -> bool:
        """True if h, N, Φ have no time dependence at a few sample points."""
        if self.symbolic is not None:
            s = self.symbolic
            exprs = list(s.h) + list(s.N) + [s.Phi]
            return all(sp.simplify(sp.diff(e, s.t)) == 0 for e in exprs)
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            x = sample_point(self, rng)
            t = rng.uniform(-1, 1)
            for f in (self.h, self.N, self.Phi):
                if np.max(np.abs(f.grad(t, x)[..., 0])) > tol:
                    return False
        return True

    @classmethod
    def from_sympy(
        cls,
        coords: Coords,
        t: sp.Symbol,
        xs: Sequence[sp.Symbol],
        h,
        N,
        Phi,
        q: float = 1.0,
        Phi1=None,
        domain_box=(),
        valid=None,
        name: str = "system",
    ) -> "NaturalSystem":
        xs = tuple(xs)
        h = sp.Matrix(h)
        N = tuple(sp.sympify(n) for n in N)
        Phi = sp.sympify(Phi)
        jets = dict(
            h=make_jet_symbolic(2, h, t, xs),
            N=make_jet_symbolic(1, list(N), t, xs),
            Phi=make_jet_symbolic(0, Phi, t, xs),
        )
        p1 = p2 = None
        if Phi1 is not None:
            Phi1 = sp.sympify(Phi1)
            p1 = make_jet_symbolic(0, Phi1, t, xs)
            p2 = make_jet_symbolic(0, Phi - Phi1, t, xs)
        return cls(
            coords=coords,
            q=float(q),
            Phi1=p1,
            Phi2=p2,
            domain_box=tuple(tuple(map(float, b)) for b in domain_box),
            valid=valid,
            symbolic=SymbolicData(t, xs, h, N, Phi, Phi1),
            name=name,
            **jets,
        )


def _difference(a: JetField, b: JetField) -> JetField:
    return JetField(
        a.rank,
        a.d,
        lambda t, x: a.eval(t, x) - b.eval(t, x),
        lambda t, x: a.grad(t, x) - b.grad(t, x),
        lambda t, x: a.hess(t, x) - b.hess(t, x),
        kind="derived",
    )


def sample_point(sys: NaturalSystem, rng: np.random.Generator, shrink: float = 0.1) -> np.ndarray:
    """Uniform point inside the domain box shrunk by ``shrink`` on each side, rejecting invalid ones."""
    if not sys.domain_box:
        lo, hi = -np.ones(sys.d), np.ones(sys.d)
    else:
        box = np.asarray(sys.domain_box, float)
        width = box[:, 1] - box[:, 0]
        lo, hi = box[:, 0] + 0.5 * shrink * width, box[:, 1] - 0.5 * shrink * width
    for _ in range(10000):
        x = rng.uniform(lo, hi)
        if sys.in_domain(x):
            return x
    raise RuntimeError(f"could not sample a valid point for {sys.name}")


class Form(enum.Enum):
    DOWN = "down"
    UP = "up"


@dataclass(frozen=True)
class PhaseState:
    """Phase-space point.

    DOWN: ``(t, x, p)`` with canonical momenta p.  UP: ``(u, v, x, pu, pv, p)`` where
    ``p`` holds the spatial components ``p̂_i``.
    """

    form: Form
    x: np.ndarray
    p: np.ndarray
    t: float = 0.0
    u: float = 0.0
    v: float = 0.0
    pu: float = 0.0
    pv: float = 0.0

    @classmethod
    def down(cls, t, x, p) -> "PhaseState":
        return cls(Form.DOWN, np.asarray(x, float), np.asarray(p, float), t=float(t))

    @classmethod
    def up(cls, u, v, x, pu, pv, p) -> "PhaseState":
        return cls(Form.UP, np.asarray(x, float), np.asarray(p, float), u=float(u), v=float(v),
                   pu=float(pu), pv=float(pv))

    def time(self, q: float) -> float:
        return self.t if self.form is Form.DOWN else -self.u / q


def covariant_momentum(sys: NaturalSystem, state: PhaseState) -> np.ndarray:
    """Π = p + qN downstairs, Π̂ = p̂ - p̂_v N upstairs."""
    t = state.time(sys.q)
    N = sys.N.eval(t, state.x)
    if state.form is Form.DOWN:
        return state.p + sys.q * N
    return state.p - state.pv * N


def metric_at(sys: NaturalSystem, x, u: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Brinkmann metric and its inverse in (x^1..x^d, u, v) order."""
    t = -u / sys.q
    h = sys.h.eval(t, x)
    hinv = _inverse(h)
    N = sys.N.eval(t, x)
    Phi = float(sys.Phi.eval(t, x))
    d = sys.d
    iu, iv = d, d + 1
    g = np.zeros((d + 2, d + 2))
    g[:d, :d] = h
    g[:d, iu] = g[iu, :d] = N
    g[iu, iv] = g[iv, iu] = 1.0
    g[iu, iu] = -2.0 * Phi
    Nup = hinv @ N
    gi = np.zeros_like(g)
    gi[:d, :d] = hinv
    gi[:d, iv] = gi[iv, :d] = -Nup
    gi[iu, iv] = gi[iv, iu] = 1.0
    gi[iv, iv] = 2.0 * Phi + N @ Nup
    return g, gi


def hamiltonian_up(sys: NaturalSystem, state: PhaseState) -> float:
    if state.form is not Form.UP:
        raise ValueError("hamiltonian_up needs an UP state")
    t = -state.u / sys.q
    hinv = _inverse(sys.h.eval(t, state.x))
    Pi = state.p - state.pv * sys.N.eval(t, state.x)
    Phi = float(sys.Phi.eval(t, state.x))
    return float(state.pu * state.pv + Phi * state.pv ** 2 + 0.5 * Pi @ hinv @ Pi)


def hamiltonian_down(sys: NaturalSystem, state: PhaseState) -> float:
    if state.form is not Form.DOWN:
        raise ValueError("hamiltonian_down needs a DOWN state")
    hinv = _inverse(sys.h.eval(state.t, state.x))
    Pi = state.p + sys.q * sys.N.eval(state.t, state.x)
    return float(0.5 * Pi @ hinv @ Pi + sys.q ** 2 * float(sys.Phi.eval(state.t, state.x)))


def lift_state(sys: NaturalSystem, down: PhaseState, u0: float = 0.0, v0: float = 0.0) -> PhaseState:
    """Null lift: p̂_v = q, p̂_i = -p_i, p̂_u = -H/q, u = -q t + u0.

    A non-zero ``u0`` shifts the time origin of time-dependent systems.
    """
    if down.form is not Form.DOWN:
        raise ValueError("lift_state needs a DOWN state")
    if sys.q == 0:
        raise ValueError("cannot lift with q = 0")
    H = hamiltonian_down(sys, down)
    return PhaseState.up(-sys.q * down.t + u0, v0, down.x.copy(), -H / sys.q, sys.q, -down.p)


def project_state(sys: NaturalSystem, up: PhaseState) -> PhaseState:
    if up.form is not Form.UP:
        raise ValueError("project_state needs an UP state")
    return PhaseState.down(-up.u / sys.q, up.x.copy(), -up.p)


def _jet_from_eval_grad(rank, d, ev, gr, step=1e-4) -> JetField:
    def hess(t, x):
        z = np.concatenate([[t], np.asarray(x, float)])
        return _numeric_grad(lambda zz: gr(zz[0], zz[1:]), z, step)

    return JetField(rank, d, ev, gr, hess, kind="derived")


def gauge_transform(sys: NaturalSystem, lam) -> NaturalSystem:
    """Φ' = Φ + ∂_uΛ, N' = N - ∂_iΛ (with ∂_u = -∂_t/q); h unchanged.

    ``lam`` is a sympy expression in the system's symbols (symbolic systems) or a
    rank-0 JetField.  Φ1 absorbs the gauge shift; Φ2 is untouched.
    """
    q = sys.q
    if isinstance(lam, (sp.Expr, int, float)) and sys.symbolic is not None:
        s = sys.symbolic
        lam = sp.sympify(lam)
        Phi = s.Phi - sp.diff(lam, s.t) / q
        N = [n - sp.diff(lam, x) for n, x in zip(s.N, s.xs)]
        Phi1 = (s.Phi1 if s.Phi1 is not None else sp.Integer(0)) - sp.diff(lam, s.t) / q
        return NaturalSystem.from_sympy(sys.coords, s.t, s.xs, s.h, N, Phi, q=q, Phi1=Phi1,
                                        domain_box=sys.domain_box, valid=sys.valid, name=sys.name)
    if not isinstance(lam, JetField) or lam.rank != 0:
        raise TypeError("gauge parameter must be a sympy expression or a rank-0 JetField")
    d = sys.d
    Phi = _jet_from_eval_grad(
        0, d,
        lambda t, x: sys.Phi.eval(t, x) - lam.grad(t, x)[0] / q,
        lambda t, x: sys.Phi.grad(t, x) - lam.hess(t, x)[0] / q,
    )
    N = _jet_from_eval_grad(
        1, d,
        lambda t, x: sys.N.eval(t, x) - lam.grad(t, x)[1:],
        lambda t, x: sys.N.grad(t, x) - lam.hess(t, x)[1:],
    )
    phi1, phi2, _ = sys.potential_split()
    Phi1 = _jet_from_eval_grad(
        0, d,
        lambda t, x: phi1.eval(t, x) - lam.grad(t, x)[0] / q,
        lambda t, x: phi1.grad(t, x) - lam.hess(t, x)[0] / q,
    )
    return replace(sys, Phi=Phi, N=N, Phi1=Phi1, Phi2=phi2, symbolic=None)


def field_strength(sys: NaturalSystem, t: float, x) -> tuple[np.ndarray, np.ndarray]:
    """``F_ij = ∂_iN_j - ∂_jN_i`` and ``F_ti = ∂_tN_i - q∂_iΦ1``.

    Without a declared split Φ1 is taken as zero (a warning is emitted), so
    ``F_ti = ∂_tN_i``.  Note ``F_ui = -F_ti / q``.
    """
    Ng = sys.N.grad(t, x)
    dN = Ng[:, 1:].T  # dN[k, i] = ∂_k N_i
    F = dN - dN.T
    phi1, _, defaulted = sys.potential_split()
    if defaulted:
        warnings.warn("no Φ1/Φ2 split declared; F_ti built with Φ1 = 0", stacklevel=2)
    Ft = Ng[:, 0] - sys.q * phi1.grad(t, x)[1:]
    return F, Ft


def metric_d1(sys: NaturalSystem, x, check_static: bool = True) -> np.ndarray:
    """The (d+1)-metric ``h dx dx + (dv + N dx)² / (2Φ)`` in (x, v) order."""
    x = np.asarray(x, float)
    if check_static:
        for f in (sys.h, sys.N, sys.Phi):
            if np.max(np.abs(f.grad(0.0, x)[..., 0])) > 1e-12:
                raise ValueError("metric_d1 needs fields independent of u")
    Phi = float(sys.Phi.eval(0.0, x))
    if Phi == 0.0:
        raise SignatureDegeneracyError("Φ = 0: the d+1 metric is undefined here")
    h = sys.h.eval(0.0, x)
    N = sys.N.eval(0.0, x)
    d = sys.d
    g = np.zeros((d + 1, d + 1))
    g[:d, :d] = h + np.outer(N, N) / (2.0 * Phi)
    g[:d, d] = g[d, :d] = N / (2.0 * Phi)
    g[d, d] = 1.0 / (2.0 * Phi)
    return g


def hamiltonian_d1(sys: NaturalSystem, x, p_hat, p_v: float) -> float:
    """Reduced Hamiltonian ``½h^{ij}(p̂_i - p̂_vN_i)(p̂_j - p̂_vN_j) + p̂_v²Φ``."""
    hinv = _inverse(sys.h.eval(0.0, x))
    Pi = np.asarray(p_hat, float) - p_v * sys.N.eval(0.0, x)
    return float(0.5 * Pi @ hinv @ Pi + p_v ** 2 * float(sys.Phi.eval(0.0, x)))

"""Observables polynomial in the momenta, their lifts, Poisson brackets and conformal factors.

An observable is stored as a list of monomials in the momenta, ``exps[k]`` giving the
exponents and ``coef`` the (t, x)-dependent coefficient of each monomial.  With this
storage ``C = Σ_r (1/r!) C_(r)^{i1..ir} Π_{i1}..Π_{ir}`` has ``C_(r)^I = c_e Π_j e_j!``
for the sorted multi-index I with multiplicities e.  Momentum derivatives come from
the exponents, never from differencing.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from .dynamics import Trajectory, rhs_down, rhs_up
from .geometry import christoffel_base, christoffel_lifted
from .lift import Form, NaturalSystem, PhaseState

__all__ = [
    "Basis",
    "Coefficients",
    "PolyObservable",
    "LiftedObservable",
    "eval_down",
    "eval_up",
    "lift_observable",
    "lift_rank1_generator",
    "lift_rank2_blocks",
    "hamiltonian_observable_down",
    "hamiltonian_observable_up",
    "poisson_down",
    "poisson_up",
    "time_derivative_down",
    "drift",
    "DriftReport",
    "conformal_factor",
    "ConformalFit",
    "IllPosedError",
    "linear_commutator_up",
]


class IllPosedError(ValueError):
    pass


class Basis(enum.Enum):
    CANONICAL_P = "p"
    COVARIANT_PI = "pi"


# ---------------------------------------------------------------- coefficients


@dataclass(frozen=True)
class Coefficients:
    """A vector of n scalar fields of (t, x) with their first partials (t first)."""

    n: int
    d: int
    eval: Callable[[float, np.ndarray], np.ndarray]
    grad: Callable[[float, np.ndarray], np.ndarray]

    @classmethod
    def from_sympy(cls, exprs: Sequence, t: sp.Symbol, xs: Sequence[sp.Symbol]) -> "Coefficients":
        exprs = [sp.sympify(e) for e in exprs]
        zs = [t, *xs]
        n, d = len(exprs), len(xs)
        f = sp.lambdify(zs, exprs, "numpy", cse=True)
        g = sp.lambdify(zs, [[sp.diff(e, z) for z in zs] for e in exprs], "numpy", cse=True)

        def ev(tt, x):
            return np.array(f(tt, *np.asarray(x, float)), dtype=float).reshape(n)

        def gr(tt, x):
            return np.array(g(tt, *np.asarray(x, float)), dtype=float).reshape(n, d + 1)

        return cls(n, d, ev, gr)

    def scaled(self, s) -> "Coefficients":
        s = np.asarray(s, float)
        return Coefficients(self.n, self.d, lambda t, x: s * self.eval(t, x),
                            lambda t, x: s[:, None] * self.grad(t, x))


def _poly_terms(expr, moms):
    """Monomial exponents and coefficient expressions of ``expr`` in ``moms``."""
    poly = sp.Poly(sp.expand(sp.sympify(expr)), *moms)
    terms = [(m, c) for m, c in poly.terms() if c != 0]
    if not terms:
        return np.zeros((1, len(moms)), dtype=int), [sp.Integer(0)]
    exps = np.array([m for m, _ in terms], dtype=int).reshape(len(terms), len(moms))
    return exps, [c for _, c in terms]


def _monomials(exps: np.ndarray, mom: np.ndarray) -> np.ndarray:
    return np.prod(mom[None, :] ** exps, axis=1)


def _monomial_grad(exps: np.ndarray, mom: np.ndarray) -> np.ndarray:
    """``out[k, j] = ∂(mom^exps[k]) / ∂mom_j``."""
    n, m = exps.shape
    out = np.zeros((n, m))
    for j in range(m):
        e = exps.copy()
        has = e[:, j] > 0
        if not np.any(has):
            continue
        e[:, j] = np.maximum(e[:, j] - 1, 0)
        out[:, j] = np.where(has, exps[:, j] * np.prod(mom[None, :] ** e, axis=1), 0.0)
    return out


@dataclass(frozen=True)
class _Poly:
    exps: np.ndarray
    coef: Coefficients
    name: str = "observable"
    expr: object = field(default=None, compare=False, repr=False)
    symbols: tuple = field(default=(), compare=False, repr=False)  # (t, xs, moms)

    @property
    def d(self) -> int:
        return self.coef.d

    @property
    def degrees(self) -> np.ndarray:
        return self.exps.sum(axis=1)

    def value(self, t, x, mom) -> float:
        return float(self.coef.eval(t, x) @ _monomials(self.exps, np.asarray(mom, float)))

    def mom_grad(self, t, x, mom) -> np.ndarray:
        return self.coef.eval(t, x) @ _monomial_grad(self.exps, np.asarray(mom, float))

    def x_grad(self, t, x, mom) -> np.ndarray:
        """Partials in (t, x) at fixed values of the stored momenta."""
        return _monomials(self.exps, np.asarray(mom, float)) @ self.coef.grad(t, x)


@dataclass(frozen=True)
class PolyObservable(_Poly):
    """Downstairs observable ``C(t, x, Π)`` or ``C(t, x, p)`` depending on ``basis``."""

    basis: Basis = Basis.COVARIANT_PI
    q: float = 1.0
    declared_order: int | None = None

    @property
    def m(self) -> int:
        if self.declared_order is not None:
            return self.declared_order
        return int(self.degrees.max())

    @classmethod
    def from_sympy(cls, expr, t, xs, moms, basis: Basis = Basis.COVARIANT_PI, q: float = 1.0,
                   name: str = "observable", order: int | None = None) -> "PolyObservable":
        xs, moms = tuple(xs), tuple(moms)
        if len(moms) != len(xs):
            raise ValueError("need one momentum symbol per coordinate")
        exps, cs = _poly_terms(expr, moms)
        if order is not None and exps.sum(axis=1).max() > order:
            raise ValueError(f"{name}: degree exceeds declared order {order}")
        return cls(exps, Coefficients.from_sympy(cs, t, xs), name, sp.sympify(expr), (t, xs, moms),
                   basis=basis, q=float(q), declared_order=order)

    def momenta(self, sys: NaturalSystem, state: PhaseState) -> np.ndarray:
        if self.basis is Basis.COVARIANT_PI:
            return state.p + sys.q * sys.N.eval(state.t, state.x)
        return state.p

    def tensor(self, r: int, t: float, x) -> np.ndarray:
        """Dense symmetric C_(r)^{i1..ir} at (t, x)."""
        d = self.d
        out = np.zeros((d,) * r)
        c = self.coef.eval(t, x)
        for k, e in enumerate(self.exps):
            if e.sum() != r:
                continue
            weight = c[k] * math.prod(math.factorial(int(v)) for v in e)
            idx = [i for i, v in enumerate(e) for _ in range(int(v))]
            for perm in set(itertools.permutations(idx)):
                out[perm] = weight
        return out

    def to_basis(self, basis: Basis, sys: NaturalSystem) -> "PolyObservable":
        """Symbolic change of momentum variables ``Π = p + qN``."""
        if basis is self.basis:
            return self
        if self.expr is None or sys.symbolic is None:
            raise ValueError("basis conversion needs symbolic observable and system")
        t, xs, moms = self.symbols
        s = sys.symbolic
        rename = {a: b for a, b in zip(s.xs, xs)}
        rename[s.t] = t
        N = [sp.sympify(n).subs(rename, simultaneous=True) for n in s.N]
        sign = -1 if basis is Basis.COVARIANT_PI else 1
        new = self.expr.subs({m: m + sign * sys.q * n for m, n in zip(moms, N)}, simultaneous=True)
        return PolyObservable.from_sympy(new, t, xs, moms, basis=basis, q=sys.q, name=self.name,
                                         order=self.declared_order)


@dataclass(frozen=True)
class LiftedObservable(_Poly):
    """Upstairs observable in momenta ``(P_1..P_d, p̂_u, p̂_v)``, v-independent.

    With ``basis=COVARIANT_PI`` the spatial slots hold Π̂ = p̂ - p̂_v N, otherwise p̂.
    Coefficients are functions of (t, x) with t = -u/q.
    """

    basis: Basis = Basis.COVARIANT_PI
    q: float = 1.0

    @property
    def m(self) -> int:
        return int(self.degrees.max())

    @property
    def homogeneous(self) -> bool:
        return bool(np.all(self.degrees == self.degrees[0]))

    @classmethod
    def from_sympy(cls, expr, t, xs, moms, pu, pv, basis: Basis = Basis.COVARIANT_PI, q: float = 1.0,
                   name: str = "lifted") -> "LiftedObservable":
        xs = tuple(xs)
        allm = (*moms, pu, pv)
        exps, cs = _poly_terms(expr, allm)
        return cls(exps, Coefficients.from_sympy(cs, t, xs), name, sp.sympify(expr), (t, xs, allm),
                   basis=basis, q=float(q))

    def momenta(self, sys: NaturalSystem, state: PhaseState) -> np.ndarray:
        t = -state.u / sys.q
        P = state.p - state.pv * sys.N.eval(t, state.x) if self.basis is Basis.COVARIANT_PI else state.p
        return np.concatenate([P, [state.pu, state.pv]])


# ---------------------------------------------------------------- evaluation


def eval_down(obs: PolyObservable, sys: NaturalSystem, state: PhaseState) -> float:
    if state.form is not Form.DOWN:
        raise ValueError("eval_down needs a DOWN state")
    return obs.value(state.t, state.x, obs.momenta(sys, state))


def eval_up(obs: LiftedObservable, sys: NaturalSystem, state: PhaseState) -> float:
    if state.form is not Form.UP:
        raise ValueError("eval_up needs an UP state")
    return obs.value(-state.u / sys.q, state.x, obs.momenta(sys, state))


# ---------------------------------------------------------------- lifts


def lift_observable(obs: PolyObservable, q: float | None = None, sys: NaturalSystem | None = None) -> LiftedObservable:
    """``Ĉ = Σ_r (p̂_v/q)^{m-r} C_(r)(x, -Π̂)``, homogeneous of degree m."""
    if obs.basis is not Basis.COVARIANT_PI:
        if sys is None:
            raise ValueError("lifting a p-basis observable needs the system for Π = p + qN")
        obs = obs.to_basis(Basis.COVARIANT_PI, sys)
    q = obs.q if q is None else float(q)
    m = obs.m
    r = obs.degrees
    if np.any(r > m):
        raise ValueError("observable degree exceeds its declared order")
    exps = np.hstack([obs.exps, np.zeros((len(r), 1), int), (m - r)[:, None]])
    scale = (-1.0) ** r * q ** (-(m - r).astype(float))
    expr = None
    syms = ()
    if obs.expr is not None:
        t, xs, moms = obs.symbols
        pu, pv = sp.symbols("phat_u phat_v", real=True)
        P = sp.symbols(f"Pihat_0:{len(moms)}", real=True)
        lam = sp.Dummy("lam")
        # homogenise: C(x, -Π̂) with each degree-r piece carrying (p̂_v/q)^(m-r)
        scaled = sp.expand(obs.expr.subs({mm: -lam * pp for mm, pp in zip(moms, P)}, simultaneous=True))
        expr = sp.expand((pv / sp.nsimplify(q)) ** m * scaled.subs(lam, sp.nsimplify(q) / pv))
        syms = (t, xs, (*P, pu, pv))
    return LiftedObservable(exps, obs.coef.scaled(scale), f"lift({obs.name})", expr, syms,
                            basis=Basis.COVARIANT_PI, q=q)


def _lifted_symbols(sys: NaturalSystem):
    if sys.symbolic is None:
        raise ValueError("generator lifts need a symbolic system")
    s = sys.symbolic
    P = sp.symbols(f"Pihat_0:{sys.d}", real=True)
    pu, pv = sp.symbols("phat_u phat_v", real=True)
    return s, P, pu, pv


def lift_rank1_generator(sys: NaturalSystem, Cu, C1, C0, name: str = "generator") -> LiftedObservable:
    """Linear lift of ``C = C0 + C1·Π + ½Ĉ^u(t) hΠΠ``.

    ``Ĉ = K^u p̂_u + K^v p̂_v + K^i Π̂_i`` with ``K^u = -qĈ^u``, ``K^v = -qĈ^uΦ + C0/q``,
    ``K^i = -C1^i``; on a lifted null state it reproduces C.  Expressions in the system's
    symbols; ``Cu`` may depend on t only.
    """
    s, P, pu, pv = _lifted_symbols(sys)
    q = sp.nsimplify(sys.q)
    Cu, C0 = sp.sympify(Cu), sp.sympify(C0)
    expr = -q * Cu * pu + (-q * Cu * s.Phi + C0 / q) * pv - sum(sp.sympify(c) * p for c, p in zip(C1, P))
    return LiftedObservable.from_sympy(expr, s.t, s.xs, P, pu, pv, q=sys.q, name=name)


def lift_rank2_blocks(sys: NaturalSystem, d0, d1, d2, Chat, d3, d4, name: str = "block") -> LiftedObservable:
    """Degree-2 upstairs observable from the block tensors.

    With ``S = p̂_u + Φp̂_v``: ``Ĉ = (d0/6)S² + ⅓S d1·Π̂ - d2 S p̂_v + ½ĈΠ̂Π̂ - d3·Π̂ p̂_v + d4 p̂_v²``.
    On a lifted null state this equals ``C/q²`` for the downstairs observable with
    ``C_(4)=d0 sym(h⊗h)``, ``C_(3)=q sym(d1⊗h)``, ``C_(2)=q²(d2 h+Ĉ)``, ``C_(1)=q³d3``, ``C_(0)=q⁴d4``.
    """
    s, P, pu, pv = _lifted_symbols(sys)
    Pv = sp.Matrix(P)
    S = pu + s.Phi * pv
    d1v = sp.Matrix(d1)
    d3v = sp.Matrix(d3)
    Ch = sp.Matrix(Chat)
    expr = (sp.sympify(d0) / 6 * S ** 2 + S * (d1v.T * Pv)[0, 0] / 3 - sp.sympify(d2) * S * pv
            + (Pv.T * Ch * Pv)[0, 0] / 2 - (d3v.T * Pv)[0, 0] * pv + sp.sympify(d4) * pv ** 2)
    return LiftedObservable.from_sympy(expr, s.t, s.xs, P, pu, pv, q=sys.q, name=name)


def hamiltonian_observable_down(sys: NaturalSystem) -> PolyObservable:
    s = sys.symbolic
    if s is None:
        raise ValueError("needs a symbolic system")
    P = sp.symbols(f"Pi_0:{sys.d}", real=True)
    Pv = sp.Matrix(P)
    q = sp.nsimplify(sys.q)
    expr = (Pv.T * s.h.inv() * Pv)[0, 0] / 2 + q ** 2 * s.Phi
    return PolyObservable.from_sympy(expr, s.t, s.xs, P, q=sys.q, name="H")


def hamiltonian_observable_up(sys: NaturalSystem) -> LiftedObservable:
    s, P, pu, pv = _lifted_symbols(sys)
    Pv = sp.Matrix(P)
    expr = pu * pv + s.Phi * pv ** 2 + (Pv.T * s.h.inv() * Pv)[0, 0] / 2
    return LiftedObservable.from_sympy(expr, s.t, s.xs, P, pu, pv, q=sys.q, name="Hhat")


# ---------------------------------------------------------------- gradients


def _down_grads(A: PolyObservable, sys: NaturalSystem, state: PhaseState):
    """Partials of A in canonical (t, x | p) and covariant (t, x | Π) variables."""
    t, x, q = state.t, state.x, sys.q
    mom = A.momenta(sys, state)
    gm = A.mom_grad(t, x, mom)
    gx = A.x_grad(t, x, mom)
    Ng = sys.N.grad(t, x)  # Ng[k, a] = ∂_a N_k, a = (t, x)
    chain = q * (gm @ Ng)  # Σ_k q ∂A/∂(mom)_k ∂_a N_k
    if A.basis is Basis.COVARIANT_PI:
        return dict(canon=gx + chain, cov=gx, mom=gm)
    return dict(canon=gx, cov=gx - chain, mom=gm)


def _up_grads(A: LiftedObservable, sys: NaturalSystem, state: PhaseState):
    """Canonical partials of A: ``dQ`` over (x, u, v) and ``dP`` over (p̂_x, p̂_u, p̂_v)."""
    d, q = sys.d, sys.q
    t, x = -state.u / q, state.x
    mom = A.momenta(sys, state)
    gm = A.mom_grad(t, x, mom)
    gx = A.x_grad(t, x, mom)
    dP = gm.copy()
    if A.basis is Basis.COVARIANT_PI:
        N = sys.N.eval(t, x)
        Ng = sys.N.grad(t, x)
        dP[d + 1] -= N @ gm[:d]
        gx = gx - state.pv * (gm[:d] @ Ng)
    dQ = np.zeros(d + 2)
    dQ[:d] = gx[1:]
    dQ[d] = -gx[0] / q
    return dQ, dP


def _as_up(A, sys, state):
    if isinstance(A, LiftedObservable):
        return _up_grads(A, sys, state)
    raise TypeError("poisson_up takes LiftedObservables")


# ---------------------------------------------------------------- brackets


def poisson_down(A: PolyObservable, B: PolyObservable, sys: NaturalSystem, state: PhaseState,
                 method: str = "canonical") -> float:
    """{A, B} on the downstairs phase space.

    ``canonical``: ∂_xA ∂_pB - ∂_pA ∂_xB.  ``covariant``: D_iA ∂B/∂Π_i - ∂A/∂Π_i D_iB - qF_ij ∂A/∂Π_i ∂B/∂Π_j
    with D_i = ∂_i|_Π + Γ^k_ij Π_k ∂/∂Π_j.
    """
    if state.form is not Form.DOWN:
        raise ValueError("poisson_down needs a DOWN state")
    ga, gb = _down_grads(A, sys, state), _down_grads(B, sys, state)
    if method == "canonical":
        return float(ga["canon"][1:] @ gb["mom"] - ga["mom"] @ gb["canon"][1:])
    if method != "covariant":
        raise ValueError(f"unknown bracket method {method!r}")
    t, x, q = state.t, state.x, sys.q
    Pi = state.p + q * sys.N.eval(t, x)
    G = christoffel_base(sys.h, t, x)  # G[k, i, j] = Γ^k_ij
    Ng = sys.N.grad(t, x)[:, 1:]  # Ng[j, i] = ∂_i N_j
    F = Ng.T - Ng  # F[i, j] = ∂_i N_j - ∂_j N_i
    DA = ga["cov"][1:] + np.einsum("k,kij,j->i", Pi, G, ga["mom"])
    DB = gb["cov"][1:] + np.einsum("k,kij,j->i", Pi, G, gb["mom"])
    return float(DA @ gb["mom"] - ga["mom"] @ DB - q * ga["mom"] @ F @ gb["mom"])


def poisson_up(A: LiftedObservable, B: LiftedObservable, sys: NaturalSystem, state: PhaseState,
               method: str = "canonical") -> float:
    """{A, B} on T*M; ``covariant`` uses D̂_μ = ∂_μ + Γ̂^ρ_μν p̂_ρ ∂/∂p̂_ν with closed-form Γ̂."""
    if state.form is not Form.UP:
        raise ValueError("poisson_up needs an UP state")
    qa, pa = _as_up(A, sys, state)
    qb, pb = _as_up(B, sys, state)
    if method == "canonical":
        return float(qa @ pb - pa @ qb)
    if method != "covariant":
        raise ValueError(f"unknown bracket method {method!r}")
    G = christoffel_lifted(sys, -state.u / sys.q, state.x).lifted
    phat = np.concatenate([state.p, [state.pu, state.pv]])
    Da = qa + np.einsum("r,rmn,n->m", phat, G, pa)
    Db = qb + np.einsum("r,rmn,n->m", phat, G, pb)
    return float(Da @ pb - pa @ Db)


def bracket_with_hamiltonian_up(A: LiftedObservable, sys: NaturalSystem, state: PhaseState) -> float:
    """{A, 𝓗} using the jet right-hand side for the partials of 𝓗."""
    d = sys.d
    qa, pa = _up_grads(A, sys, state)
    y = np.concatenate([state.x, [state.u, state.v], state.p, [state.pu, state.pv]])
    f = rhs_up(sys, y)
    return float(qa @ f[:d + 2] + pa @ f[d + 2:])


def time_derivative_down(A: PolyObservable, sys: NaturalSystem, state: PhaseState) -> float:
    """dA/dt = ∂_tA|_p + {A, H} along the downstairs flow."""
    d = sys.d
    g = _down_grads(A, sys, state)
    f = rhs_down(sys, state.t, np.concatenate([state.x, state.p]))
    return float(g["canon"][0] + g["canon"][1:] @ f[:d] + g["mom"] @ f[d:])


def linear_commutator_up(A: LiftedObservable, B: LiftedObservable, sys: NaturalSystem, state: PhaseState,
                         step: float = 1e-5) -> float:
    """``-[K_A, K_B]·p̂`` for linear observables, with K differentiated by central differences."""
    d = sys.d

    def K(obs, x, u):
        s = PhaseState.up(u, state.v, x, state.pu, state.pv, state.p)
        return _up_grads(obs, sys, s)[1]

    def jac(obs):
        J = np.zeros((d + 2, d + 2))  # J[mu, nu] = ∂_nu K^mu
        for nu in range(d + 1):
            e = np.zeros(d + 1)
            e[nu] = step
            xp, xm = state.x + e[:d], state.x - e[:d]
            up_, um_ = state.u + e[d], state.u - e[d]
            J[:, nu] = (K(obs, xp, up_) - K(obs, xm, um_)) / (2 * step)
        return J

    ka, kb = K(A, state.x, state.u), K(B, state.x, state.u)
    comm = jac(B) @ ka - jac(A) @ kb
    phat = np.concatenate([state.p, [state.pu, state.pv]])
    return float(-comm @ phat)


# ---------------------------------------------------------------- drift


@dataclass(frozen=True)
class DriftReport:
    max_abs: float
    relative: float
    initial: float
    values: np.ndarray = field(repr=False)


def drift(obs, trajectory: Trajectory, sys: NaturalSystem) -> DriftReport:
    """Deviation of the observable along a trajectory from its initial value."""
    if trajectory.form is Form.DOWN:
        vals = np.array([eval_down(obs, sys, trajectory.state(k)) for k in range(len(trajectory))])
    else:
        vals = np.array([eval_up(obs, sys, trajectory.state(k)) for k in range(len(trajectory))])
    dev = float(np.max(np.abs(vals - vals[0])))
    return DriftReport(dev, dev / max(1.0, abs(vals[0])), float(vals[0]), vals)


# ---------------------------------------------------------------- conformal factor


@dataclass(frozen=True)
class ConformalFit:
    coeffs: list  # per base state: coefficients over the degree-(m-1) momentum monomials
    monomials: np.ndarray
    norm: float
    residual: float
    verdict: str

    @property
    def is_killing(self) -> bool:
        return self.verdict == "KILLING"


_PU_OFFSETS = (-1.0, -0.3, -0.1, 0.1, 0.3, 1.0)


def _monomial_exps(n_vars: int, degree: int) -> np.ndarray:
    rows = []
    for combo in itertools.combinations_with_replacement(range(n_vars), degree):
        e = np.zeros(n_vars, int)
        for c in combo:
            e[c] += 1
        rows.append(e)
    return np.array(rows, dtype=int).reshape(len(rows), n_vars)


def conformal_factor(Ahat: LiftedObservable, sys: NaturalSystem, states: Sequence[PhaseState],
                     seed: int = 0, killing_tol: float = 1e-8, conformal_tol: float = 1e-3) -> ConformalFit:
    """Fit ``{Ĉ, 𝓗} = f 𝓗`` with f homogeneous of degree m-1 in the momenta, per base state.

    Off-shell points shift p̂_u around each base state; for m ≥ 2 extra random shifts of
    all momenta make every coefficient of f identifiable.
    """
    from .lift import hamiltonian_up

    m = Ahat.m
    d = sys.d
    mons = _monomial_exps(d + 2, max(m - 1, 0))
    rng = np.random.default_rng(seed)
    coeffs, resid, norm = [], 0.0, 0.0
    any_off = False
    for base in states:
        pts = [PhaseState.up(base.u, base.v, base.x, base.pu + o, base.pv, base.p) for o in _PU_OFFSETS]
        n_extra = 3 * len(mons) if m >= 2 else 0
        for _ in range(n_extra):
            dp = rng.normal(scale=0.3, size=d + 2)
            pts.append(PhaseState.up(base.u, base.v, base.x, base.pu + dp[d], base.pv + dp[d + 1],
                                     base.p + dp[:d]))
        rows, rhs = [], []
        for s in pts:
            H = hamiltonian_up(sys, s)
            if abs(H) < 1e-12:
                continue
            mom = np.concatenate([s.p, [s.pu, s.pv]])
            rows.append(H * _monomials(mons, mom))
            rhs.append(bracket_with_hamiltonian_up(Ahat, sys, s))
        if len(rows) < len(mons):
            continue
        any_off = True
        M, b = np.array(rows), np.array(rhs)
        c, *_ = np.linalg.lstsq(M, b, rcond=None)
        scale = max(1.0, float(np.max(np.abs(b))))
        resid = max(resid, float(np.max(np.abs(M @ c - b))) / scale)
        norm = max(norm, float(np.max(np.abs(c))))
        coeffs.append(c)
    if not any_off:
        raise IllPosedError("all samples are on-shell; the conformal factor is invisible there")
    verdict = "KILLING" if norm < killing_tol else ("CONFORMAL" if norm > conformal_tol else "INCONCLUSIVE")
    return ConformalFit(coeffs, mons, norm, resid, verdict)

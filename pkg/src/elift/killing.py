"""Conformal Killing equations with flux and time dependence, and an ansatz solver.

Three residual families are provided:

* ``residual_rank1``  -- the four rank-1 equations in terms of (Ĉ^u(t), C1, C0), using the
  declared split Φ = Φ1 + Φ2 through ``F_ti`` and ``∇Φ2``;
* ``residual_rank2``  -- the six block equations in d_(0..4) and Ĉ^{ij};
* ``residual_generic`` -- the rank-a equations for the downstairs tensors C_(a).

All of them only see the split through the combination ``F_ti - q∂_iΦ2 = ∂_tN_i - q∂_iΦ``.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import sympy as sp

from .geometry import _inverse, christoffel_base
from .lift import NaturalSystem, sample_point
from .observables import (
    Coefficients,
    PolyObservable,
    conformal_factor,
    lift_observable,
    lift_rank1_generator,
)

__all__ = [
    "KillingResidual",
    "residual_rank1",
    "residual_rank2",
    "residual_generic",
    "observable_tensors",
    "sample_points",
    "symmetrize",
    "symmetrize_full",
    "AnsatzSpace",
    "BasisElement",
    "SolveResult",
    "solve_ansatz",
    "RankDeficientBasisError",
    "InsufficientSamplesError",
]

MAX_RANK = 6


class RankDeficientBasisError(ValueError):
    pass


class InsufficientSamplesError(ValueError):
    pass


# ---------------------------------------------------------------- tensor helpers


def symmetrize_full(X: np.ndarray) -> np.ndarray:
    """Average over all permutations of the axes."""
    n = X.ndim
    if n < 2:
        return X.copy()
    perms = list(itertools.permutations(range(n)))
    return sum(np.transpose(X, p) for p in perms) / len(perms)


def symmetrize(X: np.ndarray) -> np.ndarray:
    """Symmetrise ``X[i, j1..ja]`` that is already symmetric in its last a indices.

    Only the a+1 placements of the first index are needed in that case.
    """
    n = X.ndim
    if n < 2:
        return X.copy()
    return sum(np.moveaxis(X, 0, p) for p in range(n)) / n


def _nabla_up(T: np.ndarray, dT: np.ndarray, G: np.ndarray, hinv: np.ndarray) -> np.ndarray:
    """``∇^i T^{J}`` for symmetric contravariant T; ``dT`` carries spatial partials on its last axis."""
    a = T.ndim
    D = np.moveaxis(dT, -1, 0)
    if a:
        GT = np.tensordot(G, T, axes=([2], [0]))  # GT[j, k, rest] = Γ^j_kl T^{l rest}
        GT = np.swapaxes(GT, 0, 1)  # [k, j, rest]
        for s in range(a):
            D = D + np.moveaxis(GT, 1, 1 + s)
    return np.tensordot(hinv, D, axes=([1], [0]))


@dataclass(frozen=True)
class _PointGeometry:
    t: float
    x: np.ndarray
    q: float
    h: np.ndarray
    hinv: np.ndarray
    dth_inv: np.ndarray  # ∂_t h^{ij}
    G: np.ndarray
    Fup: np.ndarray  # F^i_l
    w: np.ndarray  # ∂_tN - q∇Φ  (= F_t - q∇Φ2 for any split)
    Ft: np.ndarray
    dPhi2: np.ndarray


def _geometry(sys: NaturalSystem, t: float, x) -> _PointGeometry:
    x = np.asarray(x, float)
    q = sys.q
    h = sys.h.eval(t, x)
    hinv = _inverse(h)
    hg = sys.h.grad(t, x)
    Ng = sys.N.grad(t, x)
    dN = Ng[:, 1:]  # dN[j, i] = ∂_i N_j
    F = dN.T - dN
    phi1, phi2, _ = sys.potential_split()
    Ft = Ng[:, 0] - q * phi1.grad(t, x)[1:]
    dPhi2 = phi2.grad(t, x)[1:]
    w = Ng[:, 0] - q * sys.Phi.grad(t, x)[1:]
    return _PointGeometry(t, x, q, h, hinv, -hinv @ hg[..., 0] @ hinv, christoffel_base(sys.h, t, x),
                          hinv @ F, w, Ft, dPhi2)


# ---------------------------------------------------------------- residual container


@dataclass
class KillingResidual:
    rank: int
    equations: dict = field(default_factory=dict)  # label -> list of residual arrays per sample
    flags: list = field(default_factory=list)

    @property
    def norms(self) -> dict:
        out = {}
        for label, vals in self.equations.items():
            flat = np.concatenate([np.ravel(v) for v in vals]) if vals else np.zeros(1)
            out[label] = (float(np.max(np.abs(flat))), float(np.sqrt(np.mean(flat ** 2))))
        return out

    @property
    def max_residual(self) -> float:
        return max((m for m, _ in self.norms.values()), default=0.0)

    def add(self, label, value):
        self.equations.setdefault(label, []).append(np.asarray(value, float))


def sample_points(sys: NaturalSystem, n: int, seed: int = 0, t_window=(-1.0, 1.0)) -> np.ndarray:
    """``n`` rows of (t, x), deterministic in ``seed``; x inside the shrunk domain box."""
    rng = np.random.default_rng(seed)
    out = np.empty((n, sys.d + 1))
    for k in range(n):
        out[k, 0] = rng.uniform(*t_window)
        out[k, 1:] = sample_point(sys, rng)
    return out


def _points(sys, samples, seed=0):
    if samples is None:
        return sample_points(sys, 40, seed)
    if isinstance(samples, int):
        return sample_points(sys, samples, seed)
    return np.atleast_2d(np.asarray(samples, float))


def _split_flag(sys, res):
    if sys.potential_split()[2]:
        res.flags.append("potential split not declared: Φ2 := Φ")


class _ExprJet:
    """Values and (t, x) partials of a list of sympy expressions, reshaped to ``shape``."""

    def __init__(self, exprs, shape, sys: NaturalSystem):
        s = sys.symbolic
        flat = [sp.sympify(e) for e in np.ravel(np.asarray(exprs, dtype=object))]
        self.shape = tuple(shape)
        self.c = Coefficients.from_sympy(flat, s.t, s.xs)

    def __call__(self, t, x):
        n = self.c.grad(t, x).shape[-1]
        return self.c.eval(t, x).reshape(self.shape), self.c.grad(t, x).reshape(self.shape + (n,))


def _need_symbolic(sys):
    if sys.symbolic is None:
        raise ValueError("expression inputs need a symbolic system")


# ---------------------------------------------------------------- rank 1


def _rank1_point(geo: _PointGeometry, Cu, dCu, C1, dC1, C0, dC0):
    """Residuals of the four rank-1 equations at one point; derivative arrays carry (t, x)."""
    q, hinv = geo.q, geo.hinv
    eq1 = dCu[1:]
    X = _nabla_up(C1, dC1[..., 1:], geo.G, hinv)
    eq2 = 0.5 * (X + X.T) + 0.5 * (dCu[0] * hinv + Cu * geo.dth_inv)
    eq3 = (hinv @ dC0[1:] + dC1[:, 0] + q * geo.Fup @ C1 - q ** 2 * Cu * hinv @ geo.dPhi2
           + q * Cu * hinv @ geo.Ft)
    eq4 = -dC0[0] + q ** 2 * C1 @ geo.dPhi2 - q * C1 @ geo.Ft
    return {"rank1.eq1": eq1, "rank1.eq2": eq2, "rank1.eq3": eq3, "rank1.eq4": np.array(eq4)}


def residual_rank1(sys: NaturalSystem, C0, C1, Chat_u, samples=None, seed: int = 0) -> KillingResidual:
    """Rank-1 residuals for sympy inputs (in the system's symbols)."""
    _need_symbolic(sys)
    d = sys.d
    f0, f1, fu = _ExprJet([C0], (), sys), _ExprJet(list(C1), (d,), sys), _ExprJet([Chat_u], (), sys)
    res = KillingResidual(1)
    _split_flag(sys, res)
    for z in _points(sys, samples, seed):
        geo = _geometry(sys, z[0], z[1:])
        Cu, dCu = fu(z[0], z[1:])
        c1, dc1 = f1(z[0], z[1:])
        c0, dc0 = f0(z[0], z[1:])
        for k, v in _rank1_point(geo, float(Cu), dCu, c1, dc1, float(c0), dc0).items():
            res.add(k, v)
    return res


# ---------------------------------------------------------------- rank 2 blocks


def _sym_outer(a, b):
    return symmetrize_full(np.multiply.outer(a, b))


def _rank2_point(geo: _PointGeometry, B: dict):
    q, h, hinv, G = geo.q, geo.h, geo.hinv, geo.G
    d0, dd0 = B["d0"]
    d1, dd1 = B["d1"]
    d2, dd2 = B["d2"]
    Ch, dCh = B["Chat"]
    d3, dd3 = B["d3"]
    d4, dd4 = B["d4"]
    d0, d2, d4 = float(d0), float(d2), float(d4)
    w = geo.w
    W = hinv @ w
    Fup = geo.Fup
    dth = geo.dth_inv
    hh = _sym_outer(hinv, hinv)
    dt_hh = _sym_outer(dth, hinv) * 2.0

    L1 = dd0[1:]
    nab_d1 = _nabla_up(d1, dd1[..., 1:], G, hinv)
    L2 = q * _sym_outer(nab_d1, hinv) + 0.25 * (dd0[0] * hh + d0 * dt_hh)

    nab_d2 = hinv @ dd2[1:]
    nab_C = _nabla_up(Ch, dCh[..., 1:], G, hinv)
    dt_d1h = np.multiply.outer(dd1[:, 0], hinv) + np.multiply.outer(d1, dth)
    L3 = (q ** 2 * symmetrize_full(np.multiply.outer(nab_d2, hinv) + nab_C)
          + q / 3 * symmetrize_full(dt_d1h)
          + q ** 2 / 3 * symmetrize_full(np.multiply.outer(Fup @ d1, hinv))
          + q * d0 / 3 * symmetrize_full(np.multiply.outer(hinv, W)))

    nab_d3 = _nabla_up(d3, dd3[..., 1:], G, hinv)
    dt_C2 = dd2[0] * hinv + d2 * dth + dCh[..., 0]
    L4 = (q ** 3 * 0.5 * (nab_d3 + nab_d3.T)
          + q ** 2 / 2 * dt_C2
          + q ** 3 * symmetrize_full(Ch @ Fup.T)
          + q ** 2 / 6 * (2 * symmetrize_full(np.multiply.outer(d1, W)) + (d1 @ w) * hinv))

    L5 = (q ** 4 * hinv @ dd4[1:] + q ** 3 * dd3[:, 0] + q ** 4 * Fup @ d3
          + q ** 3 * (d2 * W + Ch @ w))
    L6 = -dd4[0] - d3 @ w
    return {"rank2.eq1": L1, "rank2.eq2": L2, "rank2.eq3": L3, "rank2.eq4": L4,
            "rank2.eq5": L5, "rank2.eq6": np.array(L6)}


def residual_rank2(sys: NaturalSystem, blocks: dict, samples=None, seed: int = 0) -> KillingResidual:
    """Block residuals; ``blocks`` maps d0, d1, d2, Chat, d3, d4 to sympy expressions."""
    _need_symbolic(sys)
    d = sys.d
    shapes = dict(d0=(), d1=(d,), d2=(), Chat=(d, d), d3=(d,), d4=())
    jets = {}
    for k, shp in shapes.items():
        e = blocks.get(k, 0)
        if shp == ():
            e = [e]
        elif k == "Chat":
            e = [sp.Matrix(e)[i, j] for i in range(d) for j in range(d)] if e != 0 else [0] * d * d
        elif e == 0:
            e = [0] * d
        jets[k] = _ExprJet(list(e), shp, sys)
    res = KillingResidual(2)
    _split_flag(sys, res)
    for z in _points(sys, samples, seed):
        geo = _geometry(sys, z[0], z[1:])
        B = {k: j(z[0], z[1:]) for k, j in jets.items()}
        for k, v in _rank2_point(geo, B).items():
            res.add(k, v)
    return res


# ---------------------------------------------------------------- generic rank


class _TensorPattern:
    """Index permutations for turning monomial coefficients into dense symmetric tensors."""

    def __init__(self, exps: np.ndarray):
        self.items = []
        for e in exps:
            r = int(e.sum())
            weight = math.prod(math.factorial(int(v)) for v in e)
            idx = tuple(i for i, v in enumerate(e) for _ in range(int(v)))
            perms = tuple(set(itertools.permutations(idx)))
            self.items.append((r, weight, perms))


def observable_tensors(obs: PolyObservable, t: float, x, m: int | None = None):
    """``[(C_(r), ∂C_(r))]`` for r = 0..m with ∂ over (t, x) on the last axis."""
    pat = getattr(obs, "_pattern", None)
    if pat is None:
        pat = _TensorPattern(obs.exps)
        object.__setattr__(obs, "_pattern", pat)
    m = obs.m if m is None else m
    d = obs.d
    c, g = obs.coef.eval(t, x), obs.coef.grad(t, x)
    out = [(np.zeros((d,) * r), np.zeros((d,) * r + (d + 1,))) for r in range(m + 1)]
    for k, (r, weight, perms) in enumerate(pat.items):
        if r > m:
            raise ValueError("observable degree exceeds m")
        T, dT = out[r]
        for p in perms:
            T[p] = c[k] * weight
            dT[p] = g[k] * weight
    return out


def _generic_point(geo: _PointGeometry, tensors):
    """Rank-a equations for a = 0..m and the closure, as residual arrays."""
    q, w = geo.q, geo.w
    m = len(tensors) - 1
    out = {}
    for a in range(m + 1):
        T, dT = tensors[a]
        X = _nabla_up(T, dT[..., 1:], geo.G, geo.hinv)
        if a + 1 <= m:
            C1, dC1 = tensors[a + 1]
            X = X + dC1[..., 0] / (a + 1)
            X = X + q * np.tensordot(geo.Fup, C1, axes=([1], [a]))
        if a + 2 <= m:
            C2 = tensors[a + 2][0]
            X = X + q / (a + 1) * np.tensordot(C2, w, axes=([a + 1], [0]))
        out[f"generic.a{a}"] = symmetrize(X)
    closure = tensors[0][1][0]
    if m >= 1:
        closure = closure + q * tensors[1][0] @ w
    out["generic.closure"] = np.array(closure)
    return out


def residual_generic(sys: NaturalSystem, obs: PolyObservable, samples=None, seed: int = 0) -> KillingResidual:
    """Generic-rank residuals of a downstairs observable written in the Π basis."""
    if obs.m > MAX_RANK:
        raise ValueError(f"rank {obs.m} > {MAX_RANK} not supported")
    from .observables import Basis

    if obs.basis is not Basis.COVARIANT_PI:
        obs = obs.to_basis(Basis.COVARIANT_PI, sys)
    res = KillingResidual(obs.m)
    _split_flag(sys, res)
    for z in _points(sys, samples, seed):
        geo = _geometry(sys, z[0], z[1:])
        for k, v in _generic_point(geo, observable_tensors(obs, z[0], z[1:])).items():
            res.add(k, v)
    return res


# ---------------------------------------------------------------- ansatz and solver


@dataclass(frozen=True)
class BasisElement:
    block: str  # "Cu", "C1", "C0" (rank 1) or "C<a>" (generic)
    component: tuple
    expr: sp.Expr


def _monomials_tx(t, xs, degree: int, time_max: int | None = None):
    zs = [t, *xs]
    out = []
    for deg in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(len(zs)), deg):
            if time_max is not None and combo.count(0) > time_max:
                continue
            out.append(sp.Mul(*[zs[c] for c in combo]))
    return out


@dataclass(frozen=True)
class AnsatzSpace:
    """Polynomial ansatz; ``kind`` is "rank1" (Ĉ^u(t), C1, C0) or "generic" (C_(0..m))."""

    rank: int
    poly_degree: int
    d: int
    kind: str
    elements: tuple

    @property
    def n_params(self) -> int:
        return len(self.elements)

    @classmethod
    def build(cls, sys: NaturalSystem, rank: int, poly_degree: int, extra: Sequence = ()) -> "AnsatzSpace":
        _need_symbolic(sys)
        if rank < 1 or rank > MAX_RANK:
            raise ValueError(f"rank must be in 1..{MAX_RANK}")
        s = sys.symbolic
        d = sys.d
        mons = _monomials_tx(s.t, s.xs, poly_degree)
        els = []
        if rank == 1:
            els += [BasisElement("Cu", (), s.t ** k) for k in range(poly_degree + 1)]
            els += [BasisElement("C1", (i,), mm) for i in range(d) for mm in mons]
            els += [BasisElement("C0", (), mm) for mm in mons]
            kind = "rank1"
        else:
            for a in range(rank + 1):
                for comp in itertools.combinations_with_replacement(range(d), a):
                    els += [BasisElement(f"C{a}", comp, mm) for mm in mons]
            kind = "generic"
        seen = {(e.block, e.component, sp.srepr(e.expr)) for e in els}
        for e in extra:
            e = e if isinstance(e, BasisElement) else BasisElement(e[0], tuple(e[1]), sp.sympify(e[2]))
            key = (e.block, e.component, sp.srepr(e.expr))
            if key not in seen:
                els.append(e)
                seen.add(key)
        return cls(rank, poly_degree, d, kind, tuple(els))


@dataclass(frozen=True)
class SolveResult:
    nullspace_dim: int
    generators: list  # coefficient vectors (canonicalised)
    singular_values: np.ndarray
    spectral_gap: float
    reliable: bool
    classification: list
    validation_residuals: list
    n_samples: int
    n_params: int
    expressions: list = field(default_factory=list, repr=False)


class _Evaluator:
    """Column-wise residual evaluation: each ansatz element contributes one column."""

    def __init__(self, sys: NaturalSystem, space: AnsatzSpace):
        self.sys, self.space = sys, space
        s = sys.symbolic
        self.jet = Coefficients.from_sympy([e.expr for e in space.elements], s.t, s.xs)

    def rows(self, t, x) -> np.ndarray:
        geo = _geometry(self.sys, t, x)
        vals, grads = self.jet.eval(t, x), self.jet.grad(t, x)
        cols = [self._column(geo, el, vals[k], grads[k]) for k, el in enumerate(self.space.elements)]
        return np.stack(cols, axis=1)

    def basis_values(self, t, x) -> np.ndarray:
        """Rows: (block, component) slots; columns: element values; used for the independence check."""
        vals = self.jet.eval(t, x)
        slots = {}
        for el in self.space.elements:
            slots.setdefault((el.block, el.component), len(slots))
        M = np.zeros((len(slots), len(self.space.elements)))
        for k, el in enumerate(self.space.elements):
            M[slots[(el.block, el.component)], k] = vals[k]
        return M

    def _column(self, geo, el: BasisElement, val, grad):
        d = self.space.d
        if self.space.kind == "rank1":
            Cu, dCu = 0.0, np.zeros(d + 1)
            C1, dC1 = np.zeros(d), np.zeros((d, d + 1))
            C0, dC0 = 0.0, np.zeros(d + 1)
            if el.block == "Cu":
                Cu, dCu = val, grad
            elif el.block == "C1":
                C1[el.component[0]] = val
                dC1[el.component[0]] = grad
            else:
                C0, dC0 = val, grad
            r = _rank1_point(geo, Cu, dCu, C1, dC1, C0, dC0)
        else:
            m = self.space.rank
            a = int(el.block[1:])
            tensors = [(np.zeros((d,) * r), np.zeros((d,) * r + (d + 1,))) for r in range(m + 1)]
            T, dT = tensors[a]
            for p in set(itertools.permutations(el.component)):
                T[p] = val
                dT[p] = grad
            r = _generic_point(geo, tensors)
        return np.concatenate([np.ravel(v) for v in r.values()])


def _canonical_basis(V: np.ndarray) -> np.ndarray:
    """Columns spanning the same space, unit on QR pivot rows; tiny entries zeroed."""
    if V.shape[1] == 0:
        return V
    _, _, piv = scipy.linalg.qr(V.T, pivoting=True)
    rows = piv[: V.shape[1]]
    G = V @ np.linalg.inv(V[rows, :])
    G[np.abs(G) < 1e-12] = 0.0
    return G


def _generator_exprs(space: AnsatzSpace, coeffs: np.ndarray):
    blocks: dict = {}
    for c, el in zip(coeffs, space.elements):
        if c == 0.0:
            continue
        key = (el.block, el.component)
        blocks[key] = blocks.get(key, 0) + sp.Float(c) * el.expr
    return blocks


def _classify(sys, space, coeffs, seed):
    from .lift import PhaseState, lift_state

    blocks = _generator_exprs(space, coeffs)
    d = sys.d
    s = sys.symbolic
    if space.kind == "rank1":
        Cu = blocks.get(("Cu", ()), 0)
        C1 = [blocks.get(("C1", (i,)), 0) for i in range(d)]
        C0 = blocks.get(("C0", ()), 0)
        Ahat = lift_rank1_generator(sys, Cu, C1, C0)
    else:
        P = sp.symbols(f"Pi_0:{d}", real=True)
        expr = 0
        for (blk, comp), e in blocks.items():
            a = int(blk[1:])
            # C = Σ_r (1/r!) C^{I} Π_I over ordered index tuples; one sorted component stands for
            # r!/Π e_j! orderings.
            mult = math.factorial(a) / math.prod(math.factorial(comp.count(i)) for i in set(comp))
            expr += e * mult / math.factorial(a) * sp.Mul(*[P[i] for i in comp])
        obs = PolyObservable.from_sympy(expr, s.t, s.xs, P, q=sys.q, order=space.rank)
        Ahat = lift_observable(obs)
    rng = np.random.default_rng(seed + 7)
    states = []
    for _ in range(4):
        x = sample_point(sys, rng)
        states.append(lift_state(sys, PhaseState.down(rng.uniform(-1, 1), x, rng.normal(size=d))))
    fit = conformal_factor(Ahat, sys, states)
    return fit.verdict, blocks


def solve_ansatz(sys: NaturalSystem, space: AnsatzSpace, n_samples: int | None = None, seed: int = 0,
                 t_window=(-1.0, 1.0), classify: bool = True, rel_threshold: float = 1e-8) -> SolveResult:
    """Collocation of the residual equations over the ansatz and SVD nullspace extraction."""
    n_params = space.n_params
    if n_samples is None:
        n_samples = 3 * n_params
    if n_samples < 3 * n_params:
        raise InsufficientSamplesError(f"need at least {3 * n_params} samples, got {n_samples}")
    ev = _Evaluator(sys, space)
    pts = sample_points(sys, n_samples, seed, t_window)

    # independence of the ansatz itself (the collocation matrix may have legitimately zero columns)
    per_slot = Counter((el.block, el.component) for el in space.elements)
    Bv = np.vstack([ev.basis_values(z[0], z[1:]) for z in pts[: max(8, 2 * max(per_slot.values()))]])
    sb = np.linalg.svd(Bv, compute_uv=False)
    if sb.size < n_params or sb[-1] < 1e-12 * sb[0]:
        raise RankDeficientBasisError("ansatz basis functions are linearly dependent on the samples")

    A = np.vstack([ev.rows(z[0], z[1:]) for z in pts])
    _, sv, Vt = np.linalg.svd(A, full_matrices=True)
    sv_full = np.concatenate([sv, np.zeros(max(0, n_params - sv.size))])
    smax = sv_full[0] if sv_full.size else 0.0
    null = sv_full <= rel_threshold * smax  # a vanishing matrix has everything in its nullspace
    k = int(np.sum(null))
    V = Vt[null].T
    kept = sv_full[~null]
    rejected = sv_full[null]
    if k == 0:
        gap = math.inf if kept.size == 0 else float(kept[-1] / max(rel_threshold * smax, 1e-300))
    else:
        top_rej = rejected.max()
        gap = math.inf if kept.size == 0 or top_rej == 0 else float(kept[-1] / top_rej)
    reliable = gap >= 1e2

    G = _canonical_basis(V)
    fresh = sample_points(sys, 2 * max(1, n_samples // 3), seed + 1000, t_window)
    Af = np.vstack([ev.rows(z[0], z[1:]) for z in fresh])
    scale = max(1.0, float(np.max(np.abs(Af))))
    val = [float(np.max(np.abs(Af @ G[:, j]))) / scale for j in range(G.shape[1])]

    classes, exprs = [], []
    for j in range(G.shape[1]):
        if classify:
            verdict, blocks = _classify(sys, space, G[:, j], seed)
        else:
            verdict, blocks = "UNCLASSIFIED", _generator_exprs(space, G[:, j])
        classes.append(verdict)
        exprs.append(blocks)
    return SolveResult(k, [G[:, j].copy() for j in range(G.shape[1])], sv_full, gap, reliable, classes, val,
                       n_samples, n_params, exprs)

"""Differentiable fields on (t, x) and Christoffel symbols of h and of the lifted metric.

A field is evaluated at a point ``(t, x)``.  Its gradient and Hessian are taken
with respect to the variables ``z = (t, x^1, ..., x^d)``, so ``grad[..., 0]`` is
the time derivative and ``grad[..., 1:]`` the spatial ones.

Lifted coordinates are ordered ``(x^1..x^d, u, v)`` with ``t = -u/q``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy as sp

__all__ = [
    "Coords",
    "JetField",
    "ChristoffelTable",
    "SingularMetricError",
    "make_jet_analytic",
    "make_jet_numeric",
    "make_jet_symbolic",
    "constant_jet",
    "verify_jet",
    "christoffel_base",
    "christoffel_from_metric",
    "christoffel_lifted",
    "christoffel_lifted_generic",
    "lifted_metric_derivatives",
]


class SingularMetricError(ValueError):
    """Raised when a metric is (numerically) not invertible at a point."""


@dataclass(frozen=True)
class Coords:
    names: tuple[str, ...]
    time_label: str = "t"

    def __post_init__(self):
        if len(self.names) < 1:
            raise ValueError("need at least one spatial coordinate")
        labels = list(self.names) + [self.time_label]
        if len(set(labels)) != len(labels):
            raise ValueError(f"coordinate labels must be distinct: {labels}")

    @property
    def d(self) -> int:
        return len(self.names)


_SHAPES = {0: lambda d: (), 1: lambda d: (d,), 2: lambda d: (d, d)}


@dataclass(frozen=True)
class JetField:
    """Scalar, covector or symmetric 2-tensor field with first and second partials.

    ``eval(t, x)`` returns the components, ``grad(t, x)`` has one trailing axis of
    length ``d + 1`` and ``hess(t, x)`` two.
    """

    rank: int
    d: int
    eval: Callable[[float, np.ndarray], np.ndarray]
    grad: Callable[[float, np.ndarray], np.ndarray]
    hess: Callable[[float, np.ndarray], np.ndarray]
    kind: str = "analytic"
    expr: object = field(default=None, compare=False, repr=False)

    @property
    def shape(self) -> tuple[int, ...]:
        return _SHAPES[self.rank](self.d)

    def __call__(self, t, x):
        return self.eval(t, x)


def _check_rank(rank):
    if rank not in (0, 1, 2):
        raise ValueError(f"field rank must be 0, 1 or 2, got {rank!r}")


def make_jet_analytic(rank: int, eval, grad, hess, d: int) -> JetField:
    _check_rank(rank)

    def _e(t, x):
        return np.asarray(eval(t, np.asarray(x, float)), dtype=float)

    def _g(t, x):
        return np.asarray(grad(t, np.asarray(x, float)), dtype=float)

    def _h(t, x):
        return np.asarray(hess(t, np.asarray(x, float)), dtype=float)

    return JetField(rank, d, _e, _g, _h, kind="analytic")


def _numeric_grad(f, z, step):
    n = z.size
    out = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0

        def central(hh):
            return (f(z + hh * e) - f(z - hh * e)) / (2.0 * hh)

        out.append((4.0 * central(step / 2.0) - central(step)) / 3.0)
    return np.stack(out, axis=-1)


def _numeric_hess(f, z, step):
    n = z.size
    f0 = f(z)
    rows = [[None] * n for _ in range(n)]
    for a in range(n):
        ea = np.zeros(n)
        ea[a] = 1.0
        for b in range(a, n):
            if a == b:
                def second(hh):
                    return (f(z + hh * ea) - 2.0 * f0 + f(z - hh * ea)) / (hh * hh)
            else:
                eb = np.zeros(n)
                eb[b] = 1.0

                def second(hh):
                    return (f(z + hh * ea + hh * eb) - f(z + hh * ea - hh * eb)
                            - f(z - hh * ea + hh * eb) + f(z - hh * ea - hh * eb)) / (4.0 * hh * hh)
            val = (4.0 * second(step / 2.0) - second(step)) / 3.0
            rows[a][b] = rows[b][a] = val
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def make_jet_numeric(rank: int, eval, d: int, step: float = 1e-3) -> JetField:
    """Field whose derivatives come from Richardson-extrapolated central differences."""
    _check_rank(rank)
    if not step > 0:
        raise ValueError("step must be positive")

    def on_z(z):
        return np.asarray(eval(z[0], z[1:]), dtype=float)

    def _e(t, x):
        return np.asarray(eval(t, np.asarray(x, float)), dtype=float)

    def _g(t, x):
        return _numeric_grad(on_z, np.concatenate([[t], np.asarray(x, float)]), step)

    def _h(t, x):
        return _numeric_hess(on_z, np.concatenate([[t], np.asarray(x, float)]), step)

    return JetField(rank, d, _e, _g, _h, kind="numeric")


def make_jet_symbolic(rank: int, expr, t: sp.Symbol, xs: Sequence[sp.Symbol]) -> JetField:
    """Analytic jet from a sympy expression (scalar, list, or Matrix) in ``t, xs``."""
    _check_rank(rank)
    d = len(xs)
    zs = [t, *xs]
    if rank == 0:
        comps = sp.sympify(expr)
        flat = [comps]
    elif rank == 1:
        flat = [sp.sympify(e) for e in expr]
    else:
        m = sp.Matrix(expr)
        flat = [m[i, j] for i in range(d) for j in range(d)]
    shape = _SHAPES[rank](d)
    n = d + 1
    grads = [[sp.diff(e, z) for z in zs] for e in flat]
    hesss = [[[sp.diff(g, z) for z in zs] for g in row] for row in grads]
    f_val = sp.lambdify(zs, flat, "numpy")
    f_grad = sp.lambdify(zs, grads, "numpy")
    f_hess = sp.lambdify(zs, hesss, "numpy")

    def _arr(val, tail):
        return np.array(val, dtype=float).reshape(shape + tail)

    def _e(tt, x):
        return _arr(f_val(tt, *np.asarray(x, float)), ())

    def _g(tt, x):
        return _arr(f_grad(tt, *np.asarray(x, float)), (n,))

    def _h(tt, x):
        return _arr(f_hess(tt, *np.asarray(x, float)), (n, n))

    return JetField(rank, d, _e, _g, _h, kind="symbolic", expr=expr)


def constant_jet(rank: int, value, d: int) -> JetField:
    _check_rank(rank)
    val = np.broadcast_to(np.asarray(value, float), _SHAPES[rank](d)).copy()
    n = d + 1
    return JetField(
        rank,
        d,
        lambda t, x: val.copy(),
        lambda t, x: np.zeros(val.shape + (n,)),
        lambda t, x: np.zeros(val.shape + (n, n)),
        kind="analytic",
    )


def verify_jet(jet: JetField, t: float, x, step: float = 1e-3) -> tuple[float, float]:
    """Max deviation of the jet's grad and hess from finite differences of its eval."""
    num = make_jet_numeric(jet.rank, jet.eval, jet.d, step)
    dg = np.max(np.abs(jet.grad(t, x) - num.grad(t, x)), initial=0.0)
    dh = np.max(np.abs(jet.hess(t, x) - num.hess(t, x)), initial=0.0)
    return float(dg), float(dh)


@dataclass(frozen=True)
class ChristoffelTable:
    """``base[i, j, k] = Γ^i_{jk}`` of h and ``lifted[a, b, c]`` for g in (x, u, v) order."""

    base: np.ndarray
    lifted: np.ndarray


def _inverse(h: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(h))
    det = np.linalg.det(h)
    if scale == 0 or abs(det) < 1e-12 * scale ** h.shape[0]:
        raise SingularMetricError(f"metric is singular (det={det:.3e})")
    return np.linalg.inv(h)


def christoffel_from_metric(g: np.ndarray, dg: np.ndarray, ginv: np.ndarray | None = None) -> np.ndarray:
    """Generic Levi-Civita symbols; ``dg[c, a, b] = ∂_c g_ab``."""
    if ginv is None:
        ginv = _inverse(g)
    # lower[d, b, c] = ∂_b g_dc + ∂_c g_db - ∂_d g_bc
    lower = np.transpose(dg, (1, 0, 2)) + np.transpose(dg, (1, 2, 0)) - dg
    return 0.5 * np.einsum("ad,dbc->abc", ginv, lower)


def christoffel_base(h: JetField, t: float, x) -> np.ndarray:
    hv = h.eval(t, x)
    dh = np.moveaxis(h.grad(t, x)[..., 1:], -1, 0)
    return christoffel_from_metric(hv, dh)


def _fields(sys, t, x):
    q = sys.q
    hv = sys.h.eval(t, x)
    hg = sys.h.grad(t, x)
    Nv = sys.N.eval(t, x)
    Ng = sys.N.grad(t, x)
    Pv = float(sys.Phi.eval(t, x))
    Pg = sys.Phi.grad(t, x)
    return dict(
        h=hv,
        hinv=_inverse(hv),
        dh=np.moveaxis(hg[..., 1:], -1, 0),  # dh[k, i, j] = ∂_k h_ij
        dh_u=-hg[..., 0] / q,
        N=Nv,
        dN=np.moveaxis(Ng[..., 1:], -1, 0),  # dN[k, i] = ∂_k N_i
        dN_u=-Ng[..., 0] / q,
        Phi=Pv,
        dPhi=Pg[1:],
        dPhi_u=-Pg[0] / q,
    )


def lifted_metric_derivatives(sys, t: float, x) -> tuple[np.ndarray, np.ndarray]:
    """Assembled Brinkmann metric g and ``dg[c, a, b] = ∂_c g_ab`` in (x, u, v) order."""
    f = _fields(sys, t, x)
    d = f["h"].shape[0]
    n = d + 2
    iu, iv = d, d + 1
    g = np.zeros((n, n))
    g[:d, :d] = f["h"]
    g[:d, iu] = g[iu, :d] = f["N"]
    g[iu, iv] = g[iv, iu] = 1.0
    g[iu, iu] = -2.0 * f["Phi"]
    dg = np.zeros((n, n, n))
    for c, (dh, dN, dP) in enumerate(
        [(f["dh"][k], f["dN"][k], f["dPhi"][k]) for k in range(d)] + [(f["dh_u"], f["dN_u"], f["dPhi_u"])]
    ):
        dg[c, :d, :d] = dh
        dg[c, :d, iu] = dg[c, iu, :d] = dN
        dg[c, iu, iu] = -2.0 * dP
    return g, dg


def christoffel_lifted_generic(sys, t: float, x) -> np.ndarray:
    g, dg = lifted_metric_derivatives(sys, t, x)
    return christoffel_from_metric(g, dg)


def christoffel_lifted(sys, t: float, x, variant: str = "corrected") -> ChristoffelTable:
    """Closed-form Christoffel blocks of the Brinkmann metric.

    ``variant="printed"`` reproduces the commonly quoted closed form, which drops
    several ``∂_u`` terms in the ``Γ^v`` blocks; it agrees with the generic formula
    only when h, N and Φ do not depend on u.
    """
    if variant not in ("corrected", "printed"):
        raise ValueError(f"unknown variant {variant!r}")
    f = _fields(sys, t, x)
    hinv, dh, dh_u = f["hinv"], f["dh"], f["dh_u"]
    N, dN, dN_u = f["N"], f["dN"], f["dN_u"]
    dPhi, dPhi_u = f["dPhi"], f["dPhi_u"]
    d = hinv.shape[0]
    n = d + 2
    iu, iv = d, d + 1

    base = christoffel_from_metric(f["h"], dh, hinv)
    F = dN - dN.T  # F[i, j] = ∂_i N_j - ∂_j N_i
    F_up = hinv @ F  # F^l_i
    N_up = hinv @ N
    dPhi_up = hinv @ dPhi
    nabla_N = dN - np.einsum("kij,k->ij", base, N)  # ∇_i N_j
    sym_nabla_N = 0.5 * (nabla_N + nabla_N.T)

    if variant == "corrected":
        G_v_uu = -dPhi_u - N_up @ dN_u - N_up @ dPhi
        G_v_iu = -dPhi - 0.5 * F @ N_up - 0.5 * dh_u @ N_up
        G_v_ij = sym_nabla_N - 0.5 * dh_u
    else:
        dN2_u = 2.0 * N_up @ dN_u - N_up @ dh_u @ N_up
        G_v_uu = -N_up @ dPhi - 2.0 * dPhi_u + 0.5 * dN2_u
        dNup_u = hinv @ dN_u - hinv @ dh_u @ N_up
        G_v_iu = 0.5 * N @ F_up - dPhi + 0.5 * f["h"] @ dNup_u
        G_v_ij = sym_nabla_N
    G_i_uu = dPhi_up + hinv @ dN_u
    G_i_ju = -0.5 * F_up + 0.5 * hinv @ dh_u

    L = np.zeros((n, n, n))
    L[iv, iu, iu] = G_v_uu
    L[iv, :d, iu] = L[iv, iu, :d] = G_v_iu
    L[iv, :d, :d] = G_v_ij
    L[:d, iu, iu] = G_i_uu
    L[:d, :d, iu] = G_i_ju
    L[:d, iu, :d] = G_i_ju
    L[:d, :d, :d] = base
    return ChristoffelTable(base=base, lifted=L)

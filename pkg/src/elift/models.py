"""The model zoo: natural systems with their known invariants, regimes and test horizons."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy as sp

from .dynamics import IntegratorConfig
from .geometry import Coords
from .lift import NaturalSystem, PhaseState
from .observables import (
    Basis,
    LiftedObservable,
    PolyObservable,
    lift_observable,
    lift_rank1_generator,
    lift_rank2_blocks,
)

__all__ = [
    "ObservableEntry",
    "ModelEntry",
    "model_free_particle",
    "model_monopole",
    "model_g_of_t_kepler",
    "model_quantum_dot",
    "model_henon_heiles",
    "model_holt",
    "model_lynden_bell",
    "model_oscillator",
    "REGISTRY",
    "ZOO",
    "get_model",
    "list_models",
    "dot_tau",
]


@dataclass(frozen=True)
class ObservableEntry:
    name: str
    obs: PolyObservable
    expected_class: str  # KILLING | CONFORMAL
    conserved: bool  # expected verdict at the model's parameters
    anchor: str
    lift_kind: str = "simple"  # simple | rank1 | block
    lift_data: dict = field(default_factory=dict, repr=False)

    def lifted(self, sys: NaturalSystem) -> LiftedObservable:
        if self.lift_kind == "rank1":
            return lift_rank1_generator(sys, name=self.name, **self.lift_data)
        if self.lift_kind == "block":
            return lift_rank2_blocks(sys, name=self.name, **self.lift_data)
        return lift_observable(self.obs, sys=sys)


@dataclass(frozen=True)
class ModelEntry:
    id: str
    system: NaturalSystem
    params: dict
    observables: dict
    initial_states: tuple
    horizon: float
    anchors: tuple
    regime: str = ""
    t_window: tuple = (-1.0, 1.0)
    extra_basis: tuple = ()
    notes: str = ""
    rel_tol: float = 1e-10  # integrator tolerance that keeps this model's test orbits accurate
    solver_checks: tuple = ()  # (rank, poly_degree, expected nullspace dimension)

    @property
    def d(self) -> int:
        return self.system.d

    def config(self, **overrides) -> IntegratorConfig:
        kw = dict(rel_tol=self.rel_tol, abs_tol=self.rel_tol * 1e-2, t_end=self.horizon)
        kw.update(overrides)
        return IntegratorConfig(**kw)


def _symbols(names, **assume):
    t = sp.Symbol("t", real=True)
    xs = sp.symbols(" ".join(names), **(assume or {"real": True}))
    if len(names) == 1:
        xs = (xs,)
    Pi = sp.symbols(" ".join(f"Pi_{n}" for n in names), real=True)
    if len(names) == 1:
        Pi = (Pi,)
    return t, tuple(xs), tuple(Pi)


def _poly(expr, t, xs, P, q=1.0, name="obs", basis=Basis.COVARIANT_PI, order=None):
    return PolyObservable.from_sympy(expr, t, xs, P, basis=basis, q=q, name=name, order=order)


def _box_valid(box, extra: Callable | None = None, slack: float = 10.0):
    """Validity: inside ``slack`` times the box half-widths around its centre, plus ``extra``."""
    box = np.asarray(box, float)
    centre = box.mean(axis=1)
    half = 0.5 * (box[:, 1] - box[:, 0]) * slack

    def valid(x):
        if np.any(np.abs(x - centre) > half):
            return False
        return True if extra is None else bool(extra(x))

    return valid


# ---------------------------------------------------------------- free particle and monopole


def _rank1_charge(Cu, C1, C0, P, h_inv_quadratic):
    """Downstairs charge ``C0 + C1·Π + ½Ĉ^u h^{-1}ΠΠ``."""
    return C0 + sum(c * p for c, p in zip(C1, P)) + Cu * h_inv_quadratic / 2


def model_free_particle(d: int = 3) -> ModelEntry:
    names = ("x", "y", "z")[:d] if d <= 3 else tuple(f"x{i + 1}" for i in range(d))
    t, xs, P = _symbols(names)
    box = [(-1.0, 1.0)] * d
    sys = NaturalSystem.from_sympy(Coords(names), t, xs, sp.eye(d), [0] * d, 0, domain_box=box,
                                   valid=_box_valid(box, slack=200.0), name="free")
    x2 = sum(x ** 2 for x in xs)
    p2 = sum(p ** 2 for p in P)
    xp = sum(x * p for x, p in zip(xs, P))
    zero = [0] * d
    obs = {}

    def add(name, Cu, C1, C0, cls, anchor):
        expr = _rank1_charge(Cu, C1, C0, P, p2)
        obs[name] = ObservableEntry(name, _poly(expr, t, xs, P, name=name), cls, True, anchor, "rank1",
                                    dict(Cu=Cu, C1=list(C1), C0=C0))

    add("E", 1, zero, 0, "KILLING", "Schrödinger charges: energy p²/2")
    add("D", t, [-x / 2 for x in xs], 0, "CONFORMAL", "Schrödinger charges: dilatation tE - x·p/2")
    add("K", t ** 2, [-t * x for x in xs], x2 / 2, "CONFORMAL", "Schrödinger charges: expansion t²E - t x·p + x²/2")
    add("M", 0, zero, 1, "KILLING", "mass generator mu")
    for i, n in enumerate(names):
        e = [0] * d
        e[i] = 1
        add(f"P_{n}", 0, e, 0, "KILLING", "translations alpha^i")
        add(f"G_{n}", 0, [t * v for v in e], -xs[i], "KILLING", "Galilei boosts t p - x, beta^i")
    if d == 3:
        for k in range(3):
            C1 = [sum(sp.LeviCivita(i, j, k) * xs[j] for j in range(3)) for i in range(3)]
            add(f"J_{names[k]}", 0, C1, 0, "KILLING", "rotations delta_k: epsilon^{ijk} x_j delta_k")
    rng = np.random.default_rng(11)
    states = tuple(PhaseState.down(0.0, rng.uniform(-0.5, 0.5, d), rng.uniform(-0.5, 0.5, d)) for _ in range(3))
    # the full algebra in d = 3, and (E, P, M) in d = 1 at degree 0
    checks = ((1, 2, 13),) if d == 3 else ((1, 0, 3),) if d == 1 else ()
    return ModelEntry("free", sys, dict(d=d), obs, states, 50.0,
                      ("Schrödinger symmetry of the free particle in flat space",), "flat", solver_checks=checks)


def monopole_potential(eg: float, patch: str = "north"):
    """Vector potential of a Dirac monopole; the north patch is regular away from the negative z axis."""
    x, y, z = sp.symbols("x y z", real=True)
    r = sp.sqrt(x ** 2 + y ** 2 + z ** 2)
    if patch == "north":
        return [-eg * y / (r * (r + z)), eg * x / (r * (r + z)), 0]
    if patch == "south":
        return [eg * y / (r * (r - z)), -eg * x / (r * (r - z)), 0]
    raise ValueError("patch must be 'north' or 'south'")


def model_monopole(eg: float = 0.5, patch: str = "north") -> ModelEntry:
    names = ("x", "y", "z")
    t, xs, P = _symbols(names)
    x, y, z = xs
    r = sp.sqrt(x ** 2 + y ** 2 + z ** 2)
    sign = 1.0 if patch == "north" else -1.0
    box = [(-1.0, 1.0), (-1.0, 1.0), (0.5 * sign, 1.5 * sign) if sign > 0 else (-1.5, -0.5)]

    def off_string(p):
        rr = np.linalg.norm(p)
        return rr > 0.05 and (rr + sign * p[2]) > 1e-3 * rr

    sys = NaturalSystem.from_sympy(Coords(names), t, xs, sp.eye(3), monopole_potential(eg, patch), 0,
                                   domain_box=box, valid=_box_valid(box, off_string, slack=20.0),
                                   name=f"monopole_{patch}")
    p2 = sum(p ** 2 for p in P)
    x2 = x ** 2 + y ** 2 + z ** 2
    zero = [0, 0, 0]
    obs = {}

    def add(name, Cu, C1, C0, cls, anchor, conserved=True):
        expr = _rank1_charge(Cu, C1, C0, P, p2)
        obs[name] = ObservableEntry(name, _poly(expr, t, xs, P, name=name), cls, conserved, anchor, "rank1",
                                    dict(Cu=Cu, C1=list(C1), C0=C0))

    add("E", 1, zero, 0, "KILLING", "monopole: energy with Π replacing p")
    add("D", t, [-v / 2 for v in xs], 0, "CONFORMAL", "monopole: dilatation with Π replacing p")
    add("K", t ** 2, [-t * v for v in xs], x2 / 2, "CONFORMAL", "monopole: expansion with Π replacing p")
    add("M", 0, zero, 1, "KILLING", "monopole: mass generator")
    for k in range(3):
        C1 = [sum(sp.LeviCivita(i, j, k) * xs[j] for j in range(3)) for i in range(3)]
        add(f"J_{names[k]}", 0, C1, -eg * xs[k] / r, "KILLING", "monopole: rotations with -eg delta·x/r")
    for i, n in enumerate(names):
        e = [0, 0, 0]
        e[i] = 1
        add(f"P_{n}", 0, e, 0, "KILLING", "monopole breaks translations", conserved=False)
        add(f"G_{n}", 0, [t * v for v in e], -xs[i], "KILLING", "monopole breaks boosts", conserved=False)
    extra = tuple(("C0", (), v / r) for v in xs)
    states = (
        PhaseState.down(0.0, [0.2, -0.1, 1.0], [0.1, 0.05, 0.0]),
        PhaseState.down(0.0, [-0.3, 0.2, 0.9], [0.0, -0.1, 0.05]),
    )
    return ModelEntry("monopole", sys, dict(eg=eg, patch=patch), obs, states, 5.0,
                      ("free particle extended by a Dirac monopole",), patch, extra_basis=extra,
                      solver_checks=((1, 2, 7),),
                      notes="N patch chosen by the caller; the Dirac string is excluded from the domain")


# ---------------------------------------------------------------- G(t) Kepler


def model_g_of_t_kepler(a: float = -20.0, b: float = -20.0, c: float = -20.0, d: float = 0.0,
                        G0: float = 1.0, M: float = 1.0) -> ModelEntry:
    """Kepler problem with ``G(t)|Ω(t)| = G0``, ``Ω(t) = -(t - c)/a``; model time t is u_*.

    Defined where Ω > 0 (for a < 0 this is t > c).  ``b`` and ``d`` only enter the
    coordinate map to the static problem.
    """
    names = ("x", "y", "z")
    t, xs, P = _symbols(names)
    X = sp.Matrix(xs)
    r = sp.sqrt(X.dot(X))
    aa, cc = sp.nsimplify(a), sp.nsimplify(c)
    Om = -(t - cc) / aa
    G = sp.nsimplify(G0) / Om
    V = -G * sp.nsimplify(M) / r
    box = [(-1.5, 1.5)] * 3

    def valid(p):
        return 0.05 < np.linalg.norm(p) < 50

    sys = NaturalSystem.from_sympy(Coords(names), t, xs, sp.eye(3), [0, 0, 0], V, domain_box=box, valid=valid,
                                   name="kepler_gt")
    Pm = sp.Matrix(P)
    L = X.cross(Pm)
    A = Om * L.cross(Pm) + L.cross(X) / aa - Om * V * X
    obs = {}
    for k, n in enumerate(names):
        W = sp.Matrix([1 if j == k else 0 for j in range(3)])
        xW = X.dot(W)
        blocks = dict(
            d0=0, d1=[0, 0, 0],
            d2=-2 * Om * xW,
            Chat=(Om * (W * X.T + X * W.T)),
            d3=list((W * X.dot(X) - X * xW) / aa),
            d4=-Om * V * xW,
        )
        obs[f"A_{n}"] = ObservableEntry(f"A_{n}", _poly(A.dot(W), t, xs, P, name=f"A_{n}"), "CONFORMAL", True,
                                        "exported Runge-Lenz vector A·W of the time-dependent Kepler problem",
                                        "block", blocks)
    for k, n in enumerate(names):
        obs[f"L_{n}"] = ObservableEntry(f"L_{n}", _poly(L[k], t, xs, P, name=f"L_{n}"), "KILLING", True,
                                        "angular momentum of the central potential")
    states = (
        PhaseState.down(0.0, [1.0, 0.0, 0.0], [0.0, 0.9, 0.1]),
        PhaseState.down(0.0, [0.0, 1.2, 0.3], [-0.7, 0.0, 0.2]),
    )
    return ModelEntry("kepler_gt", sys, dict(a=a, b=b, c=c, d=d, G0=G0, M=M), obs, states, 50.0,
                      ("time-dependent gravitational constant and its conformal map to static Kepler",),
                      "G(t)|Omega| = G0")


# ---------------------------------------------------------------- quantum dot


def dot_tau(omega0: float, omegaz: float, B: float) -> float:
    return omegaz / math.sqrt(omega0 ** 2 + B ** 2 / 4)


def model_quantum_dot(omega0: float = 1.0, omegaz: float | None = None, B: float = 0.5, a: float = -0.5,
                      tau: float | None = None) -> ModelEntry:
    """Axially symmetric dot in cylindrical coordinates (ρ, φ, z), q = 1.

    Either ``omegaz`` or ``tau`` fixes the anisotropy; default is τ = 2.
    """
    if omegaz is None:
        tau = 2.0 if tau is None else tau
        omegaz = tau * math.sqrt(omega0 ** 2 + B ** 2 / 4)
    tau_val = dot_tau(omega0, omegaz, B)
    names = ("rho", "phi", "z")
    t = sp.Symbol("t", real=True)
    rho = sp.Symbol("rho", positive=True)
    phi, z = sp.symbols("phi z", real=True)
    xs = (rho, phi, z)
    P = sp.symbols("Pi_rho Pi_phi Pi_z", real=True)
    w0, wz, Bs, As = (sp.nsimplify(v) if float(v).is_integer() else sp.Float(v) for v in (omega0, omegaz, B, a))
    h = sp.diag(1, rho ** 2, 1)
    N = [0, -Bs * rho ** 2 / 2, 0]
    Phi = (w0 ** 2 * rho ** 2 + wz ** 2 * z ** 2) / 2 - As / sp.sqrt(rho ** 2 + z ** 2)
    box = [(0.3, 1.5), (-math.pi, math.pi), (-1.0, 1.0)]

    def valid(p):
        return 0.02 < p[0] < 50 and abs(p[2]) < 50

    sys = NaturalSystem.from_sympy(Coords(names), t, xs, h, N, Phi, domain_box=box, valid=valid, name="dot")
    Pr, Pp, Pz = P
    Q1 = (z * Pr ** 2 - rho * Pr * Pz + z / rho ** 2 * Pp ** 2 + Bs * z * Pp
          - (w0 ** 2 * rho ** 2 * z + As * z / sp.sqrt(rho ** 2 + z ** 2)))
    pphi = sp.Symbol("p_phi", real=True)
    obs = {
        "Q1": ObservableEntry("Q1", _poly(Q1, t, xs, P, name="Q1"), "KILLING", abs(tau_val - 2) < 1e-12,
                              "quantum dot quadratic invariant Q1 at tau = 2"),
        "Lz": ObservableEntry("Lz", PolyObservable.from_sympy(pphi, t, xs, sp.symbols("p_rho p_phi p_z", real=True),
                                                              basis=Basis.CANONICAL_P, name="Lz"),
                              "KILLING", True, "axial symmetry: canonical angular momentum"),
    }
    states = (
        PhaseState.down(0.0, [0.8, 0.0, 0.3], [0.1, 0.4, -0.2]),
        PhaseState.down(0.0, [0.6, 1.0, -0.4], [-0.2, 0.3, 0.1]),
    )
    return ModelEntry("dot", sys, dict(omega0=omega0, omegaz=omegaz, B=B, a=a, tau=tau_val), obs, states, 50.0,
                      ("quantum dot: relative motion of two electrons", "anisotropy parameter tau"),
                      f"tau={tau_val:.6g}")


# ---------------------------------------------------------------- Hénon-Heiles

HH_REGIMES = {
    "sk": dict(omega1=1.0, omega2=1.0, alpha=1.0, beta=-1.0),
    "kdv5": dict(omega1=1.0, omega2=1.0, alpha=0.1, beta=-0.6),
    "kk": dict(omega1=1.0, omega2=1.0 / 16.0, alpha=0.1, beta=-1.6),
    "original": dict(omega1=1.0, omega2=1.0, alpha=1.0, beta=1.0),
}


def _hh_regime(omega1, omega2, alpha, beta):
    if alpha == 0:
        return "decoupled"
    ratio = beta / alpha
    if abs(ratio + 1) < 1e-12 and abs(omega1 - omega2) < 1e-12:
        return "sk"
    if abs(ratio + 6) < 1e-12:
        return "kdv5"
    if abs(ratio + 16) < 1e-12 and abs(omega1 - 16 * omega2) < 1e-12:
        return "kk"
    return "generic"


def model_henon_heiles(omega1: float = 1.0, omega2: float = 1.0, alpha: float = 0.1, beta: float = -0.6,
                       regime: str | None = None) -> ModelEntry:
    """``H = ½(p_x² + p_y² + ω1 x² + ω2 y²) + α x y² - β x³/3``; (q1, q2) are renamed (x, y)."""
    if regime is not None:
        p = HH_REGIMES[regime]
        omega1, omega2, alpha, beta = p["omega1"], p["omega2"], p["alpha"], p["beta"]
    reg = _hh_regime(omega1, omega2, alpha, beta)
    names = ("x", "y")
    t, xs, P = _symbols(names)
    x, y = xs
    w1, w2, al, be = (sp.nsimplify(v) for v in (omega1, omega2, alpha, beta))
    V = (w1 * x ** 2 + w2 * y ** 2) / 2 + al * x * y ** 2 - be * x ** 3 / 3
    box = [(-0.5, 0.5), (-0.5, 0.5)]
    sys = NaturalSystem.from_sympy(Coords(names), t, xs, sp.eye(2), [0, 0], V, domain_box=box,
                                   valid=_box_valid(box, slack=20.0), name="hh")
    # upstairs forms evaluated at p̂_v = 1 and p̂_i = -p_i (every term has even momentum degree)
    p1, p2 = P
    K1 = (3 * p1 * p2 + al * y * (3 * x ** 2 + y ** 2) + 3 * w2 * x * y) ** 2
    K2 = (4 * al * p2 * (y * p1 - x * p2) + (4 * w2 - w1) * (p2 ** 2 + w2 * y ** 2)
          + al ** 2 * y ** 2 * (4 * x ** 2 + y ** 2) + 4 * al * x * w2 * y ** 2)
    K3 = ((3 * p2 ** 2 + 3 * w2 * y ** 2) ** 2 + 12 * al * p2 * y ** 2 * (3 * x * p2 - y * p1)
          + (-2 * al ** 2 * y ** 4 * (6 * x ** 2 + y ** 2) - 12 * al * x * w2 * y ** 4))
    H = (p1 ** 2 + p2 ** 2) / 2 + V
    obs = {
        "H": ObservableEntry("H", _poly(H, t, xs, P, name="H"), "KILLING", True, "cubic galactic Hamiltonian"),
        "K1": ObservableEntry("K1", _poly(K1, t, xs, P, name="K1", order=4), "KILLING", reg == "sk",
                              "Sawada-Kotera case invariant K^(i)"),
        "K2": ObservableEntry("K2", _poly(K2, t, xs, P, name="K2"), "KILLING", reg == "kdv5",
                              "KdV5 case invariant K^(ii)"),
        "K3": ObservableEntry("K3", _poly(K3, t, xs, P, name="K3"), "KILLING", reg == "kk",
                              "Kaup-Kupershmidt case invariant K^(iii)"),
    }
    if reg == "generic" or reg == "decoupled":
        states = (PhaseState.down(0.0, [0.0, 0.1], [0.49, 0.0]),)  # E ≈ 0.125: chaotic sea of the original HH
    else:
        states = (PhaseState.down(0.0, [0.1, 0.1], [0.1, 0.1]), PhaseState.down(0.0, [-0.1, 0.2], [0.15, -0.05]))
    return ModelEntry(f"hh_{regime or reg}", sys, dict(omega1=omega1, omega2=omega2, alpha=alpha, beta=beta), obs,
                      states, 100.0, ("Hénon-Heiles cubic potential", "three Liouville-integrable cases"), reg)


# ---------------------------------------------------------------- Holt

HOLT_STATES = {
    1: (PhaseState.down(0.0, [1.282, 1.606], [0.45, -1.794]), PhaseState.down(0.0, [0.788, -1.357], [0.246, 0.734])),
    6: (PhaseState.down(0.0, [0.433, 1.736], [0.376, -1.046]), PhaseState.down(0.0, [1.403, -1.522], [-0.001, -0.947])),
    16: (PhaseState.down(0.0, [0.887, -4.29], [0.18, 2.236]), PhaseState.down(0.0, [1.895, 5.888], [0.27, -5.492])),
}


def model_holt(mu: float = 6.0) -> ModelEntry:
    """``H = ½(p_x² + p_y²) + (3/4)μ x^{4/3} + y² x^{-2/3}`` on x > 0."""
    names = ("x", "y")
    t = sp.Symbol("t", real=True)
    x = sp.Symbol("x", positive=True)
    y = sp.Symbol("y", real=True)
    xs = (x, y)
    P = sp.symbols("Pi_x Pi_y", real=True)
    mus = sp.nsimplify(mu)
    r = sp.Rational
    V = r(3, 4) * mus * x ** r(4, 3) + y ** 2 * x ** r(-2, 3)
    box = [(0.1, 1.5), (-1.0, 1.0)]

    def valid(p):
        return 1e-4 < p[0] < 100 and abs(p[1]) < 100

    sys = NaturalSystem.from_sympy(Coords(names), t, xs, sp.eye(2), [0, 0], V, domain_box=box, valid=valid,
                                   name="holt")
    px, py = sp.symbols("phat_x phat_y", real=True)
    pv = sp.Symbol("phat_v", real=True)
    upstairs = {
        1: (py ** 3 + r(3, 2) * py * px ** 2 + (-r(9, 2) * x ** r(4, 3) + 3 * x ** r(-2, 3) * y ** 2) * py * pv ** 2
            + 9 * x ** r(1, 3) * y * px * pv ** 2),
        6: (py ** 4 + 2 * py ** 2 * px ** 2 + 4 * x ** r(-2, 3) * y ** 2 * py ** 2 * pv ** 2
            + 24 * x ** r(1, 3) * y * py * px * pv ** 2 + 72 * x ** r(2, 3) * y ** 2 * pv ** 4),
        16: (py ** 6 + 3 * py ** 4 * px ** 2 + (18 * x ** r(4, 3) + 6 * x ** r(-2, 3) * y ** 2) * py ** 4 * pv ** 2
             + 72 * x ** r(1, 3) * y * py ** 3 * px * pv ** 2 + 648 * x ** r(2, 3) * y ** 2 * py ** 2 * pv ** 4
             + 648 * y ** 4 * pv ** 6),
    }
    Px, Py = P
    obs = {"H": ObservableEntry("H", _poly((Px ** 2 + Py ** 2) / 2 + V, t, xs, P, name="H"), "KILLING", True,
                                "Holt Hamiltonian")}
    for m_, C in upstairs.items():
        down = C.subs({px: -Px, py: -Py, pv: 1}, simultaneous=True)
        order = {1: 3, 6: 4, 16: 6}[m_]
        obs[f"C{m_}"] = ObservableEntry(f"C{m_}", _poly(down, t, xs, P, name=f"C{m_}", order=order), "KILLING",
                                        abs(mu - m_) < 1e-12, f"Holt invariant of order {order} (mu = {m_})")
    states = HOLT_STATES.get(int(mu) if float(mu).is_integer() else -1, HOLT_STATES[6])
    return ModelEntry(f"holt_{mu:g}", sys, dict(mu=mu), obs, states, 50.0,
                      ("Holt potential, integrable for mu = 1, 6, 16",), f"mu={mu:g}",
                      notes="fractional powers restrict the domain to x > 0",
                      rel_tol=1e-10 if mu == 1 else 1e-12)  # mu = 6, 16 orbits graze x = 0


# ---------------------------------------------------------------- Lynden-Bell pair, oscillator


def model_lynden_bell(b: float = 0.7, omega: float = 1.0) -> ModelEntry:
    """Starred system with ``B_* = b ẑ/(ω t)²`` and ``E_* = -(1/t) x × B_*`` (Φ_* = 0).

    Realised by ``N_* = -½β(t)(-y, x, 0)`` with β = b/(ωt)²; defined for t > 0.
    """
    names = ("x", "y", "z")
    t, xs, P = _symbols(names)
    x, y, z = xs
    beta = sp.nsimplify(b) / (sp.nsimplify(omega) * t) ** 2
    N = [beta * y / 2, -beta * x / 2, 0]
    box = [(-1.0, 1.0)] * 3
    sys = NaturalSystem.from_sympy(Coords(names), t, xs, sp.eye(3), N, 0, domain_box=box,
                                   valid=_box_valid(box, slack=200.0), name="lynden_bell")
    states = (PhaseState.down(1.0, [0.3, 0.1, 0.2], [0.2, -0.1, 0.3]),
              PhaseState.down(1.0, [-0.2, 0.4, 0.0], [0.1, 0.2, -0.1]))
    return ModelEntry("lynden_bell", sys, dict(b=b, omega=omega), {}, states, 50.0,
                      ("Lynden-Bell transformation of the Lorentz force",), "t > 0", t_window=(0.5, 2.0))


def model_oscillator(d: int = 1, omega: float = 1.0) -> ModelEntry:
    names = ("x", "y", "z")[:d]
    t, xs, P = _symbols(names)
    w = sp.nsimplify(omega)
    V = w ** 2 * sum(v ** 2 for v in xs) / 2
    box = [(-1.0, 1.0)] * d
    sys = NaturalSystem.from_sympy(Coords(names), t, xs, sp.eye(d), [0] * d, V, domain_box=box,
                                   valid=_box_valid(box, slack=100.0), name="oscillator")
    H = sum(p ** 2 for p in P) / 2 + V
    obs = {"H": ObservableEntry("H", _poly(H, t, xs, P, name="H"), "KILLING", True, "harmonic oscillator energy")}
    return ModelEntry("oscillator", sys, dict(d=d, omega=omega), obs,
                      (PhaseState.down(0.0, [1.0] + [0.0] * (d - 1), [0.0] * d),), 2 * math.pi,
                      ("harmonic oscillator (test helper)",), "static")


# ---------------------------------------------------------------- registry

REGISTRY: dict[str, Callable[..., ModelEntry]] = {
    "free": model_free_particle,
    "monopole": model_monopole,
    "kepler_gt": model_g_of_t_kepler,
    "dot": model_quantum_dot,
    "hh": model_henon_heiles,
    "hh_sk": lambda **kw: model_henon_heiles(regime="sk", **kw),
    "hh_kdv5": lambda **kw: model_henon_heiles(regime="kdv5", **kw),
    "hh_kk": lambda **kw: model_henon_heiles(regime="kk", **kw),
    "hh_original": lambda **kw: model_henon_heiles(regime="original", **kw),
    "holt": model_holt,
    "holt_1": lambda **kw: model_holt(mu=1, **kw),
    "holt_6": lambda **kw: model_holt(mu=6, **kw),
    "holt_16": lambda **kw: model_holt(mu=16, **kw),
    "lynden_bell": model_lynden_bell,
    "oscillator": model_oscillator,
}

# the model zoo proper (the oscillator is a test helper)
ZOO = ("free", "monopole", "kepler_gt", "dot", "hh_sk", "hh_kdv5", "hh_kk", "hh_original", "holt_1", "holt_6",
       "holt_16", "lynden_bell")

_CACHE: dict = {}


def get_model(model_id: str, **params) -> ModelEntry:
    """Build (and cache) a registry entry; unknown ids raise KeyError."""
    if model_id not in REGISTRY:
        raise KeyError(f"unknown model {model_id!r}; known: {', '.join(sorted(REGISTRY))}")
    key = (model_id, tuple(sorted(params.items())))
    if key not in _CACHE:
        _CACHE[key] = REGISTRY[model_id](**params)
    return _CACHE[key]


def list_models() -> list[dict]:
    out = []
    for mid in REGISTRY:
        m = get_model(mid)
        out.append(dict(id=mid, d=m.d, regime=m.regime, anchors=list(m.anchors),
                        observables=sorted(m.observables), horizon=m.horizon))
    return out

import math

import numpy as np
import pytest
import sympy as sp

from elift.conformal_maps import (
    SingularMapError,
    TimeMap,
    UndefinedInvariantError,
    boost_square_invariant,
    inverse_transform_state,
    schwarzian,
    transform_state,
    verify_bargmann_conformal,
    verify_solution_map,
    verify_vlb_conformal,
    vlb_transform,
)
from elift.dynamics import IntegratorConfig, flow_down
from elift.lift import PhaseState
from elift.models import get_model


def test_schwarzian_of_square():
    # {t², t} = -3/(2t²)
    assert schwarzian(TimeMap.power(2), 1.0) == pytest.approx(-1.5, rel=1e-12)
    assert schwarzian(TimeMap.power(2), 2.0) == pytest.approx(-3 / 8, rel=1e-12)


def test_schwarzian_vanishes_for_fractional_linear(rng):
    worst = 0.0
    for _ in range(200):
        A, B, C, D = rng.normal(size=4)
        m = TimeMap.fractional_linear(A, B, C, D)
        t = rng.uniform(-3, 3)
        if abs(C * t + D) < 0.05:
            continue
        worst = max(worst, abs(schwarzian(m, t)))
    assert worst < 1e-10


def test_singular_maps_rejected():
    with pytest.raises(SingularMapError):
        TimeMap.fractional_linear(1, 2, 2, 4)
    m = TimeMap.fractional_linear(0, 1, 1, 0)
    with pytest.raises(SingularMapError):
        m(0.0)


def test_compose_and_inverse():
    f = TimeMap.fractional_linear(2, 1, 1, 3)
    g = TimeMap.fractional_linear(1, -1, 0.5, 2)
    h = f.compose(g)
    t = 0.37
    assert h(t) == pytest.approx(f(g(t)), rel=1e-14)
    assert h.inverse(h(t)) == pytest.approx(t, rel=1e-12)
    assert abs(schwarzian(h, t)) < 1e-12
    # chain rule against sympy
    s = sp.Symbol("t")
    e = (2 * (s - 1) / (0.5 * s + 2) + 1) / ((s - 1) / (0.5 * s + 2) + 3)
    for k in range(1, 4):
        assert h.d(t)[k] == pytest.approx(float(sp.diff(e, s, k).subs(s, t)), rel=1e-10)


def test_general_map_inverse_by_root_finding():
    m = TimeMap.from_callable(lambda t: t ** 3 + t, (-2.0, 2.0))
    assert m.low_accuracy
    assert m.inverse(m(0.7)) == pytest.approx(0.7, abs=1e-12)
    assert schwarzian(m, 0.7) == pytest.approx(schwarzian(TimeMap.from_sympy(sp.Symbol("t") ** 3 + sp.Symbol("t"),
                                                                              sp.Symbol("t")), 0.7), abs=1e-5)


def test_state_transform_round_trip():
    for m in (TimeMap.lynden_bell(1.3), TimeMap.fractional_linear(-1, 3, 0, 1), TimeMap.power(2)):
        t, x, v = 0.8, np.array([0.1, -0.3, 0.2]), np.array([0.4, 0.0, -0.5])
        ts, xs, vs = transform_state(m, t, x, v)
        back = inverse_transform_state(m, ts, xs, vs)
        assert back[0] == pytest.approx(t)
        assert np.allclose(back[1], x) and np.allclose(back[2], v)


@pytest.fixture(scope="module")
def lb_traj():
    m = get_model("lynden_bell")
    return m, flow_down(m.system, m.initial_states[0], IntegratorConfig(t_end=10.0))


def test_lynden_bell_solution_map(lb_traj):
    m, tr = lb_traj
    fmap = TimeMap.lynden_bell(m.params["omega"])
    assert verify_solution_map(fmap, m.system, tr).max_residual < 1e-7
    assert verify_bargmann_conformal(fmap, m.system, [[0.7, 0.2, -0.1, 0.3], [1.6, -0.5, 0.4, 0.1]]) < 1e-9


def test_boost_square_invariant_conserved(lb_traj):
    m, tr = lb_traj
    _, dr = boost_square_invariant(TimeMap.lynden_bell(m.params["omega"]), tr, m.system)
    assert dr < 1e-7
    with pytest.raises(UndefinedInvariantError):
        boost_square_invariant(TimeMap.fractional_linear(2, 1, 0, 1), tr, m.system)


def test_orientation_reversing_maps(lb_traj):
    m, tr = lb_traj
    fmap = TimeMap.fractional_linear(-1.0, 12.0, 0.0, 1.0)  # f' = -1 < 0
    assert fmap.d(1.0)[1] < 0
    assert verify_solution_map(fmap, m.system, tr).max_residual < 1e-7
    rev = TimeMap.fractional_linear(-2.0, 1.0, 0.5, 1.0)
    assert rev.d(0.3)[1] < 0
    pts = np.array([[0.2, 0.1, 0.2, -0.3], [0.9, -0.4, 0.3, 0.2]])
    assert verify_bargmann_conformal(rev, m.system, pts) < 1e-9
    # t = 0.5 is mapped onto the singular t_* = 0 of the starred fields
    with np.errstate(all="ignore"):
        assert math.isnan(verify_bargmann_conformal(rev, m.system, [[0.5, 0.1, 0.1, 0.1]]))


def test_schwarzian_term_is_needed(lb_traj):
    m, tr = lb_traj
    fmap = TimeMap.power(2, interval=(0.1, 10.0))
    with_term = verify_solution_map(fmap, m.system, tr)
    without = verify_solution_map(fmap, m.system, tr, include_schwarzian=False)
    assert with_term.max_residual < 1e-7
    assert without.max_residual > 1e-2
    pts = np.array([[1.2, 0.3, -0.2, 0.1], [2.0, 0.1, 0.1, 0.5]])
    assert verify_bargmann_conformal(fmap, m.system, pts) < 1e-9


def test_vlb_map_is_conformal(rng):
    pts = np.column_stack([rng.uniform(-1, 1, 10), rng.uniform(-1.5, 1.5, (10, 3))])
    assert verify_vlb_conformal(-20, -20, -20, 0, 1, 1, pts) < 1e-9
    us, vs, xs = vlb_transform(-20, -20, -20, 0, 0.0, 0.0, [1.0, 0.0, 0.0])
    assert us == pytest.approx(0.0) and xs[0] == pytest.approx(1.0)
    with pytest.raises(SingularMapError):
        vlb_transform(-20, -20, -20, 0, 20.0, 0.0, [1.0, 0, 0])

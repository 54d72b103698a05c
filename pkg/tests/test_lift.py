import warnings

import numpy as np
import pytest
import sympy as sp

from elift.lift import (
    Form,
    PhaseState,
    SignatureDegeneracyError,
    covariant_momentum,
    field_strength,
    gauge_transform,
    hamiltonian_d1,
    hamiltonian_down,
    hamiltonian_up,
    lift_state,
    metric_d1,
    project_state,
    sample_point,
)

from conftest import symbolic_system


def test_lift_is_null_and_projects_back(wavy_system, rng):
    for _ in range(10):
        down = PhaseState.down(rng.uniform(-1, 1), rng.uniform(-0.5, 0.5, 2), rng.normal(size=2))
        up = lift_state(wavy_system, down)
        assert up.form is Form.UP
        assert abs(hamiltonian_up(wavy_system, up)) < 1e-13
        assert up.pv == wavy_system.q
        back = project_state(wavy_system, up)
        assert back.t == pytest.approx(down.t)
        assert np.allclose(back.x, down.x) and np.allclose(back.p, down.p)


def test_upstairs_hamiltonian_reduces_to_downstairs(wavy_system, rng):
    # 𝓗 = p̂_u p̂_v + Φ p̂_v² + ½ h⁻¹Π̂Π̂ with p̂_v = q, p̂ = -p gives q p̂_u + H
    down = PhaseState.down(0.2, [0.1, -0.3], [0.4, 0.2])
    H = hamiltonian_down(wavy_system, down)
    up = lift_state(wavy_system, down)
    shifted = PhaseState.up(up.u, up.v, up.x, up.pu + 0.25, up.pv, up.p)
    assert hamiltonian_up(wavy_system, shifted) == pytest.approx(wavy_system.q * 0.25)
    assert up.pu == pytest.approx(-H / wavy_system.q)


def test_covariant_momentum_sign_conventions(wavy_system):
    down = PhaseState.down(0.1, [0.2, 0.3], [1.0, -1.0])
    up = lift_state(wavy_system, down)
    assert np.allclose(covariant_momentum(wavy_system, up), -covariant_momentum(wavy_system, down))


def test_lift_rejects_wrong_forms(wavy_system):
    down = PhaseState.down(0.0, [0.0, 0.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        project_state(wavy_system, down)
    with pytest.raises(ValueError):
        lift_state(wavy_system, lift_state(wavy_system, down))
    with pytest.raises(ValueError):
        hamiltonian_up(wavy_system, down)


def test_gauge_transform_leaves_dynamics_invariant(wavy_system):
    t, x, y = wavy_system.symbolic.t, *wavy_system.symbolic.xs
    lam = x * y * sp.sin(t) + x ** 3 / 5
    g = gauge_transform(wavy_system, lam)
    F0, Ft0 = field_strength(wavy_system, 0.3, np.array([0.2, 0.1]))
    F1, Ft1 = field_strength(g, 0.3, np.array([0.2, 0.1]))
    assert np.allclose(F0, F1) and np.allclose(Ft0, Ft1)
    # canonical momenta shift by the gauge gradient, covariant ones do not
    lam_f = sp.lambdify((t, x, y), [sp.diff(lam, v) for v in (x, y)])
    s = PhaseState.down(0.3, [0.2, 0.1], [0.5, -0.4])
    s2 = PhaseState.down(0.3, [0.2, 0.1], s.p + wavy_system.q * np.array(lam_f(0.3, 0.2, 0.1)))
    assert np.allclose(covariant_momentum(wavy_system, s), covariant_momentum(g, s2))


def test_gauge_transform_with_jet_matches_symbolic(wavy_system):
    from elift.geometry import make_jet_symbolic

    s = wavy_system.symbolic
    lam = s.xs[0] ** 2 * s.t / 3
    g_sym = gauge_transform(wavy_system, lam)
    g_jet = gauge_transform(wavy_system, make_jet_symbolic(0, lam, s.t, s.xs))
    x = np.array([0.3, -0.2])
    assert np.allclose(g_sym.N.eval(0.4, x), g_jet.N.eval(0.4, x))
    assert np.allclose(g_sym.Phi.grad(0.4, x), g_jet.Phi.grad(0.4, x), atol=1e-7)


def test_field_strength_warns_without_split():
    sys = symbolic_system(("x", "y"), N=["-y*t/2", "x/2"], Phi="x**2")
    with pytest.warns(UserWarning):
        F, Ft = field_strength(sys, 1.0, np.array([0.1, 0.2]))
    assert F[0, 1] == pytest.approx(-F[1, 0])
    assert F[0, 1] == pytest.approx(0.5 + 0.5)  # ∂_x N_y - ∂_y N_x = 1/2 + t/2 at t=1
    assert np.allclose(Ft, [-0.2 / 2, 0.0])


def test_metric_d1_reproduces_downstairs_hamiltonian(rng):
    sys = symbolic_system(("x", "y"), h=[["1 + x**2", "0"], ["0", "1"]], N=["-y/2", "x/2"],
                          Phi="1 + x**2 + y**2/2", q=1.3)
    for _ in range(10):
        x = rng.uniform(-0.7, 0.7, 2)
        p = rng.normal(size=2)
        g = metric_d1(sys, x)
        pt = np.concatenate([-p, [sys.q]])
        H_geo = 0.5 * pt @ np.linalg.inv(g) @ pt
        H = hamiltonian_down(sys, PhaseState.down(0.0, x, p))
        assert H_geo == pytest.approx(H, abs=1e-12)
        assert hamiltonian_d1(sys, x, -p, sys.q) == pytest.approx(H, abs=1e-12)


def test_metric_d1_rejects_zero_potential_and_time_dependence():
    sys = symbolic_system(("x",), Phi="x**2")
    with pytest.raises(SignatureDegeneracyError):
        metric_d1(sys, np.array([0.0]))
    tdep = symbolic_system(("x",), Phi="1 + t*x**2")
    with pytest.raises(ValueError):
        metric_d1(tdep, np.array([0.5]))


def test_potential_split_defaults_and_static_detection(wavy_system):
    sys = symbolic_system(("x",), Phi="x**2")
    p1, p2, defaulted = sys.potential_split()
    assert defaulted and p1.eval(0.0, np.array([0.3])) == 0
    _, _, defaulted = wavy_system.potential_split()
    assert not defaulted
    assert sys.is_static() and not wavy_system.is_static()


def test_sample_point_stays_in_shrunk_box(wavy_system, rng):
    pts = np.array([sample_point(wavy_system, rng) for _ in range(200)])
    assert np.all(np.abs(pts) <= 0.8 * 0.9 + 1e-12)


def test_zero_charge_rejected():
    with pytest.raises(ValueError):
        symbolic_system(("x",), q=0.0)

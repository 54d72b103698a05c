import io

import numpy as np
import pytest

from elift.dynamics import (
    DomainExitError,
    IntegratorConfig,
    Scheme,
    StepUnderflowError,
    flow_down,
    flow_up,
    project_equivalence,
    rhs_down,
    rhs_up,
)
from elift.lift import NaturalSystem, PhaseState, hamiltonian_down, lift_state

from conftest import symbolic_system


@pytest.fixture
def osc():
    return symbolic_system(("x",), Phi="x**2/2", box=[(-2, 2)])


def test_oscillator_matches_closed_form_down(osc):
    tr = flow_down(osc, PhaseState.down(0.0, [1.0], [0.0]), IntegratorConfig(t_end=2 * np.pi))
    t = tr.param
    assert np.max(np.abs(tr.y[:, 0] - np.cos(t))) < 1e-9
    assert np.max(np.abs(tr.y[:, 1] + np.sin(t))) < 1e-9


def test_oscillator_matches_closed_form_up(osc):
    up0 = lift_state(osc, PhaseState.down(0.0, [1.0], [0.0]))
    tr = flow_up(osc, up0, IntegratorConfig(t_end=2 * np.pi))
    t = -tr.param  # λ runs backwards
    assert np.max(np.abs(tr.y[:, 0] - np.cos(t))) < 1e-9
    assert np.max(np.abs(tr.constraint)) < 1e-10
    # u = -q t
    assert np.allclose(tr.y[:, 1], -t)


def test_fast_and_generic_rhs_agree(wavy_system, rng):
    from elift.dynamics import _pack_up, _rhs_pair

    f_fast, g_fast = _rhs_pair(wavy_system, True)
    for _ in range(5):
        down = PhaseState.down(rng.uniform(-1, 1), rng.uniform(-0.5, 0.5, 2), rng.normal(size=2))
        y = np.concatenate([down.x, down.p])
        assert np.allclose(g_fast(down.t, y), rhs_down(wavy_system, down.t, y), atol=1e-12)
        yu = _pack_up(lift_state(wavy_system, down))
        assert np.allclose(f_fast(yu), rhs_up(wavy_system, yu), atol=1e-12)


def test_projection_equivalence_time_dependent(wavy_system):
    rep = project_equivalence(wavy_system, PhaseState.down(0.1, [0.2, -0.1], [0.3, 0.2]),
                              IntegratorConfig(t_end=5.0))
    assert rep.discrepancy < 1e-8
    assert rep.passed


def test_energy_conserved_static(rng):
    sys = symbolic_system(("x", "y"), h=[["1 + x**2/2", "0"], ["0", "1"]], N=["-y/2", "x/2"],
                          Phi="x**2 + y**2/2", box=[(-1, 1), (-1, 1)])
    s0 = PhaseState.down(0.0, [0.3, 0.1], [0.2, -0.4])
    tr = flow_down(sys, s0, IntegratorConfig(t_end=20))
    E = [hamiltonian_down(sys, tr.state(k)) for k in range(len(tr))]
    assert np.ptp(E) < 1e-9


def test_verlet_is_second_order(osc):
    s0 = PhaseState.down(0.0, [1.0], [0.0])
    errs = []
    for h in (0.1, 0.05, 0.025):
        tr = flow_down(osc, s0, IntegratorConfig(scheme=Scheme.FIXED_STORMER_VERLET, max_step=h, t_end=1.0))
        errs.append(abs(tr.y[-1, 0] - np.cos(1.0)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - 2) < 0.1)


def test_verlet_up_matches_down(osc):
    s0 = PhaseState.down(0.0, [0.5], [0.3])
    cfg = IntegratorConfig(scheme=Scheme.FIXED_STORMER_VERLET, max_step=0.01, t_end=3.0)
    d = flow_down(osc, s0, cfg)
    u = flow_up(osc, lift_state(osc, s0), cfg)
    assert np.allclose(u.y[:, 0], d.y[:, 0], atol=1e-12)
    assert np.allclose(-u.y[:, 3], d.y[:, 1], atol=1e-12)


def test_verlet_needs_separable_system(wavy_system):
    cfg = IntegratorConfig(scheme=Scheme.FIXED_STORMER_VERLET, max_step=0.1, t_end=1.0)
    with pytest.raises(ValueError):
        flow_down(wavy_system, PhaseState.down(0, [0.1, 0.1], [0, 0]), cfg)
    with pytest.raises(ValueError):
        IntegratorConfig(scheme=Scheme.FIXED_STORMER_VERLET)


def test_non_null_initial_state_rejected(osc):
    up = lift_state(osc, PhaseState.down(0.0, [1.0], [0.0]))
    bad = PhaseState.up(up.u, up.v, up.x, up.pu + 0.1, up.pv, up.p)
    with pytest.raises(ValueError):
        flow_up(osc, bad, IntegratorConfig(t_end=1.0))


def test_domain_exit_carries_partial_trajectory():
    base = symbolic_system(("x",), Phi="0")
    sys = NaturalSystem(base.coords, base.h, base.N, base.Phi, valid=lambda x: x[0] < 1.0,
                        symbolic=base.symbolic, domain_box=((-1, 1),))
    with pytest.raises(DomainExitError) as ei:
        flow_down(sys, PhaseState.down(0.0, [0.0], [1.0]), IntegratorConfig(t_end=5.0))
    part = ei.value.partial
    assert part is not None
    # the last stored step is the first one found outside, all earlier ones are inside
    assert part.y[-1, 0] >= 1.0
    assert np.all(part.y[:-1, 0] < 1.0)


def test_step_underflow_on_blowup():
    sys = symbolic_system(("x",), Phi="-x**4", box=[(-10, 10)])
    with pytest.raises(StepUnderflowError):
        flow_down(sys, PhaseState.down(0.0, [1.0], [2.0]), IntegratorConfig(t_end=10.0, min_step=1e-6))


def test_csv_format(osc):
    tr = flow_up(osc, lift_state(osc, PhaseState.down(0.0, [1.0], [0.0])), IntegratorConfig(t_end=0.5))
    buf = io.StringIO()
    tr.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "param,x,u,v,p_x,p_u,p_v,constraint,step,err"
    assert len(lines) == len(tr) + 1
    row = [float(v) for v in lines[1].split(",")]
    assert row[1] == 1.0
    # round-trip precision
    assert all(float(v) == val for v, val in zip(lines[-1].split(",")[1:3], tr.y[-1, :2]))


def test_interpolant_is_accurate(osc):
    tr = flow_down(osc, PhaseState.down(0.0, [1.0], [0.0]), IntegratorConfig(t_end=3.0))
    f = tr.interpolant()
    ts = np.linspace(0, 3, 301)
    assert np.max(np.abs(f(ts)[:, 0] - np.cos(ts))) < 1e-6


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0)
    with pytest.raises(ValueError):
        IntegratorConfig(min_step=1.0, max_step=0.5)

import json

import numpy as np
import pytest

from elift.dynamics import flow_down
from elift.modelfile import ModelFileError, load_model_file, model_from_dict, time_map_from_dict
from elift.observables import drift

ANISO = {
    "name": "aniso",
    "coords": ["x", "y"],
    "constants": {"w": 2.0},
    "Phi": "(x**2 + w**2*y**2)/2",
    "domain_box": [[-1, 1], [-1, 1]],
    "observables": {
        "Hx": {"ranks": {"0": "x**2/2", "2": [["1", "0"], ["0", "0"]]}},
        "Lz": {"expr": "x*Pi_y - y*Pi_x", "conserved": False},
    },
    "initial_states": [{"t": 0, "x": [0.3, 0.1], "p": [0.0, 0.2]}],
    "horizon": 20,
}


def test_custom_model_round_trip(tmp_path):
    f = tmp_path / "m.json"
    f.write_text(json.dumps(ANISO))
    m = load_model_file(f)
    assert m.id == "aniso" and m.d == 2
    tr = flow_down(m.system, m.initial_states[0], m.config())
    assert drift(m.observables["Hx"].obs, tr, m.system).max_abs < 1e-10
    assert drift(m.observables["Lz"].obs, tr, m.system).max_abs > 1e-3


def test_rank_form_equals_expression_form():
    a = model_from_dict(ANISO)
    spec = dict(ANISO, observables={"Hx": {"expr": "Pi_x**2/2 + x**2/2"}})
    b = model_from_dict(spec)
    from elift.lift import PhaseState
    from elift.observables import eval_down

    s = PhaseState.down(0.1, [0.2, -0.3], [0.4, 0.5])
    assert eval_down(a.observables["Hx"].obs, a.system, s) == pytest.approx(
        eval_down(b.observables["Hx"].obs, b.system, s))


def test_zoo_reference_with_states():
    m = model_from_dict({"zoo": "hh", "params": {"alpha": 1.0, "beta": -6.0},
                         "initial_states": [{"x": [0.01, 0.02], "p": [0.0, 0.01]}]})
    assert m.regime == "kdv5"
    assert len(m.initial_states) == 1
    assert np.allclose(m.initial_states[0].x, [0.01, 0.02])


@pytest.mark.parametrize("bad", [
    {"zoo": "nonexistent"},
    {"coords": []},
    {"coords": ["x"], "h": [["1", "0"], ["0", "1"]]},
    {"coords": ["x"], "N": ["0", "0"]},
    {"coords": ["x"], "Phi": "x**"},
    {"coords": ["x"], "observables": {"A": {}}},
    {"coords": ["x", "y"], "observables": {"A": {"ranks": {"2": [["1"]]}}}},
    {"coords": ["x"], "initial_states": [{"x": [0.0]}]},
])
def test_bad_specs_raise(bad):
    with pytest.raises(ModelFileError):
        model_from_dict(bad)


def test_unreadable_file(tmp_path):
    with pytest.raises(ModelFileError):
        load_model_file(tmp_path / "missing.json")
    f = tmp_path / "broken.json"
    f.write_text("{not json")
    with pytest.raises(ModelFileError):
        load_model_file(f)


def test_time_maps_from_dict():
    assert time_map_from_dict({"kind": "fractional_linear", "A": 2, "B": 0, "C": 0, "D": 1})(1.5) == 3.0
    assert time_map_from_dict({"kind": "lynden_bell", "omega": 2.0})(0.5) == pytest.approx(0.5)
    assert time_map_from_dict({"kind": "power", "n": 3})(2.0) == pytest.approx(8.0)
    assert time_map_from_dict({"kind": "expr", "expr": "t + t**3"})(1.0) == pytest.approx(2.0)
    assert time_map_from_dict({"kind": "identity"})(0.3) == 0.3
    with pytest.raises(ModelFileError):
        time_map_from_dict({"kind": "spiral"})

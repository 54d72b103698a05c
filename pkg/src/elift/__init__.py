"""Eisenhart-Duval lift of natural Hamiltonian systems: geometry, dynamics, observables,
(conformal) Killing tensor search and conformal time maps."""
import os as _os

# ELIFT_THREADS caps BLAS threading; it must be applied before numpy loads.
if _os.environ.get("ELIFT_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _os.environ["ELIFT_THREADS"])

from .geometry import Coords, JetField, christoffel_base, christoffel_lifted  # noqa: E402
from .lift import NaturalSystem, PhaseState, lift_state, project_state  # noqa: E402
from .dynamics import IntegratorConfig, flow_down, flow_up, project_equivalence  # noqa: E402
from .observables import PolyObservable, LiftedObservable, lift_observable, poisson_down, poisson_up  # noqa: E402
from .killing import AnsatzSpace, solve_ansatz  # noqa: E402
from .conformal_maps import TimeMap, schwarzian  # noqa: E402
from .models import get_model, list_models  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "Coords", "JetField", "christoffel_base", "christoffel_lifted",
    "NaturalSystem", "PhaseState", "lift_state", "project_state",
    "IntegratorConfig", "flow_down", "flow_up", "project_equivalence",
    "PolyObservable", "LiftedObservable", "lift_observable", "poisson_down", "poisson_up",
    "AnsatzSpace", "solve_ansatz", "TimeMap", "schwarzian", "get_model", "list_models",
]

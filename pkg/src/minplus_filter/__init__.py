"""Min-plus deterministic filtering with optimal per-step sensor selection."""
from .errors import *  # noqa: F401,F403
from .quad import QuadraticForm, add, dominates, evaluate, min_value, residual_quadratic, vertex
from .value import (
    EstimateReport,
    MinPlusValueFunction,
    PruneConfig,
    candidate_minima,
    evaluate_min,
    global_argmin,
    init_value,
    prune,
)
from .propagation import (
    ForwardSystem,
    MeasurementFrame,
    ReversedSystem,
    active_sensor_of,
    dp_step,
    eliminate_disturbance,
    optimal_disturbance,
    reverse_dynamics,
)
from .sensors import SensorModel, SensorSuite
from .filter import FilterState, estimates, new_filter, run, run_with_state, step
from .config import ScenarioConfig, load_scenario, scenario_from_dict
from .simulator import MeasurementTrace, open_loop_prior, simulate

__version__ = "0.1.0"

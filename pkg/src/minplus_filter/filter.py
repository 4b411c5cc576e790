"""Online estimator built on the min-plus value function recursion."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import SequencingError
from .propagation import (
    ForwardSystem,
    MeasurementFrame,
    ReversedSystem,
    active_sensor_of,
    dp_step,
    reverse_dynamics,
)
from .sensors import SensorSuite
from .value import EstimateReport, MinPlusValueFunction, PruneConfig, global_argmin, init_value, prune


@dataclass(frozen=True)
class FilterState:
    V: MinPlusValueFunction
    sys: ReversedSystem
    sensors: SensorSuite
    prune_config: PruneConfig = PruneConfig()

    @property
    def k(self) -> int:
        return self.V.k


def new_filter(
    fwd: ForwardSystem,
    sensors: SensorSuite,
    L,
    x0_assumed,
    prune_config: PruneConfig = PruneConfig(),
) -> FilterState:
    sys = reverse_dynamics(fwd)
    sensors.check_observability(fwd.A_f)
    return FilterState(init_value(L, x0_assumed), sys, sensors, prune_config)


def step(state: FilterState, frame: MeasurementFrame) -> tuple[FilterState, EstimateReport]:
    """Consume the next frame; returns the advanced state and its estimate."""
    if frame.k != state.k + 1:
        raise SequencingError(f"expected frame {state.k + 1}, got {frame.k}")
    grown = dp_step(state.V, frame, state.sys, state.sensors)
    V = prune(grown, state.prune_config)
    x_est, v_min, tag = global_argmin(V)
    report = EstimateReport(
        k=V.k,
        x_est=x_est,
        v_min=v_min,
        active_sensor=active_sensor_of(tag),
        term_count_pre_prune=len(grown),
        term_count_post_prune=len(V),
        tag=tag,
    )
    return replace(state, V=V), report


def run(state: FilterState, frames) -> list[EstimateReport]:
    """Fold :func:`step` over ``frames`` (a trace or any iterable of frames)."""
    return run_with_state(state, frames)[1]


def run_with_state(state: FilterState, frames):
    """Like :func:`run` but also returns the final state."""
    frames = getattr(frames, "frames", frames)
    reports = []
    for frame in frames:
        state, report = step(state, frame)
        reports.append(report)
    return state, reports


def estimates(reports) -> np.ndarray:
    return np.array([r.x_est for r in reports])

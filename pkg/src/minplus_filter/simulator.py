"""Forward-time truth model producing measurement traces.

Failed sensors keep reporting: a schedule swaps the true output map while
the filter keeps modelling the nominal one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import truncnorm

from .config import ScenarioConfig
from .propagation import MeasurementFrame
from .sensors import SensorModel, SensorSuite  # noqa: F401  (re-exported)


@dataclass(frozen=True, eq=False)
class MeasurementTrace:
    frames: tuple  # MeasurementFrame for k = 1..N
    x_true: np.ndarray  # (N + 1, n), k = 0..N
    w: np.ndarray  # (N, n), forward disturbance driving k -> k + 1
    eta: tuple  # N rows of M noise vectors, for k = 1..N
    C_effective: tuple  # N rows of M output maps used by the truth model

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)


def _draw(rng, model: str, sigma: float, size) -> np.ndarray:
    if sigma == 0.0:
        # still consume the stream so the other signals do not shift
        rng.random(size)
        return np.zeros(size)
    if model == "uniform":
        return rng.uniform(-sigma, sigma, size)
    # bell shape truncated at +-sigma, two standard deviations wide
    return truncnorm.rvs(-2.0, 2.0, scale=sigma / 2.0, size=size, random_state=rng)


def simulate(scenario: ScenarioConfig, seed: int | None = None) -> MeasurementTrace:
    """Simulate the forward model for ``scenario.horizon`` steps.

    Draw order is fixed (all disturbances, then sensor noise step by step,
    sensor by sensor), so the trace is a pure function of (scenario, seed).
    """
    seed = scenario.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    N, n = scenario.horizon, scenario.n
    sys = scenario.system
    suite = scenario.sensors

    if scenario.explicit_w is not None:
        w = np.array(scenario.explicit_w, dtype=float)
    else:
        w = _draw(rng, scenario.noise_model, scenario.disturbance_sigma, (N, n))

    eta = []
    for k in range(1, N + 1):
        row = []
        for j in range(1, suite.M + 1):
            s = suite[j]
            if scenario.explicit_eta is not None:
                row.append(np.array(scenario.explicit_eta[k - 1][j - 1], dtype=float))
            else:
                row.append(_draw(rng, scenario.noise_model, s.noise_sigma, s.m))
        eta.append(row)
    for spike in scenario.noise_spikes:
        eta[spike.step - 1][spike.sensor - 1] = eta[spike.step - 1][spike.sensor - 1] + spike.value

    x = np.empty((N + 1, n))
    x[0] = scenario.x0_true
    for k in range(N):
        x[k + 1] = sys.A_f @ x[k] + sys.B_f @ scenario.u[k] + sys.B_wf @ w[k]

    frames, C_eff = [], []
    for k in range(1, N + 1):
        Cs = tuple(suite[j].C_at(k) for j in range(1, suite.M + 1))
        y = tuple(C @ x[k] + e for C, e in zip(Cs, eta[k - 1]))
        frames.append(MeasurementFrame(k, y, scenario.u[k - 1].copy()))
        C_eff.append(Cs)
    return MeasurementTrace(tuple(frames), x, w, tuple(tuple(r) for r in eta), tuple(C_eff))


def open_loop_prior(scenario: ScenarioConfig) -> np.ndarray:
    """The assumed initial state pushed through the model with no disturbance."""
    sys = scenario.system
    x = np.empty((scenario.horizon + 1, scenario.n))
    x[0] = scenario.x0_assumed
    for k in range(scenario.horizon):
        x[k + 1] = sys.A_f @ x[k] + sys.B_f @ scenario.u[k]
    return x

"""Sensor output maps, measurement weights and failure schedules."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .quad import as_matrix, check_weight


@dataclass(frozen=True, eq=False)
class SensorModel:
    """One sensor ``y = C x + eta``.

    ``schedule`` holds ``(from_step, C_override)`` pairs. The effective map at
    step ``k`` is the last override whose ``from_step <= k``, else ``C_nominal``.
    The filter always models the sensor with ``C_nominal``; overrides only
    affect what the simulator reports.
    """

    C_nominal: np.ndarray
    schedule: tuple = ()
    noise_sigma: float = 0.0
    H: np.ndarray | None = None

    def __post_init__(self):
        C = as_matrix(self.C_nominal, "C")
        sched = []
        last = None
        for step, C_over in self.schedule:
            C_over = as_matrix(C_over, "C override")
            if C_over.shape != C.shape:
                raise ContractError(f"override at step {step} has shape {C_over.shape}, expected {C.shape}")
            if last is not None and step <= last:
                raise ContractError("schedule steps must be strictly increasing")
            last = int(step)
            sched.append((int(step), C_over))
        if self.noise_sigma < 0:
            raise ContractError("noise_sigma must be non-negative")
        object.__setattr__(self, "C_nominal", C)
        object.__setattr__(self, "schedule", tuple(sched))
        if self.H is not None:
            H = check_weight(self.H, "H")
            if H.shape != (C.shape[0], C.shape[0]):
                raise ContractError(f"per-sensor H has shape {H.shape}")
            object.__setattr__(self, "H", H)

    @property
    def m(self) -> int:
        return self.C_nominal.shape[0]

    @property
    def n(self) -> int:
        return self.C_nominal.shape[1]

    def C_at(self, k: int) -> np.ndarray:
        C = self.C_nominal
        for step, C_over in self.schedule:
            if step <= k:
                C = C_over
        return C


@dataclass(frozen=True, eq=False)
class SensorSuite:
    sensors: tuple
    H: np.ndarray = field(default=None)

    def __post_init__(self):
        sensors = tuple(self.sensors)
        if not sensors:
            raise ContractError("a sensor suite needs at least one sensor")
        n = sensors[0].n
        if any(s.n != n for s in sensors):
            raise ContractError("all sensors must observe the same state dimension")
        object.__setattr__(self, "sensors", sensors)
        if self.H is not None:
            object.__setattr__(self, "H", check_weight(self.H, "H"))
        for j, s in enumerate(sensors, 1):
            H = self.weight(j)
            if H.shape != (s.m, s.m):
                raise ContractError(f"H has shape {H.shape} but sensor {j} has {s.m} outputs")

    def __len__(self):
        return len(self.sensors)

    def __getitem__(self, j: int) -> SensorModel:
        """1-based access, matching sensor indices in lineage tags."""
        return self.sensors[j - 1]

    @property
    def M(self) -> int:
        return len(self.sensors)

    @property
    def n(self) -> int:
        return self.sensors[0].n

    def weight(self, j: int) -> np.ndarray:
        s = self[j]
        if s.H is not None:
            return s.H
        if self.H is None:
            raise ContractError(f"sensor {j} has no weight and the suite has no shared H")
        return self.H

    def unobservable(self, A) -> list:
        """1-based indices of sensors whose nominal pair ``(A, C)`` is unobservable."""
        A = as_matrix(A, "A")
        n = A.shape[0]
        bad = []
        for j, s in enumerate(self.sensors, 1):
            blocks, Ak = [], np.eye(n)
            for _ in range(n):
                blocks.append(s.C_nominal @ Ak)
                Ak = A @ Ak
            if np.linalg.matrix_rank(np.vstack(blocks)) < n:
                bad.append(j)
        return bad

    def check_observability(self, A) -> list:
        bad = self.unobservable(A)
        if bad:
            warnings.warn(f"sensors {bad} are not observable with the given dynamics", stacklevel=2)
        return bad

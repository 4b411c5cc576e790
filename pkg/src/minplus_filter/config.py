"""Scenario files: loading, validation and the in-memory ``ScenarioConfig``.

A scenario is one JSON document. Matrices are row-major nested lists; a bare
number is accepted for a 1x1 matrix and a flat list for a vector. Sensor
indices (in schedules and noise spikes) are 1-based.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractError, InvalidPrior, InvalidWeight
from .propagation import ForwardSystem
from .quad import as_matrix, as_vector, check_weight
from .sensors import SensorModel, SensorSuite
from .value import PruneConfig

NOISE_MODELS = ("uniform", "truncated-bell")


@dataclass(frozen=True, eq=False)
class NoiseSpike:
    sensor: int
    step: int
    value: np.ndarray


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    system: ForwardSystem
    sensors: SensorSuite
    L: np.ndarray
    horizon: int
    x0_true: np.ndarray
    x0_assumed: np.ndarray
    u: np.ndarray  # (horizon, p); row k is the input applied between k and k + 1
    seed: int = 0
    disturbance_sigma: float = 0.0
    noise_model: str = "uniform"
    prune: PruneConfig = PruneConfig()
    noise_spikes: tuple = ()
    explicit_w: np.ndarray | None = None  # (horizon, n)
    explicit_eta: tuple | None = None  # horizon rows of M vectors, for steps 1..horizon
    name: str = "scenario"
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def M(self) -> int:
        return self.sensors.M

    def with_overrides(self, **kw) -> "ScenarioConfig":
        """Copy with fields replaced; the raw echo is updated for the common keys."""
        raw = copy.deepcopy(self.raw)
        if "seed" in kw:
            raw["seed"] = int(kw["seed"])
        if "horizon" in kw:
            raw["horizon"] = int(kw["horizon"])
            if self.u.shape[0] != kw["horizon"] and "u" not in kw:
                kw["u"] = _resize_rows(self.u, kw["horizon"])
        if "prune" in kw:
            raw["prune"] = {"mode": kw["prune"].mode, "cap": kw["prune"].cap}
        return replace(self, raw=raw, **kw)


def _resize_rows(arr, rows):
    if arr.shape[0] >= rows:
        return arr[:rows]
    pad = np.zeros((rows - arr.shape[0],) + arr.shape[1:])
    return np.vstack([arr, pad])


def _line_of(text: str | None, *keys) -> int | None:
    """Best-effort 1-based line number of a nested key path in the JSON source."""
    if not text:
        return None
    pos = 0
    found = None
    for key in keys:
        if isinstance(key, int):
            continue
        idx = text.find(f'"{key}"', pos)
        if idx < 0:
            break
        pos = found = idx
    if found is None:
        return None
    return text.count("\n", 0, found) + 1


def scenario_from_dict(d: dict, source: str | None = None) -> ScenarioConfig:
    """Validate a parsed scenario document.

    Raises :class:`ConfigError` carrying the line of the offending key when
    ``source`` (the original JSON text) is given.
    """

    def fail(msg, *keys):
        raise ConfigError(msg, _line_of(source, *keys))

    def need(obj, key, *path):
        if not isinstance(obj, dict) or key not in obj:
            fail(f"missing required key {'.'.join(map(str, path + (key,)))!r}", *path)
        return obj[key]

    def mat(value, *path):
        try:
            return as_matrix(value, ".".join(map(str, path)))
        except (ContractError, ValueError, TypeError) as exc:
            fail(f"{'.'.join(map(str, path))}: {exc}", *path)

    def vec(value, *path):
        try:
            return as_vector(value, ".".join(map(str, path)))
        except (ContractError, ValueError, TypeError) as exc:
            fail(f"{'.'.join(map(str, path))}: {exc}", *path)

    if not isinstance(d, dict):
        fail("scenario must be a JSON object")

    sysd = need(d, "system")
    try:
        system = ForwardSystem(
            mat(need(sysd, "A_f", "system"), "system", "A_f"),
            mat(need(sysd, "B_f", "system"), "system", "B_f"),
            mat(need(sysd, "B_wf", "system"), "system", "B_wf"),
        )
    except ContractError as exc:
        fail(str(exc), "system")
    n = system.n
    if np.linalg.svd(system.A_f, compute_uv=False).min() <= 1e-12:
        fail("system.A_f must be invertible", "system", "A_f")
    dist_sigma = float(sysd.get("disturbance_sigma", 0.0))
    if dist_sigma < 0:
        fail("system.disturbance_sigma must be non-negative", "system", "disturbance_sigma")

    weights = need(d, "weights")
    L = mat(need(weights, "L", "weights"), "weights", "L")
    if L.shape != (n, n):
        fail(f"weights.L has shape {L.shape}, expected ({n}, {n})", "weights", "L")
    if np.max(np.abs(L - L.T)) > 1e-12 * max(1.0, np.max(np.abs(L))) or np.linalg.eigvalsh(L)[0] <= 1e-10:
        fail("weights.L must be symmetric positive definite", "weights", "L")
    H = None
    if "H" in weights:
        try:
            H = check_weight(mat(weights["H"], "weights", "H"))
        except InvalidWeight as exc:
            fail(f"weights.H: {exc}", "weights", "H")

    sensor_list = need(d, "sensors")
    if not isinstance(sensor_list, list) or not sensor_list:
        fail("sensors must be a non-empty list", "sensors")
    models = []
    for j, sd in enumerate(sensor_list, 1):
        C = mat(need(sd, "C", "sensors"), "sensors", "C")
        if C.shape[1] != n:
            fail(f"sensor {j}: C has {C.shape[1]} columns, state dimension is {n}", "sensors")
        sched = []
        for entry in sd.get("schedule", []):
            step = entry.get("from_step")
            if not isinstance(step, int) or step < 0:
                fail(f"sensor {j}: schedule from_step must be a non-negative integer", "sensors", "schedule")
            sched.append((step, mat(need(entry, "C", "sensors", "schedule"), "sensors", "schedule", "C")))
        sigma = sd.get("noise_sigma", 0.0)
        if not isinstance(sigma, (int, float)) or sigma < 0:
            fail(f"sensor {j}: noise_sigma must be a non-negative number", "sensors", "noise_sigma")
        try:
            models.append(
                SensorModel(C, tuple(sched), float(sigma), mat(sd["H"], "sensors", "H") if "H" in sd else None)
            )
        except (ContractError, InvalidWeight) as exc:
            fail(f"sensor {j}: {exc}", "sensors")
    try:
        suite = SensorSuite(tuple(models), H)
    except ContractError as exc:
        fail(str(exc), "weights")
    M = suite.M

    horizon = need(d, "horizon")
    if not isinstance(horizon, int) or isinstance(horizon, bool) or horizon < 1:
        fail("horizon must be an integer >= 1", "horizon")

    x0_true = vec(need(d, "x0_true"), "x0_true")
    x0_assumed = vec(d.get("x0_assumed", x0_true.tolist()), "x0_assumed")
    for key, v in (("x0_true", x0_true), ("x0_assumed", x0_assumed)):
        if v.shape != (n,):
            fail(f"{key} has dimension {v.shape[0]}, expected {n}", key)

    p = system.p
    u_raw = d.get("u", "zero")
    if u_raw == "zero":
        u = np.zeros((horizon, p))
    else:
        u = np.asarray(u_raw, dtype=float)
        if u.ndim == 1 and p == 1:
            u = u[:, None]
        if u.shape != (horizon, p):
            fail(f"u must be 'zero' or have shape ({horizon}, {p}), got {u.shape}", "u")

    seed = d.get("seed", 0)
    if not isinstance(seed, int):
        fail("seed must be an integer", "seed")

    noise = d.get("noise", {})
    model = noise.get("model", "uniform")
    if model not in NOISE_MODELS:
        fail(f"noise.model must be one of {NOISE_MODELS}", "noise", "model")

    spikes = []
    for sp in noise.get("spikes", []):
        j = sp.get("sensor")
        k = sp.get("step")
        if not isinstance(j, int) or not 1 <= j <= M:
            fail(f"spike sensor must be in 1..{M}", "noise", "spikes")
        if not isinstance(k, int) or not 1 <= k <= horizon:
            fail(f"spike step must be in 1..{horizon}", "noise", "spikes")
        value = vec(need(sp, "value", "noise", "spikes"), "noise", "spikes", "value")
        if value.shape != (suite[j].m,):
            fail(f"spike value for sensor {j} must have {suite[j].m} entries", "noise", "spikes")
        spikes.append(NoiseSpike(j, k, value))

    explicit_w = None
    if "w" in noise:
        explicit_w = np.asarray(noise["w"], dtype=float)
        if explicit_w.ndim == 1 and n == 1:
            explicit_w = explicit_w[:, None]
        if explicit_w.shape != (horizon, n):
            fail(f"noise.w must have shape ({horizon}, {n})", "noise", "w")
    explicit_eta = None
    if "eta" in noise:
        rows = noise["eta"]
        if not isinstance(rows, list) or len(rows) != horizon:
            fail(f"noise.eta must list {horizon} steps", "noise", "eta")
        explicit_eta = []
        for row in rows:
            if not isinstance(row, list) or len(row) != M:
                fail(f"each noise.eta row must hold {M} sensor entries", "noise", "eta")
            entries = []
            for j, e in enumerate(row, 1):
                e = vec(e, "noise", "eta")
                if e.shape != (suite[j].m,):
                    fail(f"noise.eta entry for sensor {j} has wrong size", "noise", "eta")
                entries.append(e)
            explicit_eta.append(tuple(entries))
        explicit_eta = tuple(explicit_eta)

    pr = d.get("prune", {"mode": "exact"})
    try:
        prune = PruneConfig(pr.get("mode", "exact"), pr.get("cap"))
    except (ValueError, AttributeError) as exc:
        fail(f"prune: {exc}", "prune")

    return ScenarioConfig(
        system=system,
        sensors=suite,
        L=L,
        horizon=horizon,
        x0_true=x0_true,
        x0_assumed=x0_assumed,
        u=u,
        seed=seed,
        disturbance_sigma=dist_sigma,
        noise_model=model,
        prune=prune,
        noise_spikes=tuple(spikes),
        explicit_w=explicit_w,
        explicit_eta=explicit_eta,
        name=str(d.get("name", "scenario")),
        raw=copy.deepcopy(d),
    )


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from exc
    try:
        return scenario_from_dict(d, text)
    except InvalidPrior as exc:
        raise ConfigError(str(exc), _line_of(text, "weights", "L")) from exc

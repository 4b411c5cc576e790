"""One step of the dynamic programming operator on a min-plus expansion.

The step reconstructs the prior state from the current one through the
time-reversed model ``x_prev = A_r x + B_r u + w``, minimizes each term over
the disturbance in closed form, and then adds every sensor's residual to
every term. Picking one sensor per term is exact: the cost is linear in the
sensor weights, so the best weighting sits on a simplex vertex, and which
vertex depends on ``x``. That dependence is what the cross product keeps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DegenerateDisturbance, IrreversibleDynamics, NoSensorYet
from .quad import QuadraticForm, as_matrix, as_vector, symmetrize
from .sensors import SensorSuite
from .value import MinPlusValueFunction, TermTag


@dataclass(frozen=True, eq=False)
class ForwardSystem:
    """``x_{k+1} = A_f x_k + B_f u_k + B_wf w_k``."""

    A_f: np.ndarray
    B_f: np.ndarray
    B_wf: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A_f, "A_f")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ContractError(f"A_f must be square, got {A.shape}")
        B = as_matrix(self.B_f, "B_f")
        if B.shape[0] != n:
            B = B.T if B.shape[1] == n else B
        if B.shape[0] != n:
            raise ContractError(f"B_f has shape {B.shape}, expected ({n}, p)")
        Bw = as_matrix(self.B_wf, "B_wf")
        if Bw.shape != (n, n):
            raise ContractError(f"B_wf has shape {Bw.shape}, expected ({n}, {n})")
        object.__setattr__(self, "A_f", A)
        object.__setattr__(self, "B_f", B)
        object.__setattr__(self, "B_wf", Bw)

    @property
    def n(self) -> int:
        return self.A_f.shape[0]

    @property
    def p(self) -> int:
        return self.B_f.shape[1]


@dataclass(frozen=True, eq=False)
class ReversedSystem:
    """``x_prev = A_r x + B_r u + v`` with disturbance energy ``v^T W v``."""

    A_r: np.ndarray
    B_r: np.ndarray
    W: np.ndarray

    @property
    def n(self) -> int:
        return self.A_r.shape[0]

    @property
    def p(self) -> int:
        return self.B_r.shape[1]


@dataclass(frozen=True, eq=False)
class MeasurementFrame:
    """Data for step ``k``: the outputs ``y[j-1]`` at time ``k`` and the input
    ``u`` that drove the state from ``k - 1`` to ``k``."""

    k: int
    y: tuple
    u: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "y", tuple(as_vector(v, "y") for v in self.y))
        if self.u is not None:
            object.__setattr__(self, "u", as_vector(self.u, "u"))


def reverse_dynamics(fwd: ForwardSystem) -> ReversedSystem:
    n = fwd.n
    s = np.linalg.svd(fwd.A_f, compute_uv=False)
    if s.min() <= 1e-12:
        raise IrreversibleDynamics(f"A_f is singular (min singular value {s.min():.3e})")
    A_r = np.linalg.solve(fwd.A_f, np.eye(n))
    B_r = -np.linalg.solve(fwd.A_f, fwd.B_f)
    G_r = -np.linalg.solve(fwd.A_f, fwd.B_wf)
    if np.allclose(G_r, np.eye(n), rtol=0, atol=1e-9):
        W = np.eye(n)
    else:
        sg = np.linalg.svd(G_r, compute_uv=False)
        if sg.min() <= 1e-12:
            raise DegenerateDisturbance(f"reversed disturbance gain is singular ({sg.min():.3e})")
        G_inv = np.linalg.solve(G_r, np.eye(n))
        W = symmetrize(G_inv.T @ G_inv)
    return ReversedSystem(A_r, B_r, W)


def _input_offset(sys: ReversedSystem, u) -> np.ndarray:
    if u is None:
        return np.zeros(sys.n)
    u = as_vector(u, "u")
    if u.shape != (sys.p,):
        raise ContractError(f"input has dimension {u.shape[0]}, system expects {sys.p}")
    return sys.B_r @ u


def optimal_disturbance(q: QuadraticForm, z, W) -> np.ndarray:
    """Minimizer over ``w`` of ``q(z + w) + w^T W w``."""
    z = as_vector(z, "z")
    W = as_matrix(W, "W")
    return np.linalg.solve(W + q.a, -q.b - q.a @ z)


def eliminate_batch(a, b, c, sys: ReversedSystem, u=None):
    """Disturbance elimination for stacked terms; returns ``(P_a, P_b, P_c)``.

    With ``N = (W + a)^{-1}`` the minimum over ``w`` of
    ``q(z + w) + w^T W w`` is the quadratic in ``z`` with coefficients
    ``a - a N a``, ``(I - a N) b`` and ``c - b^T N b``; substituting
    ``z = A_r x + s`` gives the result in ``x``.
    """
    s = _input_offset(sys, u)
    WA = sys.W[None] + a
    Na = np.linalg.solve(WA, a)
    Nb = np.linalg.solve(WA, b[..., None])[..., 0]
    a_t = symmetrize(a - a @ Na)
    b_z = b - np.einsum("tij,tj->ti", a, Nb)  # (I - a N) b
    c_z = c - np.einsum("ti,ti->t", b, Nb)
    a_ts = a_t @ s
    P_a = symmetrize(np.einsum("ji,tjk,kl->til", sys.A_r, a_t, sys.A_r))
    P_b = (a_ts + b_z) @ sys.A_r
    P_c = a_ts @ s + 2.0 * (b_z @ s) + c_z
    return P_a, P_b, P_c


def eliminate_disturbance(q: QuadraticForm, sys: ReversedSystem, u=None) -> QuadraticForm:
    """Quadratic in ``x`` equal to ``min_w q(A_r x + B_r u + w) + w^T W w``."""
    P_a, P_b, P_c = eliminate_batch(q.a[None], q.b[None], np.array([q.c]), sys, u)
    return QuadraticForm(P_a[0], P_b[0], P_c[0])


def residual_batch(sensors: SensorSuite, y):
    """Residual quadratics ``(y_j - C_j x)^T H_j (y_j - C_j x)`` for every sensor."""
    if len(y) != sensors.M:
        raise ContractError(f"frame has {len(y)} measurements for {sensors.M} sensors")
    n = sensors.n
    S_a = np.empty((sensors.M, n, n))
    S_b = np.empty((sensors.M, n))
    S_c = np.empty(sensors.M)
    for j in range(1, sensors.M + 1):
        C = sensors[j].C_nominal
        H = sensors.weight(j)
        yj = as_vector(y[j - 1], "y")
        if yj.shape != (C.shape[0],):
            raise ContractError(f"sensor {j} expects {C.shape[0]} outputs, got {yj.shape[0]}")
        Hy = H @ yj
        S_a[j - 1] = C.T @ H @ C
        S_b[j - 1] = -(C.T @ Hy)
        S_c[j - 1] = yj @ Hy
    return S_a, S_b, S_c


def dp_step(
    V: MinPlusValueFunction,
    frame: MeasurementFrame,
    sys: ReversedSystem,
    sensors: SensorSuite,
) -> MinPlusValueFunction:
    """Apply the DP operator once. Output terms are ordered by (parent, sensor)."""
    if V.n != sys.n or sensors.n != sys.n:
        raise ContractError("value function, system and sensors disagree on state dimension")
    P_a, P_b, P_c = eliminate_batch(V.a, V.b, V.c, sys, frame.u)
    S_a, S_b, S_c = residual_batch(sensors, frame.y)
    T, M, n = len(V), sensors.M, V.n
    R_a = (P_a[:, None] + S_a[None]).reshape(T * M, n, n)
    R_b = (P_b[:, None] + S_b[None]).reshape(T * M, n)
    R_c = (P_c[:, None] + S_c[None]).reshape(T * M)
    tags = tuple(tag + (j,) for tag in V.tags for j in range(1, M + 1))
    return MinPlusValueFunction(R_a, R_b, R_c, tags, V.k + 1)


def active_sensor_of(tag: TermTag) -> int:
    if not tag:
        raise NoSensorYet("no sensor has been selected before the first step")
    return int(tag[-1])

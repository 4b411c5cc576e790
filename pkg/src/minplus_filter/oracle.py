"""Brute-force references for certifying the analytic propagation.

Nothing here is fast. Each routine reaches its answer by a route that does
not share algebra with the closed-form code: grid search instead of linear
solves, interpolated tables instead of quadratic coefficients, and a batch
least-squares problem instead of a recursion.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import OracleNonConvergence, OracleRangeError
from .propagation import ReversedSystem, reverse_dynamics
from .quad import QuadraticForm, as_matrix, as_vector


def rel_error(value, reference, floor=1.0):
    """``|value - reference| / max(|reference|, floor)``, elementwise."""
    value = np.asarray(value, dtype=float)
    reference = np.asarray(reference, dtype=float)
    return np.abs(value - reference) / np.maximum(np.abs(reference), floor)


def _quad_at(a, b, c, Z):
    """Raw evaluation of ``z^T a z + 2 b^T z + c`` at rows of ``Z``."""
    return np.einsum("pi,ij,pj->p", Z, a, Z) + 2.0 * (Z @ b) + c


def zoom_minimize(f, n, center=None, radius=8.0, points=9, tol=1e-8, max_iter=400, max_expand=12):
    """Minimize a convex function of ``n`` variables by repeated grid zoom.

    ``f`` maps a ``(P, n)`` array to ``P`` values. The box re-centres on the
    best grid point each round and halves only when that point is interior,
    so the search can walk out of a box that misses the minimum. Returns
    ``(w_best, f_best)``.
    """
    c = np.zeros(n) if center is None else np.array(center, dtype=float)
    r = float(radius)
    axis = np.linspace(-1.0, 1.0, points)
    offsets = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    edge = np.any(np.abs(offsets) == 1.0, axis=1)
    prev = np.inf
    expansions = 0
    stable = 0
    for _ in range(max_iter):
        W = c + r * offsets
        vals = f(W)
        i = int(np.argmin(vals))
        best = float(vals[i])
        c = W[i]
        if edge[i]:
            # minimum may lie outside the box: keep the radius and walk
            expansions += 1
            if expansions > max_expand:
                r *= 2.0
                expansions = 0
            stable = 0
            prev = best
            continue
        scale = max(1.0, abs(best))
        stable = stable + 1 if abs(prev - best) <= tol * scale else 0
        prev = best
        if stable >= 3 and r <= 1e-7 * max(1.0, float(np.max(np.abs(c)))):
            return c, best
        r *= 0.5
    raise OracleNonConvergence(f"grid zoom did not converge (last radius {r:.3e})")


def numeric_min_over_w(q: QuadraticForm, sys: ReversedSystem, u, x, radius=8.0):
    """``min_w q(A_r x + B_r u + w) + w^T W w`` by grid refinement."""
    x = as_vector(x, "x")
    s = np.zeros(sys.n) if u is None else sys.B_r @ as_vector(u, "u")
    z = sys.A_r @ x + s
    a, b, c = np.asarray(q.a), np.asarray(q.b), float(q.c)
    W = sys.W

    def f(Wpts):
        Z = z + Wpts
        return _quad_at(a, b, c, Z) + np.einsum("pi,ij,pj->p", Wpts, W, Wpts)

    w_best, val = zoom_minimize(f, sys.n, radius=radius)
    # coverage: the converged point must sit well inside the search region
    if np.max(np.abs(w_best)) > 1e6:
        raise OracleRangeError(f"disturbance search ran away to {w_best}")
    return val


def brute_force_step(V, frame, sys: ReversedSystem, sensors, x) -> float:
    """One DP step at state ``x`` by brute force over terms, disturbances and sensors.

    ``min_{w, j} [min_alpha q_alpha(prior) + w^T W w + r_j(x)]`` splits into a
    per-term disturbance search plus the best sensor residual, because the
    residual does not depend on ``w``.
    """
    x = as_vector(x, "x")
    best_prior = min(numeric_min_over_w(q, sys, frame.u, x) for q, _ in V.terms)
    residuals = []
    for j in range(1, sensors.M + 1):
        e = frame.y[j - 1] - sensors[j].C_nominal @ x
        residuals.append(float(e @ sensors.weight(j) @ e))
    return best_prior + min(residuals)


@dataclass
class GridValueTable:
    axes: list  # one 1-D node array per state dimension
    values: list  # V_k on the node grid, k = 0..N
    valid: list  # boolean masks: nodes whose optimum stayed inside both grids
    error_bound: list  # heuristic per-step bound from grid spacings and curvature

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, len(self.axes))


def _interpolator(axes, table):
    if len(axes) == 1:
        xs = axes[0]

        def interp(P):
            out = np.interp(P[..., 0], xs, table)
            return np.where((P[..., 0] < xs[0]) | (P[..., 0] > xs[-1]), np.inf, out)

        return interp
    rgi = RegularGridInterpolator(axes, table, bounds_error=False, fill_value=np.inf)
    return lambda P: rgi(P.reshape(-1, P.shape[-1])).reshape(P.shape[:-1])


def _second_difference_max(axes, table):
    worst = 0.0
    for d in range(len(axes)):
        if table.shape[d] < 3:
            continue
        dd = np.diff(table, n=2, axis=d)
        dd = dd[np.isfinite(dd)]
        if dd.size:
            worst = max(worst, float(np.max(np.abs(dd))))
    return worst


def grid_value_function(scenario, x_range, w_range, resolutions, frames=None, steps=None, chunk=256):
    """Tabulate the value recursion on a state grid by exhaustive search.

    ``x_range`` and ``w_range`` are ``(lo, hi)`` applied to every state
    coordinate; ``resolutions`` is ``(nx, nw)`` nodes per coordinate. Values of
    the previous table at prior states come from linear interpolation; prior
    states outside the table count as infinite cost. A node is flagged invalid
    when its best disturbance hits the edge of the disturbance grid or its
    best prior state lands outside the valid part of the previous table.
    """
    from .simulator import simulate

    n = scenario.n
    if n > 2:
        raise ValueError("grid oracle supports one or two state dimensions")
    nx, nw = resolutions
    if frames is None:
        frames = simulate(scenario).frames
    frames = list(frames)[: steps if steps is not None else None]
    sys = reverse_dynamics(scenario.system)
    sensors = scenario.sensors

    axes = [np.linspace(x_range[0], x_range[1], nx) for _ in range(n)]
    w_axis = np.linspace(w_range[0], w_range[1], nw)
    w_pts = np.stack(np.meshgrid(*([w_axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    w_cost = np.einsum("pi,ij,pj->p", w_pts, sys.W, w_pts)
    w_edge = np.any((w_pts == w_axis[0]) | (w_pts == w_axis[-1]), axis=1)
    shape = (nx,) * n
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    hx = axes[0][1] - axes[0][0]
    hw = w_axis[1] - w_axis[0]

    e0 = X - scenario.x0_assumed
    V = np.einsum("pi,ij,pj->p", e0, scenario.L, e0)
    values = [V.reshape(shape)]
    valid = [np.ones(shape, dtype=bool)]
    bounds = [0.0]
    lo_ok = x_range[0] + hx
    hi_ok = x_range[1] - hx
    if (w_pts.min(axis=0) > -1e-12).any() or (w_pts.max(axis=0) < 1e-12).any():
        raise OracleRangeError("disturbance grid must straddle zero")

    for frame in frames:
        interp = _interpolator(axes, values[-1])
        valid_prev = _interpolator(axes, valid[-1].astype(float))
        s = np.zeros(n) if frame.u is None else sys.B_r @ frame.u
        Z = X @ sys.A_r.T + s
        best = np.empty(len(X))
        ok = np.empty(len(X), dtype=bool)
        for start in range(0, len(X), chunk):
            Zc = Z[start : start + chunk]
            P = Zc[:, None, :] + w_pts[None, :, :]
            cost = interp(P) + w_cost[None, :]
            idx = np.argmin(cost, axis=1)
            rows = np.arange(len(Zc))
            best[start : start + chunk] = cost[rows, idx]
            p_best = P[rows, idx]
            inside = np.all((p_best >= lo_ok) & (p_best <= hi_ok), axis=1)
            prev_ok = valid_prev(p_best[:, None, :])[:, 0] >= 1.0 - 1e-12
            ok[start : start + chunk] = ~w_edge[idx] & inside & prev_ok & np.isfinite(cost[rows, idx])
        residuals = []
        for j in range(1, sensors.M + 1):
            E = frame.y[j - 1][None, :] - X @ sensors[j].C_nominal.T
            residuals.append(np.einsum("pi,ij,pj->p", E, sensors.weight(j), E))
        V = best + np.min(residuals, axis=0)
        curv_v = _second_difference_max(axes, values[-1]) / hx**2
        lam_w = float(np.linalg.eigvalsh(sys.W)[-1])
        step_bound = _second_difference_max(axes, values[-1]) / 8.0 + (curv_v + lam_w) * (hw / 2.0) ** 2 * n
        values.append(V.reshape(shape))
        valid.append(ok.reshape(shape))
        bounds.append(bounds[-1] + step_bound)
    if not valid[-1].any():
        raise OracleRangeError("no grid node kept its optimum inside the ranges; widen x_range or w_range")
    return GridValueTable(axes, values, valid, bounds)


def rls_reference(system, C, H, L, x0_assumed, frames) -> np.ndarray:
    """Filtering estimates of a single-sensor system from batch least squares.

    For each ``k`` the whole trajectory cost
    ``||x_0 - x0||_L^2 + sum ||w_i||^2 + sum_{i=1..k} ||y_i - C x_i||_H^2``
    is minimized over ``(x_0, w_0, ..., w_{k-1})`` with the forward model, and
    the last state of the minimizer is reported. Returns shape ``(N, n)``.
    """
    A, B, Bw = system.A_f, system.B_f, system.B_wf
    C = as_matrix(C, "C")
    H = as_matrix(H, "H")
    L = as_matrix(L, "L")
    x0 = as_vector(x0_assumed, "x0")
    n = A.shape[0]
    frames = list(frames)
    N = len(frames)

    def sqrt_psd(S):
        lam, V = np.linalg.eigh(0.5 * (S + S.T))
        return (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.T

    Ls, Hs = sqrt_psd(L), sqrt_psd(H)
    # affine state maps x_i = Phi_i z + d_i with z = (x_0, w_0, ..., w_{N-1})
    Phi = [np.hstack([np.eye(n), np.zeros((n, n * N))])]
    d = [np.zeros(n)]
    for i in range(N):
        u = frames[i].u
        drive = np.zeros(n) if u is None else B @ u
        nxt = A @ Phi[-1]
        nxt[:, n * (i + 1) : n * (i + 2)] += Bw
        Phi.append(nxt)
        d.append(A @ d[-1] + drive)

    out = np.empty((N, n))
    for k in range(1, N + 1):
        cols = n * (k + 1)
        rows_A = [Ls @ Phi[0][:, :cols]]
        rows_b = [Ls @ (x0 - d[0])]
        rows_A.append(np.hstack([np.zeros((n * k, n)), np.eye(n * k)]))
        rows_b.append(np.zeros(n * k))
        for i in range(1, k + 1):
            rows_A.append(Hs @ C @ Phi[i][:, :cols])
            rows_b.append(Hs @ (frames[i - 1].y[0] - C @ d[i]))
        A_ls = np.vstack(rows_A)
        b_ls = np.concatenate(rows_b)
        z, _, rank, _ = np.linalg.lstsq(A_ls, b_ls, rcond=None)
        if rank < cols:
            raise np.linalg.LinAlgError(f"batch normal equations are singular at step {k}")
        out[k - 1] = Phi[k][:, :cols] @ z + d[k]
    return out


@dataclass
class Certificate:
    name: str
    passed: bool
    max_error: float
    tolerance: float
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "max_error": float(self.max_error),
            "tolerance": float(self.tolerance),
            "detail": self.detail,
        }


def certify(scenario, horizon=3, n_points=12, seed=0, step_fn=None, grid=None):
    """Run the oracle checks on a scenario truncated to ``horizon`` steps.

    ``step_fn`` replaces :func:`dp_step` inside the check (a hook for negative
    controls). ``grid`` overrides ``(x_range, w_range, (nx, nw))`` for the grid
    comparison, which is skipped for states of dimension above two.
    """
    from .filter import new_filter
    from .propagation import dp_step
    from .simulator import simulate
    from .value import evaluate_min, global_argmin, prune

    step_fn = step_fn or dp_step
    scen = scenario.with_overrides(horizon=min(horizon, scenario.horizon))
    trace = simulate(scen)
    state = new_filter(scen.system, scen.sensors, scen.L, scen.x0_assumed, scen.prune)
    rng = np.random.default_rng(seed)
    certs = []

    worst, worst_eig, worst_v = 0.0, np.inf, np.inf
    V = state.V
    estimates = []
    for frame in trace.frames:
        V_next = step_fn(V, frame, state.sys, state.sensors)
        scale = np.max(np.abs(trace.x_true)) + 1.0
        pts = rng.uniform(-2.0 * scale, 2.0 * scale, size=(n_points, scen.n))
        analytic = evaluate_min(V_next, pts)
        brute = np.array([brute_force_step(V, frame, state.sys, state.sensors, p) for p in pts])
        worst = max(worst, float(rel_error(analytic, brute).max()))
        V = prune(V_next, scen.prune)
        worst_eig = min(worst_eig, V.min_term_eigenvalue())
        x_est, v_min, _ = global_argmin(V)
        worst_v = min(worst_v, v_min)
        estimates.append(x_est)
    certs.append(Certificate("structure_preservation", worst <= 1e-6, worst, 1e-6, {"points_per_step": n_points}))
    certs.append(
        Certificate(
            "numerical_hygiene",
            worst_eig >= -1e-10 and worst_v >= -1e-9,
            max(0.0, -worst_eig, -worst_v),
            1e-9,
            {"min_term_eigenvalue": worst_eig, "min_v": worst_v},
        )
    )

    if scen.n <= 2:
        if grid is None:
            span = 2.0 * (float(np.max(np.abs(trace.x_true))) + 1.0)
            if scen.n == 1:
                nodes = int(2 * span / 0.005) + 1
                grid = ((-span, span), (-span, span), (nodes, nodes))
            else:
                grid = ((-span, span), (-span, span), (81, 81))
        x_range, w_range, res = grid
        table = grid_value_function(scen, x_range, w_range, res, frames=trace.frames[:1])
        V1 = step_fn(state.V, trace.frames[0], state.sys, state.sensors)
        mask = table.valid[1].reshape(-1)
        nodes = table.nodes()[mask]
        err = rel_error(table.values[1].reshape(-1)[mask], evaluate_min(V1, nodes))
        # a 2-D table at desk-top resolution cannot reach 1e-4; hold it to its own bound
        tol = 1e-4 if scen.n == 1 else max(1e-4, 2.0 * table.error_bound[1])
        certs.append(
            Certificate(
                "grid_dp_step1",
                bool(mask.any()) and float(err.max()) <= tol,
                float(err.max()) if mask.any() else np.inf,
                tol,
                {"valid_nodes": int(mask.sum()), "error_bound": table.error_bound[1]},
            )
        )

    if scen.M == 1:
        ref = rls_reference(scen.system, scen.sensors[1].C_nominal, scen.sensors.weight(1), scen.L, scen.x0_assumed, trace.frames)
        diff = float(np.max(np.abs(np.array(estimates) - ref)))
        certs.append(Certificate("batch_equivalence", diff <= 1e-7, diff, 1e-7))
    return certs

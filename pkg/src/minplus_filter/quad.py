"""Convex quadratic forms ``x^T a x + 2 b^T x + c`` in the state.

Everything here is a pure function of immutable :class:`QuadraticForm`
values. The factor of two on the linear term is part of the storage
convention, so ``b`` is *half* the gradient at the origin.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, InvalidWeight, NotStrictlyConvex

PD_TOL = 1e-10
DOM_TOL = 1e-9
SYM_TOL = 1e-12


def as_matrix(value, name="matrix") -> np.ndarray:
    """Coerce scalars, vectors or nested lists into a 2-D float array."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ContractError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def as_vector(value, name="vector") -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ContractError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a, -1, -2))


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """One basis term of a min-plus expansion."""

    a: np.ndarray
    b: np.ndarray
    c: float

    def __post_init__(self):
        a = as_matrix(self.a, "a")
        n = a.shape[0]
        if a.shape != (n, n):
            raise ContractError(f"a must be square, got shape {a.shape}")
        b = np.zeros(n) if self.b is None else as_vector(self.b, "b")
        if b.shape != (n,):
            raise ContractError(f"b has shape {b.shape}, expected ({n},)")
        c = float(self.c)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.isfinite(c)):
            raise ContractError("quadratic coefficients must be finite")
        a = symmetrize(a)
        a.setflags(write=False)
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @classmethod
    def zero(cls, n: int) -> "QuadraticForm":
        return cls(np.zeros((n, n)), np.zeros(n), 0.0)

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def __add__(self, other: "QuadraticForm") -> "QuadraticForm":
        return add(self, other)

    def __repr__(self):
        return f"QuadraticForm(a={self.a.tolist()}, b={self.b.tolist()}, c={self.c!r})"

    def allclose(self, other: "QuadraticForm", atol=1e-12, rtol=1e-9) -> bool:
        return (
            self.n == other.n
            and np.allclose(self.a, other.a, atol=atol, rtol=rtol)
            and np.allclose(self.b, other.b, atol=atol, rtol=rtol)
            and np.isclose(self.c, other.c, atol=atol, rtol=rtol)
        )


def _check_state(q: QuadraticForm, x) -> np.ndarray:
    x = as_vector(x, "x")
    if x.shape != (q.n,):
        raise ContractError(f"state has dimension {x.shape[0]}, form has {q.n}")
    return x


def evaluate(q: QuadraticForm, x) -> float:
    x = _check_state(q, x)
    return float(x @ q.a @ x + 2.0 * (q.b @ x) + q.c)


def min_eigenvalue(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(symmetrize(np.asarray(a, dtype=float)))[0])


def vertex(q: QuadraticForm) -> np.ndarray:
    """Unique minimizer ``-a^{-1} b`` of a strictly convex form."""
    lam = min_eigenvalue(q.a)
    if lam <= PD_TOL:
        raise NotStrictlyConvex(lam)
    return np.linalg.solve(q.a, -q.b)


def min_value(q: QuadraticForm) -> float:
    v = vertex(q)
    # c - b^T a^{-1} b, written via the vertex to reuse the solve
    return float(q.c + q.b @ v)


def add(q1: QuadraticForm, q2: QuadraticForm) -> QuadraticForm:
    if q1.n != q2.n:
        raise ContractError(f"cannot add forms of dimension {q1.n} and {q2.n}")
    return QuadraticForm(q1.a + q2.a, q1.b + q2.b, q1.c + q2.c)


def check_weight(H, name="H") -> np.ndarray:
    """Validate a symmetric PSD weight and return it symmetrized."""
    H = as_matrix(H, name)
    if H.shape[0] != H.shape[1]:
        raise InvalidWeight(f"{name} must be square, got shape {H.shape}")
    scale = max(1.0, float(np.max(np.abs(H))))
    if np.max(np.abs(H - H.T)) > SYM_TOL * scale:
        raise InvalidWeight(f"{name} is not symmetric")
    H = symmetrize(H)
    if min_eigenvalue(H) < -PD_TOL * scale:
        raise InvalidWeight(f"{name} is not positive semidefinite")
    return H


def residual_quadratic(C, H, y) -> QuadraticForm:
    """Quadratic in ``x`` equal to ``(y - Cx)^T H (y - Cx)``."""
    C = as_matrix(C, "C")
    H = check_weight(H)
    y = as_vector(y, "y")
    m = C.shape[0]
    if H.shape != (m, m) or y.shape != (m,):
        raise ContractError(
            f"inconsistent residual dimensions: C {C.shape}, H {H.shape}, y {y.shape}"
        )
    Hy = H @ y
    return QuadraticForm(C.T @ H @ C, -(C.T @ Hy), float(y @ Hy))


def difference_lower_bound(da, db, dc, psd_tol=PD_TOL, range_tol=DOM_TOL):
    """Infimum over ``x`` of ``x^T da x + 2 db^T x + dc`` for stacked coefficients.

    Works on arrays of shape ``(..., n, n)``, ``(..., n)``, ``(...)`` and returns
    ``-inf`` wherever the quadratic is unbounded below (an indefinite ``da``,
    or a ``db`` with a component outside the range of ``da``).
    """
    da = symmetrize(np.asarray(da, dtype=float))
    db = np.asarray(db, dtype=float)
    dc = np.asarray(dc, dtype=float)
    scale = np.maximum(1.0, np.max(np.abs(da), axis=(-1, -2)))
    lam, vecs = np.linalg.eigh(da)
    proj = np.einsum("...ij,...i->...j", vecs, db)
    tol = (psd_tol * scale)[..., None]
    positive = lam > tol
    indefinite = np.any(lam < -tol, axis=-1)
    bscale = np.maximum(1.0, np.max(np.abs(db), axis=-1, initial=0.0))[..., None]
    off_range = np.any(~positive & (np.abs(proj) > range_tol * bscale), axis=-1)
    safe_lam = np.where(positive, lam, 1.0)
    drop = np.sum(np.where(positive, proj**2 / safe_lam, 0.0), axis=-1)
    bound = dc - drop
    return np.where(indefinite | off_range, -np.inf, bound)


def dominates(q1: QuadraticForm, q2: QuadraticForm, tol: float = DOM_TOL) -> bool:
    """True iff ``q1(x) <= q2(x)`` for every ``x`` (up to ``tol``)."""
    if q1.n != q2.n:
        return False
    bound = difference_lower_bound(q2.a - q1.a, q2.b - q1.b, q2.c - q1.c)
    return bool(bound >= -tol)

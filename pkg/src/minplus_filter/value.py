"""Min-plus expansions: pointwise minima of convex quadratics.

A :class:`MinPlusValueFunction` stores its terms as stacked arrays so the
propagation and pruning code can work on all terms at once. Each term
carries a lineage tag, the tuple of sensor indices (1-based) chosen at the
steps that produced it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import ContractError, InvalidPrior, NotStrictlyConvex
from .quad import (
    DOM_TOL,
    PD_TOL,
    QuadraticForm,
    as_matrix,
    as_vector,
    difference_lower_bound,
    symmetrize,
)

POINT_TOL = 1e-8

TermTag = tuple  # tuple[int, ...] of 1-based sensor indices, one per elapsed step


@dataclass(frozen=True, eq=False)
class MinPlusValueFunction:
    a: np.ndarray  # (T, n, n)
    b: np.ndarray  # (T, n)
    c: np.ndarray  # (T,)
    tags: tuple
    k: int = 0

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        c = np.asarray(self.c, dtype=float)
        if a.ndim != 3 or a.shape[1] != a.shape[2]:
            raise ContractError(f"term matrices must have shape (T, n, n), got {a.shape}")
        T, n = a.shape[:2]
        if T == 0:
            raise ContractError("a value function needs at least one term")
        if b.shape != (T, n) or c.shape != (T,) or len(self.tags) != T:
            raise ContractError("term arrays and tags disagree in length or dimension")
        a = symmetrize(a)
        for arr in (a, b, c):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "tags", tuple(tuple(int(j) for j in t) for t in self.tags))

    @property
    def n(self) -> int:
        return self.a.shape[1]

    def __len__(self):
        return self.a.shape[0]

    @property
    def terms(self) -> list:
        return [
            (QuadraticForm(self.a[i], self.b[i], self.c[i]), self.tags[i])
            for i in range(len(self))
        ]

    def term(self, i: int) -> QuadraticForm:
        return QuadraticForm(self.a[i], self.b[i], self.c[i])

    @classmethod
    def from_terms(cls, terms, k: int = 0) -> "MinPlusValueFunction":
        """Build from an iterable of ``QuadraticForm`` or ``(QuadraticForm, tag)``."""
        forms, tags = [], []
        for item in terms:
            if isinstance(item, QuadraticForm):
                q, tag = item, ()
            else:
                q, tag = item
            forms.append(q)
            tags.append(tuple(tag))
        if not forms:
            raise ContractError("a value function needs at least one term")
        return cls(
            np.stack([q.a for q in forms]),
            np.stack([q.b for q in forms]),
            np.array([q.c for q in forms]),
            tuple(tags),
            k,
        )

    def select(self, idx) -> "MinPlusValueFunction":
        idx = np.asarray(idx, dtype=int)
        return MinPlusValueFunction(
            self.a[idx], self.b[idx], self.c[idx], tuple(self.tags[i] for i in idx), self.k
        )

    def min_term_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.a)[:, 0].min())


@dataclass(frozen=True)
class EstimateReport:
    k: int
    x_est: np.ndarray
    v_min: float
    active_sensor: int
    term_count_pre_prune: int
    term_count_post_prune: int
    tag: TermTag = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "x_est": [float(v) for v in self.x_est],
            "v_min": float(self.v_min),
            "active_sensor": self.active_sensor,
            "terms_pre": self.term_count_pre_prune,
            "terms_post": self.term_count_post_prune,
            "lineage": list(self.tag),
        }


@dataclass(frozen=True)
class PruneConfig:
    """``mode`` is one of ``exact``, ``cap`` (exact, then keep ``cap`` best) or ``off``."""

    mode: Literal["exact", "cap", "off"] = "exact"
    cap: int | None = None

    def __post_init__(self):
        if self.mode not in ("exact", "cap", "off"):
            raise ValueError(f"unknown prune mode {self.mode!r}")
        if self.mode == "cap" and (self.cap is None or self.cap < 1):
            raise ValueError("cap mode needs a positive cap")

    @classmethod
    def parse(cls, text: str) -> "PruneConfig":
        """Parse the command-line form ``exact``, ``off`` or ``cap:N``."""
        if text.startswith("cap:"):
            return cls("cap", int(text[4:]))
        return cls(text)


def init_value(L, x0) -> MinPlusValueFunction:
    """The prior ``||x - x0||_L^2`` as a single-term expansion with empty lineage."""
    L = as_matrix(L, "L")
    x0 = as_vector(x0, "x0")
    n = x0.shape[0]
    if L.shape != (n, n):
        raise InvalidPrior(f"L has shape {L.shape}, expected ({n}, {n})")
    if np.max(np.abs(L - L.T)) > 1e-12 * max(1.0, np.max(np.abs(L))):
        raise InvalidPrior("L is not symmetric")
    lam = np.linalg.eigvalsh(symmetrize(L))[0]
    if lam <= PD_TOL:
        raise InvalidPrior(f"L is not positive definite (min eigenvalue {lam:.3e})")
    Lx = L @ x0
    return MinPlusValueFunction(L[None], -Lx[None], np.array([x0 @ Lx]), ((),), 0)


def term_values(V: MinPlusValueFunction, X) -> np.ndarray:
    """Every term evaluated at every point: shape ``(T, P)`` for ``X`` of shape ``(P, n)``."""
    quad = np.einsum("pi,tij,pj->tp", X, V.a, X)
    return quad + 2.0 * (V.b @ X.T) + V.c[:, None]


def evaluate_min(V: MinPlusValueFunction, x):
    """Pointwise minimum over terms. ``x`` may be one state or a ``(P, n)`` batch."""
    X = np.asarray(x, dtype=float)
    single = X.ndim <= 1
    if single:
        X = X.reshape(1, -1)
    if X.shape[1] != V.n:
        raise ContractError(f"state has dimension {X.shape[1]}, value function has {V.n}")
    out = term_values(V, X).min(axis=0)
    return float(out[0]) if single else out


def _vertices(V: MinPlusValueFunction) -> np.ndarray:
    lam = np.linalg.eigvalsh(V.a)[:, 0]
    if lam.min() <= PD_TOL:
        raise NotStrictlyConvex(lam.min())
    return np.linalg.solve(V.a, -V.b[..., None])[..., 0]


def _dedup(points: np.ndarray, tol: float = POINT_TOL):
    keep = [0]
    for i in range(1, len(points)):
        if np.max(np.abs(points[keep] - points[i]), axis=1).min() > tol:
            keep.append(i)
    return np.array(keep, dtype=int)


def candidate_minima(V: MinPlusValueFunction) -> np.ndarray:
    """Distinct term vertices, one row per candidate, in term order."""
    pts = _vertices(V)
    return pts[_dedup(pts)]


def global_argmin(V: MinPlusValueFunction, chunk: int = 512):
    """Global minimizer of the expansion, its value, and the tag of the active term.

    The minimizer of a pointwise minimum of strictly convex quadratics is the
    vertex of whichever term is active there, so scanning the vertices is exact.
    """
    pts = _vertices(V)
    vals = np.concatenate([term_values(V, pts[i : i + chunk]).min(axis=0) for i in range(0, len(pts), chunk)])
    # the point is the strict minimizer up to rounding; only exact-arithmetic
    # ties fall back to term order, so dropping dominated terms cannot move it
    vmin = vals.min()
    best = pts[int(np.flatnonzero(vals <= vmin + 64 * np.finfo(float).eps * max(1.0, abs(vmin)))[0])]
    at = term_values(V, best[None])[:, 0]
    # the reported tag: earliest term within tolerance of the minimum there
    term = int(np.flatnonzero(at <= at.min() + DOM_TOL)[0])
    return best.copy(), float(at.min()), V.tags[term]


def _dominated_mask(V: MinPlusValueFunction, tol: float = DOM_TOL) -> np.ndarray:
    """Terms dominated by another term; duplicates keep their earliest copy."""
    T = len(V)
    dropped = np.zeros(T, dtype=bool)
    if T == 1:
        return dropped
    idx = np.arange(T)
    lam = np.linalg.eigvalsh(V.a)[:, 0]
    strict = lam > PD_TOL
    verts = np.zeros_like(V.b)
    if strict.any():
        verts[strict] = np.linalg.solve(V.a[strict], -V.b[strict][..., None])[..., 0]
    for j in range(T):
        others = idx != j
        if strict[j]:
            # cheap necessary condition: q_i must not exceed q_j at q_j's vertex
            v = verts[j]
            at_v = np.einsum("i,tij,j->t", v, V.a, v) + 2.0 * (V.b @ v) + V.c
            others &= at_v <= at_v[j] + tol
        cand = np.flatnonzero(others)
        if cand.size == 0:
            continue
        bound_ij = difference_lower_bound(V.a[j] - V.a[cand], V.b[j] - V.b[cand], V.c[j] - V.c[cand])
        dom = cand[bound_ij >= -tol]
        if dom.size == 0:
            continue
        # mutual domination means an identical term: only later copies go
        back = difference_lower_bound(V.a[dom] - V.a[j], V.b[dom] - V.b[j], V.c[dom] - V.c[j])
        if np.any((back < -tol) | (dom < j)):
            dropped[j] = True
    return dropped


def prune(V: MinPlusValueFunction, config: PruneConfig = PruneConfig()) -> MinPlusValueFunction:
    """Drop dominated terms (exact) and optionally cap the term count.

    Exact pruning leaves the pointwise minimum unchanged. The cap keeps the
    terms with the lowest minimum values, which can only raise the function.
    """
    if config.mode == "off":
        return V
    keep = np.flatnonzero(~_dominated_mask(V))
    if config.mode == "cap" and keep.size > config.cap:
        lam = np.linalg.eigvalsh(V.a[keep])[:, 0]
        if lam.min() > PD_TOL:
            sub = V.a[keep]
            verts = np.linalg.solve(sub, -V.b[keep][..., None])[..., 0]
            mins = V.c[keep] + np.einsum("ti,ti->t", V.b[keep], verts)
        else:
            mins = np.array([difference_lower_bound(V.a[i], V.b[i], V.c[i]) for i in keep])
        keep = np.sort(keep[np.argsort(mins, kind="stable")[: config.cap]])
    return V.select(keep)

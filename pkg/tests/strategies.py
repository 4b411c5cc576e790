"""Hypothesis strategies and random builders shared by the tests."""
import numpy as np
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from minplus_filter import QuadraticForm

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def vec_strat(dim, elements=finite):
    return arrays(np.float64, (dim,), elements=elements)


def mat_strat(rows, cols=None, elements=finite):
    return arrays(np.float64, (rows, cols or rows), elements=elements)


@st.composite
def psd_quadratics(draw, n, strict=False):
    F = draw(mat_strat(n))
    shift = 0.5 if strict else 0.0
    a = F @ F.T + shift * np.eye(n)
    return QuadraticForm(a, draw(vec_strat(n)), draw(finite))


def random_psd(rng, n, strict=True, scale=1.0):
    F = rng.normal(size=(n, n)) * scale
    return F @ F.T + (0.3 * np.eye(n) if strict else 0.0)


def random_quadratic(rng, n, strict=True):
    return QuadraticForm(random_psd(rng, n, strict), rng.normal(size=n), rng.normal())

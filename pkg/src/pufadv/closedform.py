"""Closed-form references for small conditioning problems.

Everything here is exact (orthant probabilities, the normal CDF) or
deterministic quadrature, so the Monte Carlo engine can be checked
against values that carry no sampling noise of their own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import from_features

_erfc = np.vectorize(math.erfc, otypes=[np.float64])


def normal_cdf(z):
    """Standard normal CDF, elementwise."""
    return 0.5 * _erfc(-np.asarray(z, dtype=np.float64) / math.sqrt(2.0))


def orthant_two(rho: float) -> float:
    """P(U > 0, V > 0) for standard bivariate normals with correlation rho."""
    if not -1.0 <= rho <= 1.0:
        raise ValueError("correlation must lie in [-1, 1]")
    return 0.25 + math.asin(rho) / (2.0 * math.pi)


def orthant_three(r12: float, r13: float, r23: float) -> float:
    """Joint-positive probability for three standard normals.

    Valid for any positive semidefinite correlation assignment; the
    arcsin terms add because pairwise corrections are independent in
    dimension three.
    """
    for r in (r12, r13, r23):
        if not -1.0 <= r <= 1.0:
            raise ValueError("correlations must lie in [-1, 1]")
    return 0.125 + (math.asin(r12) + math.asin(r13) + math.asin(r23)) / (4.0 * math.pi)


# ---------------------------------------------------------------------------
# The fixed three-CRP example on a 3-stage arbiter chain.
#
# The transcript is stated in FEATURE space: three observed feature
# vectors with +1 responses and one held-out feature vector. The
# challenge preimages below feed the Monte Carlo engine; the feature
# vectors drive the closed form. With weights w ~ N(0, I_3), substitute
# X = w1 + w2, Y = w1 - w2 (independent N(0, 2)) and Z = w3 ~ N(0, 1):
# the three conditions become Z in (max(-X, -Y), X) and the target event
# is Z < Y, so the conditional probability is a ratio of two plane
# integrals with Phi-difference integrands.

WORKED_EXAMPLE_FEATURES = np.array(
    [[1, 1, 1], [1, 1, -1], [1, -1, 1]], dtype=np.int8
)
WORKED_EXAMPLE_RESPONSES = np.array([1, 1, 1], dtype=np.int8)
WORKED_EXAMPLE_EVAL_FEATURES = np.array([1, -1, -1], dtype=np.int8)

WORKED_EXAMPLE_CHALLENGES = from_features(WORKED_EXAMPLE_FEATURES)
WORKED_EXAMPLE_EVAL_CHALLENGE = from_features(WORKED_EXAMPLE_EVAL_FEATURES)


@dataclass(frozen=True)
class WorkedExample:
    """Quadrature result for the fixed three-CRP example."""

    probability: float
    advantage: float
    numerator: float
    denominator: float
    panels: int
    refinements: int
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "probability": self.probability,
            "advantage": self.advantage,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "panels": self.panels,
            "refinements": self.refinements,
            "tolerance": self.tolerance,
        }


def _panel_nodes(lo: float, hi: float, panels: int, order: int):
    """Composite Gauss-Legendre nodes and weights on [lo, hi]."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = np.diff(edges) / 2.0
    mid = (edges[:-1] + edges[1:]) / 2.0
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _example_integrals(panels: int, order: int = 12) -> tuple[float, float]:
    sigma = math.sqrt(2.0)
    lim = 8.0 * sigma
    nodes, weights = _panel_nodes(-lim, lim, panels, order)
    dens = np.exp(-(nodes**2) / 4.0) / math.sqrt(4.0 * math.pi)
    w1d = weights * dens
    # Phi is monotone, so Phi(min(x, y)) = min(Phi(x), Phi(y)); only the
    # 1-D node vector ever goes through the CDF.
    phi = normal_cdf(nodes)
    phi_neg = 1.0 - phi
    lo = np.maximum(phi_neg[:, None], phi_neg[None, :])
    num = np.clip(np.minimum(phi[:, None], phi[None, :]) - lo, 0.0, None)
    den = np.clip(phi[:, None] - lo, 0.0, None)
    return float(w1d @ (num @ w1d)), float(w1d @ (den @ w1d))


def worked_example(tolerance: float = 1e-8, max_panels: int = 1024) -> WorkedExample:
    """Conditional probability for the fixed example by panel refinement.

    The integrand kinks along the min/max creases, so raw composite
    grids converge only O(h^2); Richardson extrapolation over panel
    doublings removes that term. Stops when successive extrapolants of
    the probability agree within ``tolerance``.
    """
    panels = 16
    coarse = _example_integrals(panels)
    extrapolated = None
    refinements = 0
    while panels < max_panels:
        panels *= 2
        refinements += 1
        fine = _example_integrals(panels)
        num = fine[0] + (fine[0] - coarse[0]) / 3.0
        den = fine[1] + (fine[1] - coarse[1]) / 3.0
        prob = num / den
        if extrapolated is not None and abs(prob - extrapolated[0]) < tolerance:
            return WorkedExample(
                probability=prob,
                advantage=prob - 0.5,
                numerator=num,
                denominator=den,
                panels=panels,
                refinements=refinements,
                tolerance=tolerance,
            )
        extrapolated = (prob, num, den)
        coarse = fine
    raise RuntimeError(
        f"quadrature did not reach tolerance {tolerance} within {max_panels} panels"
    )

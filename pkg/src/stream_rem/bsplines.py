"""Clamped B-spline bases with evenly spaced interior knots.

``basis_eval`` runs the Cox-de Boor recursion literally over the whole knot
vector (0/0 terms are 0). ``basis_batch`` evaluates only the ``p + 1`` non-zero
functions per point, one recursion level at a time, and is the path used
during fitting.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InsufficientDf, InvalidDomain


@dataclass(frozen=True)
class SplineSpec:
    degree: int
    df: int
    lo: float
    hi: float
    knots: tuple

    def __post_init__(self):
        if len(self.knots) != self.df + self.degree + 1:
            raise ValueError(
                f"expected {self.df + self.degree + 1} knots, got {len(self.knots)}"
            )

    @classmethod
    def from_knots(cls, knots, degree: int) -> "SplineSpec":
        knots = tuple(float(k) for k in knots)
        return cls(degree, len(knots) - degree - 1, knots[0], knots[-1], knots)

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "df": self.df,
            "domain": [self.lo, self.hi],
            "knots": list(self.knots),
        }

    @classmethod
    def from_dict(cls, d) -> "SplineSpec":
        return cls(int(d["degree"]), int(d["df"]), float(d["domain"][0]), float(d["domain"][1]),
                   tuple(float(k) for k in d["knots"]))


def make_spec(lo: float, hi: float, degree: int = 3, df: int = 12) -> SplineSpec:
    if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
        raise InvalidDomain(f"need lo < hi, got [{lo}, {hi}]")
    if degree < 0 or df < degree + 1:
        raise InsufficientDf(f"df={df} must be at least degree + 1 = {degree + 1}")
    n_interior = df - degree - 1
    interior = [lo + (hi - lo) * k / (n_interior + 1) for k in range(1, n_interior + 1)]
    knots = [float(lo)] * (degree + 1) + interior + [float(hi)] * (degree + 1)
    return SplineSpec(degree, df, float(lo), float(hi), tuple(knots))


def _last_span(knots) -> int:
    """Index of the last non-empty knot interval (owns the right endpoint)."""
    j = len(knots) - 2
    while j > 0 and knots[j] >= knots[j + 1]:
        j -= 1
    return j


def basis_eval(spec: SplineSpec, x: float) -> np.ndarray:
    u = spec.knots
    p = spec.degree
    x = min(max(float(x), u[0]), u[-1])
    m = len(u) - 1
    last = _last_span(u)
    # degree-0 indicators on [u_j, u_{j+1}); the final non-empty span is closed
    level = [
        1.0 if (u[j] <= x < u[j + 1]) or (j == last and x == u[-1]) else 0.0
        for j in range(m)
    ]
    for q in range(1, p + 1):
        nxt = []
        for j in range(m - q):
            left = right = 0.0
            den = u[j + q] - u[j]
            if den > 0.0:
                left = (x - u[j]) / den * level[j]
            den = u[j + q + 1] - u[j + 1]
            if den > 0.0:
                right = (u[j + q + 1] - x) / den * level[j + 1]
            nxt.append(left + right)
        level = nxt
    return np.array(level[: spec.df])


def basis_batch(spec: SplineSpec, xs) -> np.ndarray:
    """n x df basis block for the points ``xs`` (clamped to the domain)."""
    u = np.asarray(spec.knots)
    p = spec.degree
    x = np.clip(np.asarray(xs, dtype=float).ravel(), u[0], u[-1])
    n = x.shape[0]
    # span index mu with u[mu] <= x < u[mu+1], restricted to p..df-1
    mu = np.searchsorted(u, x, side="right") - 1
    mu = np.clip(mu, p, spec.df - 1)
    vals = np.zeros((n, p + 1))
    vals[:, 0] = 1.0
    left = np.empty((n, p + 1))
    right = np.empty((n, p + 1))
    for q in range(1, p + 1):
        left[:, q] = x - u[mu + 1 - q]
        right[:, q] = u[mu + q] - x
        saved = np.zeros(n)
        for r in range(q):
            den = right[:, r + 1] + left[:, q - r]
            temp = np.divide(vals[:, r], den, out=np.zeros(n), where=den > 0)
            vals[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, q - r] * temp
        vals[:, q] = saved
    out = np.zeros((n, spec.df))
    cols = mu[:, None] - p + np.arange(p + 1)
    np.put_along_axis(out, cols, vals, axis=1)
    return out

"""Bivariate B-spline height field and logistic density projection.

The stiffener layout is a tensor-product spline surface over the unit
parametric square; its control heights are the design variables of the
optimizer.  A steep logistic maps the height margin at an element
centroid to a pseudo-density in (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError

# logistic exponents are clamped here to keep exp() finite
EXP_CLAMP = 500.0


def clamped_knots(n, p):
    """Open-uniform knot vector on [0, 1] for n basis functions of degree p."""
    if p < 0:
        raise ValidationError(f"degree must be >= 0, got {p}")
    if n < p + 1:
        raise ValidationError(f"need at least p+1={p + 1} control points, got {n}")
    interior = np.linspace(0.0, 1.0, n - p + 1)[1:-1]
    return np.concatenate([np.zeros(p + 1), interior, np.ones(p + 1)])


def _check_knots(knots, p):
    knots = np.asarray(knots, dtype=np.float64)
    n = len(knots) - p - 1
    if n < p + 1:
        raise ValidationError(f"knot vector too short for degree {p}")
    if (np.diff(knots) < 0).any():
        raise ValidationError("knot vector must be non-decreasing")
    if (knots[: p + 1] != knots[0]).any() or (knots[-p - 1 :] != knots[-1]).any():
        raise ValidationError(f"knot vector must repeat end knots {p + 1} times")
    return knots, n


def find_span(knots, p, zeta):
    """Index of the knot span containing zeta (last span at zeta = 1)."""
    n = len(knots) - p - 1
    span = int(np.searchsorted(knots, zeta, side="right")) - 1
    return min(max(span, p), n - 1)


def basis_block(knots, p, zeta):
    """The p+1 non-vanishing basis values at zeta.

    Returns (first, values) where ``first`` is the index of the first
    non-zero basis function.  Triangular recurrence, numerically exact
    partition of unity.
    """
    knots, _ = _check_knots(knots, p)
    if not (knots[0] <= zeta <= knots[-1]):
        raise ValidationError(f"parameter {zeta} outside [{knots[0]}, {knots[-1]}]")
    span = find_span(knots, p, zeta)
    vals = np.empty(p + 1)
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    vals[0] = 1.0
    for j in range(1, p + 1):
        left[j] = zeta - knots[span + 1 - j]
        right[j] = knots[span + j] - zeta
        saved = 0.0
        for r in range(j):
            denom = right[r + 1] + left[j - r]
            temp = vals[r] / denom
            vals[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        vals[j] = saved
    return span - p, vals


def basis_eval(knots, p, zeta):
    """All n basis function values at zeta as a dense vector."""
    knots, n = _check_knots(knots, p)
    first, block = basis_block(knots, p, zeta)
    out = np.zeros(n)
    out[first : first + p + 1] = block
    return out


@dataclass(frozen=True)
class BSplineHeightField:
    """Tensor-product height field over the unit square.

    heights[i, j] pairs basis i in the zeta direction with basis j in
    the eta direction; all heights live in [0, h_max].
    """

    degree_u: int
    degree_v: int
    knots_u: np.ndarray
    knots_v: np.ndarray
    heights: np.ndarray
    h_max: float
    chart_id: int = 0

    def __post_init__(self):
        ku, n = _check_knots(self.knots_u, self.degree_u)
        kv, m = _check_knots(self.knots_v, self.degree_v)
        heights = np.asarray(self.heights, dtype=np.float64)
        if heights.shape != (n, m):
            raise ValidationError(
                f"heights must be ({n}, {m}) for these knots, got {heights.shape}"
            )
        if self.h_max <= 0:
            raise ValidationError(f"h_max must be positive, got {self.h_max}")
        if heights.min() < 0.0 or heights.max() > self.h_max:
            raise ValidationError("control heights must lie in [0, h_max]")
        object.__setattr__(self, "knots_u", ku)
        object.__setattr__(self, "knots_v", kv)
        object.__setattr__(self, "heights", heights)

    @classmethod
    def uniform(cls, degree_u, degree_v, n, m, h_max, value=0.0, chart_id=0):
        """Field with open-uniform knots and constant control heights."""
        return cls(
            degree_u=degree_u,
            degree_v=degree_v,
            knots_u=clamped_knots(n, degree_u),
            knots_v=clamped_knots(m, degree_v),
            heights=np.full((n, m), float(value)),
            h_max=float(h_max),
            chart_id=chart_id,
        )

    @property
    def shape(self):
        return self.heights.shape

    def with_heights(self, heights):
        return BSplineHeightField(
            self.degree_u,
            self.degree_v,
            self.knots_u,
            self.knots_v,
            heights,
            self.h_max,
            self.chart_id,
        )

    def value(self, zeta, eta):
        """Field height at (zeta, eta); uses only the active basis block."""
        iu, bu = basis_block(self.knots_u, self.degree_u, zeta)
        iv, bv = basis_block(self.knots_v, self.degree_v, eta)
        block = self.heights[iu : iu + self.degree_u + 1, iv : iv + self.degree_v + 1]
        return float(bu @ block @ bv)

    def weights_at(self, zeta, eta):
        """Per-control-point linear weights at (zeta, eta).

        Returns (iu, iv, w) with w of shape (degree_u+1, degree_v+1); the
        field value is ``sum(w * heights[iu:iu+p+1, iv:iv+q+1])``.
        """
        iu, bu = basis_block(self.knots_u, self.degree_u, zeta)
        iv, bv = basis_block(self.knots_v, self.degree_v, eta)
        return iu, iv, np.outer(bu, bv)

    # -- serialization ----------------------------------------------------

    def save(self, path):
        n, m = self.heights.shape
        lines = [
            f"degree_u {self.degree_u}",
            f"degree_v {self.degree_v}",
            f"n {n}",
            f"m {m}",
            f"h_max {self.h_max!r}",
            f"chart {self.chart_id}",
            "knots_u " + " ".join(repr(float(k)) for k in self.knots_u),
            "knots_v " + " ".join(repr(float(k)) for k in self.knots_v),
        ]
        for row in self.heights:
            lines.append(" ".join(repr(float(h)) for h in row))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path):
        lines = Path(path).read_text().strip().splitlines()
        header = {}
        rows = []
        for line in lines:
            parts = line.split()
            if parts[0] in ("degree_u", "degree_v", "n", "m", "chart"):
                header[parts[0]] = int(parts[1])
            elif parts[0] == "h_max":
                header["h_max"] = float(parts[1])
            elif parts[0] in ("knots_u", "knots_v"):
                header[parts[0]] = np.array([float(x) for x in parts[1:]])
            else:
                rows.append([float(x) for x in parts])
        heights = np.array(rows)
        if heights.shape != (header["n"], header["m"]):
            raise ValidationError(
                f"field file promises {header['n']}x{header['m']} heights, "
                f"got {heights.shape}"
            )
        return cls(
            degree_u=header["degree_u"],
            degree_v=header["degree_v"],
            knots_u=header["knots_u"],
            knots_v=header["knots_v"],
            heights=heights,
            h_max=header["h_max"],
            chart_id=header.get("chart", 0),
        )


# -- density projection ----------------------------------------------------


def heaviside_project(h_c, layer_mid, beta):
    """Logistic projection of a height margin to a pseudo-density in (0, 1)."""
    if beta <= 0:
        raise ValidationError(f"beta must be positive, got {beta}")
    x = np.clip(beta * (np.asarray(h_c, dtype=np.float64) - layer_mid), -EXP_CLAMP, EXP_CLAMP)
    e = np.exp(x)
    rho = e / (1.0 + e)
    if np.ndim(h_c) == 0:
        return float(rho)
    return rho


def heaviside_derivative(h_c, layer_mid, beta):
    """d rho / d h_c of the logistic projection; strictly positive."""
    rho = heaviside_project(h_c, layer_mid, beta)
    return beta * rho * (1.0 - rho)

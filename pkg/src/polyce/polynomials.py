"""Sparse multivariate polynomials and univariate maximization utilities.

Polynomials are stored as a map from exponent tuples to coefficients
(doubles throughout; no exact rationals).  Dense univariate coefficient
arrays are used only where hot loops or root finding need them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly


class PolynomialError(ValueError):
    pass


@dataclass(frozen=True)
class MultiPoly:
    """Multivariate polynomial: ``terms[(e1,...,en)] = coefficient``.

    Zero coefficients are never stored.  All exponent tuples have length
    ``num_vars`` and nonnegative integer entries.
    """

    num_vars: int
    terms: dict[tuple[int, ...], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.num_vars < 1:
            raise PolynomialError("num_vars must be a positive integer")
        clean = {}
        for exp, coef in self.terms.items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != self.num_vars:
                raise PolynomialError(
                    f"exponent tuple {exp} has length {len(exp)}, expected {self.num_vars}"
                )
            if any(e < 0 for e in exp):
                raise PolynomialError(f"negative exponent in {exp}")
            coef = float(coef)
            if not math.isfinite(coef):
                raise PolynomialError(f"non-finite coefficient for {exp}")
            if coef != 0.0:
                clean[exp] = clean.get(exp, 0.0) + coef
        object.__setattr__(self, "terms", clean)

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(num_vars: int) -> "MultiPoly":
        return MultiPoly(num_vars, {})

    @staticmethod
    def constant(num_vars: int, c: float) -> "MultiPoly":
        return MultiPoly(num_vars, {(0,) * num_vars: c})

    @staticmethod
    def variable(num_vars: int, index: int) -> "MultiPoly":
        exp = [0] * num_vars
        exp[index] = 1
        return MultiPoly(num_vars, {tuple(exp): 1.0})

    @staticmethod
    def univariate(coeffs) -> "MultiPoly":
        """Build a one-variable polynomial from ascending coefficients."""
        return MultiPoly(1, {(k,): float(c) for k, c in enumerate(coeffs)})

    # -- algebra -----------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = MultiPoly.constant(self.num_vars, other)
        if other.num_vars != self.num_vars:
            raise PolynomialError("mixed-arity addition")
        terms = dict(self.terms)
        for exp, coef in other.terms.items():
            terms[exp] = terms.get(exp, 0.0) + coef
        return MultiPoly(self.num_vars, terms)

    __radd__ = __add__

    def __neg__(self):
        return MultiPoly(self.num_vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = MultiPoly.constant(self.num_vars, other)
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return MultiPoly(self.num_vars, {e: c * other for e, c in self.terms.items()})
        if other.num_vars != self.num_vars:
            raise PolynomialError("mixed-arity multiplication")
        terms: dict[tuple[int, ...], float] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0.0) + c1 * c2
        return MultiPoly(self.num_vars, terms)

    __rmul__ = __mul__

    # -- queries -----------------------------------------------------------

    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def degree_in(self, var: int) -> int:
        return max((e[var] for e in self.terms), default=0)

    def __call__(self, point) -> float:
        point = np.asarray(point, dtype=float)
        if point.shape != (self.num_vars,):
            raise PolynomialError(
                f"point has shape {point.shape}, expected ({self.num_vars},)"
            )
        total = 0.0
        for exp, coef in self.terms.items():
            v = coef
            for x, e in zip(point, exp):
                if e:
                    v *= x**e
            total += v
        return total

    def restrict(self, var: int, others: dict[int, float]) -> np.ndarray:
        """Fix every variable except ``var`` and return ascending univariate
        coefficients in the remaining variable."""
        coeffs = np.zeros(self.degree_in(var) + 1)
        for exp, coef in self.terms.items():
            v = coef
            for j, e in enumerate(exp):
                if j == var or e == 0:
                    continue
                v *= others[j] ** e
            coeffs[exp[var]] += v
        return coeffs

    def univariate_coeffs(self) -> np.ndarray:
        """Ascending coefficient array; only valid when ``num_vars == 1``."""
        if self.num_vars != 1:
            raise PolynomialError("not a univariate polynomial")
        coeffs = np.zeros(self.total_degree() + 1)
        for (k,), c in self.terms.items():
            coeffs[k] = c
        return coeffs


def poly_eval(coeffs, x):
    """Evaluate an ascending-coefficient univariate polynomial."""
    return npoly.polyval(x, np.asarray(coeffs, dtype=float))


def _trim_negligible(coeffs: np.ndarray, rel: float = 1e-12) -> np.ndarray:
    """Drop trailing coefficients below ``rel`` times the largest magnitude;
    they move values on [-1,1] by less than any tolerance in this package
    but wreck the conditioning of the companion matrix."""
    if coeffs.size == 0:
        return coeffs
    floor = rel * float(np.abs(coeffs).max())
    n = coeffs.size
    while n > 0 and abs(coeffs[n - 1]) <= floor:
        n -= 1
    return coeffs[:n]


def _polish_root(deriv: np.ndarray, t: float, sweeps: int = 12) -> float:
    """Newton iteration on the derivative, clamped to [-1,1]."""
    d2 = npoly.polyder(deriv)
    for _ in range(sweeps):
        slope = npoly.polyval(t, d2)
        if slope == 0.0:
            break
        step = npoly.polyval(t, deriv) / slope
        if not math.isfinite(step):
            break
        t = min(1.0, max(-1.0, t - step))
        if abs(step) < 1e-14:
            break
    return t


def maximize_univariate(p, near_tol: float = 1e-6):
    """Global maximum of a univariate polynomial over [-1, 1].

    Candidate points are the real roots of the derivative (companion-matrix
    eigenvalues, via ``numpy.polynomial.polyroots``) plus both endpoints.
    Returns ``(t_star, value, maximizers)`` where ``t_star`` is the smallest
    maximizer and ``maximizers`` lists every candidate whose value is within
    ``near_tol`` of the maximum, sorted ascending.

    Constant polynomials return ``(-1.0, constant, [-1.0])``.
    """
    if isinstance(p, MultiPoly):
        coeffs = p.univariate_coeffs()
    else:
        coeffs = np.atleast_1d(np.asarray(p, dtype=float))
    coeffs = _trim_negligible(coeffs)
    if coeffs.size <= 1:
        c = float(coeffs[0]) if coeffs.size else 0.0
        return -1.0, c, [-1.0]

    candidates = [-1.0, 1.0]
    deriv = npoly.polyder(coeffs)
    deriv = _trim_negligible(deriv)
    if deriv.size > 1:
        roots = npoly.polyroots(deriv)
        for r in roots:
            if abs(r.imag) < 1e-7 and -1.0 - 1e-9 <= r.real <= 1.0 + 1e-9:
                candidates.append(_polish_root(deriv, float(np.clip(r.real, -1, 1))))
    # coarse safety net against any missed critical point
    candidates.extend(_polish_root(deriv, t) for t in np.linspace(-1.0, 1.0, 17))

    merged: list[float] = []
    for t in sorted(candidates):
        if not merged or t - merged[-1] > 1e-9:
            merged.append(t)
    values = poly_eval(coeffs, np.array(merged))
    best = float(values.max())
    maximizers = [t for t, v in zip(merged, values) if v >= best - near_tol]
    return maximizers[0], best, maximizers


def merge_points(points, tol: float = 1e-9) -> np.ndarray:
    """Sort and deduplicate strategy points, merging any within ``tol``."""
    pts = sorted(float(p) for p in points)
    merged: list[float] = []
    for p in pts:
        if merged and p - merged[-1] <= tol:
            continue
        merged.append(p)
    return np.array(merged)

"""Deterministic quadrature on ``[0, 1]`` and small function helpers."""

from __future__ import annotations

import warnings
from typing import Callable, Iterable

import numpy as np
from scipy import integrate as _integrate

from .exceptions import NumericError

TOL = 1e-10


def integrate(f: Callable[[float], float], breakpoints: Iterable[float] = (), tol: float = TOL) -> float:
    """Integrate ``f`` over ``[0, 1]`` with adaptive Gauss-Kronrod.

    ``breakpoints`` are interior points where ``f`` has kinks; the interval is
    split there so the local rule keeps its order.
    """
    points = sorted({float(b) for b in breakpoints if 0.0 < b < 1.0})
    with warnings.catch_warnings():
        warnings.simplefilter("error", _integrate.IntegrationWarning)
        try:
            value, err = _integrate.quad(f, 0.0, 1.0, points=points or None,
                                         epsabs=tol, epsrel=tol, limit=500)
        except _integrate.IntegrationWarning as exc:
            raise NumericError(f"quadrature did not converge: {exc}") from exc
    if not np.isfinite(value):
        raise NumericError(f"quadrature produced a non-finite value ({value!r}, error estimate {err!r})")
    return float(value)


class Polynomial:
    """Polynomial ``sum_i c[i] * t**i`` that evaluates cheaply on floats and arrays."""

    __slots__ = ("coef",)

    def __init__(self, coef):
        coef = np.atleast_1d(np.asarray(coef, dtype=float))
        coef = np.trim_zeros(coef, "b")
        self.coef = tuple(coef.tolist()) or (0.0,)

    def __call__(self, t):
        acc = self.coef[-1]
        for c in self.coef[-2::-1]:
            acc = acc * t + c
        if isinstance(t, np.ndarray) and not isinstance(acc, np.ndarray):
            return np.full(t.shape, acc)
        return acc

    def __repr__(self) -> str:
        return f"Polynomial({list(self.coef)})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and self.coef == other.coef

    def __hash__(self) -> int:
        return hash(self.coef)

    @property
    def is_zero(self) -> bool:
        return self.coef == (0.0,)

    def deriv(self) -> "Polynomial":
        return Polynomial(np.polynomial.polynomial.polyder(self.coef))

    def real_roots(self, lo: float = 0.0, hi: float = 1.0) -> list[float]:
        """Real roots strictly inside ``(lo, hi)``."""
        if len(self.coef) < 2:
            return []
        roots = np.polynomial.polynomial.polyroots(self.coef)
        real = roots[np.abs(roots.imag) < 1e-12].real
        return sorted(float(r) for r in real if lo < r < hi)


def evaluate_on(f: Callable, t: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on an array of times, vectorized when ``f`` allows it."""
    try:
        out = np.asarray(f(t), dtype=float)
    except (TypeError, ValueError):
        out = None
    if out is None or out.shape not in (t.shape, ()):
        return np.array([f(float(s)) for s in t])
    return np.broadcast_to(out, t.shape)

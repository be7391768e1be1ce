"""Time-stepping schemes for ``X(1)``.

All path-based schemes read the driving Wiener process through
:meth:`BrownianPath.sample_at`, so their cost ``nu`` is the number of new
positive times they observe. The family is built up as follows:

* :func:`euler` and :func:`milstein` on an arbitrary grid;
* :func:`wagner_platen_truncated`, the order-1.5 Taylor step without the
  time integral of ``W``, which only needs point values of ``W``;
* :func:`wagner_platen_full`, the complete step, driven by increments and
  their time integrals instead of a path;
* :func:`estimate_weights`, the discrete approximation of the weight
  process ``Y(t) = M(t, 1) G(t, X(t))`` on a coarse grid;
* :func:`adaptive_scheme`, which spends extra observations inside each
  coarse interval and adds the resulting estimate of the missing
  ``G``-term to the truncated scheme;
* the budget rules :func:`budgets` and the composed schemes
  :func:`scheme_equi`, :func:`scheme_star_star`, :func:`scheme_star` and
  :func:`scheme_fixed`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .brownian import BrownianPath, sample_increment_with_area
from .exceptions import DomainError
from .problem import CoefficientSet

# Relative slack when flooring budgets; absorbs rounding when a budget
# is an integer up to a few ulps.
_FLOOR_SNAP = 1e-12


def equidistant_grid(k: int) -> np.ndarray:
    """Times ``l / k`` for ``l = 0..k``; every scheme builds its grid here."""
    if k < 1:
        raise DomainError(f"grid size must be at least 1, got {k}")
    return np.arange(k + 1) / k


def _check_grid(grid) -> list[float]:
    times = np.asarray(grid, dtype=float)
    if times.ndim != 1 or len(times) < 2:
        raise DomainError("grid needs at least the two points 0 and 1")
    if times[0] != 0.0 or times[-1] != 1.0:
        raise DomainError("grid must start at 0 and end at 1")
    if not np.all(np.diff(times) > 0):
        raise DomainError("grid times must be strictly increasing")
    return times.tolist()


def _initial(coeffs: CoefficientSet, path_or_rng, x0):
    if x0 is not None:
        return float(x0)
    rng = getattr(path_or_rng, "rng", path_or_rng)
    return float(coeffs.x0_sampler(rng))


@dataclass
class SchemeResult:
    """Outcome of one scheme run on one path.

    ``nu`` counts the distinct positive times at which the run observed ``W``;
    ``mu`` holds the per-interval budgets of an adaptive run, in which case
    ``nu == k + sum(mu)`` on a fresh path.
    """

    x1_hat: float
    nu: int
    k: int
    mu: np.ndarray | None = None
    trajectory: np.ndarray | None = field(default=None, repr=False)


@dataclass
class WeightEstimate:
    """Coarse-grid estimates ``Y_k(t_l)`` of the weight process.

    ``m_suffix[l]`` is the discrete field ``M_k(t_l, 1)``, so
    ``m_suffix[k] == 1`` and ``y_hat[l] == m_suffix[l + 1] * G(t_l, wpt_values[l])``.
    """

    k: int
    y_hat: np.ndarray
    m_suffix: np.ndarray
    wpt_values: np.ndarray
    grid: np.ndarray = field(repr=False)
    g_values: np.ndarray = field(repr=False)


def euler(coeffs: CoefficientSet, path: BrownianPath, grid, x0: float | None = None) -> SchemeResult:
    """Euler-Maruyama approximation of ``X(1)`` on ``grid``."""
    times = _check_grid(grid)
    start = path.eval_count
    x = _initial(coeffs, path, x0)
    a, s = coeffs.a, coeffs.sigma
    sample = path.sample_at
    t0 = times[0]
    w0 = sample(t0)
    for t1 in times[1:]:
        w1 = sample(t1)
        x = x + a(t0, x) * (t1 - t0) + s(t0, x) * (w1 - w0)
        t0, w0 = t1, w1
    return SchemeResult(x, path.eval_count - start, len(times) - 1)


def milstein(coeffs: CoefficientSet, path: BrownianPath, grid, x0: float | None = None) -> SchemeResult:
    """Milstein approximation of ``X(1)`` on ``grid``.

    General scalar form with the correction ``sigma sigma01 (dW^2 - dt) / 2``.
    For a state independent diffusion the correction vanishes and the
    scheme coincides with :func:`euler`.
    """
    times = _check_grid(grid)
    start = path.eval_count
    x = _initial(coeffs, path, x0)
    a, s, s01 = coeffs.a, coeffs.sigma, coeffs.sigma01
    sample = path.sample_at
    t0 = times[0]
    w0 = sample(t0)
    for t1 in times[1:]:
        w1 = sample(t1)
        dt, dw = t1 - t0, w1 - w0
        sx = s(t0, x)
        x = x + a(t0, x) * dt + sx * dw + 0.5 * sx * s01(t0, x) * (dw * dw - dt)
        t0, w0 = t1, w1
    return SchemeResult(x, path.eval_count - start, len(times) - 1)


def _wp_step(c: CoefficientSet, t: float, x: float, dt: float, dw: float):
    """Truncated Wagner-Platen step. Returns ``(x_next, a01, sigma01, G)`` at ``(t, x)``."""
    a = c.a(t, x)
    s = c.sigma(t, x)
    a01 = c.a01(t, x)
    s01 = c.sigma01(t, x)
    s10 = c.sigma10(t, x)
    s02 = c.sigma02(t, x)
    ss = s * s
    x_next = (x + a * dt + s * dw
              + 0.5 * s * s01 * (dw * dw - dt)
              + (s10 + a * s01 - 0.5 * s * s01 * s01) * dw * dt
              + (s * s01 * s01 + ss * s02) * (dw * dw * dw) / 6.0
              + 0.5 * (c.a10(t, x) + a * a01 + 0.5 * ss * c.a02(t, x)) * dt * dt)
    g = s * a01 - s10 - a * s01 - 0.5 * ss * s02
    return x_next, a01, s01, g


def _run_truncated(coeffs, path, times, x0):
    k = len(times) - 1
    traj = np.empty(k + 1)
    dws = np.empty(k)
    a01s = np.empty(k)
    s01s = np.empty(k)
    gs = np.empty(k)
    x = x0
    traj[0] = x
    sample = path.sample_at
    t0 = times[0]
    w0 = sample(t0)
    for l in range(k):
        t1 = times[l + 1]
        w1 = sample(t1)
        dw = w1 - w0
        x, a01s[l], s01s[l], gs[l] = _wp_step(coeffs, t0, x, t1 - t0, dw)
        traj[l + 1] = x
        dws[l] = dw
        t0, w0 = t1, w1
    return traj, dws, a01s, s01s, gs


def wagner_platen_truncated(coeffs: CoefficientSet, path: BrownianPath, grid,
                            x0: float | None = None) -> SchemeResult:
    """Wagner-Platen scheme without the ``G``-term; uses point values of ``W`` only.

    The full trajectory at the grid points is kept in ``trajectory``.
    """
    times = _check_grid(grid)
    start = path.eval_count
    traj, *_ = _run_truncated(coeffs, path, times, _initial(coeffs, path, x0))
    return SchemeResult(float(traj[-1]), path.eval_count - start, len(times) - 1, trajectory=traj)


def wagner_platen_full(coeffs: CoefficientSet, rng: np.random.Generator, k: int,
                       x0: float | None = None, increments=None) -> SchemeResult:
    """Full Wagner-Platen scheme on the equidistant ``k``-grid.

    Each step consumes an increment ``dW`` and the integral
    ``int (W(s) - W(t_l)) ds`` over the step. They are drawn fresh from
    ``rng`` unless ``increments = (dw, area)`` supplies both arrays, which is
    how the harness couples the scheme to a reference path. ``nu`` is ``k``.
    """
    if k < 1:
        raise DomainError(f"number of steps must be at least 1, got {k}")
    times = equidistant_grid(k).tolist()
    x = _initial(coeffs, rng, x0)
    if increments is not None:
        dws, areas = (np.asarray(v, dtype=float) for v in increments)
        if dws.shape != (k,) or areas.shape != (k,):
            raise DomainError(f"increments must be two arrays of length {k}")
    traj = np.empty(k + 1)
    traj[0] = x
    for l in range(k):
        t0, t1 = times[l], times[l + 1]
        if increments is None:
            inc = sample_increment_with_area(rng, t1 - t0)
            dw, area = inc.dw, inc.area
        else:
            dw, area = dws[l], areas[l]
        x, _, _, g = _wp_step(coeffs, t0, x, t1 - t0, dw)
        x = x + g * area
        traj[l + 1] = x
    return SchemeResult(float(x), k, k, trajectory=traj)


def estimate_weights(coeffs: CoefficientSet, path: BrownianPath, k: int,
                     x0: float | None = None) -> WeightEstimate:
    """Run the truncated scheme on ``l / k`` and estimate ``Y`` at ``t_0..t_{k-1}``.

    The field is approximated by products of the Euler factors
    ``1 + a01 dt + sigma01 dW`` along the truncated trajectory, accumulated
    in one backward pass.
    """
    grid = equidistant_grid(k)
    times = grid.tolist()
    traj, dws, a01s, s01s, gs = _run_truncated(coeffs, path, times, _initial(coeffs, path, x0))
    m_hat = 1.0 + a01s * np.diff(grid) + s01s * dws
    m_suffix = np.empty(k + 1)
    m_suffix[k] = 1.0
    for l in range(k - 1, -1, -1):
        m_suffix[l] = m_suffix[l + 1] * m_hat[l]
    y_hat = m_suffix[1:] * gs
    return WeightEstimate(k, y_hat, m_suffix, traj, grid, gs)


def default_k_rule(n: int, exponent: float = 0.75) -> int:
    """Coarse grid size ``ceil(n ** exponent)``, clipped to ``[1, n]``.

    Any exponent in ``(2/3, 1)`` makes both ``k/n`` and ``n/k^{3/2}`` vanish.
    """
    if n < 1:
        raise DomainError(f"budget must be at least 1, got {n}")
    return min(n, max(1, math.ceil(n ** exponent - 1e-9)))


class KRule:
    """Callable ``n -> ceil(n ** exponent)`` with a configurable exponent."""

    def __init__(self, exponent: float = 0.75):
        if not 2.0 / 3.0 < exponent < 1.0:
            raise DomainError(f"exponent must lie in (2/3, 1), got {exponent}")
        self.exponent = exponent

    def __call__(self, n: int) -> int:
        return default_k_rule(n, self.exponent)

    def __repr__(self) -> str:
        return f"KRule({self.exponent})"


@dataclass(frozen=True)
class BudgetRule:
    """How many extra observations each coarse interval receives.

    ``variant`` is ``"star_star"`` (varying total, needs ``p``), ``"star"``
    (fixed total), ``"fixed"`` (prefixed, needs ``moment_provider``) or
    ``"equi"`` (none). ``moment_provider`` gives ``(E|Y(t)|^2)^{1/2}`` either as
    a callable of ``t`` or as an array over the coarse grid points.
    """

    variant: str
    n: int
    p: float = 2.0
    moment_provider: Callable[[float], float] | Sequence[float] | None = None
    k_rule: Callable[[int], int] = default_k_rule

    def __post_init__(self):
        if self.variant not in ("star_star", "star", "fixed", "equi"):
            raise DomainError(f"unknown budget variant {self.variant!r}")
        if self.variant == "fixed" and self.moment_provider is None:
            raise DomainError("the fixed rule needs a moment provider")
        if self.p < 1:
            raise DomainError(f"error exponent must be at least 1, got {self.p}")

    @property
    def k(self) -> int:
        if self.variant == "equi":
            return self.n
        k = self.k_rule(self.n)
        if not 1 <= k <= self.n:
            raise DomainError(f"k_rule({self.n}) = {k} is outside [1, {self.n}]")
        return k


def snapped_floor(x):
    """``floor`` that treats values within ``1e-12`` (relative) below an integer as that integer."""
    x = np.asarray(x, dtype=float)
    return np.floor(x + _FLOOR_SNAP * np.maximum(1.0, np.abs(x))).astype(np.int64)


def _provider_values(provider, grid: np.ndarray, k: int) -> np.ndarray:
    if callable(provider):
        return np.array([float(provider(t)) for t in grid[:k]])
    values = np.asarray(provider, dtype=float)
    if values.shape != (k,):
        raise DomainError(f"moment provider array must have length {k}, got shape {values.shape}")
    return values


def budgets(weights: WeightEstimate, rule: BudgetRule) -> np.ndarray:
    """Per-interval budgets ``mu_l`` for the adaptive scheme.

    Observations are distributed proportionally to ``|Y_k(t_l)|^{2/3}``.
    Under ``star_star`` the total scales with ``Ybar^{p/(p+1)}`` where
    ``Ybar = (mean |Y_k|^{2/3})^{3/2}``; under ``star`` and ``fixed`` the total
    is at most ``n - k``.
    """
    k, n = weights.k, rule.n
    if n < k:
        raise DomainError(f"budget n={n} is smaller than the coarse grid size k={k}")
    if rule.variant == "equi":
        return np.zeros(k, dtype=np.int64)
    if rule.variant == "fixed":
        mag = np.abs(_provider_values(rule.moment_provider, weights.grid, k))
    else:
        mag = np.abs(weights.y_hat)
    s = mag ** (2.0 / 3.0)
    total = s.sum()
    mean = total / k
    y_bar = mean ** 1.5
    degenerate = not y_bar > np.finfo(float).eps * mag.max(initial=0.0)
    if rule.variant == "star_star":
        if degenerate:
            return np.zeros(k, dtype=np.int64)
        p = rule.p
        return snapped_floor(n * (s / total) * mean ** (1.5 * p / (p + 1.0)))
    if degenerate:
        return np.full(k, (n - k) // k, dtype=np.int64)
    return snapped_floor((n - k) * (s / total))


def adaptive_scheme(coeffs: CoefficientSet, path: BrownianPath, weights: WeightEstimate, mu) -> SchemeResult:
    """Correct the truncated endpoint with ``sum_l Y_k(t_l) int (W~ - W(t_l)) dt``.

    ``W~`` is the piecewise linear interpolation of ``W`` at ``mu_l`` extra
    equidistant points inside each coarse interval; its integral is exact
    by the trapezoid rule.
    """
    mu = np.asarray(mu, dtype=np.int64)
    k = weights.k
    if mu.shape != (k,):
        raise DomainError(f"budget array must have length {k}, got shape {mu.shape}")
    if (mu < 0).any():
        raise DomainError("budgets must be nonnegative")
    start = path.eval_count
    sample = path.sample_at
    grid = weights.grid.tolist()
    y_hat = weights.y_hat.tolist()
    correction = 0.0
    for l in range(k):
        t0, t1 = grid[l], grid[l + 1]
        w0 = sample(t0)
        m = int(mu[l])
        prev_t, prev_d = t0, 0.0
        area = 0.0
        if m:
            step = (t1 - t0) / (m + 1)
            for r in range(1, m + 1):
                tr = t0 + r * step
                d = sample(tr) - w0
                area += (tr - prev_t) * (prev_d + d)
                prev_t, prev_d = tr, d
        d = sample(t1) - w0
        area += (t1 - prev_t) * (prev_d + d)
        correction += y_hat[l] * (0.5 * area)
    x1 = float(weights.wpt_values[k]) + correction
    return SchemeResult(x1, k + path.eval_count - start, k, mu=mu)


def scheme_equi(coeffs: CoefficientSet, path: BrownianPath, n: int, x0: float | None = None) -> SchemeResult:
    """Corrected scheme on the equidistant grid ``l / n`` without extra points."""
    if n < 1:
        raise DomainError(f"budget must be at least 1, got {n}")
    start = path.eval_count
    weights = estimate_weights(coeffs, path, n, x0)
    res = adaptive_scheme(coeffs, path, weights, np.zeros(n, dtype=np.int64))
    res.nu = path.eval_count - start
    return res


def _compose(coeffs, path, rule: BudgetRule, x0) -> SchemeResult:
    start = path.eval_count
    weights = estimate_weights(coeffs, path, rule.k, x0)
    res = adaptive_scheme(coeffs, path, weights, budgets(weights, rule))
    res.nu = path.eval_count - start
    return res


def scheme_star_star(coeffs: CoefficientSet, path: BrownianPath, n: int, p: float = 2.0,
                     k_rule: Callable[[int], int] = default_k_rule, x0: float | None = None) -> SchemeResult:
    """Adaptive scheme whose number of observations depends on the path."""
    return _compose(coeffs, path, BudgetRule("star_star", n, p=p, k_rule=k_rule), x0)


def scheme_star(coeffs: CoefficientSet, path: BrownianPath, n: int,
                k_rule: Callable[[int], int] = default_k_rule, x0: float | None = None) -> SchemeResult:
    """Adaptive scheme using between ``n - k`` and ``n`` observations on every path."""
    return _compose(coeffs, path, BudgetRule("star", n, k_rule=k_rule), x0)


def scheme_fixed(coeffs: CoefficientSet, path: BrownianPath, n: int, moment_provider,
                 k_rule: Callable[[int], int] = default_k_rule, x0: float | None = None) -> SchemeResult:
    """Scheme on a prefixed grid with density driven by ``(E|Y(t)|^2)^{1/3}``."""
    return _compose(coeffs, path, BudgetRule("fixed", n, moment_provider=moment_provider, k_rule=k_rule), x0)

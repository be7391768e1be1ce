"""Monte Carlo error estimation, convergence studies and scheme comparisons.

Each replication owns an independent generator stream ``make_rng(seed, r)``.
The scheme runs first on a fresh :class:`BrownianPath`; its cost is read off
the path, and only then is the same path refined to compute the reference
value of ``X(1)``. The scheme's observation sites are therefore a subset of
the reference's, and the reference refinement never counts as cost.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np

from .brownian import BrownianPath, make_rng
from .constants import analytic_constants, gaussian_abs_moment, weight_rms
from .exceptions import ConfigError, DomainError
from .quadrature import evaluate_on
from .problem import (
    AdditiveProblem,
    CoefficientSet,
    DEFAULT_REFERENCE_RESOLUTION,
    LinearProblem,
    exact_terminal_additive,
    exact_terminal_linear,
)
from .schemes import (
    _wp_step,
    default_k_rule,
    equidistant_grid,
    estimate_weights,
    euler,
    milstein,
    scheme_equi,
    scheme_fixed,
    scheme_star,
    scheme_star_star,
    wagner_platen_full,
    wagner_platen_truncated,
)

SCHEME_IDS = ("euler", "milstein", "wpt", "wp_full", "equi", "star", "star_star", "fixed")
CSV_COLUMNS = ("scheme", "n", "p", "reps", "seed", "e_p", "ci_low", "ci_high",
               "mean_cost", "cost_times_e", "target_constant")

_Z95 = NormalDist().inv_cdf(0.975)
_SQRT12 = math.sqrt(12.0)
# replications used to estimate second moments of Y when no closed form exists
_MOMENT_PREPASS_REPS = 1000
_PREPASS_STREAM_SALT = 0x5EED_F1ED


class ReferenceWarning(UserWarning):
    """The fine-grid reference is not accurate enough for the errors measured."""


@dataclass
class ErrorEstimate:
    """Estimate of ``e_p = (E|X(1) - X_hat(1)|^p)^{1/p}`` with a 95% interval.

    ``errors`` and ``costs`` keep the per-replication ``|X(1) - X_hat(1)|`` and
    ``nu`` for paired post-processing.
    """

    scheme: str
    n: int
    p: float
    e_p_hat: float
    ci_low: float
    ci_high: float
    mean_cost: float
    reps: int
    seed: int
    errors: np.ndarray = field(repr=False)
    costs: np.ndarray = field(repr=False)

    @property
    def cost_times_e(self) -> float:
        return self.mean_cost * self.e_p_hat


@dataclass
class StudyRow:
    """One budget of a study; ``n_times_e = mean_cost * e_p_hat``."""

    n: int
    e_p: ErrorEstimate
    n_times_e: float
    constant_target: float | None = None

    def as_record(self) -> dict:
        e = self.e_p
        return {"scheme": e.scheme, "n": self.n, "p": e.p, "reps": e.reps, "seed": e.seed,
                "e_p": e.e_p_hat, "ci_low": e.ci_low, "ci_high": e.ci_high,
                "mean_cost": e.mean_cost, "cost_times_e": self.n_times_e,
                "target_constant": self.constant_target}


@dataclass
class Study:
    """Rows of a convergence study and the fitted log-log slopes."""

    scheme: str
    rows: list[StudyRow]
    slope: float
    guarded_slope: float
    intercept: float


def _coefficients(problem) -> CoefficientSet:
    if isinstance(problem, CoefficientSet):
        return problem
    return problem.coefficients


def _check_scheme(scheme_id: str) -> None:
    if scheme_id not in SCHEME_IDS:
        raise ConfigError(f"unknown scheme {scheme_id!r}; expected one of {', '.join(SCHEME_IDS)}")


def default_resolution(n: int) -> int:
    """Reference resolution ``max(4096, n^2)`` for a finest scheme grid ``n``."""
    return max(DEFAULT_REFERENCE_RESOLUTION, n * n)


def fine_reference(problem, path: BrownianPath, m: int = DEFAULT_REFERENCE_RESOLUTION,
                   x0: float | None = None) -> float:
    """Reference ``X(1)`` on ``path``: the closed form when known, else fine-grid Milstein.

    The Milstein fallback on ``m`` equidistant steps has ``e_2`` bias of order
    ``1/m``; see :func:`check_reference`.
    """
    if m < 2:
        raise DomainError(f"reference resolution must be at least 2, got {m}")
    if isinstance(problem, LinearProblem):
        return exact_terminal_linear(problem, path, m, x0)
    if isinstance(problem, AdditiveProblem):
        return exact_terminal_additive(problem, path, m, x0)
    coeffs = _coefficients(problem)
    grid = equidistant_grid(m)
    path.refine(grid)
    return milstein(coeffs, path, grid, x0).x1_hat


def check_reference(problem, m: int, coarse_error: float, reps: int = 200, seed: int = 0) -> float:
    """Self-convergence check of the fine-grid reference at ``m`` against ``2m``.

    Returns the root mean square difference, an estimate of the reference
    error, and warns with :class:`ReferenceWarning` when it exceeds a tenth of
    ``coarse_error``.
    """
    coeffs = _coefficients(problem)
    diffs = np.empty(reps)
    for r in range(reps):
        rng = make_rng(seed ^ _PREPASS_STREAM_SALT, r)
        x0 = coeffs.x0_sampler(rng)
        path = BrownianPath(rng)
        diffs[r] = fine_reference(problem, path, m, x0) - fine_reference(problem, path, 2 * m, x0)
    rms = float(np.sqrt(np.mean(diffs ** 2)))
    if coarse_error > 0 and rms > 0.1 * coarse_error:
        warnings.warn(f"reference at m={m} has estimated error {rms:.3g}, "
                      f"{rms / coarse_error:.2f} of the coarsest scheme error", ReferenceWarning, stacklevel=2)
    return rms


def _fine_increments(rng: np.random.Generator, k: int, m: int):
    """Fine path on a grid refining ``l/k``, with exact per-step time integrals.

    Returns ``(fine_times, W, fine_integrals, coarse_dw, coarse_area)``, where
    ``fine_integrals[j]`` is ``int W dt`` over the ``j``-th fine step.
    """
    r = max(1, math.ceil(m / k))
    mf = r * k
    h = 1.0 / mf
    z = rng.standard_normal((2, mf))
    w = np.empty(mf + 1)
    w[0] = 0.0
    np.cumsum(math.sqrt(h) * z[0], out=w[1:])
    # bridge integrals have variance h^3/12 and are independent of the knots
    fine_int = 0.5 * h * (w[:-1] + w[1:]) + math.sqrt(h ** 3 / 12.0) * z[1]
    w_coarse = w[::r]
    coarse_int = fine_int.reshape(k, r).sum(axis=1)
    area = coarse_int - w_coarse[:-1] / k
    times = np.arange(mf + 1) / mf
    return times, w, fine_int, np.diff(w_coarse), area


def _weighted_fine_integral(g: Callable, times: np.ndarray, w: np.ndarray, fine_int: np.ndarray) -> float:
    mid = 0.5 * (times[:-1] + times[1:])
    return float(np.dot(evaluate_on(g, mid), fine_int))


def _milstein_on_values(coeffs: CoefficientSet, times: np.ndarray, w: np.ndarray, x0: float) -> float:
    a, s, s01 = coeffs.a, coeffs.sigma, coeffs.sigma01
    x = x0
    tl, wl = times.tolist(), w.tolist()
    for j in range(len(tl) - 1):
        t0, dt, dw = tl[j], tl[j + 1] - tl[j], wl[j + 1] - wl[j]
        sx = s(t0, x)
        x = x + a(t0, x) * dt + sx * dw + 0.5 * sx * s01(t0, x) * (dw * dw - dt)
    return x


def coupled_wp_full(problem, k: int, m: int, rng: np.random.Generator, x0: float):
    """Run :func:`wagner_platen_full` coupled to a fine reference path.

    Returns ``(scheme_result, reference)``. Increments and step integrals fed to
    the scheme are exact functionals of the fine path, so the pair has the
    joint law of a Wiener process; the reference weights each fine-step
    integral by the coefficient at the step midpoint, which is exact when that
    coefficient is constant.
    """
    times, w, fine_int, dw, area = _fine_increments(rng, k, m)
    coeffs = _coefficients(problem)
    res = wagner_platen_full(coeffs, rng, k, x0=x0, increments=(dw, area))
    if isinstance(problem, LinearProblem):
        integral = _weighted_fine_integral(problem.beta_prime, times, w, fine_int)
        ref = x0 * math.exp(problem.log_drift_integral + problem.beta(1.0) * w[-1] - integral)
    elif isinstance(problem, AdditiveProblem):
        integral = _weighted_fine_integral(problem.diff_prime, times, w, fine_int)
        ref = x0 + problem.drift_integral + problem.diff(1.0) * w[-1] - integral
    else:
        ref = _milstein_on_values(coeffs, times, w, x0)
    return res, ref


# Schemes on the equidistant grid l/n that only read W there; for closed-form
# problems these are run for a block of replications at once.
_BATCHABLE = ("euler", "milstein", "wpt", "equi")
_BATCH_CELLS = 1 << 21


def _batch_scheme(scheme_id: str, coeffs: CoefficientSet, w: np.ndarray, x0: np.ndarray) -> np.ndarray:
    """Endpoints of an equidistant scheme for each row of ``w`` (values of ``W`` at ``l/n``).

    Array counterpart of :func:`run_scheme` for the ids in ``_BATCHABLE``.
    """
    n = w.shape[1] - 1
    times = equidistant_grid(n).tolist()
    dws = np.diff(w, axis=1)
    x = x0.astype(float).copy()
    if scheme_id == "equi":
        a01s, s01s, gs = np.empty_like(dws), np.empty_like(dws), np.empty_like(dws)
    for l in range(n):
        t0, dt, dw = times[l], times[l + 1] - times[l], dws[:, l]
        if scheme_id == "euler":
            x = x + coeffs.a(t0, x) * dt + coeffs.sigma(t0, x) * dw
        elif scheme_id == "milstein":
            sx = coeffs.sigma(t0, x)
            x = x + coeffs.a(t0, x) * dt + sx * dw + 0.5 * sx * coeffs.sigma01(t0, x) * (dw * dw - dt)
        elif scheme_id == "wpt":
            x = _wp_step(coeffs, t0, x, dt, dw)[0]
        else:
            x, a01s[:, l], s01s[:, l], gs[:, l] = _wp_step(coeffs, t0, x, dt, dw)
    if scheme_id == "equi":
        steps = np.diff(np.asarray(times))
        m_hat = 1.0 + a01s * steps + s01s * dws
        suffix = np.ones_like(m_hat)
        for l in range(n - 2, -1, -1):
            suffix[:, l] = suffix[:, l + 1] * m_hat[:, l + 1]
        x = x + np.sum(suffix * gs * (0.5 * steps) * dws, axis=1)
    return x


def _batch_reference(problem, times: np.ndarray, w: np.ndarray, x0: np.ndarray) -> np.ndarray:
    if isinstance(problem, LinearProblem):
        g, level = problem.beta_prime, problem.log_drift_integral
    else:
        g, level = problem.diff_prime, problem.drift_integral
    gv = evaluate_on(g, times)
    integral = np.zeros(len(w)) if not gv.any() else np.trapezoid(gv * w, times, axis=1)
    if isinstance(problem, LinearProblem):
        return x0 * np.exp(level + problem.beta(1.0) * w[:, -1] - integral)
    return x0 + level + problem.diff(1.0) * w[:, -1] - integral


def _estimate_batched(scheme_id: str, problem, n: int, M: int, seed: int, m: int):
    coeffs = _coefficients(problem)
    mf = n * max(1, math.ceil(m / n))
    times = np.arange(mf + 1) / mf
    stride = mf // n
    block = max(1, _BATCH_CELLS // mf)
    errors = np.empty(M)
    for lo in range(0, M, block):
        hi = min(M, lo + block)
        x0 = np.empty(hi - lo)
        w = np.zeros((hi - lo, mf + 1))
        for i, r in enumerate(range(lo, hi)):
            rng = make_rng(seed, r)
            x0[i] = coeffs.x0_sampler(rng)
            w[i, 1:] = rng.standard_normal(mf)
        np.cumsum(w, axis=1, out=w)
        w *= math.sqrt(1.0 / mf)
        est = _batch_scheme(scheme_id, coeffs, w[:, ::stride], x0)
        errors[lo:hi] = _batch_reference(problem, times, w, x0) - est
    return errors, np.full(M, float(n))


def resolve_moment_provider(problem, k: int, seed: int, reps: int = _MOMENT_PREPASS_REPS):
    """``(E|Y(t)|^2)^{1/2}`` for the fixed scheme: closed form or a Monte Carlo pre-pass on ``l/k``."""
    rms = getattr(problem, "weight_rms", None)
    if rms is not None:
        return rms
    return weight_rms(_coefficients(problem), k, reps, seed ^ _PREPASS_STREAM_SALT)


def run_scheme(scheme_id: str, problem, path: BrownianPath, n: int, p: float = 2.0,
               k_rule: Callable[[int], int] = default_k_rule, moment_provider=None,
               x0: float | None = None):
    """Dispatch a path-based scheme by id with budget ``n``."""
    _check_scheme(scheme_id)
    coeffs = _coefficients(problem)
    if scheme_id == "euler":
        return euler(coeffs, path, equidistant_grid(n), x0)
    if scheme_id == "milstein":
        return milstein(coeffs, path, equidistant_grid(n), x0)
    if scheme_id == "wpt":
        return wagner_platen_truncated(coeffs, path, equidistant_grid(n), x0)
    if scheme_id == "equi":
        return scheme_equi(coeffs, path, n, x0)
    if scheme_id == "star":
        return scheme_star(coeffs, path, n, k_rule, x0)
    if scheme_id == "star_star":
        return scheme_star_star(coeffs, path, n, p, k_rule, x0)
    if scheme_id == "fixed":
        if moment_provider is None:
            raise DomainError("the fixed scheme needs a moment provider")
        return scheme_fixed(coeffs, path, n, moment_provider, k_rule, x0)
    raise DomainError("wp_full is not a path-based scheme; use coupled_wp_full")


def summarize(scheme: str, n: int, p: float, errors: np.ndarray, costs: np.ndarray, seed: int) -> ErrorEstimate:
    """Turn per-replication errors and costs into an :class:`ErrorEstimate`."""
    reps = len(errors)
    powered = np.abs(errors) ** p
    mean = float(np.mean(powered))
    e_hat = mean ** (1.0 / p)
    if mean > 0.0:
        se = float(np.std(powered, ddof=1)) / math.sqrt(reps)
        half = _Z95 * se * mean ** (1.0 / p - 1.0) / p
    else:
        half = 0.0
    return ErrorEstimate(scheme, n, p, e_hat, max(0.0, e_hat - half), e_hat + half,
                         float(np.mean(costs)), reps, seed, np.abs(errors), np.asarray(costs))


def estimate_error(scheme_id: str, problem, p: float = 2.0, n: int = 64, M: int = 1000, seed: int = 0,
                   m: int | None = None, k_rule: Callable[[int], int] = default_k_rule,
                   moment_provider=None, vectorize: bool = True) -> ErrorEstimate:
    """Monte Carlo estimate of ``e_p`` and the mean cost of one scheme at budget ``n``.

    ``problem`` is a built-in problem or a bare :class:`CoefficientSet`; for the
    latter the reference is fine-grid Milstein. ``m`` defaults to
    :func:`default_resolution` of ``n``.

    With ``vectorize`` the equidistant schemes on closed-form problems are run
    on blocks of replications, each drawing its path on the reference grid
    directly; this has the same law as the per-path route and is much faster.
    """
    _check_scheme(scheme_id)
    if M < 2:
        raise DomainError(f"need at least two replications, got {M}")
    if n < 1:
        raise DomainError(f"budget must be at least 1, got {n}")
    if not p >= 1:
        raise DomainError(f"p must be at least 1, got {p!r}")
    m = default_resolution(n) if m is None else m
    coeffs = _coefficients(problem)
    if scheme_id == "fixed" and moment_provider is None:
        moment_provider = resolve_moment_provider(problem, k_rule(n), seed)
    if vectorize and scheme_id in _BATCHABLE and isinstance(problem, (LinearProblem, AdditiveProblem)):
        errors, costs = _estimate_batched(scheme_id, problem, n, M, seed, m)
        return summarize(scheme_id, n, p, errors, costs, seed)
    errors = np.empty(M)
    costs = np.empty(M)
    for r in range(M):
        rng = make_rng(seed, r)
        x0 = float(coeffs.x0_sampler(rng))
        if scheme_id == "wp_full":
            res, ref = coupled_wp_full(problem, n, m, rng, x0)
        else:
            path = BrownianPath(rng)
            res = run_scheme(scheme_id, problem, path, n, p, k_rule, moment_provider, x0)
            ref = fine_reference(problem, path, m, x0)
        errors[r] = ref - res.x1_hat
        costs[r] = res.nu
    return summarize(scheme_id, n, p, errors, costs, seed)


def constant_target(scheme_id: str, problem, p: float) -> float | None:
    """Limit of ``cost * e_p`` for the scheme, when it is known in closed form."""
    consts = analytic_constants(problem, p) if not isinstance(problem, CoefficientSet) else None
    if consts is None:
        return None
    if scheme_id == "equi":
        return consts.c_equi / _SQRT12
    if scheme_id == "star":
        return consts.c_star / _SQRT12
    if scheme_id == "star_star":
        return consts.c_star_star / _SQRT12
    if scheme_id == "fixed" and p == 2:
        return consts.c_2 / _SQRT12
    if scheme_id == "milstein" and isinstance(problem, AdditiveProblem):
        # error is Gaussian here, so e_p = m_p e_2 and n e_2 -> ||diff'||_2 / sqrt(3)
        return gaussian_abs_moment(p) * (consts.c_equi / consts.m_p) / math.sqrt(3.0)
    return None


def fit_slope(n_values: Sequence[float], e_values: Sequence[float]) -> tuple[float, float]:
    """Least-squares ``(slope, intercept)`` of ``log e`` against ``log n``."""
    x = np.log(np.asarray(n_values, dtype=float))
    y = np.log(np.asarray(e_values, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def _guarded(rows: list[StudyRow]) -> list[StudyRow]:
    if len(rows) < 3:
        return rows
    a, b = rows[0].e_p, rows[1].e_p
    width = a.ci_high - a.ci_low
    overlap = max(0.0, min(a.ci_high, b.ci_high) - max(a.ci_low, b.ci_low))
    return rows[1:] if width > 0 and overlap > 0.5 * width else rows


def convergence_study(scheme_id: str, problem, p: float = 2.0, n_list: Sequence[int] = (16, 32, 64, 128),
                      M: int = 1000, seed: int = 0, m: int | None = None,
                      k_rule: Callable[[int], int] = default_k_rule, moment_provider=None) -> Study:
    """Estimate ``e_p`` over increasing budgets and fit the empirical order.

    The raw slope uses every row; the guarded slope drops the smallest budget
    when its interval overlaps the next one by more than half its width.
    """
    _check_scheme(scheme_id)
    n_list = [int(n) for n in n_list]
    if len(n_list) < 3 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise DomainError("n_list must be increasing with at least three entries")
    m = default_resolution(n_list[-1]) if m is None else m
    target = constant_target(scheme_id, problem, p)
    rows = []
    for n in n_list:
        est = estimate_error(scheme_id, problem, p, n, M, seed, m, k_rule, moment_provider)
        rows.append(StudyRow(n, est, est.mean_cost * est.e_p_hat, target))
    if isinstance(problem, CoefficientSet) or not isinstance(problem, (LinearProblem, AdditiveProblem)):
        check_reference(problem, m, rows[-1].e_p.e_p_hat, seed=seed)
    slope, intercept = fit_slope([r.n for r in rows], [r.e_p.e_p_hat for r in rows])
    kept = _guarded(rows)
    guarded = fit_slope([r.n for r in kept], [r.e_p.e_p_hat for r in kept])[0] if kept is not rows else slope
    return Study(scheme_id, rows, slope, guarded, intercept)


def compare_schemes(problem, p: float = 2.0, n: int = 64, M: int = 1000, seed: int = 0,
                    scheme_ids: Sequence[str] = ("equi", "star", "star_star", "fixed", "milstein"),
                    m: int | None = None, k_rule: Callable[[int], int] = default_k_rule) -> list[StudyRow]:
    """Matched-budget table: one row per scheme, all driven by the same seed."""
    rows = []
    for sid in scheme_ids:
        est = estimate_error(sid, problem, p, n, M, seed, m, k_rule)
        rows.append(StudyRow(n, est, est.cost_times_e, constant_target(sid, problem, p)))
    return rows


def cost_error_ratio(num: ErrorEstimate, den: ErrorEstimate) -> tuple[float, float]:
    """Ratio of ``mean_cost * e_p`` between two estimates on the same seeds, with its standard error.

    Replications are paired by index, so correlation between the two
    schemes is accounted for in the delta-method error.
    """
    if num.reps != den.reps or num.p != den.p:
        raise DomainError("estimates must share the replication count and p")
    p = num.p

    def influence(est: ErrorEstimate) -> np.ndarray:
        powered = est.errors ** p
        mean_pow = powered.mean()
        mean_cost = est.costs.mean()
        return (est.costs - mean_cost) / mean_cost + (powered - mean_pow) / (p * mean_pow)

    ratio = num.cost_times_e / den.cost_times_e
    z = influence(num) - influence(den)
    se = ratio * float(np.std(z, ddof=1)) / math.sqrt(num.reps)
    return ratio, se


def weight_error(problem: LinearProblem | AdditiveProblem, k: int, M: int = 1000, seed: int = 0,
                 m: int | None = None) -> tuple[float, float]:
    """Mean over the grid of ``E|Y_k(t_l) - Y(t_l)|^2`` and its standard error.

    The exact weight is ``-beta'(t) X(1)`` (linear) or ``-diff'(t)`` (additive),
    with ``X(1)`` the closed-form reference on the same path.
    """
    if not isinstance(problem, (LinearProblem, AdditiveProblem)):
        raise DomainError("the exact weight process is only known for linear and additive problems")
    m = default_resolution(k) if m is None else m
    coeffs = problem.coefficients
    grid = equidistant_grid(k)[:-1]
    values = np.empty(M)
    for r in range(M):
        rng = make_rng(seed, r)
        x0 = float(coeffs.x0_sampler(rng))
        path = BrownianPath(rng)
        est = estimate_weights(coeffs, path, k, x0)
        if isinstance(problem, LinearProblem):
            exact = -evaluate_on(problem.beta_prime, grid) * fine_reference(problem, path, m, x0)
        else:
            exact = -evaluate_on(problem.diff_prime, grid)
        values[r] = np.mean((est.y_hat - exact) ** 2)
    return float(np.mean(values)), float(np.std(values, ddof=1)) / math.sqrt(M)

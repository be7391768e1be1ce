"""Asymptotic error constants of the corrected schemes.

For an error exponent ``p`` four constants govern ``N * e_p`` as the budget
``N`` grows (each divided by ``sqrt(12)``):

``c_star_star``  sequential observations, random number of them
``c_star``       sequential observations, fixed number
``c_2``          prefixed observation sites (defined for ``p = 2``)
``c_equi``       equidistant sites

They are functionals of the weight process ``Y``. Linear and additive
problems have closed forms; anything else is estimated by Monte Carlo over
the coarse-grid estimates ``Y_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .brownian import BrownianPath, make_rng
from .exceptions import DomainError
from .problem import AdditiveProblem, CoefficientSet, LinearProblem
from .quadrature import integrate
from .schemes import estimate_weights


@dataclass(frozen=True)
class ConstantSet:
    """The four asymptotic constants for one problem and exponent ``p``.

    ``method`` is ``"analytic"`` or ``"monte_carlo"``; Monte Carlo sets carry
    standard errors in ``stderr`` and the replication count and grid size.
    """

    c_star_star: float
    c_star: float
    c_2: float
    c_equi: float
    p: float
    method: str = "analytic"
    m_p: float = float("nan")
    stderr: dict = field(default_factory=dict)
    reps: int | None = None
    k: int | None = None

    def as_dict(self) -> dict:
        out = {"c_star_star": self.c_star_star, "c_star": self.c_star, "c_2": self.c_2,
               "c_equi": self.c_equi, "m_p": self.m_p, "p": self.p, "method": self.method}
        if self.stderr:
            out["stderr"] = dict(self.stderr)
        if self.reps is not None:
            out["reps"] = self.reps
            out["k"] = self.k
        return out


def gaussian_abs_moment(p: float) -> float:
    """``(E|N|^p)^{1/p}`` for a standard normal ``N``."""
    if not p >= 1:
        raise DomainError(f"p must be at least 1, got {p!r}")
    log_moment = 0.5 * p * math.log(2.0) + math.lgamma(0.5 * (p + 1.0)) - 0.5 * math.log(math.pi)
    return math.exp(log_moment / p)


def _norm_23(f: Callable[[float], float], kinks=()) -> float:
    return integrate(lambda t: abs(f(t)) ** (2.0 / 3.0), kinks) ** 1.5


def _norm_2(f: Callable[[float], float], kinks=()) -> float:
    return math.sqrt(integrate(lambda t: f(t) ** 2, kinks))


def linear_constants(problem: LinearProblem, p: float = 2.0) -> ConstantSet:
    """Closed-form constants for ``dX = alpha X dt + beta X dW``.

    Here ``Y(t) = -beta'(t) X(1)`` with ``X(1)`` log-normal, so every constant is
    a norm of ``beta'`` times a moment of ``X(1)``. The moments are scaled by
    ``|x0|``.
    """
    m_p = gaussian_abs_moment(p)
    b2 = problem.beta_sq_norm
    level = abs(problem.x0) * math.exp(problem.alpha_integral - 0.5 * b2)
    n23 = _norm_23(problem.beta_prime, problem.kinks)
    n2 = _norm_2(problem.beta_prime, problem.kinks)
    return ConstantSet(
        c_star_star=m_p * level * n23 * math.exp(p / (2.0 * (p + 1.0)) * b2),
        c_star=m_p * level * n23 * math.exp(0.5 * p * b2),
        c_2=level * n23 * math.exp(b2),
        c_equi=m_p * level * n2 * math.exp(0.5 * p * b2),
        p=p,
        m_p=m_p,
    )


def additive_constants(problem: AdditiveProblem, p: float = 2.0) -> ConstantSet:
    """Constants for ``dX = drift dt + diff dW``, where ``Y = -diff'`` is deterministic."""
    m_p = gaussian_abs_moment(p)
    n23 = _norm_23(problem.diff_prime, problem.kinks)
    return ConstantSet(
        c_star_star=m_p * n23,
        c_star=m_p * n23,
        c_2=n23,
        c_equi=m_p * _norm_2(problem.diff_prime, problem.kinks),
        p=p,
        m_p=m_p,
    )


def analytic_constants(problem, p: float = 2.0) -> ConstantSet | None:
    """Closed-form constants when the problem family has them, else ``None``."""
    if isinstance(problem, LinearProblem):
        return linear_constants(problem, p)
    if isinstance(problem, AdditiveProblem):
        return additive_constants(problem, p)
    return None


def _seed_of(rng) -> int:
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2 ** 63))
    return int(rng)


def sample_weights(coeffs: CoefficientSet, k: int, M: int, rng=0) -> np.ndarray:
    """``M x k`` matrix of weight estimates ``Y_k(t_l)``, one row per replication."""
    if k < 1 or M < 1:
        raise DomainError(f"need k >= 1 and M >= 1, got k={k}, M={M}")
    seed = _seed_of(rng)
    out = np.empty((M, k))
    for r in range(M):
        out[r] = estimate_weights(coeffs, BrownianPath(make_rng(seed, r)), k).y_hat
    return out


def weight_rms(coeffs: CoefficientSet, k: int, M: int, rng=0) -> np.ndarray:
    """Monte Carlo ``(E|Y(t_l)|^2)^{1/2}`` on ``t_l = l/k``; a moment provider for the fixed scheme."""
    y = sample_weights(coeffs, k, M, rng)
    return np.sqrt(np.mean(y * y, axis=0))


def _power_mean(z: np.ndarray, gamma: float, scale: float) -> tuple[float, float]:
    """``scale * mean(z) ** gamma`` with its delta-method standard error."""
    mean = float(np.mean(z))
    if mean == 0.0:
        return 0.0, 0.0
    value = scale * mean ** gamma
    se = scale * gamma * mean ** (gamma - 1.0) * float(np.std(z, ddof=1)) / math.sqrt(len(z))
    return value, abs(se)


def constants_from_weights(y: np.ndarray, p: float = 2.0) -> ConstantSet:
    """Estimate the four constants from an ``M x k`` matrix of weight estimates.

    Integrals over ``t`` are left-endpoint Riemann sums on the coarse grid.
    """
    y = np.asarray(y, dtype=float)
    M, k = y.shape
    if M < 2:
        raise DomainError("need at least two replications for standard errors")
    m_p = gaussian_abs_moment(p)
    absy = np.abs(y)
    q23 = np.mean(absy ** (2.0 / 3.0), axis=1)
    q2 = np.mean(y * y, axis=1)

    c_ss, se_ss = _power_mean(q23 ** (1.5 * p / (p + 1.0)), (p + 1.0) / p, m_p)
    c_s, se_s = _power_mean(q23 ** (1.5 * p), 1.0 / p, m_p)
    c_e, se_e = _power_mean(q2 ** (0.5 * p), 1.0 / p, m_p)

    sq = y * y
    v = sq.mean(axis=0)
    s = float(np.mean(v ** (1.0 / 3.0)))
    c_2 = s ** 1.5
    if c_2 > 0.0:
        grad = np.zeros(k)
        pos = v > 0
        grad[pos] = math.sqrt(s) * v[pos] ** (-2.0 / 3.0) / (2.0 * k)
        influence = (sq - v) @ grad
        se_2 = float(np.std(influence, ddof=1)) / math.sqrt(M)
    else:
        se_2 = 0.0
    return ConstantSet(c_ss, c_s, c_2, c_e, p, method="monte_carlo", m_p=m_p,
                       stderr={"c_star_star": se_ss, "c_star": se_s, "c_2": se_2, "c_equi": se_e},
                       reps=M, k=k)


def mc_constants(coeffs: CoefficientSet, p: float = 2.0, k: int = 256, M: int = 10_000, rng=0) -> ConstantSet:
    """Monte Carlo constants from ``M`` independent runs of :func:`estimate_weights`."""
    if k < 2:
        raise DomainError(f"k must be at least 2, got {k}")
    if M < 2:
        raise DomainError(f"M must be at least 2, got {M}")
    if not p >= 1:
        raise DomainError(f"p must be at least 1, got {p!r}")
    return constants_from_weights(sample_weights(coeffs, k, M, rng), p)


def weighted_integration_constant(rho: Callable[[float], float], breakpoints=()) -> float:
    """``(int_0^1 rho(t)^{2/3} dt)^{3/2}`` for a nonnegative weight ``rho``."""
    return _norm_23(rho, breakpoints)

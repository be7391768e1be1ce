"""Scalar SDE problems ``dX = a(t, X) dt + sigma(t, X) dW`` on ``[0, 1]``.

A problem is handed to the schemes as a :class:`CoefficientSet`: the two
coefficients, six first/second partial derivatives and a sampler for the
initial value. The partials are supplied by the caller; nothing here
differentiates numerically. Smoothness and growth conditions on the
coefficients are a documented contract and are not checked at run time.
Likewise, finite moments of the initial value of order ``16 p`` are the
caller's responsibility when a random sampler is used.

Three families are built in:

* :class:`LinearProblem`, ``dX = alpha(t) X dt + beta(t) X dW``;
* :class:`AdditiveProblem`, ``dX = drift(t) dt + diff(t) dW``;
* :class:`AutonomousProblem`, ``dX = a(X) dt + dW``.

The first two have explicit solutions at ``t = 1`` which
:func:`exact_terminal_linear` and :func:`exact_terminal_additive` evaluate on
a given :class:`~sdepoint.brownian.BrownianPath`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np

from .brownian import BrownianPath
from .exceptions import ConfigError, DomainError
from .quadrature import Polynomial, evaluate_on, integrate

Coefficient = Callable[[float, float], float]

DEFAULT_REFERENCE_RESOLUTION = 4096


class ConstantInitial:
    """Initial value sampler that always returns ``value``."""

    def __init__(self, value: float = 0.0):
        self.value = float(value)

    def __call__(self, rng=None) -> float:
        return self.value

    def __repr__(self) -> str:
        return f"ConstantInitial({self.value!r})"


def _zero(t, x):
    return 0.0


@dataclass(frozen=True)
class CoefficientSet:
    """Drift, diffusion and the partial derivatives the schemes need.

    ``a10`` is the derivative of ``a`` in time, ``a01`` and ``a02`` the first
    and second derivatives in the state; likewise for ``sigma``.
    """

    a: Coefficient
    sigma: Coefficient
    a10: Coefficient = _zero
    a01: Coefficient = _zero
    a02: Coefficient = _zero
    sigma10: Coefficient = _zero
    sigma01: Coefficient = _zero
    sigma02: Coefficient = _zero
    x0_sampler: Callable = field(default_factory=ConstantInitial)

    def g(self, t: float, x: float) -> float:
        return g_weight(self, t, x)


def g_weight(coeffs: CoefficientSet, t: float, x: float) -> float:
    """Coefficient of the time integral of ``W`` in the Wagner-Platen step.

    ``G = sigma a01 - sigma10 - a sigma01 - sigma^2 sigma02 / 2``. It vanishes
    identically exactly for the equations whose solution at ``t = 1`` is a
    function of ``X(0)`` and ``W(1)``.
    """
    s = coeffs.sigma(t, x)
    return (s * coeffs.a01(t, x) - coeffs.sigma10(t, x)
            - coeffs.a(t, x) * coeffs.sigma01(t, x)
            - 0.5 * s * s * coeffs.sigma02(t, x))


def _as_function(value, name: str) -> Polynomial:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return Polynomial([value])
    if isinstance(value, list) and value and all(
            isinstance(c, (int, float)) and not isinstance(c, bool) for c in value):
        return Polynomial(value)
    raise ConfigError(f"{name!r} must be a number or a list of polynomial coefficients, got {value!r}")


def _derivative(f, f_prime, name: str):
    if f_prime is not None:
        return f_prime
    if isinstance(f, Polynomial):
        return f.deriv()
    raise DomainError(f"{name} must be given explicitly unless {name[:-6]} is a Polynomial")


@dataclass(frozen=True)
class LinearProblem:
    """``dX = alpha(t) X dt + beta(t) X dW`` with ``X(0) = x0``.

    Derivatives may be omitted when the coefficient is a
    :class:`~sdepoint.quadrature.Polynomial`.
    """

    alpha: Callable[[float], float]
    beta: Callable[[float], float]
    alpha_prime: Callable[[float], float] | None = None
    beta_prime: Callable[[float], float] | None = None
    x0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha_prime", _derivative(self.alpha, self.alpha_prime, "alpha_prime"))
        object.__setattr__(self, "beta_prime", _derivative(self.beta, self.beta_prime, "beta_prime"))

    @classmethod
    def polynomial(cls, alpha=0.0, beta=1.0, x0: float = 1.0) -> "LinearProblem":
        """Build from polynomial coefficient lists (or constants) for alpha and beta."""
        return cls(_as_function(alpha, "alpha"), _as_function(beta, "beta"), x0=float(x0))

    @cached_property
    def coefficients(self) -> CoefficientSet:
        al, be, alp, bep = self.alpha, self.beta, self.alpha_prime, self.beta_prime
        return CoefficientSet(
            a=lambda t, x: al(t) * x,
            sigma=lambda t, x: be(t) * x,
            a10=lambda t, x: alp(t) * x,
            a01=lambda t, x: al(t),
            a02=_zero,
            sigma10=lambda t, x: bep(t) * x,
            sigma01=lambda t, x: be(t),
            sigma02=_zero,
            x0_sampler=ConstantInitial(self.x0),
        )

    @cached_property
    def kinks(self) -> list[float]:
        """Interior zeros of ``beta'``, where ``|beta'|^q`` is not smooth."""
        return self.beta_prime.real_roots() if isinstance(self.beta_prime, Polynomial) else []

    @cached_property
    def alpha_integral(self) -> float:
        return integrate(self.alpha)

    @cached_property
    def beta_sq_norm(self) -> float:
        """``int_0^1 beta(t)^2 dt``."""
        be = self.beta
        return integrate(lambda t: be(t) ** 2)

    @cached_property
    def log_drift_integral(self) -> float:
        """``int_0^1 (alpha - beta^2 / 2)(t) dt``."""
        return self.alpha_integral - 0.5 * self.beta_sq_norm

    def weight_rms(self, t: float) -> float:
        """``(E|Y(t)|^2)^{1/2}`` with ``Y(t) = -beta'(t) X(1)``."""
        return abs(self.beta_prime(t) * self.x0) * math.exp(self.alpha_integral + 0.5 * self.beta_sq_norm)


@dataclass(frozen=True)
class AdditiveProblem:
    """``dX = drift(t) dt + diff(t) dW`` with ``X(0) = x0``.

    As for :class:`LinearProblem`, derivatives are derived for polynomials.
    """

    drift: Callable[[float], float]
    diff: Callable[[float], float]
    diff_prime: Callable[[float], float] | None = None
    x0: float = 0.0
    drift_prime: Callable[[float], float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "diff_prime", _derivative(self.diff, self.diff_prime, "diff_prime"))
        object.__setattr__(self, "drift_prime", _derivative(self.drift, self.drift_prime, "drift_prime"))

    @classmethod
    def polynomial(cls, drift=0.0, diff=1.0, x0: float = 0.0) -> "AdditiveProblem":
        return cls(_as_function(drift, "drift"), _as_function(diff, "diff"), x0=float(x0))

    @cached_property
    def coefficients(self) -> CoefficientSet:
        dr, drp, df, dfp = self.drift, self.drift_prime, self.diff, self.diff_prime
        return CoefficientSet(
            a=lambda t, x: dr(t),
            sigma=lambda t, x: df(t),
            a10=lambda t, x: drp(t),
            sigma10=lambda t, x: dfp(t),
            x0_sampler=ConstantInitial(self.x0),
        )

    @cached_property
    def kinks(self) -> list[float]:
        return self.diff_prime.real_roots() if isinstance(self.diff_prime, Polynomial) else []

    @cached_property
    def drift_integral(self) -> float:
        return integrate(self.drift)

    def weight_rms(self, t: float) -> float:
        """``|Y(t)| = |diff'(t)|``; the weight is deterministic here."""
        return abs(self.diff_prime(t))


_AUTONOMOUS_DRIFTS = {
    "sin": (math.sin, math.cos, lambda x: -math.sin(x)),
    "tanh": (math.tanh,
             lambda x: 1.0 - math.tanh(x) ** 2,
             lambda x: -2.0 * math.tanh(x) * (1.0 - math.tanh(x) ** 2)),
}


@dataclass(frozen=True)
class AutonomousProblem:
    """``dX = a(X) dt + dW`` with user supplied ``a``, ``a'`` and ``a''``."""

    drift: Callable[[float], float]
    drift_prime: Callable[[float], float]
    drift_second: Callable[[float], float]
    x0: float = 0.0

    @classmethod
    def named(cls, name: str, scale: float = 1.0, x0: float = 0.0) -> "AutonomousProblem":
        """Built-in drifts ``scale * sin(x)`` or ``scale * tanh(x)``."""
        try:
            f, fp, fpp = _AUTONOMOUS_DRIFTS[name]
        except KeyError:
            raise ConfigError(f"unknown autonomous drift {name!r}; choose from {sorted(_AUTONOMOUS_DRIFTS)}") from None
        s = float(scale)
        return cls(lambda x: s * f(x), lambda x: s * fp(x), lambda x: s * fpp(x), x0=float(x0))

    @cached_property
    def coefficients(self) -> CoefficientSet:
        f, fp, fpp = self.drift, self.drift_prime, self.drift_second
        return CoefficientSet(
            a=lambda t, x: f(x),
            sigma=lambda t, x: 1.0,
            a01=lambda t, x: fp(x),
            a02=lambda t, x: fpp(x),
            x0_sampler=ConstantInitial(self.x0),
        )


def _weighted_path_integral(path: BrownianPath, g: Callable, m: int) -> float:
    """Trapezoid value of ``int_0^1 g(t) W(t) dt`` after refining ``path`` to ``j/m``.

    The rule runs over the union of the existing knots and the grid. When
    ``g`` vanishes on all of those points the sum is zero whatever ``W`` is,
    and the path is left alone.
    """
    grid = np.arange(m + 1) / m
    t_old, _ = path.knots()
    if not (evaluate_on(g, grid).any() or evaluate_on(g, t_old).any()):
        return 0.0
    path.refine(grid)
    t, w = path.knots()
    return float(np.trapezoid(evaluate_on(g, t) * w, t))


def exact_terminal_linear(problem: LinearProblem, path: BrownianPath,
                          m: int = DEFAULT_REFERENCE_RESOLUTION, x0: float | None = None) -> float:
    """Reference value of ``X(1)`` for a linear problem, coupled to ``path``.

    Uses ``X(1) = x0 exp(int (alpha - beta^2/2) + beta(1) W(1) - int beta' W dt)``.
    The deterministic integral comes from adaptive quadrature; the path
    integral from the trapezoid rule on the path refined to ``m`` intervals,
    whose error has standard deviation of order ``1/m``.
    """
    if m < 2:
        raise DomainError(f"reference resolution must be at least 2, got {m}")
    x0 = problem.x0 if x0 is None else x0
    w1 = path.sample_at(1.0)
    stoch = problem.beta(1.0) * w1 - _weighted_path_integral(path, problem.beta_prime, m)
    return x0 * math.exp(problem.log_drift_integral + stoch)


def exact_terminal_additive(problem: AdditiveProblem, path: BrownianPath,
                            m: int = DEFAULT_REFERENCE_RESOLUTION, x0: float | None = None) -> float:
    """Reference ``X(1) = x0 + int drift + diff(1) W(1) - int diff' W dt`` on ``path``."""
    if m < 2:
        raise DomainError(f"reference resolution must be at least 2, got {m}")
    x0 = problem.x0 if x0 is None else x0
    w1 = path.sample_at(1.0)
    return x0 + problem.drift_integral + problem.diff(1.0) * w1 - _weighted_path_integral(path, problem.diff_prime, m)


def load_problem(source) -> LinearProblem | AdditiveProblem | AutonomousProblem:
    """Build a problem from a JSON file path, JSON text or an already parsed dict.

    Recognised forms::

        {"type": "linear", "alpha": [..], "beta": [..], "x0": 1}
        {"type": "additive", "drift": [..], "diff": [..], "x0": 0}
        {"type": "autonomous", "drift": "sin" | "tanh", "scale": 1, "x0": 0}

    Coefficients are numbers or polynomial coefficient lists in ``t``
    (lowest order first); derivatives are derived exactly.
    """
    if isinstance(source, dict):
        cfg = source
    else:
        text = str(source)
        try:
            if text.lstrip().startswith("{"):
                cfg = json.loads(text)
            else:
                cfg = json.loads(Path(text).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read problem configuration: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("problem configuration must be a JSON object")
    kind = cfg.get("type")
    known = {"linear": {"alpha", "beta"}, "additive": {"drift", "diff"}, "autonomous": {"drift", "scale"}}
    if kind not in known:
        raise ConfigError(f"unknown problem type {kind!r}; expected one of {sorted(known)}")
    extra = set(cfg) - known[kind] - {"type", "x0"}
    if extra:
        raise ConfigError(f"unexpected keys for {kind} problem: {sorted(extra)}")
    x0 = cfg.get("x0", 1.0 if kind == "linear" else 0.0)
    if not isinstance(x0, (int, float)) or isinstance(x0, bool):
        raise ConfigError(f"x0 must be a number, got {x0!r}")
    if kind == "linear":
        return LinearProblem.polynomial(cfg.get("alpha", 0.0), cfg.get("beta", 1.0), x0)
    if kind == "additive":
        return AdditiveProblem.polynomial(cfg.get("drift", 0.0), cfg.get("diff", 1.0), x0)
    drift = cfg.get("drift")
    if not isinstance(drift, str):
        raise ConfigError("autonomous drift must be one of 'sin', 'tanh'")
    scale = cfg.get("scale", 1.0)
    if not isinstance(scale, (int, float)) or isinstance(scale, bool):
        raise ConfigError(f"scale must be a number, got {scale!r}")
    return AutonomousProblem.named(drift, scale, x0)

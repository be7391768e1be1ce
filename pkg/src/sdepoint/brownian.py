"""Lazily sampled Wiener paths.

A :class:`BrownianPath` is observed one point at a time. Points to the right
of every known knot are drawn forward from the last knot; points between two
knots are drawn from the Brownian bridge spanned by the two bracketing knots.
By the Markov property this reproduces the law of a Wiener process exactly,
whatever the order of the queries.

Every distinct positive time that receives a value is counted in
``eval_count``; this is the cost of a method that observes the path.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

_MASK64 = (1 << 64) - 1
_NORMAL_BLOCK = 64


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for replication ``stream`` under ``seed``.

    Philox is keyed by the pair ``(seed, stream)``, so every replication owns an
    independent stream and can be regenerated in isolation.
    """
    key = np.array([int(seed) & _MASK64, int(stream) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class BrownianPath:
    """One trajectory of a standard Wiener process on ``[0, 1]``.

    Parameters
    ----------
    rng : numpy.random.Generator, optional
        Source of randomness. Defaults to ``make_rng(seed, stream)``.
    seed, stream : int
        Used only when ``rng`` is omitted.

    Notes
    -----
    Knot times are compared exactly. Callers that want two methods to share
    observations must build their grid times the same way (see
    :func:`sdepoint.schemes.equidistant_grid`).
    """

    def __init__(self, rng: np.random.Generator | None = None, *, seed: int = 0, stream: int = 0):
        self.rng = rng if rng is not None else make_rng(seed, stream)
        self.eval_count = 0
        self._times = [0.0]
        self._values = [0.0]
        self._index = {0.0: 0.0}
        # (times, values) arrays after a bulk refine; lists are rebuilt lazily
        self._arrays: tuple[np.ndarray, np.ndarray] | None = None
        self._normals = np.empty(0)
        self._pos = 0

    @classmethod
    def from_knots(cls, times, values, rng: np.random.Generator | None = None, *,
                   seed: int = 0, stream: int = 0) -> "BrownianPath":
        """Path conditioned on given values; later queries are bridge or forward draws.

        The given knots are not observations, so ``eval_count`` starts at 0.
        """
        t = np.asarray(times, dtype=float)
        w = np.asarray(values, dtype=float)
        if t.shape != w.shape or t.ndim != 1:
            raise DomainError("times and values must be one-dimensional and of equal length")
        if t.size == 0 or t[0] != 0.0 or w[0] != 0.0:
            raise DomainError("knots must start with W(0) = 0")
        if t[-1] > 1.0 or not np.all(np.diff(t) > 0):
            raise DomainError("knot times must be strictly increasing in [0, 1]")
        path = cls(rng, seed=seed, stream=stream)
        path._arrays = (t.copy(), w.copy())
        return path

    def __repr__(self) -> str:
        return f"BrownianPath(knots={len(self)}, eval_count={self.eval_count})"

    def __len__(self) -> int:
        if self._arrays is not None:
            return len(self._arrays[0])
        return len(self._times)

    def __contains__(self, t: float) -> bool:
        self._materialize()
        return float(t) in self._index

    def _materialize(self) -> None:
        if self._arrays is None:
            return
        times, values = self._arrays
        self._times = times.tolist()
        self._values = values.tolist()
        self._index = dict(zip(self._times, self._values))
        self._arrays = None

    def _normal(self) -> float:
        if self._pos == len(self._normals):
            self._normals = self.rng.standard_normal(_NORMAL_BLOCK)
            self._pos = 0
        z = self._normals[self._pos]
        self._pos += 1
        return float(z)

    def knots(self) -> tuple[np.ndarray, np.ndarray]:
        """Return copies of the sorted knot times and the path values there."""
        if self._arrays is not None:
            return self._arrays[0].copy(), self._arrays[1].copy()
        return np.array(self._times), np.array(self._values)

    def sample_at(self, t: float) -> float:
        """Return ``W(t)``, drawing it if ``t`` is not yet a knot."""
        t = float(t)
        if not 0.0 <= t <= 1.0:
            raise DomainError(f"time {t!r} outside [0, 1]")
        self._materialize()
        w = self._index.get(t)
        if w is not None:
            return w
        times = self._times
        last = times[-1]
        if t > last:
            w = self._values[-1] + math.sqrt(t - last) * self._normal()
            times.append(t)
            self._values.append(w)
        else:
            i = bisect.bisect_left(times, t)
            a, b = times[i - 1], times[i]
            wa, wb = self._values[i - 1], self._values[i]
            lam = (t - a) / (b - a)
            w = wa + lam * (wb - wa) + math.sqrt((t - a) * (b - t) / (b - a)) * self._normal()
            times.insert(i, t)
            self._values.insert(i, w)
        self._index[t] = w
        self.eval_count += 1
        return w

    def refine(self, times) -> np.ndarray:
        """Sample the path at every time in ``times`` at once.

        Equivalent in law to calling :meth:`sample_at` for each time, but
        vectorized: the new points inside one gap are drawn jointly as a
        Brownian bridge between the gap's knots. Returns ``W`` at ``times``.
        """
        query = np.asarray(times, dtype=float)
        if query.size and (np.isnan(query).any() or query.min() < 0.0 or query.max() > 1.0):
            raise DomainError("refinement times must lie in [0, 1]")
        old_t, old_w = self._arrays if self._arrays is not None else (
            np.array(self._times), np.array(self._values))
        wanted = np.unique(query)
        pos = np.searchsorted(old_t, wanted)
        hit = pos < len(old_t)
        hit[hit] = old_t[pos[hit]] == wanted[hit]
        new_t = wanted[~hit]
        if new_t.size:
            merged_t = np.concatenate([old_t, new_t])
            is_old = np.concatenate([np.ones(len(old_t), bool), np.zeros(len(new_t), bool)])
            order = np.argsort(merged_t, kind="stable")
            merged_t = merged_t[order]
            is_old = is_old[order]

            left = np.cumsum(is_old) - 1  # index into old knots of the left neighbour
            old_pos = np.flatnonzero(is_old)

            step = np.empty(len(merged_t))
            step[0] = 0.0
            step[1:] = np.sqrt(np.diff(merged_t)) * self.rng.standard_normal(len(merged_t) - 1)
            walk = np.cumsum(step)

            new = ~is_old
            g = left[new]
            t_new = merged_t[new]
            a = old_t[g]
            rel = walk[new] - walk[old_pos[g]]
            values = old_w[g] + rel
            inner = g + 1 < len(old_t)
            if inner.any():
                gi = g[inner]
                b = old_t[gi + 1]
                span = walk[old_pos[gi + 1]] - walk[old_pos[gi]]
                target = old_w[gi + 1] - old_w[gi]
                values[inner] -= (t_new[inner] - a[inner]) / (b - a[inner]) * (span - target)

            merged_w = np.empty(len(merged_t))
            merged_w[is_old] = old_w
            merged_w[new] = values
            self._arrays = (merged_t, merged_w)
            self.eval_count += int(new_t.size)
            all_t, all_w = merged_t, merged_w
        else:
            all_t, all_w = old_t, old_w
        return all_w[np.searchsorted(all_t, query)]

    def copy(self) -> "BrownianPath":
        """Independent copy with the same knots and generator state."""
        other = BrownianPath.__new__(BrownianPath)
        other.rng = np.random.Generator(type(self.rng.bit_generator)())
        other.rng.bit_generator.state = self.rng.bit_generator.state
        other.eval_count = self.eval_count
        other._times = list(self._times)
        other._values = list(self._values)
        other._index = dict(self._index)
        other._arrays = None if self._arrays is None else (self._arrays[0].copy(), self._arrays[1].copy())
        other._normals = self._normals.copy()
        other._pos = self._pos
        return other


@dataclass(frozen=True)
class IncrementWithArea:
    """Increment ``W(t+h) - W(t)`` with the integral ``int_t^{t+h} (W(s) - W(t)) ds``."""

    dw: float
    area: float
    h: float


def _area_factors(h: float) -> tuple[float, float, float]:
    # Cholesky factor of [[h, h^2/2], [h^2/2, h^3/3]]
    sh = math.sqrt(h)
    h32 = h * sh
    return sh, 0.5 * h32, h32 / (2.0 * math.sqrt(3.0))


def sample_increment_with_area(rng: np.random.Generator, h: float) -> IncrementWithArea:
    """Draw a Brownian increment over a step of length ``h`` with its time integral."""
    if not h > 0:
        raise DomainError(f"step length must be positive, got {h!r}")
    l11, l21, l22 = _area_factors(h)
    z1, z2 = rng.standard_normal(2)
    return IncrementWithArea(dw=l11 * z1, area=l21 * z1 + l22 * z2, h=h)


def sample_increments_with_area(rng: np.random.Generator, h: float, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`sample_increment_with_area`; returns ``(dw, area)`` arrays."""
    if not h > 0:
        raise DomainError(f"step length must be positive, got {h!r}")
    l11, l21, l22 = _area_factors(h)
    z = rng.standard_normal((2, size))
    return l11 * z[0], l21 * z[0] + l22 * z[1]


def bridge_integral_variance(h: float) -> float:
    """Variance of the time integral of a Brownian bridge over an interval of length ``h``."""
    if h < 0:
        raise DomainError(f"interval length must be nonnegative, got {h!r}")
    return h ** 3 / 12.0

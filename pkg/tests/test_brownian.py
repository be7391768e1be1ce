import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdepoint import (BrownianPath, DomainError, bridge_integral_variance, make_rng,
                      sample_increment_with_area, sample_increments_with_area)


def test_origin_is_free():
    path = BrownianPath(seed=1)
    assert path.sample_at(0.0) == 0.0
    assert path.eval_count == 0


def test_replay_is_costless_and_leaves_rng_alone():
    path = BrownianPath(seed=2)
    w = path.sample_at(0.3)
    state = str(path.rng.bit_generator.state)
    pos = path._pos
    assert path.sample_at(0.3) == w
    assert path.eval_count == 1
    assert str(path.rng.bit_generator.state) == state and path._pos == pos


@pytest.mark.parametrize("t", [-1e-9, 1.0 + 1e-9, float("nan")])
def test_outside_unit_interval(t):
    with pytest.raises(DomainError):
        BrownianPath(seed=0).sample_at(t)
    with pytest.raises(DomainError):
        BrownianPath(seed=0).refine([0.5, t])


def test_bridge_law_with_pinned_endpoint():
    rng = make_rng(7)
    n = 100_000
    draws = np.empty(n)
    for i in range(n):
        draws[i] = BrownianPath.from_knots([0.0, 1.0], [0.0, 0.0], rng).sample_at(0.25)
    se_mean = math.sqrt(0.1875 / n)
    assert abs(draws.mean()) < 3 * se_mean
    # variance of a sample variance of a normal is 2 s^4 / (n - 1)
    assert abs(draws.var(ddof=1) - 0.1875) < 3 * 0.1875 * math.sqrt(2 / (n - 1))


def test_bridge_variance_oracle_from_full_paths():
    # W(1/4) - W(1)/4 from unconditioned random walks has the bridge variance
    rng = np.random.default_rng(3)
    steps = rng.standard_normal((50_000, 64)) * math.sqrt(1 / 64)
    w = np.cumsum(steps, axis=1)
    assert w[:, 15].var() == pytest.approx(0.25, rel=0.03)
    assert (w[:, 15] - 0.25 * w[:, -1]).var() == pytest.approx(0.1875, rel=0.03)


def test_forward_increment_variance():
    rng = make_rng(9)
    d = np.empty(20_000)
    for i in range(len(d)):
        p = BrownianPath(rng)
        w5 = p.sample_at(0.5)
        d[i] = p.sample_at(0.8) - w5
    assert d.var() == pytest.approx(0.3, rel=0.05)
    assert abs(d.mean()) < 3 * math.sqrt(0.3 / len(d))


def test_refine_covariance_matches_brownian_motion():
    rng = make_rng(11)
    times = np.array([0.2, 0.5, 0.9])
    vals = np.array([BrownianPath(rng).refine(times) for _ in range(30_000)])
    cov = np.cov(vals, rowvar=False)
    expected = np.minimum.outer(times, times)
    np.testing.assert_allclose(cov, expected, atol=0.025)


def test_refine_respects_existing_knots():
    rng = make_rng(12)
    vals = []
    for _ in range(20_000):
        path = BrownianPath.from_knots([0.0, 0.5, 1.0], [0.0, 1.0, 0.0], rng)
        vals.append(path.refine([0.25, 0.5, 0.75]))
    vals = np.array(vals)
    assert np.all(vals[:, 1] == 1.0)
    assert vals[:, 0].mean() == pytest.approx(0.5, abs=0.02)
    assert vals[:, 2].mean() == pytest.approx(0.5, abs=0.02)
    assert vals[:, 0].var() == pytest.approx(0.125, rel=0.05)
    assert abs(np.corrcoef(vals[:, 0], vals[:, 2])[0, 1]) < 0.03


def test_refine_counts_only_new_points():
    path = BrownianPath(seed=5)
    a = path.sample_at(0.5)
    out = path.refine([0.25, 0.5, 0.5, 1.0])
    assert out[1] == out[2] == a
    assert path.eval_count == 3
    assert path.sample_at(0.25) == out[0]
    assert path.eval_count == 3


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from([0.0, 0.1, 0.25, 0.3, 0.5, 0.7, 0.75, 1.0]), min_size=1, max_size=20),
       st.lists(st.floats(0.0, 1.0), max_size=10), st.integers(0, 2 ** 32))
def test_eval_count_is_number_of_positive_knots(seq, bulk, seed):
    path = BrownianPath(seed=seed)
    seen = {}
    for t in seq:
        w = path.sample_at(t)
        assert seen.setdefault(t, w) == w
    path.refine(bulk)
    for t in seq:
        assert path.sample_at(t) == seen[t]
    times, values = path.knots()
    assert times[0] == 0.0 and values[0] == 0.0
    assert np.all(np.diff(times) > 0)
    assert path.eval_count == len(times) - 1


def test_same_seed_same_path():
    a, b = BrownianPath(seed=3, stream=4), BrownianPath(seed=3, stream=4)
    c = BrownianPath(seed=3, stream=5)
    ts = [0.7, 0.1, 1.0, 0.4]
    wa = [a.sample_at(t) for t in ts]
    assert wa == [b.sample_at(t) for t in ts]
    assert wa != [c.sample_at(t) for t in ts]


def test_copy_is_independent():
    path = BrownianPath(seed=8)
    path.sample_at(0.5)
    twin = path.copy()
    assert twin.sample_at(0.25) == path.sample_at(0.25)
    twin.sample_at(0.9)
    assert 0.9 not in path
    assert path.eval_count == 2 and twin.eval_count == 3


def test_from_knots_validation():
    with pytest.raises(DomainError):
        BrownianPath.from_knots([0.0, 0.5], [1.0, 0.0])
    with pytest.raises(DomainError):
        BrownianPath.from_knots([0.0, 0.5, 0.4], [0.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        BrownianPath.from_knots([0.0, 1.5], [0.0, 0.0])


def _brute_force_area(h, n_paths, rng, steps=256):
    inc = rng.standard_normal((n_paths, steps)) * math.sqrt(h / steps)
    w = np.concatenate([np.zeros((n_paths, 1)), np.cumsum(inc, axis=1)], axis=1)
    area = np.trapezoid(w, dx=h / steps, axis=1)
    return w[:, -1], area


def test_area_variance_h1():
    dw, area = sample_increments_with_area(make_rng(21), 1.0, 100_000)
    assert area.var() == pytest.approx(1 / 3, rel=0.05)
    _, brute = _brute_force_area(1.0, 20_000, np.random.default_rng(0))
    assert brute.var() == pytest.approx(1 / 3, rel=0.05)


def test_area_covariance_half():
    dw, area = sample_increments_with_area(make_rng(22), 0.5, 100_000)
    assert np.cov(dw, area)[0, 1] == pytest.approx(0.125, rel=0.05)
    bdw, barea = _brute_force_area(0.5, 20_000, np.random.default_rng(1))
    assert np.cov(bdw, barea)[0, 1] == pytest.approx(0.125, rel=0.05)


@pytest.mark.parametrize("h", [1e-3, 0.3, 1.0])
def test_area_pair_centered(h):
    dw, area = sample_increments_with_area(make_rng(23), h, 50_000)
    assert abs(dw.mean()) < 3 * math.sqrt(h / 50_000)
    assert abs(area.mean()) < 3 * math.sqrt(h ** 3 / 3 / 50_000)


def test_scalar_area_sampler():
    rng = make_rng(24)
    draws = [sample_increment_with_area(rng, 0.5) for _ in range(20_000)]
    assert all(d.h == 0.5 for d in draws[:5])
    dw = np.array([d.dw for d in draws])
    area = np.array([d.area for d in draws])
    assert dw.var() == pytest.approx(0.5, rel=0.05)
    assert area.var() == pytest.approx(0.5 ** 3 / 3, rel=0.05)


@pytest.mark.parametrize("h", [0.0, -1.0])
def test_area_sampler_domain(h):
    with pytest.raises(DomainError):
        sample_increment_with_area(make_rng(0), h)


def test_bridge_integral_variance_values():
    assert bridge_integral_variance(1.0) == pytest.approx(1 / 12, rel=1e-15)
    assert bridge_integral_variance(0.5) == pytest.approx(0.010416666666666666, rel=1e-15)
    assert bridge_integral_variance(0.0) == 0.0
    with pytest.raises(DomainError):
        bridge_integral_variance(-0.1)

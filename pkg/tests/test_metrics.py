import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from binapprox.errors import InvalidArgumentError
from binapprox.grid import PathEnsemble, SampledPath, TimeGrid, gen_example, gen_wiener_ensemble
from binapprox.metrics import (estimate_from_integrals, lq_distance, lq_norm, path_integrals,
                               sup_error, xc_norm)
from binapprox.preprocess import preprocess
from binapprox.tracker import TrackerParams, track_affine


def _brute_force_integral(values, dt, q, sub=400):
    """Trapezoid rule on a dense resampling of the piecewise-linear interpolant."""
    t = np.arange(len(values)) * dt
    s = np.linspace(0, t[-1], sub * (len(values) - 1) + 1)
    return np.trapezoid(np.abs(np.interp(s, t, values)) ** q, s)


def test_zero_ensemble():
    g = TimeGrid(1.0, 16)
    ens = PathEnsemble(g, np.zeros((5, 17)))
    assert lq_norm(ens).value == 0.0 and xc_norm(ens).value == 0.0
    assert lq_norm(ens).std_error == 0.0


@pytest.mark.parametrize("c, T, q", [(2.0, 1.0, 2.0), (-1.5, 3.0, 1.0), (0.5, 2.0, 3.5)])
def test_constant_path(c, T, q):
    g = TimeGrid(T, 64)
    x = SampledPath(g, np.full(65, c))
    for rule in ("trapezoid", "linear"):
        assert lq_norm(x, q, rule).value == pytest.approx(abs(c) * T ** (1 / q), rel=1e-13)
        assert xc_norm(x, q, rule).value == pytest.approx(abs(c) * T ** (1 / q) + abs(c), rel=1e-13)


@pytest.fixture(scope="module")
def wiener_10k():
    return gen_wiener_ensemble(TimeGrid(1.0, 64), 10_000, 2024)


def test_wiener_l2_norm(wiener_10k):
    est = lq_norm(wiener_10k, 2.0)
    assert abs(est.value - np.sqrt(0.5)) <= 3 * est.std_error
    assert est.n_paths == 10_000 and est.kind == "X"


def test_wiener_xc_norm(wiener_10k):
    est = xc_norm(wiener_10k, 2.0)
    assert abs(est.value - (np.sqrt(0.5) + 1.0)) <= 3 * est.std_error
    assert est.kind == "Xc"


def test_distance_basics():
    g = TimeGrid(2.0, 32)
    a = SampledPath(g, np.zeros(33))
    b = SampledPath(g, np.ones(33))
    assert lq_distance(a, a).value == 0.0
    assert lq_distance(a, b, q=1.0).value == pytest.approx(2.0)
    assert lq_distance(a, b, q=2.0, kind="Xc").value == pytest.approx(np.sqrt(2.0) + 1.0)
    assert sup_error(a, b) == 1.0
    with pytest.raises(InvalidArgumentError):
        lq_distance(a, SampledPath(TimeGrid(1.0, 32), np.zeros(33)))


@pytest.mark.parametrize("n", [4, 8, 16])
def test_triangle_wave_linear_rule_is_exact(n):
    g = TimeGrid(1.0, 1024)
    params = TrackerParams(n, m=1.0, p=2.0)
    y = track_affine(gen_example(g, "zero"), params).evaluate(g)
    Md = params.M / n
    assert lq_norm(y, 2.0, rule="linear").value == pytest.approx(Md / np.sqrt(3), rel=1e-12)


def test_tracker_distance_within_bound():
    g = TimeGrid(1.0, 2048)
    x = preprocess(gen_wiener_ensemble(g, 40, 1), 3.0, 8.0)
    y = track_affine(x, TrackerParams(128, 3.0, 8.0))
    assert lq_distance(y.evaluate(g), x).value <= y.bound()


@settings(max_examples=40, deadline=None)
@given(vals=arrays(np.float64, 9, elements=st.floats(-5, 5)), q=st.floats(1.0, 4.0))
def test_linear_rule_against_brute_force(vals, q):
    exact = path_integrals(vals[None, :], 0.125, q, "linear")[0]
    assert exact == pytest.approx(_brute_force_integral(vals, 0.125, q), rel=1e-4, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-10, 10).filter(lambda c: c == 0 or abs(c) > 1e-100), seed=st.integers(0, 1000), q=st.sampled_from([1.0, 2.0, 3.0]))
def test_homogeneity(c, seed, q):
    ens = gen_wiener_ensemble(TimeGrid(1.0, 32), 4, seed)
    scaled = ens.replace(c * ens.values)
    assert lq_norm(scaled, q).value == pytest.approx(abs(c) * lq_norm(ens, q).value, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 1000))
def test_triangle_inequality(seed):
    g = TimeGrid(1.0, 32)
    a = gen_wiener_ensemble(g, 6, seed)
    b = gen_wiener_ensemble(g, 6, seed + 50)
    s = a.replace(a.values + b.values)
    assert lq_norm(s).value <= lq_norm(a).value + lq_norm(b).value + 1e-12


def test_chunked_estimate_matches_whole(wiener_10k):
    dt = wiener_10k.grid.dt
    I = path_integrals(wiener_10k.values, dt, 2.0)
    parts = np.concatenate([path_integrals(wiener_10k.values[i:i + 700], dt, 2.0)
                            for i in range(0, 10_000, 700)])
    np.testing.assert_array_equal(I, parts)
    assert estimate_from_integrals(parts, 2.0).value == lq_norm(wiener_10k).value


@pytest.mark.parametrize("q", [0.5, 0.0, np.inf, np.nan])
def test_rejects_bad_q(q):
    with pytest.raises(InvalidArgumentError):
        lq_norm(SampledPath(TimeGrid(1.0, 4), np.zeros(5)), q)


def test_rejects_bad_rule():
    with pytest.raises(InvalidArgumentError):
        lq_norm(SampledPath(TimeGrid(1.0, 4), np.zeros(5)), 2.0, rule="simpson")

import numpy as np
import pytest

from binapprox.adaptive import HoelderParams, check_hoelder, track_adaptive
from binapprox.errors import InvalidArgumentError, PreconditionError, UnverifiedBoundWarning
from binapprox.grid import SampledPath, TimeGrid, gen_wiener


def _const_sigma(grid, s):
    return SampledPath(grid, np.full(len(grid), float(s)))


def piecewise_fixture(grid, theta, lo=0.2, hi=1.0, freq=20.0):
    """sigma = lo before T/2 and hi after; x has slope lo*cos(freq t) until T/2 + theta, hi*cos after."""
    t = grid.times
    tau = grid.T / 2 + theta
    sigma = SampledPath(grid, np.where(2 * np.arange(len(grid)) < grid.n_fine, lo, hi))
    x_tau = lo * np.sin(freq * tau) / freq
    x = np.where(t < tau, lo * np.sin(freq * t) / freq,
                 x_tau + hi * (np.sin(freq * t) - np.sin(freq * tau)) / freq)
    return SampledPath(grid, x), sigma


def test_sin_is_lipschitz():
    g = TimeGrid(1.0, 2048)
    hp = HoelderParams(1.0, 0.05, 0.05, 1.0, _const_sigma(g, 1.0))
    cert = check_hoelder(SampledPath(g, np.sin(g.times)), hp)
    assert cert.holds and cert.margin <= 0


@pytest.mark.parametrize("q", [0.25, 0.5, 1.0])
def test_constant_path_always_holds(q):
    g = TimeGrid(1.0, 256)
    hp = HoelderParams(q, 0.1, 0.1, 1.0, _const_sigma(g, 0.0))
    assert check_hoelder(SampledPath(g, np.full(257, 4.0)), hp).holds


def test_square_root_is_half_hoelder():
    g = TimeGrid(1.0, 1024)
    x = SampledPath(g, np.sqrt(g.times))
    assert check_hoelder(x, HoelderParams(0.5, 0.1, 0.1, 1.0, _const_sigma(g, 1.0))).holds
    assert not check_hoelder(x, HoelderParams(1.0, 0.1, 0.1, 1.0, _const_sigma(g, 1.0))).holds


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_wiener_is_not_lipschitz(seed):
    g = TimeGrid(1.0, 8192)
    hp = HoelderParams(1.0, 0.01, 0.01, 5.0, _const_sigma(g, 5.0))
    cert = check_hoelder(gen_wiener(g, seed), hp)
    assert not cert.holds and cert.worst_ratio > cert.worst_bound


def test_certificate_uses_lagged_modulus():
    g = TimeGrid(1.0, 4096)
    theta = 1 / 64
    x, sigma = piecewise_fixture(g, theta)
    assert check_hoelder(x, HoelderParams(1.0, theta, theta, 1.0, sigma)).holds
    # without the lag the switch to slope 1 comes too late for the path
    x_early, _ = piecewise_fixture(g, -theta)
    assert not check_hoelder(x_early, HoelderParams(1.0, theta, theta, 1.0, sigma)).holds


def test_zero_modulus_constant_path():
    g = TimeGrid(1.0, 256)
    hp = HoelderParams(1.0, 0.1, 0.1, 1.0, _const_sigma(g, 0.0))
    tr = track_adaptive(SampledPath(g, np.full(257, 1.5)), hp, 16)
    np.testing.assert_array_equal(tr.evaluate().values, 1.5)


def test_sin_bound():
    g = TimeGrid(1.0, 4096)
    hp = HoelderParams(1.0, 0.05, 0.05, 1.0, _const_sigma(g, 1.0))
    tr = track_adaptive(SampledPath(g, np.sin(g.times)), hp, 256)
    assert tr.verified
    np.testing.assert_allclose(tr.rates, 1.0)
    assert tr.bound() == pytest.approx(2 / 256)
    assert np.max(np.abs(tr.evaluate().values - tr.target.values)) <= tr.bound() + 1e-12


@pytest.mark.parametrize("n", [64, 128, 512])
def test_piecewise_fixture_bound_and_rate_switch(n):
    g = TimeGrid(1.0, 8192)
    theta = 1 / 64
    x, sigma = piecewise_fixture(g, theta)
    hp = HoelderParams(1.0, theta, theta, 1.0, sigma)
    tr = track_adaptive(x, hp, n)
    assert tr.verified
    tk = np.arange(n) / n
    np.testing.assert_allclose(tr.rates, np.where(tk < 0.5, 0.2, 1.0))
    sup = np.max(np.abs(tr.evaluate().values - tr.target.values))
    assert sup <= 2 * (1 / n) * 1.0 + 1e-9


def test_half_hoelder_rates():
    g = TimeGrid(1.0, 4096)
    hp = HoelderParams(0.5, 0.1, 0.1, 2.0, _const_sigma(g, 2.0))
    x = SampledPath(g, np.sqrt(g.times))
    tr = track_adaptive(x, hp, 64)
    np.testing.assert_allclose(tr.rates, 2.0 * (1 / 64) ** -0.5)
    assert np.max(np.abs(tr.evaluate().values - tr.target.values)) <= tr.bound() + 1e-12


def test_requires_certificate_and_small_delta():
    g = TimeGrid(1.0, 1024)
    hp = HoelderParams(1.0, 0.01, 0.01, 1.0, _const_sigma(g, 1.0))
    with pytest.raises(PreconditionError):
        track_adaptive(gen_wiener(g, 0), hp, 128)
    with pytest.raises(InvalidArgumentError):
        track_adaptive(SampledPath(g, np.sin(g.times)), hp, 16)


def test_slope_violation_warns():
    g = TimeGrid(1.0, 4096)
    theta = 1 / 64
    good, sigma = piecewise_fixture(g, theta)
    hp = HoelderParams(1.0, theta, theta, 1.0, sigma)
    cert = check_hoelder(good, hp)
    # reuse the certificate on a path that speeds up before the modulus does
    early, _ = piecewise_fixture(g, -theta)
    with pytest.warns(UnverifiedBoundWarning):
        tr = track_adaptive(early, hp, 128, certificate=cert)
    assert not tr.verified


@pytest.mark.parametrize("kw", [{"q": 0.0}, {"q": 1.5}, {"theta": 0.0}, {"eps0": -1.0}, {"C": 0.5}])
def test_params_reject(kw):
    g = TimeGrid(1.0, 16)
    args = dict(q=1.0, theta=0.1, eps0=0.1, C=1.0, sigma=_const_sigma(g, 1.0)) | kw
    with pytest.raises(InvalidArgumentError):
        HoelderParams(**args)


def test_certificate_csv(tmp_path):
    g = TimeGrid(1.0, 64)
    cert = check_hoelder(SampledPath(g, np.sin(g.times)),
                         HoelderParams(1.0, 0.1, 0.1, 1.0, _const_sigma(g, 1.0)))
    cert.to_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "t,eps,ratio,bound,pass" and len(lines) == 66

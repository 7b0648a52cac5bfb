import numpy as np
import pytest

from binapprox.errors import BudgetExceededError, InvalidArgumentError, NumericOverflowError
from binapprox.experiment import (ConfigError, config_from_dict, load_config, measure, recipe_n,
                                  run_experiment, tune_three_epsilon)
from binapprox.grid import PathEnsemble, TimeGrid, gen_wiener_ensemble
from binapprox.metrics import lq_norm
from binapprox.preprocess import preprocess


def _cfg(**kw):
    base = dict(kind="wiener", n_fine=1024, m=[3.0], p=[8.0], n=[32], paths=40, seed=5)
    base.update(kw)
    return config_from_dict(base)


def test_zero_fixture_rows_equal_triangle_norm(tmp_path):
    cfg = _cfg(kind="constant", level=0.0, n_fine=8192, m=[1.0], p=[4.0], n=[4, 8], paths=3)
    report = run_experiment(cfg, out_dir=tmp_path)
    r4, r8 = report.rows
    for row in report.rows:
        Md = row.M / row.n
        assert row.error == pytest.approx(Md / np.sqrt(3), rel=1e-5)
        assert row.bound_ok and row.verified and row.std_error == pytest.approx(0.0, abs=1e-12)
    assert r8.error == pytest.approx(r4.error / 2, rel=1e-5)


def test_wiener_tracking_error_decreases_to_floor(tmp_path):
    cfg = _cfg(n_fine=2048, m=[3.0], p=[8.0], n=[16, 32, 64, 128, 256], paths=200)
    rows = run_experiment(cfg, write=False).rows
    for a, b in zip(rows, rows[1:]):
        assert b.tracking_error <= a.tracking_error + 2 * max(a.tracking_std_error, b.tracking_std_error)
        assert b.error <= a.error + 2 * max(a.std_error, b.std_error)
    # independent measurement of the mollifier floor on the same seeds
    x = gen_wiener_ensemble(TimeGrid(1.0, 2048), 200, 5)
    floor = lq_norm(x.replace(x.values - preprocess(x, 3.0, 8.0).values)).value
    assert rows[-1].error >= floor - 3 * rows[-1].std_error
    assert all(r.bound_ok for r in rows)


def test_output_is_deterministic_and_chunk_independent(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    run_experiment(_cfg(n=[16, 32], chunk=40), out_dir=a)
    run_experiment(_cfg(n=[16, 32], chunk=40), out_dir=b)
    run_experiment(_cfg(n=[16, 32], chunk=7), out_dir=c)
    for name in ("convergence.csv", "plot_data.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
        assert (a / name).read_bytes() == (c / name).read_bytes()


@pytest.mark.parametrize("pipeline", ["thm1_affine", "thm3_step", "thm2_ode", "thm4_ode_step",
                                      "thm5_log"])
def test_every_pipeline_keeps_its_bound(pipeline):
    kw = dict(kind="ito", drift="capped_mean_reversion", x0=0.2) if "ode" in pipeline else {}
    row = run_experiment(_cfg(pipeline=pipeline, **kw), write=False).rows[0]
    assert row.verified and row.bound_ok and row.max_sup_error <= row.bound


def test_adaptive_pipeline():
    cfg = _cfg(pipeline="adaptive", kind="custom_table", table_times=[0.0, 1.0],
               table_values=[0.0, 0.5], sigma=0.5, theta=0.05, eps0=0.05, n=[32], paths=2)
    row = run_experiment(cfg, write=False).rows[0]
    assert row.bound_ok and row.bound == pytest.approx(2 * 0.5 / 32 + 1e-9)


def test_plot_data_and_svg(tmp_path):
    pytest.importorskip("matplotlib")
    run_experiment(_cfg(m=[2.0, 3.0], n=[16, 32], svg=True), out_dir=tmp_path)
    lines = (tmp_path / "plot_data.csv").read_text().splitlines()
    assert lines[0] == "series,n,error,std_error"
    assert lines[1].startswith('"m=2.0,p=8.0",16,')
    assert len(lines) == 5
    assert (tmp_path / "convergence.svg").read_text().lstrip().startswith("<?xml")


@pytest.mark.parametrize("data, key", [
    ({"colour": 1}, "colour"),
    ({"process": {"kind": "wiener"}}, "process"),
    ({"pipeline": "thm9"}, "pipeline"),
    ({"n": [30], "n_fine": 1024}, "n_fine"),
    ({"m": []}, "m"),
    ({"q": 0.5}, "q"),
    ({"n": [2.5]}, "n"),
    ({"kind": "levy"}, "kind"),
    ({"drift": "cubic", "kind": "ito"}, "drift"),
    ({"paths": 0}, "paths"),
])
def test_config_errors_name_the_key(data, key):
    with pytest.raises(ConfigError, match=key):
        config_from_dict(data)


def test_load_config(tmp_path):
    f = tmp_path / "c.toml"
    f.write_text('pipeline = "thm3_step"\nm = [1, 2]\nn = 8\nn_fine = 64\n')
    cfg = load_config(f)
    assert cfg.pipeline == "thm3_step" and cfg.m == [1, 2] and cfg.n == [8]
    f.write_text("m = [1,\n")
    with pytest.raises(ConfigError):
        load_config(f)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


def test_recipe_n_closed_form():
    # 2 T^(1/q) M T / n <= eps/3  <=>  n >= 6 M / eps for T = 1
    assert recipe_n(512.0, 1.0, 2.0, 0.2) == 15360
    assert recipe_n(10.0, 1.0, 2.0, 0.3) == 200
    n = recipe_n(7.0, 2.0, 3.0, 0.17)
    c = 2 * 2.0 ** (1 / 3)
    assert c * 7.0 * 2.0 / n <= 0.17 / 3 < c * 7.0 * 2.0 / (n - 1)
    assert recipe_n(10.0, 1.0, 2.0, 0.3, norm="Xc") == 400


def test_tune_bounded_process_picks_m_one():
    g = TimeGrid(1.0, 4096)
    x = PathEnsemble(g, np.tile(0.9 * np.sin(6 * g.times), (3, 1)))
    res = tune_three_epsilon(x, 2.0, 0.2)
    assert res.m == 1 and res.clip_error == 0.0
    assert res.n >= res.n_min and g.n_fine % res.n == 0


def test_tune_zero_path():
    g = TimeGrid(1.0, 4096)
    res = tune_three_epsilon(PathEnsemble(g, np.zeros((2, 4097))), 2.0, 0.5)
    assert (res.m, res.p) == (1, 1)
    assert res.n_min == recipe_n(2.0, 1.0, 2.0, 0.5)


def test_tune_budget_exceeded():
    g = TimeGrid(1.0, 256)
    x = gen_wiener_ensemble(g, 50, 0)
    with pytest.raises(BudgetExceededError) as info:
        tune_three_epsilon(x, 2.0, 0.2)
    assert "n_min" in info.value.best or "mollify_error" in info.value.best
    with pytest.raises(BudgetExceededError) as info:
        tune_three_epsilon(x, 2.0, 1e-3, m_values=(1, 2))
    assert "clip_error" in info.value.best
    with pytest.raises(InvalidArgumentError):
        tune_three_epsilon(x, 2.0, 0.0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_measure_counts_failures():
    cfg = _cfg(kind="ito", diffusion=1e308, n_fine=8, n=[8], paths=40)
    row = measure(cfg, 3.0, 8.0, 8)
    assert row.n_failed > 0 and row.n_paths + row.n_failed == 40
    everything_fails = _cfg(kind="ito", drift="constant", drift_param=1e308, T=100.0, n_fine=8, n=[8])
    with pytest.raises(NumericOverflowError):
        measure(everything_fails, 3.0, 8.0, 8)

import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from opvi.core import ConfigError, NumericError, ParticleEnsemble, RngStream
from opvi.harness.cli import main as cli_main
from opvi.harness.compare import compare_runs, format_comparison
from opvi.harness.config import config_echo, load_config, parse_config_text, resolve_config
from opvi.harness.plotting import emit_scatter_svg, marching_squares
from opvi.harness.runner import run_experiment, trace_to_csv_text
from opvi.models import MixtureModel, mixture_generate, mixture_posterior_grid

TINY_MIXTURE = {
    "model": "mixture",
    "sampler": "opvi",
    "n_data": "400",
    "rounds": "40",
    "n_particles": "20",
    "batch_schedule": "power",
    "step_alpha0": "1e-4",
}


# -- config parsing -----------------------------------------------------------


def test_parse_config_text():
    raw = parse_config_text("# comment\nmodel = mixture\n\nrounds=12  # trailing\n")
    assert raw == {"model": "mixture", "rounds": "12"}


def test_parse_rejects_garbage():
    with pytest.raises(ConfigError):
        parse_config_text("model mixture\n")
    with pytest.raises(ConfigError):
        parse_config_text("a = 1\na = 2\n")


def test_unknown_key_is_hard_error():
    with pytest.raises(ConfigError, match="unknown config keys: batchsize"):
        resolve_config({"model": "mixture", "batchsize": "20"})


def test_enum_and_bounds_validation():
    with pytest.raises(ConfigError):
        resolve_config({"model": "gauss"})
    with pytest.raises(ConfigError):
        resolve_config({"model": "mixture", "sampler": "hmc"})
    with pytest.raises(ConfigError):
        resolve_config({"model": "mixture", "batch_rho": "-1"})
    with pytest.raises(ConfigError):
        resolve_config({"model": "mixture", "rounds": "twelve"})


def test_infeasible_fitds_rejected_before_run():
    with pytest.raises(ConfigError, match="infeasible"):
        resolve_config({"model": "mixture", "n_data": "10", "rounds": "20"})


def test_dataset_must_exist(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        resolve_config({"model": "bnn_regression", "dataset": str(tmp_path / "nope.csv")})


def test_cross_field_rules():
    with pytest.raises(ConfigError):
        resolve_config({"model": "mixture", "track_regret": "true"})
    with pytest.raises(ConfigError):
        resolve_config({"model": "linreg", "track_energy": "true"})
    with pytest.raises(ConfigError):
        resolve_config({"model": "mixture", "seen_so_far": "true"})  # needs sequential


def test_config_echo_roundtrip():
    cfg = resolve_config(dict(TINY_MIXTURE))
    echoed = resolve_config(parse_config_text(config_echo(cfg)))
    assert config_echo(echoed) == config_echo(cfg)


# -- runner ---------------------------------------------------------------------


def test_run_rows_and_rerun_identical():
    cfg = resolve_config(dict(TINY_MIXTURE))
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    assert len(a.trace) == 40
    assert trace_to_csv_text(a.trace) == trace_to_csv_text(b.trace)
    assert a.summary["audit_ok"]


def test_run_thread_cap_invariance(monkeypatch):
    cfg = resolve_config(dict(TINY_MIXTURE))
    monkeypatch.setenv("OPVI_NUM_THREADS", "1")
    a = run_experiment(cfg)
    monkeypatch.setenv("OPVI_NUM_THREADS", "4")
    b = run_experiment(cfg)
    assert trace_to_csv_text(a.trace) == trace_to_csv_text(b.trace)


def test_run_seed_changes_trace():
    cfg = resolve_config(dict(TINY_MIXTURE))
    cfg2 = resolve_config({**TINY_MIXTURE, "seed": "1"})
    assert trace_to_csv_text(run_experiment(cfg).trace) != \
        trace_to_csv_text(run_experiment(cfg2).trace)


def test_divergent_config_aborts_with_round():
    cfg = resolve_config({**TINY_MIXTURE, "step_alpha0": "1000", "rounds": "60",
                          "n_data": "600"})
    with pytest.raises(NumericError, match="round"):
        run_experiment(cfg)


def test_run_writes_artifacts(tmp_path):
    cfg = resolve_config(dict(TINY_MIXTURE))
    res = run_experiment(cfg, out_dir=str(tmp_path))
    assert res.out_dir is not None
    for name in ("resolved_config.txt", "trace.csv", "summary.txt", "ensemble.csv"):
        assert os.path.isfile(os.path.join(res.out_dir, name))
    # reruns land in fresh directories
    res2 = run_experiment(cfg, out_dir=str(tmp_path))
    assert res2.out_dir != res.out_dir
    with open(os.path.join(res.out_dir, "trace.csv")) as fh:
        assert fh.read() == trace_to_csv_text(res.trace)


def test_sgld_and_sequential_paths():
    cfg = resolve_config({
        "model": "mixture", "sampler": "sgld", "n_data": "200", "rounds": "20",
        "n_particles": "5", "batch_schedule": "static", "batch_size": "10",
        "step_alpha0": "1e-4", "stream_mode": "sequential", "seen_so_far": "true",
    })
    res = run_experiment(cfg)
    assert res.summary["audit_ok"]
    assert len(res.trace) == 20


def test_bnn_run_with_eval_every():
    cfg = resolve_config({
        "model": "bnn_regression", "sampler": "opvi", "n_data": "300", "rounds": "30",
        "n_particles": "5", "bnn_hidden": "4", "batch_schedule": "static",
        "batch_size": "9", "step_alpha0": "1e-5", "eval_every": "10",
    })
    res = run_experiment(cfg)
    evals = [r for r in res.trace if r.rmse is not None]
    assert len(evals) == 3
    assert res.trace[-1].rmse is not None and res.trace[-1].test_ll is not None


def test_regret_column_reproducible_from_csv():
    cfg = resolve_config({
        "model": "linreg", "sampler": "online_map", "n_data": "500", "rounds": "120",
        "batch_schedule": "power", "step_alpha0": "2e-4", "track_regret": "true",
        "fitds": "false",
    })
    res = run_experiment(cfg)
    text = trace_to_csv_text(res.trace)
    col = text.splitlines()[0].split(",").index("regret_cum")
    cums = [float(line.split(",")[col]) for line in text.splitlines()[1:]]
    increments = np.diff([0.0] + cums)
    assert np.all(increments >= -1e-9)  # exact oracle: gaps are nonnegative
    np.testing.assert_allclose(np.cumsum(increments), cums, rtol=1e-12)
    rerun = run_experiment(cfg)
    assert trace_to_csv_text(rerun.trace) == text


# -- plotting ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_grid():
    model = MixtureModel(data=mixture_generate(300, 0.0, 1.0, RngStream(0)))
    return mixture_posterior_grid(model, resolution=60)


def test_svg_well_formed(tmp_path, small_grid):
    ens = ParticleEnsemble(np.random.default_rng(1).standard_normal((17, 2)))
    path = str(tmp_path / "scatter.svg")
    emit_scatter_svg(ens, small_grid, path)
    root = ET.parse(path).getroot()
    circles = [el for el in root.iter() if el.tag.endswith("circle")]
    assert len(circles) == 17


def test_svg_levels_strictly_decreasing(small_grid):
    levels = small_grid.density_quantile_levels([0.5, 0.9, 0.99])
    assert levels[0] > levels[1] > levels[2]


def test_svg_rejects_non_2d(tmp_path, small_grid):
    ens = ParticleEnsemble(np.zeros((3, 4)))
    with pytest.raises(ConfigError):
        emit_scatter_svg(ens, small_grid, str(tmp_path / "x.svg"))


def test_marching_squares_circle():
    xs = np.linspace(-2, 2, 80)
    ys = np.linspace(-2, 2, 80)
    vals = -(xs[:, None] ** 2 + ys[None, :] ** 2)
    segs = marching_squares(vals, xs, ys, level=-1.0)  # unit circle
    assert segs
    for (xa, ya), (xb, yb) in segs:
        for x, y in ((xa, ya), (xb, yb)):
            assert abs(np.hypot(x, y) - 1.0) < 0.1


# -- compare ---------------------------------------------------------------------


def _write_run(tmp_path, seed):
    cfg = resolve_config({**TINY_MIXTURE, "seed": str(seed)})
    return run_experiment(cfg, out_dir=str(tmp_path))


def test_compare_zero_sd_for_identical(tmp_path):
    res = _write_run(tmp_path, 0)
    trace = os.path.join(res.out_dir, "trace.csv")
    rows = compare_runs([trace, trace])
    assert len(rows) == 1
    assert rows[0].n_runs == 2
    for mean, sd in rows[0].stats.values():
        assert sd == 0.0
    assert "mixture/opvi" in format_comparison(rows)


def test_compare_groups_by_config_modulo_seed(tmp_path):
    traces = [os.path.join(_write_run(tmp_path, s).out_dir, "trace.csv") for s in (0, 1, 2)]
    rows = compare_runs(traces)
    assert len(rows) == 1 and rows[0].n_runs == 3


def test_compare_horizon_mismatch(tmp_path):
    a = _write_run(tmp_path, 0)
    cfg = resolve_config({**TINY_MIXTURE, "rounds": "20"})
    b = run_experiment(cfg, out_dir=str(tmp_path))
    with pytest.raises(ConfigError, match="horizon"):
        compare_runs([os.path.join(a.out_dir, "trace.csv"),
                      os.path.join(b.out_dir, "trace.csv")])


def test_compare_empty_input():
    with pytest.raises(ConfigError):
        compare_runs([])


# -- CLI ---------------------------------------------------------------------------


def _write_config(tmp_path, extra=None):
    lines = [f"{k} = {v}" for k, v in {**TINY_MIXTURE, **(extra or {})}.items()]
    path = tmp_path / "exp.cfg"
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def test_cli_run_and_plot(tmp_path, capsys):
    cfg_path = _write_config(tmp_path)
    out_dir = tmp_path / "runs"
    out_dir.mkdir()
    assert cli_main(["run", cfg_path, "--out", str(out_dir)]) == 0
    run_dir = os.path.join(str(out_dir), os.listdir(out_dir)[0])
    captured = capsys.readouterr()
    assert "audit_ok = True" in captured.out
    assert cli_main(["plot", run_dir]) == 0
    assert os.path.isfile(os.path.join(run_dir, "scatter.svg"))


def test_cli_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("model = mixture\nbanana = 1\n")
    assert cli_main(["run", str(bad)]) == 2
    assert cli_main(["compare"]) == 2


def test_cli_numeric_abort_exit_code(tmp_path):
    cfg_path = _write_config(tmp_path, {"step_alpha0": "1000", "n_data": "600",
                                        "rounds": "60"})
    assert cli_main(["run", cfg_path]) == 3


def test_cli_seed_override(tmp_path, capsys):
    cfg_path = _write_config(tmp_path)
    assert cli_main(["run", cfg_path, "--seed", "3"]) == 0
    base = capsys.readouterr().out
    assert cli_main(["run", cfg_path, "--seed", "3"]) == 0
    assert capsys.readouterr().out == base


def test_cli_validate_fpc(tmp_path, capsys):
    cfg_path = _write_config(tmp_path, {"batch_size": "10"})
    assert cli_main(["validate-fpc", cfg_path, "--draws", "2000"]) == 0
    out = capsys.readouterr().out
    assert "rel_err" in out

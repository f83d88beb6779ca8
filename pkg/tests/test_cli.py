import json

import numpy as np
import pytest

from maxstable.cli import (
    UsageError,
    main,
    parse_box,
    parse_grid,
    parse_matrix,
    parse_variogram,
    resolve_seed,
)
from maxstable.fdd import husler_reiss_V
from maxstable.seeding import DEFAULT_SEED


# ---------------------------------------------------------------------------
# value parsers


def test_parse_grid_range_syntax():
    grid = parse_grid("-5:0.5:21")
    assert grid.shape == (21, 1)
    assert grid[0, 0] == -5.0 and grid[-1, 0] == 5.0


def test_parse_grid_two_axes():
    grid = parse_grid("0:1:3x0:1:2")
    assert grid.shape == (6, 2)
    assert grid[-1].tolist() == [2.0, 1.0]


def test_parse_grid_point_lists():
    assert parse_grid("0,1,2.5").shape == (3, 1)
    pts = parse_grid("0,0;1,1;2,0")
    assert pts.shape == (3, 2)
    with pytest.raises(UsageError):
        parse_grid("0:1")
    with pytest.raises(UsageError):
        parse_grid("a,b")


def test_parse_matrix_and_box():
    assert parse_matrix("1,0.5,0.5,1").shape == (2, 2)
    with pytest.raises(UsageError):
        parse_matrix("1,2,3")
    box = parse_box("0,1;-1,1")
    assert box.shape == (2, 2)
    with pytest.raises(UsageError):
        parse_box("0,1,2")


def test_parse_variogram():
    v = parse_variogram("fractional:scale=2;alpha=1.5")
    assert v.kind == "fractional" and v.alpha == 1.5
    assert parse_variogram("quadratic:sigma=1").kind == "quadratic"
    with pytest.raises(UsageError):
        parse_variogram("spherical:range=1")
    with pytest.raises(UsageError):
        parse_variogram("fractional:scale=2")


def test_resolve_seed_precedence(monkeypatch):
    monkeypatch.delenv("MAXSTABLE_SEED", raising=False)
    assert resolve_seed(None) == DEFAULT_SEED
    monkeypatch.setenv("MAXSTABLE_SEED", "0x10")
    assert resolve_seed(None) == 16
    assert resolve_seed(7) == 7
    monkeypatch.setenv("MAXSTABLE_SEED", "not-a-seed")
    with pytest.raises(UsageError):
        resolve_seed(None)


# ---------------------------------------------------------------------------
# simulate


def test_simulate_smith_csv(tmp_path):
    out = tmp_path / "field.csv"
    code = main([
        "simulate", "--construction", "smith", "--sigma", "1",
        "--grid", "-1:0.5:5", "--n-points", "2000", "--seed", "7",
        "--output", str(out),
    ])
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0].startswith("# construction=smith seed=7 n_points=2000 converged=")
    header_lines = [ln for ln in lines if ln.startswith("#")]
    assert any("subcommand=simulate" in ln for ln in header_lines)
    data = [ln for ln in lines if not ln.startswith("#")]
    assert len(data) == 5
    t, v = (float(x) for x in data[0].split(","))
    assert t == -1.0 and v > 0


def test_simulate_is_reproducible(tmp_path):
    args = [
        "simulate", "--construction", "smith", "--sigma", "1",
        "--grid", "0:0.5:3", "--n-points", "1000", "--seed", "3",
    ]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--output", str(a)]) == 0
    assert main(args + ["--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_other_constructions(tmp_path):
    assert main([
        "simulate", "--construction", "br",
        "--variogram", "fractional:scale=1;alpha=1",
        "--grid", "0:0.5:3", "--n-points", "1000",
        "--output", str(tmp_path / "br.csv"),
    ]) == 0
    assert main([
        "simulate", "--construction", "mmm", "--sigma", "1",
        "--grid", "0:0.5:3", "--output", str(tmp_path / "mmm.csv"),
    ]) == 0
    assert main([
        "simulate", "--construction", "general",
        "--dist", "uniform:a=0;b=1", "--kappa", "cgf",
        "--grid", "0:0.5:3", "--n-points", "1000",
        "--output", str(tmp_path / "gen.csv"),
    ]) == 0


def test_simulate_plot_data(tmp_path):
    plot = tmp_path / "plot.csv"
    assert main([
        "simulate", "--construction", "smith", "--sigma", "1",
        "--grid", "0:0.5:3", "--n-points", "500",
        "--output", str(tmp_path / "f.csv"), "--plot-data", str(plot),
    ]) == 0
    rows = plot.read_text().strip().split("\n")
    assert len(rows) == 3 and not rows[0].startswith("#")


def test_simulate_missing_required_parameter():
    assert main(["simulate", "--construction", "smith", "--grid", "0,1"]) == 2


def test_simulate_numeric_error_exit_code(tmp_path):
    # singular sigma makes the moving-maxima representation ill-posed
    assert main([
        "simulate", "--construction", "mmm", "--sigma", "0",
        "--grid", "0,1", "--output", str(tmp_path / "x.csv"),
    ]) == 3


# ---------------------------------------------------------------------------
# defect / verify


def test_defect_gaussian_exit_zero(tmp_path, capsys):
    code = main(["defect", "--dist", "gaussian:mu=0;sigma=1", "--budget", "100"])
    out = capsys.readouterr().out
    assert code == 0
    report = json.loads(out)
    assert report["verdict"] == "stationary-consistent"
    assert report["config"]["seed"] == DEFAULT_SEED


def test_defect_exponential_exit_one(capsys):
    code = main([
        "defect", "--dist", "exp:lambda=1", "--budget", "100", "--box", "0,0.6",
    ])
    report = json.loads(capsys.readouterr().out)
    assert code == 1
    assert report["verdict"] == "violated"
    assert report["max_abs_defect"] > 0.084950 - 1e-9


def test_defect_box_outside_domain_exit_three(capsys):
    assert main(["defect", "--dist", "exp:lambda=1", "--box", "0,2"]) == 3


def test_defect_bad_dist_spec_exit_two(capsys):
    assert main(["defect", "--dist", "cauchy:x0=0"]) == 2


def test_verify_small_runs(capsys):
    code = main([
        "verify", "--dist", "gaussian:mu=0;sigma=1",
        "--replicates", "150", "--n-points", "1000", "--budget", "30",
    ])
    report = json.loads(capsys.readouterr().out)
    assert code == 0
    assert report["verdict"] == "Gaussian-consistent"

    code = main([
        "verify", "--dist", "exp:lambda=1",
        "--replicates", "150", "--n-points", "1000", "--budget", "30",
    ])
    report = json.loads(capsys.readouterr().out)
    assert code == 1
    assert report["verdict"] == "non-stationary in dimension 2"
    assert report["marginals_pass"] is True


# ---------------------------------------------------------------------------
# fdd / compare-reps


def test_fdd_closed_bivariate(capsys):
    code = main([
        "fdd", "--dist", "gaussian:mu=0;sigma=1", "--ts", "0;2", "--xs", "1,1",
        "--method", "closed-bivariate",
    ])
    line = json.loads(capsys.readouterr().out)
    assert code == 0
    assert line["V"] == pytest.approx(husler_reiss_V(4.0, 1.0, 1.0).value, abs=1e-15)
    assert line["cdf"] == pytest.approx(np.exp(-line["V"]), abs=1e-15)


def test_fdd_mc_reports_se(capsys):
    code = main([
        "fdd", "--dist", "gaussian:mu=0;sigma=1", "--ts", "0;1", "--xs", "1,1",
        "--method", "mc", "--mc-n", "20000", "--seed", "11",
    ])
    line = json.loads(capsys.readouterr().out)
    assert code == 0
    assert line["method"] == "mc" and line["se"] > 0


def test_fdd_closed_bivariate_needs_gaussian(capsys):
    assert main([
        "fdd", "--dist", "exp:lambda=1", "--ts", "0;0.5", "--xs", "1,1",
        "--method", "closed-bivariate",
    ]) == 3


def test_compare_reps_small(capsys):
    code = main([
        "compare-reps", "--sigma", "1", "--grid", "0,1",
        "--replicates", "400", "--n-points", "1000", "--threshold", "0.2",
        "--seed", "13",
    ])
    report = json.loads(capsys.readouterr().out)
    assert code == 0
    assert report["equivalent"] is True
    assert report["sup_cdf_difference"] < 0.2


def test_compare_reps_needs_two_points(capsys):
    assert main(["compare-reps", "--sigma", "1", "--grid", "0"]) == 2


# ---------------------------------------------------------------------------
# seeds, config files, argparse behaviour


def test_seed_env_changes_output(tmp_path, monkeypatch, capsys):
    args = [
        "defect", "--dist", "exp:lambda=1", "--budget", "50", "--box", "0,0.5",
    ]
    monkeypatch.setenv("MAXSTABLE_SEED", "1")
    main(args)
    first = json.loads(capsys.readouterr().out)
    monkeypatch.setenv("MAXSTABLE_SEED", "2")
    main(args)
    second = json.loads(capsys.readouterr().out)
    assert first["config"]["seed"] == 1 and second["config"]["seed"] == 2
    # explicit flag wins over the environment
    main(args + ["--seed", "9"])
    assert json.loads(capsys.readouterr().out)["config"]["seed"] == 9


def test_config_file_fills_missing_flags(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("budget = 77\nbox = 0,0.5\n# a comment\n")
    code = main([
        "defect", "--dist", "exp:lambda=1", "--budget", "5",
        "--config", str(cfg),
    ])
    report = json.loads(capsys.readouterr().out)
    assert code == 1
    # flag given on the command line wins; box comes from the file
    assert report["config"]["budget"] == 5
    assert report["config"]["box"] == "0,0.5"


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("no equals sign here\n")
    assert main(["defect", "--dist", "exp:lambda=1", "--config", str(bad)]) == 2
    assert main(["defect", "--dist", "exp:lambda=1", "--config", str(tmp_path / "gone")]) == 2


def test_unknown_flag_exits_two():
    with pytest.raises(SystemExit) as err:
        main(["defect", "--dist", "exp:lambda=1", "--frobnicate"])
    assert err.value.code == 2


def test_negative_grid_values_parse_as_arguments(tmp_path):
    # "-1,0,1" must be treated as a value of --grid, not as a flag
    assert main([
        "simulate", "--construction", "smith", "--sigma", "1",
        "--grid", "-1,0,1", "--n-points", "500",
        "--output", str(tmp_path / "f.csv"),
    ]) == 0

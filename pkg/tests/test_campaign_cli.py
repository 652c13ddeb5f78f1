import csv
import json
import math
import statistics

import pytest

from sofsyn import builtin_plant_path
from sofsyn.campaign import (
    CampaignSpec,
    RunRow,
    quartiles,
    read_campaign_json,
    read_rows_csv,
    run_campaign,
    summarize,
    write_campaign_json,
    write_rows_csv,
    write_summary_csv,
)
from sofsyn.cli import main
from sofsyn.driver import SolverConfig
from sofsyn.errors import ConfigError
from sofsyn.objectives import ObjectiveKind

UNSTABILIZABLE = """
name hopeless
dims 1 1 1 1 1
matrix A 1 1
1
matrix B1 1 1
1
matrix B 1 1
0
matrix C1 1 1
1
matrix D11 1 1
0
matrix D12 1 1
0
matrix C 1 1
1
"""


def di_config(**kw):
    base = dict(objective=ObjectiveKind.SPECTRAL_ABSCISSA, t_max=300, t_s=5, seed=0)
    base.update(kw)
    return SolverConfig(**base)


def make_row(problem="p", run_index=0, objective=1.0, feasible=True, wall=0.1):
    return RunRow(
        problem=problem, run_index=run_index, seed=run_index, objective=objective,
        fitness=-objective, gain_norm=1.0, feasible=feasible,
        global_evals=100, local_evals=500, wall_time_s=wall,
    )


# ---------------------------------------------------------------------------
# statistics


def test_quartiles_median_of_halves():
    assert quartiles([1.0]) == (1.0, 1.0, 1.0)
    assert quartiles([1, 2, 3, 4]) == (1.5, 2.5, 3.5)
    assert quartiles([1, 2, 3, 4, 5]) == (1.5, 3.0, 4.5)
    assert quartiles([3, 1, 2]) == (1.0, 2.0, 3.0)


def test_summarize_excludes_infeasible():
    rows = [make_row(objective=1.0), make_row(run_index=1, objective=3.0),
            make_row(run_index=2, objective=math.inf, feasible=False)]
    s = summarize("p", rows)
    assert s.runs == 3 and s.success_count == 2
    assert s.best == 1.0 and s.worst == 3.0 and s.median == 2.0
    assert s.best <= s.median <= s.worst


def test_summarize_no_feasible_runs():
    rows = [make_row(objective=math.inf, feasible=False)]
    s = summarize("p", rows)
    assert s.success_count == 0
    assert math.isinf(s.best) and math.isinf(s.median)
    assert math.isnan(s.std)


def test_campaign_runs_and_is_reproducible():
    spec = CampaignSpec(
        problems=(builtin_plant_path("double_integrator"),),
        config=di_config(),
        runs=3,
        base_seed=5,
    )
    rows1, sums1 = run_campaign(spec)
    rows2, sums2 = run_campaign(spec)
    assert [r.seed for r in rows1] == [5, 6, 7]
    for a, b in zip(rows1, rows2):
        assert (a.objective, a.fitness, a.gain_norm, a.feasible) == (
            b.objective, b.fitness, b.gain_norm, b.feasible)
    assert sums1[0].success_count == 3


def test_campaign_threads_do_not_change_rows():
    spec = CampaignSpec(
        problems=(builtin_plant_path("double_integrator"),),
        config=di_config(),
        runs=4,
    )
    rows1, _ = run_campaign(spec)
    rows3, _ = run_campaign(CampaignSpec(**{**vars(spec), "threads": 3}))
    for a, b in zip(rows1, rows3):
        assert a.objective == b.objective and a.run_index == b.run_index


def test_campaign_single_run_degenerate_stats():
    spec = CampaignSpec(
        problems=(builtin_plant_path("double_integrator"),),
        config=di_config(),
        runs=1,
    )
    _, sums = run_campaign(spec)
    s = sums[0]
    assert s.best == s.median == s.worst == s.q1 == s.q3
    assert s.std == 0.0


def test_rows_csv_roundtrip_with_inf(tmp_path):
    rows = [make_row(objective=math.inf, feasible=False), make_row(run_index=1)]
    path = tmp_path / "rows.csv"
    write_rows_csv(rows, path)
    back = read_rows_csv(path)
    assert back == rows
    text = path.read_text()
    assert "inf" in text


def test_campaign_json_roundtrip_with_inf(tmp_path):
    rows = [make_row(objective=math.inf, feasible=False)]
    sums = [summarize("p", rows)]
    path = tmp_path / "campaign.json"
    write_campaign_json(rows, sums, path)
    back_rows, back_sums = read_campaign_json(path)
    assert back_rows == rows
    assert math.isinf(back_sums[0].best)
    assert math.isnan(back_sums[0].std)
    doc = json.loads(path.read_text())
    assert doc["rows"][0]["objective"] == "inf"


def test_summary_matches_independent_recompute(tmp_path):
    spec = CampaignSpec(
        problems=(builtin_plant_path("double_integrator"),),
        config=di_config(),
        runs=5,
    )
    rows, sums = run_campaign(spec)
    rows_path = tmp_path / "rows.csv"
    sums_path = tmp_path / "summary.csv"
    write_rows_csv(rows, rows_path)
    write_summary_csv(sums, sums_path)

    # recompute from the CSV with stdlib tools only
    with open(rows_path) as fh:
        recs = [r for r in csv.DictReader(fh)]
    objectives = sorted(float(r["objective"]) for r in recs if r["feasible"] == "true")
    with open(sums_path) as fh:
        s = next(csv.DictReader(fh))
    assert int(s["success_count"]) == len(objectives)
    assert abs(float(s["best"]) - objectives[0]) <= 1e-12
    assert abs(float(s["worst"]) - objectives[-1]) <= 1e-12
    assert abs(float(s["median"]) - statistics.median(objectives)) <= 1e-12
    half = len(objectives) // 2
    assert abs(float(s["q1"]) - statistics.median(objectives[:half])) <= 1e-12
    assert abs(float(s["q3"]) - statistics.median(objectives[-half:])) <= 1e-12
    assert abs(float(s["std"]) - statistics.stdev(objectives)) <= 1e-12
    mean_wall = sum(float(r["wall_time_s"]) for r in recs) / len(recs)
    assert abs(float(s["mean_wall_time_s"]) - mean_wall) <= 1e-12


def test_campaign_spec_validation():
    with pytest.raises(ConfigError):
        CampaignSpec(problems=(), runs=1)
    with pytest.raises(ConfigError):
        CampaignSpec(problems=("x",), runs=0)


# ---------------------------------------------------------------------------
# CLI


def test_cli_validate_prints_dims(capsys):
    code = main(["validate", "--problem", builtin_plant_path("double_integrator")])
    out = capsys.readouterr().out
    assert code == 0
    assert "n_x=2" in out and "n_u=1" in out and "n_y=2" in out


def test_cli_validate_missing_file_names_path(capsys):
    code = main(["validate", "--problem", "/nonexistent/thing.plant"])
    err = capsys.readouterr().err
    assert code == 2
    assert "thing.plant" in err


def test_cli_validate_truncated_matrix(tmp_path, capsys):
    path = tmp_path / "bad.plant"
    good = open(builtin_plant_path("first_order_lag")).read()
    path.write_text(good.replace("matrix C 1 1\n1", "matrix C 1 1"))
    assert main(["validate", "--problem", str(path)]) == 2


def test_cli_validate_duplicate_block(tmp_path, capsys):
    path = tmp_path / "dup.plant"
    good = open(builtin_plant_path("first_order_lag")).read()
    path.write_text(good + "\nmatrix A 1 1\n-1\n")
    assert main(["validate", "--problem", str(path)]) == 2


def test_cli_solve_double_integrator_sa(tmp_path, capsys):
    out_path = tmp_path / "run.json"
    code = main([
        "solve", "--problem", builtin_plant_path("double_integrator"),
        "--objective", "sa", "--seed", "1", "--budget", "400", "--local-iters", "5",
        "--out", str(out_path),
    ])
    out = capsys.readouterr().out
    assert code == 0
    assert "feasible: true" in out
    doc = json.loads(out_path.read_text())
    assert doc["format"] == "sofsyn.run"
    assert doc["best_objective"] < 0
    assert doc["feasible"] is True


def test_cli_solve_unstabilizable_reports_infeasible(tmp_path, capsys):
    plant_path = tmp_path / "hopeless.plant"
    plant_path.write_text(UNSTABILIZABLE)
    out_path = tmp_path / "run.json"
    code = main([
        "solve", "--problem", str(plant_path), "--objective", "hinf",
        "--budget", "50", "--out", str(out_path),
    ])
    out = capsys.readouterr().out
    assert code == 0
    assert "feasible: false" in out
    doc = json.loads(out_path.read_text())
    assert doc["best_objective"] == "inf"
    assert doc["feasible"] is False


def test_cli_oracle_first_order_lag(capsys):
    code = main(["oracle", "--problem", builtin_plant_path("first_order_lag")])
    out = capsys.readouterr().out
    assert code == 0
    values = {}
    for line in out.splitlines():
        if ":" in line:
            key, _, val = line.partition(":")
            values[key.strip()] = val.split()[0]
    assert abs(float(values["bisection norm"]) - 1.0) < 1e-4
    assert abs(float(values["grid oracle"]) - 1.0) < 1e-4
    assert float(values["difference"]) < 1e-4


def test_cli_oracle_resonant(capsys):
    code = main(["oracle", "--problem", builtin_plant_path("resonant_2state")])
    out = capsys.readouterr().out
    assert code == 0
    peak = 1.0 / (2 * 0.05 * math.sqrt(1 - 0.05**2))
    for token in ("bisection norm", "grid oracle"):
        line = next(l for l in out.splitlines() if l.startswith(token))
        assert abs(float(line.split(":")[1].split()[0]) - peak) < 1e-3


def test_cli_oracle_unstable_exit_3(tmp_path, capsys):
    plant_path = tmp_path / "hopeless.plant"
    plant_path.write_text(UNSTABILIZABLE)
    code = main(["oracle", "--problem", str(plant_path)])
    assert code == 3
    assert "unstable" in capsys.readouterr().err


def test_cli_oracle_gain_flag(capsys):
    code = main([
        "oracle", "--problem", builtin_plant_path("double_integrator"),
        "--gain=-1,-2",
    ])
    assert code == 0


def test_cli_oracle_bad_gain_shape(capsys):
    code = main([
        "oracle", "--problem", builtin_plant_path("double_integrator"),
        "--gain=-1,-2;0,1",
    ])
    assert code == 2


def test_cli_oracle_unparsable_gain(capsys):
    code = main([
        "oracle", "--problem", builtin_plant_path("double_integrator"),
        "--gain=a,b",
    ])
    assert code == 2


def _read_csv_without_wall_time(path):
    with open(path) as fh:
        recs = list(csv.DictReader(fh))
    for rec in recs:
        rec.pop("wall_time_s", None)
        rec.pop("mean_wall_time_s", None)
    return recs


def test_cli_bench_deterministic_outputs(tmp_path, capsys):
    args = [
        "bench", "--problem", builtin_plant_path("double_integrator"),
        "--objective", "sa", "--runs", "4", "--seed", "3",
        "--budget", "300", "--local-iters", "5",
    ]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    capsys.readouterr()
    for suffix in ("_rows.csv", "_summary.csv"):
        rec_a = _read_csv_without_wall_time(tmp_path / f"a{suffix}")
        rec_b = _read_csv_without_wall_time(tmp_path / f"b{suffix}")
        assert rec_a == rec_b
    rows = read_rows_csv(tmp_path / "a_rows.csv")
    assert len(rows) == 4
    assert all(r.feasible for r in rows)


def test_cli_bench_json_format(tmp_path, capsys):
    out = tmp_path / "camp.json"
    code = main([
        "bench", "--problem", builtin_plant_path("double_integrator"),
        "--objective", "sa", "--runs", "2", "--budget", "300", "--local-iters", "5",
        "--format", "json", "--out", str(out),
    ])
    capsys.readouterr()
    assert code == 0
    rows, sums = read_campaign_json(out)
    assert len(rows) == 2 and sums[0].runs == 2


def test_cli_threads_env_var(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SOFSYN_THREADS", "2")
    code = main([
        "solve", "--problem", builtin_plant_path("double_integrator"),
        "--objective", "sa", "--budget", "300", "--local-iters", "5",
    ])
    capsys.readouterr()
    assert code == 0


def test_cli_threads_env_var_invalid(monkeypatch, capsys):
    monkeypatch.setenv("SOFSYN_THREADS", "lots")
    code = main([
        "solve", "--problem", builtin_plant_path("double_integrator"),
        "--objective", "sa", "--budget", "300",
    ])
    assert code == 2


def test_campaign_failed_run_recorded_and_continues():
    # rand4 has n=4 (population 8), so t_max=6 is an invalid configuration
    # for it while the double integrator (n=2, population 6) still runs
    spec = CampaignSpec(
        problems=(builtin_plant_path("rand4"), builtin_plant_path("double_integrator")),
        config=di_config(t_max=6, t_s=1),
        runs=2,
    )
    rows, sums = run_campaign(spec)
    assert len(rows) == 4
    rand4_rows = [r for r in rows if r.problem == "rand4"]
    assert all(not r.feasible and math.isinf(r.objective) for r in rand4_rows)
    assert sums[0].success_count == 0
    di_rows = [r for r in rows if r.problem == "double_integrator"]
    assert all(r.global_evals == 6 for r in di_rows)

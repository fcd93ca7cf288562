import pytest

from rdcp.cli import main
from rdcp.experiments import thread_count
from rdcp.output import read_csv


def run(tmp_path, name, *args):
    out = tmp_path / name
    assert main([*args, "--out", str(out)]) == 0
    return out


def test_simulate_final_and_deterministic(tmp_path):
    args = ("simulate", "--host", "complete:100", "--dist", "2:1", "--until", "final", "--seed", "7", "--runs", "3")
    a = run(tmp_path, "a.csv", *args)
    b = run(tmp_path, "b.csv", *args)
    assert a.read_bytes() == b.read_bytes()
    row = read_csv(a)[-1]
    assert float(row["unsat_frac"]) <= 0.02
    assert "# seed: 7" in a.read_text()


def test_simulate_trajectory_and_snapshots(tmp_path):
    traj = tmp_path / "traj.csv"
    out = run(
        tmp_path, "s.csv", "simulate", "--host", "regular:200:10", "--dist", "3:1", "--until", "time:2",
        "--snapshots", "0.5,1", "--trajectory", str(traj),
    )
    rows = read_csv(out)
    assert [float(r["t"]) for r in rows] == [0.5, 1.0, 2.0]
    steps = read_csv(traj)
    assert [int(r["step"]) for r in steps] == list(range(1, len(steps) + 1))


def test_parity_error_surfaces(capsys):
    assert main(["simulate", "--host", "regular:5:3", "--dist", "3:1"]) == 2
    assert "even" in capsys.readouterr().err


def test_bad_dist_reports_field(capsys):
    assert main(["simulate", "--host", "complete:10", "--dist", "3:1,oops"]) == 2
    assert "field 2" in capsys.readouterr().err


def test_bad_until(capsys):
    assert main(["simulate", "--host", "complete:10", "--dist", "3:1", "--until", "soon"]) == 2


def test_critical_rows(tmp_path):
    out = run(tmp_path, "c.csv", "critical-time", "--dist", "3:1", "--dist", "8:1", "--dist", "12:1", "--G", "300")
    rows = {r["dist"]: r for r in read_csv(out)}
    assert abs(float(rows["3:1"]["mu"]) - 1) < 5e-3
    assert 0.8 < float(rows["8:1"]["ratio"]) < 1.2
    assert rows["12:1"]["flags"] == "below_resolution" and rows["12:1"]["ratio"] == ""


def test_compare_R0_is_zero(tmp_path):
    out = run(
        tmp_path, "cmp.csv", "compare", "--host", "complete:3000", "--dist", "3:1", "--t-hat", "0.75",
        "--R", "0,1", "--samples", "5000", "--census-dir", str(tmp_path / "cen"),
    )
    rows = read_csv(out)
    assert float(rows[0]["tv"]) == 0
    assert float(rows[1]["tv"]) < 0.05
    assert (tmp_path / "cen" / "limit_R1.csv").exists()


def test_compare_step_indexed(tmp_path):
    out = run(
        tmp_path, "step.csv", "compare", "--host", "complete:10000", "--dist", "3:1", "--steps-per-n", "0.3",
        "--R", "1", "--samples", "20000",
    )
    assert float(read_csv(out)[0]["tv"]) < 0.03


def test_compare_guards(capsys):
    assert main(["compare", "--host", "complete:100", "--dist", "3:1", "--t-hat", "1", "--R", "5"]) == 2
    assert main(["compare", "--host", "complete:100", "--dist", "3:1", "--R", "1"]) == 2


def test_limit_census_sums_to_one(tmp_path):
    out = run(tmp_path, "lc.csv", "limit-census", "--dist", "3:1", "--t-hat", "0.6", "--R", "2", "--samples", "3000", "--sampler", "pwit")
    assert sum(float(r["frequency"]) for r in read_csv(out)) == pytest.approx(1.0)


def test_spectral_command(tmp_path):
    out = run(tmp_path, "sp.csv", "spectral", "--dist", "3:1", "--t-hat", "critical", "--G", "500")
    row = read_csv(out)[0]
    assert abs(float(row["mu"]) - 1) < 5e-3 and float(row["residual"]) < 1e-2


def test_thread_env_override(monkeypatch):
    monkeypatch.setenv("RDCP_THREADS", "3")
    assert thread_count(8) == 3
    monkeypatch.delenv("RDCP_THREADS")
    assert thread_count(2) == 2

import json
import subprocess
import sys

import numpy as np
import pytest

from fptrade.cli import main, threshold
from fptrade.market_data import load_universe


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def error_line(err):
    lines = err.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("fptrade-error: ")
    return lines[0]


@pytest.fixture
def price_csv(tmp_path):
    rng = np.random.default_rng(1)
    days = np.arange(np.datetime64("2010-01-04"), np.datetime64("2012-12-31"))
    days = [d for d in days if np.is_busday(d)][:320]
    rows = ["date,ticker,adj_close"]
    for k, t in enumerate(["AAA", "BBB", "CCC"]):
        p = 20 * np.exp(np.cumsum(rng.normal(0, 0.01, len(days))))
        for i, (d, v) in enumerate(zip(days, p)):
            if t == "CCC" and 100 <= i < 130:
                continue  # 9% missing
            rows.append(f"{d},{t},{float(v)!r}")
    path = tmp_path / "prices.csv"
    path.write_text("\n".join(rows) + "\n")
    return path


def test_threshold_parser():
    assert threshold("0.2") == 0.2
    assert threshold("20%") == 0.2
    assert threshold("1.5%") == 0.015
    for bad in ("0.00001", "abc", "0.5%%"):
        with pytest.raises(Exception):
            threshold(bad)


def test_ingest(capsys, price_csv, tmp_path):
    out_dir = tmp_path / "cache"
    code, out, _ = run(capsys, "ingest", "--input", str(price_csv), "--tau", "100", "--out", str(out_dir))
    assert code == 0
    assert "tickers: 2" in out
    assert "days: 320 (2010-01-04 .. " in out
    assert "dropped: CCC" in out
    cached = load_universe(out_dir / "universe.csv", tau=100)
    assert cached.tickers == ("AAA", "BBB")
    again = tmp_path / "again"
    run(capsys, "ingest", "--input", str(price_csv), "--tau", "100", "--out", str(again))
    assert (again / "universe.csv").read_bytes() == (out_dir / "universe.csv").read_bytes()


def test_ingest_missing_file(capsys, tmp_path):
    missing = tmp_path / "nope.csv"
    code, _, err = run(capsys, "ingest", "--input", str(missing), "--out", str(tmp_path))
    assert code != 0
    line = error_line(err)
    assert "io" in line and str(missing) in line


def test_ingest_bad_price(capsys, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("date,ticker,adj_close\n2010-01-04,A,1\n2010-01-05,A,0.00\n")
    code, _, err = run(capsys, "ingest", "--input", str(path), "--out", str(tmp_path))
    assert code == 1
    assert "fptrade-error: data: line 3:" in error_line(err)


def test_synth(capsys, data_dir, tmp_path):
    spec = str(data_dir / "golden_spec.json")
    code, out, _ = run(capsys, "synth", "--synthetic-spec", spec, "--out", str(tmp_path / "a"))
    assert code == 0 and "tickers: 20" in out and "seed: 7" in out
    run(capsys, "synth", "--synthetic-spec", spec, "--out", str(tmp_path / "b"))
    run(capsys, "synth", "--synthetic-spec", spec, "--seed", "8", "--out", str(tmp_path / "c"))
    a, b, c = ((tmp_path / x / "universe.csv").read_bytes() for x in "abc")
    assert a == b != c


def test_sweep_defaults_reproduce_golden(capsys, data_dir, tmp_path):
    code, out, _ = run(capsys, "sweep", "--synthetic-spec", str(data_dir / "golden_spec.json"), "--out", str(tmp_path))
    assert code == 0
    for name in ("cells.csv", "fpt_histogram.csv", "scatter.csv"):
        assert (tmp_path / name).read_bytes() == (data_dir / "golden" / name).read_bytes(), name
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert meta["seed"] == 7 and len(meta["grid"]["cells_bp"]) == 100
    assert len(out.strip().splitlines()) == 102


def test_sweep_single_cell(capsys, data_dir, tmp_path):
    code, out, _ = run(
        capsys, "sweep", "--synthetic-spec", str(data_dir / "golden_spec.json"),
        "--theta", "0.2", "--epsilon", "0.1", "--out", str(tmp_path),
    )
    assert code == 0
    rows = out.strip().splitlines()[2:]
    assert len(rows) == 1
    assert rows[0].split()[:3] == ["10", "20", "30"]
    assert (tmp_path / "cells.csv").read_text().splitlines()[1].startswith("10,20,30,")


def test_sweep_theta_only_and_percent_units(capsys, data_dir, tmp_path):
    code, out, _ = run(
        capsys, "sweep", "--synthetic-spec", str(data_dir / "golden_spec.json"),
        "--theta", "5%", "--out", str(tmp_path),
    )
    assert code == 0
    assert [r.split()[0] for r in out.strip().splitlines()[2:]] == ["0", "1", "2", "3", "4"]


def test_sweep_rejects_epsilon_above_theta(capsys, data_dir, tmp_path):
    code, _, err = run(
        capsys, "sweep", "--synthetic-spec", str(data_dir / "golden_spec.json"),
        "--epsilon", "0.3", "--theta", "0.2", "--out", str(tmp_path),
    )
    assert code != 0
    line = error_line(err)
    assert "grid" in line and "epsilon" in line and "theta" in line
    assert not (tmp_path / "cells.csv").exists()


def test_sweep_insufficient_history(capsys, data_dir, tmp_path):
    code, _, err = run(
        capsys, "sweep", "--synthetic-spec", str(data_dir / "golden_spec.json"),
        "--tau-max", "300", "--out", str(tmp_path),
    )
    assert code == 1 and "history" in error_line(err)


def test_sweep_bad_workers(capsys, data_dir, tmp_path):
    code, _, err = run(
        capsys, "sweep", "--synthetic-spec", str(data_dir / "golden_spec.json"),
        "--workers", "0", "--out", str(tmp_path),
    )
    assert code == 1 and "workers" in error_line(err)


def test_sweep_from_csv(capsys, price_csv, tmp_path):
    code, out, _ = run(
        capsys, "sweep", "--input", str(price_csv), "--tau", "60", "--tau-max", "100",
        "--sigma-min", "0.01", "--rho0", "-0.5", "--grid", "fine", "--out", str(tmp_path),
    )
    assert code == 0
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert meta["seed"] is None and meta["universe"]["dropped"] == ["CCC"]
    assert meta["filters"]["tau"] == 60


def test_out_dir_from_environment(capsys, data_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("FPTRADE_OUT", str(tmp_path / "env"))
    code, _, _ = run(capsys, "synth", "--synthetic-spec", str(data_dir / "golden_spec.json"))
    assert code == 0 and (tmp_path / "env" / "universe.csv").exists()
    monkeypatch.delenv("FPTRADE_OUT")
    code, _, err = run(capsys, "synth", "--synthetic-spec", str(data_dir / "golden_spec.json"))
    assert code == 1 and "config" in error_line(err)


def test_bad_synthetic_spec(capsys, tmp_path):
    path = tmp_path / "spec.json"
    path.write_text('{"n_tickers": 3}')
    code, _, err = run(capsys, "synth", "--synthetic-spec", str(path), "--out", str(tmp_path))
    assert code == 1 and "missing keys" in error_line(err)
    path.write_text("{not json")
    code, _, err = run(capsys, "synth", "--synthetic-spec", str(path), "--out", str(tmp_path))
    assert code == 1 and "invalid JSON" in error_line(err)


def test_stats(capsys, data_dir, tmp_path):
    code, out, _ = run(
        capsys, "stats", "--synthetic-spec", str(data_dir / "golden_spec.json"),
        "--day", "10", "--out", str(tmp_path),
    )
    assert code == 0 and "190 pair correlations, 20 volatilities" in out
    lines = (tmp_path / "distributions.csv").read_text().splitlines()
    assert lines[0] == "bin_start,bin_width,count,kind"
    rho = [l for l in lines[1:] if l.endswith(",rho")]
    sigma = [l for l in lines[1:] if l.endswith(",sigma")]
    assert len(rho) == 40
    assert sum(int(l.split(",")[2]) for l in rho) == 190
    assert sum(int(l.split(",")[2]) for l in sigma) == 20


def test_stats_day_out_of_range(capsys, data_dir, tmp_path):
    code, _, err = run(
        capsys, "stats", "--synthetic-spec", str(data_dir / "golden_spec.json"),
        "--day", "251", "--out", str(tmp_path),
    )
    assert code == 1 and "day" in error_line(err)


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as e:
        main(["sweep", "--theta", "0.2"])  # no source
    assert e.value.code == 2


def test_module_entry_point(data_dir, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "fptrade", "sweep", "--synthetic-spec", str(data_dir / "golden_spec.json"),
         "--theta", "0.1", "--epsilon", "0.05", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "Omega[%]" in proc.stdout

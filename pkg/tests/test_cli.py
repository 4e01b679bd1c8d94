import csv
import io
import json

import pytest

from hewsim.analytics import cli
from hewsim.analytics.runner import CSV_COLUMNS, apply_axis, sweep
from hewsim.channel import ProtocolInvariantError
from hewsim.scenario import ConfigError, builtin_scenario, render_scenario, single_bss


def test_oracle_command(capsys):
    assert cli.main(["oracle", "--width", "20", "--streams", "1", "--agg", "1"]) == 0
    assert capsys.readouterr().out.strip() == "23321439.399"


def test_oracle_bad_width(capsys):
    assert cli.main(["oracle", "--width", "30"]) == 2
    assert "config error" in capsys.readouterr().err


def test_run_builtin_with_outputs(tmp_path, capsys):
    trace, out = tmp_path / "t.jsonl", tmp_path / "r.csv"
    rc = cli.main(["run", "--builtin", "fig2-overlap", "--seed", "2", "--duration", "200ms",
                   "--trace", str(trace), "--csv", str(out)])
    assert rc == 0
    assert "total" in capsys.readouterr().out
    recs = [json.loads(line) for line in trace.read_text().splitlines()]
    assert {r["event"] for r in recs} >= {"tx", "phase_end", "exchange"}
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert rows[0] == CSV_COLUMNS
    assert {r[2] for r in rows[1:]} == {"A", "B", "C", "*"}


def test_run_scenario_file(tmp_path):
    f = tmp_path / "s.toml"
    f.write_text(render_scenario(single_bss(2)))
    assert cli.main(["run", "--scenario", str(f), "--duration", "50ms"]) == 0


def test_invalid_scenario_exit_2(tmp_path, capsys):
    f = tmp_path / "bad.toml"
    f.write_text(render_scenario(single_bss(1)).replace("channels = [\n    0,\n]", "channels = [0, 2]"))
    assert cli.main(["run", "--scenario", str(f)]) == 2
    assert "not contiguous" in capsys.readouterr().err


def test_missing_file_exit_2(tmp_path):
    assert cli.main(["run", "--scenario", str(tmp_path / "nope.toml")]) == 2


def test_no_source_exit_2():
    assert cli.main(["run"]) == 2


def test_unknown_axis_exit_2():
    assert cli.main(["sweep", "--builtin", "fig2-overlap", "--axis", "colour", "--values", "1"]) == 2


def test_invariant_violation_exit_3(monkeypatch, capsys):
    def boom(*a, **k):
        raise ProtocolInvariantError("exchange 1 finished twice")
    monkeypatch.setattr(cli, "run", boom)
    assert cli.main(["run", "--builtin", "fig2-overlap"]) == 3
    assert "invariant violation" in capsys.readouterr().err


def test_sweep_csv_bytes_identical(tmp_path):
    args = ["sweep", "--builtin", "fig2-overlap", "--axis", "cca_threshold@C", "--values=-82,-70",
            "--seeds", "1,2", "--duration", "100ms"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(args + ["--csv", str(a)]) == 0
    assert cli.main(args + ["--csv", str(b), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(io.StringIO(a.read_text())))
    assert {r["seed"] for r in rows} == {"1", "2", "mean", "stddev"}
    assert [r["axis_value"] for r in rows][0] == "-82"


def test_sweep_row_counts():
    s = single_bss(2, duration=10**8)
    text = sweep(s, "n_stas", [1, 3], [1, 2, 3])
    rows = list(csv.DictReader(io.StringIO(text)))
    per_value = {"1": 2 + 1 + 1, "3": 4 + 1 + 1}  # nodes + wlan + total
    for v, n in per_value.items():
        assert sum(1 for r in rows if r["axis_value"] == v and r["seed"] in "123") == 3 * n
        assert sum(1 for r in rows if r["axis_value"] == v and r["seed"] == "mean") == n


@pytest.mark.parametrize("axis,value", [("ofdma", "4"), ("mumimo", "4:4:1"), ("aggregation", "16"),
                                        ("protocol", "csma-eca"), ("tx_power@A", "15dBm"),
                                        ("cca_threshold", "-70")])
def test_apply_axis(axis, value):
    s = apply_axis(builtin_scenario("fig2-overlap"), axis, value)
    assert s != builtin_scenario("fig2-overlap")


@pytest.mark.parametrize("axis,value", [("aggregation", "many"), ("ofdma@A", "2"), ("tx_power@Z", "1")])
def test_apply_axis_errors(axis, value):
    with pytest.raises(ConfigError):
        apply_axis(builtin_scenario("fig2-overlap"), axis, value)

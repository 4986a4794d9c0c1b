"""Command-line surface: golden outputs with masked timings, exit codes for
every failure class, and oracle/bench/dump-lp subcommands."""

import csv
import io
import json
from pathlib import Path

import pytest

from scorecf import cli
from scorecf.errors import NumericalError
from scorecf.report import mask_timing, render_json

GOLDENS = Path(__file__).parent / "goldens"
SCORECARD = str(GOLDENS / "toy_scorecard.json")
QUERY = str(GOLDENS / "flip_query.json")


def run_cli(argv, capsys):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def masked_stdout(out: str) -> str:
    return render_json(mask_timing(json.loads(out)))


def write_json(path: Path, doc) -> str:
    path.write_text(json.dumps(doc))
    return str(path)


# -- generate ---------------------------------------------------------------


def test_generate_json_matches_golden(capsys):
    code, out, err = run_cli(
        ["generate", "--scorecard", SCORECARD, "--query", QUERY, "--format", "json"], capsys
    )
    assert code == 0
    assert err == ""
    assert masked_stdout(out) == (GOLDENS / "flip_report.json").read_text()


def test_generate_is_deterministic(capsys):
    argv = ["generate", "--scorecard", SCORECARD, "--query", QUERY, "--format", "json"]
    first = masked_stdout(run_cli(argv, capsys)[1])
    second = masked_stdout(run_cli(argv, capsys)[1])
    assert first == second


def test_generate_table_format(capsys):
    code, out, _ = run_cli(["generate", "--scorecard", SCORECARD, "--query", QUERY], capsys)
    assert code == 0
    assert "status: optimal" in out
    assert "a1" in out


def test_generate_writes_lp_side_file(tmp_path, capsys):
    lp_path = tmp_path / "model.lp"
    code, out, _ = run_cli(
        [
            "generate",
            "--scorecard",
            SCORECARD,
            "--query",
            QUERY,
            "--format",
            "json",
            "--dump-lp",
            str(lp_path),
        ],
        capsys,
    )
    assert code == 0
    assert lp_path.read_text() == (GOLDENS / "flip_model.lp").read_text()
    assert json.loads(out)["status"] == "optimal"


def test_strategy_flags_override_document(capsys):
    code, out, _ = run_cli(
        [
            "generate",
            "--scorecard",
            SCORECARD,
            "--query",
            QUERY,
            "--format",
            "json",
            "--method",
            "hierarchical",
            "--priority",
            "proximity",
            "--degradation",
            "rel:0.1",
        ],
        capsys,
    )
    assert code == 0
    report = json.loads(out)
    assert report["query"]["strategy"]["kind"] == "hierarchical"
    assert [s["term"] for s in report["stages"]] == ["proximity"]


# -- exit codes ---------------------------------------------------------------


def test_unknown_query_key_exits_2(tmp_path, capsys):
    bad = write_json(
        tmp_path / "q.json",
        {"input": {"A": 0.0, "B": 0.0}, "outcome": {"type": "binary", "value": 1}, "thta": 2},
    )
    code, out, err = run_cli(
        ["generate", "--scorecard", SCORECARD, "--query", bad, "--format", "json"], capsys
    )
    assert code == 2
    assert "thta" in err


def test_unparseable_json_exits_2(tmp_path, capsys):
    bad = tmp_path / "q.json"
    bad.write_text("{nope")
    code, _, err = run_cli(["generate", "--scorecard", SCORECARD, "--query", str(bad)], capsys)
    assert code == 2
    assert err.startswith("error:")


def test_missing_file_exits_2(capsys):
    code, _, err = run_cli(
        ["generate", "--scorecard", SCORECARD, "--query", "/nonexistent/q.json"], capsys
    )
    assert code == 2
    assert "error:" in err


def test_mad_weights_without_rows_exits_2(capsys):
    code, _, err = run_cli(
        ["generate", "--scorecard", SCORECARD, "--query", QUERY, "--weights", "mad"], capsys
    )
    assert code == 2
    assert "rows" in err


def test_infeasible_exits_3_and_prints_report(tmp_path, capsys):
    doc = {
        "input": {"A": 0.4, "B": 1.0},
        "outcome": {"type": "binary", "value": 1},
        "actionable": ["A"],
    }
    q = write_json(tmp_path / "q.json", doc)
    code, out, _ = run_cli(
        ["generate", "--scorecard", SCORECARD, "--query", q, "--format", "json"], capsys
    )
    assert code == 3
    assert json.loads(out)["status"] == "infeasible"


def test_tiny_time_limit_exits_4(capsys):
    code, out, _ = run_cli(
        [
            "generate",
            "--scorecard",
            SCORECARD,
            "--query",
            QUERY,
            "--format",
            "json",
            "--time-limit",
            "0.000001",
        ],
        capsys,
    )
    assert code == 4
    assert json.loads(out)["status"] == "time_limit_no_solution"


def test_engine_blowup_exits_1(monkeypatch, capsys):
    def boom(*a, **k):
        raise NumericalError("synthetic failure")

    monkeypatch.setattr(cli, "run_query", boom)
    code, _, err = run_cli(["generate", "--scorecard", SCORECARD, "--query", QUERY], capsys)
    assert code == 1
    assert err.startswith("internal error:")


# -- oracle -------------------------------------------------------------------


def test_oracle_agrees_with_generate(capsys):
    code, out, _ = run_cli(
        ["oracle", "--scorecard", SCORECARD, "--query", QUERY, "--format", "json"], capsys
    )
    assert code == 0
    body = json.loads(out)
    assert body["status"] == "optimal"
    gen = json.loads(
        run_cli(
            ["generate", "--scorecard", SCORECARD, "--query", QUERY, "--format", "json"], capsys
        )[1]
    )
    assert body["objective"] == pytest.approx(gen["solver"]["objective"], abs=1e-9)
    assert body["enumerated"] > 0
    assert body["solutions"]


def test_oracle_infeasible_exits_3(tmp_path, capsys):
    doc = {
        "input": {"A": 0.4, "B": 1.0},
        "outcome": {"type": "binary", "value": 1},
        "actionable": ["A"],
    }
    q = write_json(tmp_path / "q.json", doc)
    code, out, _ = run_cli(
        ["oracle", "--scorecard", SCORECARD, "--query", q, "--format", "json"], capsys
    )
    assert code == 3
    assert json.loads(out)["status"] == "infeasible"


# -- dump-lp ------------------------------------------------------------------


def test_dump_lp_stdout_golden(capsys):
    code, out, _ = run_cli(["dump-lp", "--scorecard", SCORECARD, "--query", QUERY], capsys)
    assert code == 0
    assert out == (GOLDENS / "flip_model.lp").read_text()


def test_dump_lp_to_file(tmp_path, capsys):
    dest = tmp_path / "m.lp"
    code, out, _ = run_cli(
        ["dump-lp", "--scorecard", SCORECARD, "--query", QUERY, "--output", str(dest)], capsys
    )
    assert code == 0
    assert out == ""
    assert dest.read_text() == (GOLDENS / "flip_model.lp").read_text()


# -- bench --------------------------------------------------------------------


def bench_cells(text: str):
    return list(csv.DictReader(io.StringIO(text)))


def test_bench_deterministic_modulo_time(capsys):
    argv = ["bench", "--ks", "2", "--thetas", "2", "--seed", "3", "--time-limit", "30"]
    first = bench_cells(run_cli(argv, capsys)[1])
    second = bench_cells(run_cli(argv, capsys)[1])
    assert len(first) == 1
    for a, b in zip(first, second):
        a.pop("time"), b.pop("time")
        assert a == b
    assert first[0]["K"] == "2"
    assert first[0]["theta"] == "2"
    assert first[0]["approach"] == "weighted"
    assert first[0]["status"] in ("optimal", "feasible")


def test_bench_hierarchical_fills_stage_column(capsys):
    argv = [
        "bench",
        "--ks",
        "2",
        "--thetas",
        "2",
        "--seed",
        "3",
        "--approach",
        "hierarchical",
        "--time-limit",
        "60",
    ]
    (cell,) = bench_cells(run_cli(argv, capsys)[1])
    assert cell["approach"] == "hierarchical"
    assert "proximity" in cell["stages"]


# -- misc ---------------------------------------------------------------------


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert "scorecf" in capsys.readouterr().out

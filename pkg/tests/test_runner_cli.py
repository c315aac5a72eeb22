import json
import math
from pathlib import Path

import pytest

from rsma_sgf import cli, runner
from rsma_sgf.protocol import SchemeKind
from rsma_sgf.runner import CSV_HEADER, FIGURES, SpecError, emit, parse_spec, parse_spec_text, run_experiment

GOLDEN = Path(__file__).parent / "golden"

MINIMAL = """\
k_list = 2
snr_db = 10
rate_b = 2
rate_f = 1.5
methods = mc
trials = 1000
"""


def write(tmp_path, text, name="exp.spec"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_minimal_spec(tmp_path):
    spec = parse_spec(write(tmp_path, MINIMAL))
    assert spec.k_list == [2] and spec.snr_db == [10.0]
    assert spec.schemes == [SchemeKind.RSMA_SGF]
    assert spec.methods == ["mc"] and spec.trials == 1000


def test_zero_trials_rejected():
    with pytest.raises(SpecError, match="trials"):
        parse_spec_text(MINIMAL.replace("trials = 1000", "trials = 0"))


def test_errors_name_key_and_line():
    with pytest.raises(SpecError) as err:
        parse_spec_text(MINIMAL.replace("snr_db = 10", "snr_db = ten"))
    assert err.value.key == "snr_db" and err.value.line == 2
    with pytest.raises(SpecError, match="k_list"):
        parse_spec_text(MINIMAL.replace("k_list = 2\n", ""))
    with pytest.raises(SpecError, match="line 7: colour: unknown key"):
        parse_spec_text(MINIMAL + "colour = red\n")
    with pytest.raises(SpecError, match="duplicate"):
        parse_spec_text(MINIMAL + "seed = 1\nseed = 2\n")
    with pytest.raises(SpecError, match="ratio"):
        parse_spec_text(MINIMAL + "power_rule = fixed_ratio\n")
    with pytest.raises(SpecError, match="methods"):
        parse_spec_text(MINIMAL.replace("methods = mc", "methods = mc, magic"))
    with pytest.raises(SpecError, match="k_list"):
        parse_spec_text(MINIMAL.replace("k_list = 2", "k_list = 1.5"))


def test_comments_and_ranges():
    spec = parse_spec_text("# header\n" + MINIMAL.replace("snr_db = 10", "snr_db = 0:20:5  # grid"))
    assert spec.snr_db == [0.0, 5.0, 10.0, 15.0, 20.0]


def test_figure_2a_scenario():
    spec = runner.figure_spec("2a")
    assert spec.rate_b == [1.5] and spec.rate_f == [2.0]
    assert spec.power_rule == "fixed_ratio" and spec.ratio == 0.1
    assert spec.k_list == [1, 5]
    assert spec.powers_db(20.0) == (20.0, 10.0)


@pytest.mark.parametrize("figure", sorted(FIGURES))
def test_every_bundle_parses(figure):
    spec = runner.figure_spec(figure)
    assert spec.snr_db and spec.methods


def test_unknown_figure():
    with pytest.raises(SpecError):
        runner.figure_spec("9")


def test_paired_rows_for_cross_check():
    spec = parse_spec_text(MINIMAL.replace("methods = mc", "methods = theorem1, mc").replace("1000", "200000"))
    rows = run_experiment(spec)
    assert [r.method for r in rows] == ["theorem1", "mc"]
    th, mc = rows
    assert abs(th.value - mc.value) < mc.ci


def test_precondition_surfaces_as_error_row():
    spec = parse_spec_text(MINIMAL.replace("k_list = 2", "k_list = 1").replace("methods = mc", "methods = corollary2"))
    (row,) = run_experiment(spec)
    assert row.value is None and "k_users >= 2" in row.error


def test_single_user_routes_to_its_closed_form():
    spec = parse_spec_text(MINIMAL.replace("k_list = 2", "k_list = 1").replace("methods = mc", "methods = theorem1"))
    (row,) = run_experiment(spec)
    assert row.method == "corollary1" and not row.error


def test_outage_falls_with_more_users():
    spec = runner.figure_spec("6")
    spec.snr_db = [10.0]
    spec.methods = ["theorem1"]
    values = [r.value for r in run_experiment(spec)]
    assert len(values) == 8
    assert all(a > b for a, b in zip(values, values[1:]))


def test_grid_completeness():
    text = MINIMAL.replace("k_list = 2", "k_list = 1, 2").replace("snr_db = 10", "snr_db = 0, 10, 20")
    text = text.replace("methods = mc", "methods = mc, corollary2, theorem1") + "schemes = rsma, oma\n"
    rows = run_experiment(parse_spec_text(text))
    assert len(rows) == 2 * 3 * 2 * 3
    assert sum(bool(r.error) for r in rows) > 0


def test_power_rules_and_db_conversion():
    spec = parse_spec_text(MINIMAL + "power_rule = fixed_pb\np_b_fixed_db = 10\n")
    assert spec.powers_db(25.0) == (10.0, 25.0)
    assert runner.db_to_linear(20.0) == 100.0
    assert runner.db_to_linear(0.0) == 1.0


def test_empty_rows_csv_is_header_only(tmp_path):
    out = tmp_path / "empty.csv"
    emit([], "csv", out)
    assert out.read_bytes() == (",".join(CSV_HEADER) + "\n").encode()


def test_csv_layout(tmp_path):
    spec = parse_spec_text(MINIMAL.replace("methods = mc", "methods = theorem1"))
    out = tmp_path / "r.csv"
    emit(run_experiment(spec), "csv", out)
    data = out.read_bytes()
    assert b"\r\n" not in data
    header, line = data.decode().splitlines()
    assert header.split(",") == CSV_HEADER
    value = line.split(",")[7]
    assert len(value.replace(".", "").lstrip("0").split("e")[0]) == 17


def test_json_round_trip(tmp_path):
    spec = parse_spec_text(MINIMAL.replace("methods = mc", "methods = mc, theorem1, quadrature"))
    rows = run_experiment(spec)
    out = tmp_path / "r.json"
    emit(rows, "json", out)
    back = runner.load_json_rows(out)
    assert [(r.value, r.ci, r.condition_flag, r.method) for r in back] == [
        (r.value, r.ci, r.condition_flag, r.method) for r in rows
    ]
    assert isinstance(json.loads(out.read_text()), list)


def test_golden_fig2a_rows():
    spec = runner.figure_spec("2a")
    spec.snr_db = [10.0, 20.0]
    spec.trials = 20000
    spec.seed = 7
    text = runner.rows_to_csv(run_experiment(spec))
    assert text == (GOLDEN / "fig2a_subset.csv").read_text(encoding="utf-8")


# --- command line ------------------------------------------------------------


def test_cli_success(tmp_path):
    spec = write(tmp_path, MINIMAL)
    out = tmp_path / "o.csv"
    assert cli.main(["simulate", str(spec), "--out", str(out)]) == 0
    assert out.read_text().startswith("k,p_b_db")


def test_cli_subcommands_pick_methods(tmp_path):
    spec = write(tmp_path, MINIMAL.replace("methods = mc", "methods = mc, theorem1"))
    for command, expected in (("analytic", {"theorem1"}), ("simulate", {"mc"}), ("oracle", {"quadrature"})):
        out = tmp_path / f"{command}.json"
        assert cli.main([command, str(spec), "--out", str(out), "--format", "json"]) == 0
        assert {r["method"] for r in json.loads(out.read_text())} == expected


def test_cli_all_rows_failed(tmp_path):
    spec = write(tmp_path, MINIMAL.replace("k_list = 2", "k_list = 1").replace("methods = mc", "methods = corollary2"))
    assert cli.main(["sweep", str(spec), "--out", str(tmp_path / "o.csv")]) == 1


def test_cli_spec_error(tmp_path):
    spec = write(tmp_path, MINIMAL.replace("trials = 1000", "trials = 0"))
    assert cli.main(["sweep", str(spec)]) == 2


def test_cli_io_errors(tmp_path):
    assert cli.main(["sweep", str(tmp_path / "missing.spec")]) == 3
    spec = write(tmp_path, MINIMAL)
    assert cli.main(["sweep", str(spec), "--out", str(tmp_path / "no" / "dir" / "o.csv")]) == 3


def test_cli_figure(tmp_path):
    out = tmp_path / "fig7.csv"
    assert cli.main(["figure", "7", "--trials", "500", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 2 * 9 * 3 * 2
    assert all(math.isfinite(float(line.split(",")[7])) for line in lines[1:])

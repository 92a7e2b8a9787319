import csv
import json
import re

import pytest

from momentdensity.cli import main
from momentdensity.hierarchy import HierarchyConfig, run_detection
from momentdensity.measures import MixtureScenario, MomentVector, box_lebesgue_moments, mixture_moments
from momentdensity.polybasis import SemialgebraicSet

UNIT = SemialgebraicSet.interval(0.0, 1.0)


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "unit.json").write_text(json.dumps(UNIT.to_json()))
    return tmp_path


def scenario_file(workdir, name, *args):
    path = workdir / name
    assert main(["scenario", *args, "--out", str(path)]) == 0
    return path


def test_dirac_mixture_scenario(workdir):
    path = scenario_file(workdir, "y.json", "dirac-mix", "--s", "0.5", "--a", "0.5", "--order", "14")
    data = json.loads(path.read_text())
    y = MomentVector.from_json(data)
    assert y.max_order == 14
    for k in range(15):
        assert y[(k,)] == pytest.approx(0.5 / (k + 1) + 0.5 * 0.5**k, abs=1e-15)
    assert data["scenario"]["kind"] == "dirac-mix"
    assert data["manifest"]["command"][1] == "scenario"


def test_lebesgue_scenario(workdir):
    y = MomentVector.from_json(json.loads(scenario_file(workdir, "y.json", "dirac-mix", "--a", "1",
                                                        "--order", "10").read_text()))
    assert all(y[(k,)] == pytest.approx(1 / (k + 1), abs=1e-15) for k in range(11))


def test_polynomial_density_scenario(workdir):
    y = MomentVector.from_json(json.loads(scenario_file(workdir, "y.json", "poly-density", "--coeffs", "0,2",
                                                        "--order", "10").read_text()))
    assert all(y[(k,)] == pytest.approx(2 / (k + 2), abs=1e-15) for k in range(11))


@pytest.mark.parametrize("args", [
    ["dirac-mix", "--a", "0.5", "--order", "4"],
    ["dirac-mix", "--s", "1.5", "--a", "0.5", "--order", "4"],
    ["dirac-mix", "--s", "0.5", "--a", "1.5", "--order", "4"],
    ["poly-density", "--coeffs", "0,3", "--order", "4"],
    ["poly-density", "--order", "4"],
    ["dirac-mix", "--order", "-1"],
    ["unknown-kind", "--order", "4"],
])
def test_invalid_scenarios_exit_two(workdir, args):
    assert main(["scenario", *args, "--out", str(workdir / "y.json")]) == 2


def detect(workdir, moments, *extra):
    out = workdir / "report.json"
    code = main(["detect", str(workdir / "unit.json"), str(moments), "--out", str(out), *extra])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_lebesgue_detection_exits_zero(workdir, capsys):
    moments = scenario_file(workdir, "y.json", "dirac-mix", "--a", "1", "--order", "12")
    code, report = detect(workdir, moments, "--dmax", "6")
    assert code == 0
    assert report["conclusion"] == {"kind": "ConsistentUpTo", "dmax": 6}
    assert "manifest" in report and report["manifest"]["input_digests"]
    assert "not certified" in capsys.readouterr().out


def test_low_weight_atom_is_consistent_at_shallow_depth(workdir):
    moments = scenario_file(workdir, "y.json", "dirac-mix", "--s", "0.3", "--a", "0.95", "--order", "8")
    code, report = detect(workdir, moments, "--dmax", "4")
    assert code == 0
    assert report["conclusion"]["kind"] == "ConsistentUpTo"


def test_table_one_cell_exits_three(workdir, capsys):
    moments = scenario_file(workdir, "y.json", "dirac-mix", "--s", "0.3", "--a", "0.5", "--order", "10")
    code, report = detect(workdir, moments, "--dmax", "5")
    assert code == 3
    assert "p ≥ 10" in capsys.readouterr().out


def test_invalid_reference_moments_exit_three(workdir):
    bad = MomentVector(1, 2, {(0,): 1.0, (1,): 0.5, (2,): 0.2})
    (workdir / "gamma.json").write_text(json.dumps(bad.to_json()))
    moments = scenario_file(workdir, "y.json", "dirac-mix", "--a", "1", "--order", "2")
    code, report = detect(workdir, moments, "--dmax", "1", "--gamma", str(workdir / "gamma.json"))
    assert code == 3
    assert report["levels"][0]["status"] == "Infeasible"


def test_budget_limited_level_exits_four(workdir):
    bad = MomentVector(1, 4, {(0,): 1.0, (1,): 0.5, (2,): 0.2, (3,): 0.1, (4,): 0.05})
    (workdir / "gamma.json").write_text(json.dumps(bad.to_json()))
    moments = scenario_file(workdir, "y.json", "dirac-mix", "--a", "1", "--order", "4")
    code, report = detect(workdir, moments, "--dmax", "2", "--gamma", str(workdir / "gamma.json"),
                          "--run-all")
    assert report["levels"][1]["status"] == "Indeterminate"
    assert code == 3
    tight = MomentVector(1, 2, {(0,): 1.0, (1,): 0.5, (2,): 0.25})
    (workdir / "tight.json").write_text(json.dumps(tight.to_json()))
    code, report = detect(workdir, moments, "--dmax", "1", "--gamma", str(workdir / "tight.json"))
    assert report["levels"][0]["status"] == "Indeterminate"
    assert code == 4


def test_missing_moments_exit_two_with_the_keys(workdir, capsys):
    moments = scenario_file(workdir, "y.json", "poly-density", "--coeffs", "0,2", "--order", "10")
    code, _ = detect(workdir, moments, "--dmax", "6")
    assert code == 2
    assert "(11,)" in capsys.readouterr().err


def test_unreadable_inputs_exit_two(workdir):
    (workdir / "junk.json").write_text("{not json")
    assert main(["detect", str(workdir / "unit.json"), str(workdir / "junk.json"), "--dmax", "1"]) == 2
    assert main(["detect", str(workdir / "unit.json"), str(workdir / "absent.json"), "--dmax", "1"]) == 2
    assert main(["detect", str(workdir / "unit.json")]) == 2


@pytest.mark.parametrize("atom, a, dmax", [("0.3", "0.5", 4), ("0.5", "0.8", 3), (None, "1", 4)])
def test_file_round_trip_matches_in_process_run(workdir, atom, a, dmax):
    args = ["dirac-mix", "--a", a, "--order", str(2 * dmax)] + (["--s", atom] if atom else [])
    moments = scenario_file(workdir, "y.json", *args)
    _, report = detect(workdir, moments, "--dmax", str(dmax))
    scenario = MixtureScenario.one_dirac(float(atom), 1 - float(a)) if atom else MixtureScenario(1.0)
    y = mixture_moments(scenario, UNIT.box, 2 * dmax)
    direct = run_detection(UNIT, box_lebesgue_moments(UNIT.box, 2 * dmax), y, HierarchyConfig(dmax=dmax))
    expected = direct.to_json()
    for ours, theirs in zip(report["levels"], expected["levels"]):
        ours.pop("seconds")
        theirs.pop("seconds")
        assert ours == theirs
    assert report["conclusion"] == expected["conclusion"]


def test_hausdorff_command(workdir, capsys):
    uniform = scenario_file(workdir, "u.json", "dirac-mix", "--a", "1", "--order", "50")
    assert main(["hausdorff", str(uniform), "--c", "1.001", "--n-max", "50"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["markov"]["rows_checked"] == 51
    assert data["manifest"]["tolerances"]["exact"] is True
    dirac = scenario_file(workdir, "d.json", "dirac-mix", "--s", "0", "--a", "0", "--order", "50")
    assert main(["hausdorff", str(dirac), "--c", "10"]) == 3
    assert json.loads(capsys.readouterr().out)["markov"]["where"] == [10, 0]
    linear = scenario_file(workdir, "l.json", "poly-density", "--coeffs", "0,2", "--order", "50")
    assert main(["hausdorff", str(linear), "--p", "2", "--c", "2.1"]) == 0


def test_hausdorff_rejects_multivariate_input(workdir):
    square = box_lebesgue_moments([(0.0, 1.0), (0.0, 1.0)], 4)
    (workdir / "sq.json").write_text(json.dumps(square.to_json()))
    assert main(["hausdorff", str(workdir / "sq.json"), "--c", "2"]) == 2


def test_dump_problem(workdir):
    moments = scenario_file(workdir, "y.json", "dirac-mix", "--a", "1", "--order", "6")
    out = workdir / "p.txt"
    assert main(["dump-problem", str(workdir / "unit.json"), str(moments), "--d", "3", "--out", str(out)]) == 0
    assert out.read_text().startswith("momentdensity-conic 1\n")
    assert main(["dump-problem", str(workdir / "unit.json"), str(moments), "--d", "2", "--dual",
                 "--out", str(out)]) == 0


def test_table_outputs_agree(workdir):
    md, csv_path, js = workdir / "t.md", workdir / "t.csv", workdir / "t.json"
    code = main(["table", "1", "--dmax", "4", "--weights", "0.4,0.9", "--jobs", "1",
                 "--out-md", str(md), "--out-csv", str(csv_path), "--out-json", str(js)])
    assert code == 0
    text = md.read_text()
    assert "<!-- manifest:" in text
    table_lines = [ln for ln in text.splitlines() if ln.startswith("|") and not ln.startswith("|---")]
    md_rows = [[c.strip() for c in ln.strip("|").split("|")] for ln in table_lines]
    with csv_path.open() as fh:
        assert list(csv.reader(fh)) == md_rows
    detail = json.loads(js.read_text())
    assert len(detail["cells"]) == 11 * 2
    assert re.search(r'"seconds"', js.read_text())


def test_weight_grid_syntax(workdir):
    md = workdir / "t.md"
    assert main(["table", "2", "--dmax", "5", "--weights", "0.5:0.6:0.1", "--jobs", "1",
                 "--out-md", str(md)]) == 0
    assert md.read_text().count("\n| (") == 9
    assert main(["table", "2", "--dmax", "3", "--out-md", str(md)]) == 2

from __future__ import annotations

import json
import shutil
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from numrepair.cli import main
from numrepair.project import load_project

SCHEMAS = Path(__file__).resolve().parents[1] / "docs" / "schemas"
CASH_SALES_100 = "CashBudget(2003, 'Receipts', 'cash sales', 'det', 100)"
TOTAL = "CashBudget(2003, 'Receipts', 'total cash receipts', 'aggr', {})"


def validate(data, name: str) -> None:
    schema = json.loads((SCHEMAS / f"{name}.schema.json").read_text())
    jsonschema.validate(data, schema)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write_repair(tmp_path, updates) -> Path:
    path = tmp_path / "repair.json"
    path.write_text(json.dumps([{"relation": "CashBudget", "row": r, "attribute": "Value", "value": v}
                                for r, v in updates]))
    return path


@pytest.fixture
def project_copy(budget_dir, tmp_path):
    return Path(shutil.copytree(budget_dir, tmp_path / "budget"))


def test_check(capsys, budget_dir):
    code, out, _ = run(capsys, "check", budget_dir, "--json")
    assert code == 1
    data = json.loads(out)
    validate(data, "violation_report")
    assert [(v["constraint"], v["theta"]) for v in data["violations"]] == [
        ("c1", {"x": "Receipts", "y": 2003}),
        ("c2", {"x": 2003}),
    ]
    code, out, _ = run(capsys, "check", budget_dir)
    assert code == 1 and "c1" in out


def test_check_consistent_project(capsys, project_copy):
    csv = project_copy / "CashBudget.csv"
    lines = csv.read_text().splitlines()
    lines[1 + 3] = lines[1 + 3].replace("250", "220")
    csv.write_text("\n".join(lines) + "\n")
    code, out, _ = run(capsys, "check", project_copy, "--json")
    assert code == 0
    assert json.loads(out)["violations"] == []
    code, out, _ = run(capsys, "repair", project_copy)
    assert code == 0 and "consistent" in out


def test_repair_card(capsys, budget_dir):
    code, out, _ = run(capsys, "repair", budget_dir, "--json")
    assert code == 1
    data = json.loads(out)
    validate(data, "repair_report")
    assert data["kstar"] == 1
    assert data["supports"][0]["sample"] == [
        {"cell": {"relation": "CashBudget", "row": 3, "attr": "Value"}, "old": "250", "new": "220"}
    ]


def test_repair_set_with_dump(capsys, budget_dir, tmp_path):
    dump = tmp_path / "systems.json"
    code, out, _ = run(capsys, "repair", budget_dir, "--semantics", "set", "--max-support", "2",
                       "--dump-systems", dump, "--json")
    assert code == 1
    data = json.loads(out)
    validate(data, "repair_report")
    assert "kstar" not in data
    assert data["limits"]["complete"] is False
    systems = json.loads(dump.read_text())
    validate(systems, "linear_systems")
    assert len(systems) == len(data["supports"])


def test_repair_undecided_circuit(capsys, tmp_path):
    out_dir = tmp_path / "circuit"
    code, out, _ = run(capsys, "gen-circuit", "--gates", "2", "--inputs", "2", "--seed", "3", "--out", out_dir, "--json")
    assert code == 0
    data = json.loads(out)
    validate(data, "circuit")
    assert data["satisfiable"] is True
    project = load_project(out_dir)
    assert len(project.instance.measure_cells()) > 2
    # every cell starts at -1, so no repair touches only two cells
    code, _, _ = run(capsys, "repair", out_dir, "--max-support", "2")
    assert code == 3


def test_branch_cap_from_environment(capsys, budget_dir, monkeypatch):
    monkeypatch.setenv("NUMREPAIR_MAX_BRANCHES", "0")
    code, _, err = run(capsys, "repair", budget_dir)
    assert code == 2 and "NUMREPAIR_MAX_BRANCHES" in err
    monkeypatch.setenv("NUMREPAIR_MAX_BRANCHES", "lots")
    assert run(capsys, "repair", budget_dir)[0] == 2
    monkeypatch.setenv("NUMREPAIR_MAX_BRANCHES", "64")
    code, out, _ = run(capsys, "repair", budget_dir, "--json")
    assert code == 1 and json.loads(out)["kstar"] == 1


@pytest.mark.parametrize(
    "updates, semantics, code, minimal",
    [
        ([(3, 220)], "set", 0, True),
        ([(3, 220)], "card", 0, True),
        ([(1, 130), (6, 70), (7, 190)], "set", 0, True),
        ([(1, 130), (6, 70), (7, 190)], "card", 1, False),
        ([(1, 110), (2, 110), (3, 220)], "set", 1, False),
        ([(1, 110), (2, 110), (3, 220)], "card", 1, False),
    ],
)
def test_check_repair(capsys, budget_dir, tmp_path, updates, semantics, code, minimal):
    path = write_repair(tmp_path, updates)
    got, out, _ = run(capsys, "check-repair", budget_dir, "--repair", path, "--semantics", semantics, "--json")
    assert got == code
    data = json.loads(out)
    validate(data, "repair_verdict")
    assert data["is_repair"] is True and data["is_minimal"] is minimal


def test_check_repair_not_a_repair(capsys, budget_dir, tmp_path):
    code, out, _ = run(capsys, "check-repair", budget_dir, "--repair", write_repair(tmp_path, [(3, 221)]))
    assert code == 1 and out.startswith("not a repair")


def test_check_repair_bad_file(capsys, budget_dir, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('[{"relation": "CashBudget", "row": 3}]')
    code, _, err = run(capsys, "check-repair", budget_dir, "--repair", path)
    assert code == 2 and err.startswith("error:")


@pytest.mark.parametrize(
    "atom, semantics, code",
    [
        (CASH_SALES_100, "set", 1),
        (CASH_SALES_100, "card", 0),
        (TOTAL.format(220), "card", 0),
        (TOTAL.format(250), "card", 1),
    ],
)
def test_cqa(capsys, budget_dir, atom, semantics, code):
    got, out, _ = run(capsys, "cqa", budget_dir, "--atom", atom, "--semantics", semantics, "--max-support", "3", "--json")
    assert got == code
    data = json.loads(out)
    validate(data, "cqa_verdict")
    assert data["answer"] == ("true" if code == 0 else "false")


def test_cqa_indeterminate(capsys, budget_dir):
    atom = "CashBudget(2004, 'Receipts', 'total cash receipts', 'aggr', 200)"
    code, out, _ = run(capsys, "cqa", budget_dir, "--atom", atom, "--semantics", "set", "--max-support", "1")
    assert code == 3 and out.startswith("indeterminate")


def test_cqa_bad_atom(capsys, budget_dir):
    code, _, err = run(capsys, "cqa", budget_dir, "--atom", "CashBudget(2003")
    assert code == 2 and err.startswith("error:")


def test_missing_table(capsys, project_copy):
    (project_copy / "CashBudget.csv").unlink()
    code, _, err = run(capsys, "check", project_copy)
    assert code == 2
    assert "missing table file CashBudget.csv" in err


def test_missing_project(capsys, tmp_path):
    code, _, err = run(capsys, "repair", tmp_path / "nowhere")
    assert code == 2 and "does not exist" in err


def test_bad_config(capsys, project_copy):
    (project_copy / "config.json").write_text('{"max_support": -1}')
    code, _, err = run(capsys, "repair", project_copy)
    assert code == 2 and "max_support" in err


def test_config_limits_apply(capsys, project_copy):
    (project_copy / "config.json").write_text('{"max_support": 1}')
    code, out, _ = run(capsys, "repair", project_copy, "--semantics", "set", "--json")
    data = json.loads(out)
    assert data["limits"]["max_support"] == 1
    assert [len(s["cells"]) for s in data["supports"]] == [1]


def test_module_entry_point(budget_dir):
    proc = subprocess.run([sys.executable, "-m", "numrepair", "check", str(budget_dir)],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert "c2" in proc.stdout

import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from consentchain.cli import main
from consentchain.cli.scenario import EXIT_FAILED, EXIT_OK, EXIT_PARSE, run_scenario
from consentchain.domain.serialize import consent_to_dict, ppa_to_dict
from consentchain.fixtures import DAVID, JORDAN, consent, jordan_ppa
from oracles import table3

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "consentchain" / "data" / "scenarios"


def cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bundled_table_scenario_is_current():
    assert (SCENARIOS / "table3_oracle.json").read_text() == table3.render_scenario()


def test_scenarios_pass_and_are_deterministic():
    for name in ("jordan.json", "table3_oracle.json"):
        a, b = run_scenario(SCENARIOS / name), run_scenario(SCENARIOS / name)
        assert a.exit_code == EXIT_OK, a.message
        assert a.transcript() == b.transcript()
        assert a.transcript(machine=True) == b.transcript(machine=True)


def test_failed_expectation_exits_one():
    data = json.loads((SCENARIOS / "jordan.json").read_text())
    data["steps"][3]["matched"] = "jd-02"
    run = run_scenario(data)
    assert run.exit_code == EXIT_FAILED and "notes?" in run.message


@pytest.mark.parametrize("steps", [
    [{"op": "teleport"}],
    [{"id": "a", "op": "seal"}, {"id": "a", "op": "seal"}],
    [{"op": "terminate"}],
    [{"op": "expect", "step": "later", "status": "ok"}],
    [{"id": "a", "op": "seal", "at": "2024-06-03T10:00"}, {"op": "seal", "at": "2024-06-03T09:00"}],
    [{"id": "a", "op": "seal"}, {"op": "expect", "step": "a", "colour": "red"}],
    [{"op": "request", "user": "nobody", "patient_id": "p", "phi_id": "PHI1005", "operation": "Read"}],
    [{"op": "create_ppa", "fixture": "unknown"}],
])
def test_parse_errors_exit_two(steps):
    run = run_scenario({"steps": steps})
    assert run.exit_code == EXIT_PARSE and run.message.startswith("ScenarioParseError")


def test_missing_file_exits_two(capsys, tmp_path):
    code, out, _ = cli(capsys, "run", "--scenario", tmp_path / "absent.json")
    assert code == 2 and "ScenarioParseError" in out


def test_top_level_scenario_flag(capsys):
    code, out, _ = cli(capsys, "--scenario", SCENARIOS / "jordan.json")
    assert code == 0 and out.rstrip().endswith("pass")


def test_admin_workflow(capsys, tmp_path):
    state = tmp_path / "ws"
    ppa_file = tmp_path / "ppa.json"
    ppa_file.write_text(json.dumps(ppa_to_dict(jordan_ppa())))
    common = ["--state", state, "--at", "2024-06-03T09:00"]

    code, out, _ = cli(capsys, "ppa-create", "--file", ppa_file, *common, "--machine")
    assert code == 0 and json.loads(out)["deployed"][0] == "jd-01"
    code, out, _ = cli(capsys, "ppa-verify", "ppa-jordan", "--state", state)
    assert (code, out.strip()) == (0, "Intact")

    code, out, _ = cli(capsys, "request", "--user", "DOC:david", "--patient", JORDAN, "--phi", "PHI1005",
                       "--op", "Read", "--state", state, "--at", "2024-06-03T10:00")
    assert code == 0 and out.startswith("Grant via jd-01")

    new = tmp_path / "new.json"
    new.write_text(json.dumps(consent_to_dict(consent("jd-05b", JORDAN, DAVID, ["PHI1003", "PHI1004"], ["Read"]))))
    assert cli(capsys, "consent-alter", "jd-05", "--file", new, "--state", state)[0] == 0
    assert cli(capsys, "consent-terminate", "jd-04", "--state", state)[0] == 0
    code, _, err = cli(capsys, "consent-terminate", "jn-01", "--state", state)
    assert code == 1 and "ConsentConflict" in err

    code, out, _ = cli(capsys, "consent-sweep", "--state", state, "--at", "2024-07-01T09:00")
    assert out.strip() == "expired jd-03"

    code, out, _ = cli(capsys, "provenance-query", "--orientation", "user", "--key", "david",
                       "--mode", "Executed", "--state", state, "--machine")
    rows = [json.loads(line) for line in out.splitlines()]
    assert [r["consent_id"] for r in rows] == ["jd-01"]

    dot = tmp_path / "g.dot"
    assert cli(capsys, "provenance-export", "--format", "dot", "--out", dot, "--state", state)[0] == 0
    assert dot.read_text().startswith("digraph provenance")

    assert cli(capsys, "chain-verify", "--state", state)[1].strip() == "Valid"
    code, out, _ = cli(capsys, "chain-dump", "--state", state)
    assert out == (state / "chain.jsonl").read_text()


def test_chain_verify_detects_edit(capsys, tmp_path):
    state = tmp_path / "ws"
    ppa_file = tmp_path / "ppa.json"
    ppa_file.write_text(json.dumps(ppa_to_dict(jordan_ppa())))
    cli(capsys, "ppa-create", "--file", ppa_file, "--state", state)
    chain = state / "chain.jsonl"
    lines = chain.read_text().splitlines()
    h = next(i for i, line in enumerate(lines) if '"DOC:david"' in line)
    lines[h] = lines[h].replace('"DOC:david"', '"DOC:mallory"', 1)
    chain.write_text("\n".join(lines) + "\n")
    code, out, _ = cli(capsys, "chain-verify", "--state", state)
    assert code == 1 and out.strip() == f"Broken({h})"
    code, _, err = cli(capsys, "chain-dump", "--state", state)
    assert code == 1 and "ChainFormatError" in err


def test_bench_writes_csv_and_figures(capsys, tmp_path):
    code, out, err = cli(capsys, "bench", "--counts", "4,8", "--operations", "create,terminate", "--out", tmp_path)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 4 and rows[0]["chain_profile"] == "desk"
    assert (tmp_path / "bench.csv").read_text() == out
    for metric in ("total_gas", "write_latency", "read_latency"):
        png = tmp_path / f"desk_{metric}.png"
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "consentchain.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "chain-verify" in proc.stdout


def test_bad_input_exit_codes(capsys, tmp_path):
    assert cli(capsys, "ppa-create", "--file", tmp_path / "none.json", "--state", tmp_path)[0] == 2
    assert cli(capsys)[0] == 2

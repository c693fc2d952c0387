import json

import pytest

from conftest import CORPUS, FIXTURES, fixture_bytes, fixture_path
from ontoflow.cli import main
from ontoflow.sbpm import load_sbpm_owl, transform
from ontoflow.bpmn import parse_bpmn
from oracles import drop_attribute

SCENARIOS = FIXTURES / "scenarios"


def test_no_arguments_is_usage_error(capsys):
    assert main([]) == 2


def test_convert_writes_and_is_deterministic(tmp_path):
    a, b = tmp_path / "a.owl", tmp_path / "b.owl"
    assert main(["convert", str(fixture_path("question_answer")), "-o", str(a)]) == 0
    assert main(["convert", str(fixture_path("question_answer")), "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes() and b"bpmn2:participant" in a.read_bytes()


def test_convert_missing_file(tmp_path, capsys):
    assert main(["convert", str(tmp_path / "nope.bpmn")]) == 2
    assert "nope.bpmn" in capsys.readouterr().err


def test_convert_malformed_names_location(tmp_path, capsys):
    bad = tmp_path / "bad.bpmn"
    bad.write_text('<definitions xmlns="http://www.omg.org/spec/BPMN/20100524/MODEL">\n  <task>\n</definitions>')
    assert main(["convert", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "bad.bpmn" in err and "line 3" in err


def test_convert_compare_log(tmp_path):
    log = tmp_path / "diff.jsonl"
    assert main(["convert", str(fixture_path("elementary")), "-o", str(tmp_path / "x.owl"), "--compare-log", str(log)]) == 0
    records = [json.loads(line) for line in log.read_text().splitlines()]
    assert records and all(set(r) == {"kind", "side", "name", "location"} for r in records)
    assert not [r for r in records if r["side"] == "only-in-a"]


def test_verify_clean_corpus(capsys):
    assert main(["verify", *[str(fixture_path(n)) for n in CORPUS]]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_verify_seeded_fault_jsonl(tmp_path, capsys):
    seeded = tmp_path / "seeded.bpmn"
    seeded.write_text(drop_attribute(fixture_bytes("question_answer").decode(), "Collaboration_qa", "name"))
    assert main(["verify", "--format", "jsonl", str(fixture_path("elementary")), str(seeded)]) == 1
    records = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    findings = [r for r in records if r["type"] == "finding"]
    assert len(findings) == 1 and findings[0]["kind"] == "RestrictionViolation"
    assert findings[0]["path"] == "/definitions/collaboration[1]"


def test_verify_severity_downgrade(tmp_path):
    seeded = tmp_path / "seeded.bpmn"
    seeded.write_text(drop_attribute(fixture_bytes("question_answer").decode(), "Collaboration_qa", "name"))
    assert main(["verify", str(seeded), "--severity", "RestrictionViolation@Collaboration=warning"]) == 0
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"severity": {"RestrictionViolation": "warning"}, "format": "jsonl"}))
    out = tmp_path / "report.jsonl"
    assert main(["verify", str(seeded), "--config", str(cfg), "-o", str(out)]) == 0
    assert json.loads(out.read_text().splitlines()[0])["severity"] == "warning"
    assert main(["verify", str(seeded), "--severity", "nonsense"]) == 2
    assert main(["verify", str(seeded), "--severity", "RestrictionViolation=fatal"]) == 2


def test_verify_unreadable_table(tmp_path):
    assert main(["verify", str(fixture_path("elementary")), "--table", str(tmp_path / "missing.tsv")]) == 2
    broken = tmp_path / "broken.tsv"
    broken.write_text("* only-two\n")
    assert main(["verify", str(fixture_path("elementary")), "--table", str(broken)]) == 2


def test_verify_unparseable_input_is_operational(tmp_path):
    bad = tmp_path / "bad.bpmn"
    bad.write_bytes(b"<definitions")
    assert main(["verify", str(fixture_path("elementary")), str(bad)]) == 2


def test_verify_accepts_model_ontology(tmp_path):
    owl = tmp_path / "qa.owl"
    assert main(["convert", str(fixture_path("question_answer")), "-o", str(owl)]) == 0
    assert main(["verify", str(owl)]) == 0


def test_verify_empty_corpus(capsys):
    assert main(["verify"]) == 0
    assert capsys.readouterr().out == ""


@pytest.mark.parametrize("name", CORPUS)
def test_roundtrip_each_file(name, capsys):
    assert main(["roundtrip", str(fixture_path(name))]) == 0
    assert "round trip equal" in capsys.readouterr().out


def test_roundtrip_truncated_intermediate(tmp_path):
    mid = tmp_path / "mid.owl"
    assert main(["roundtrip", str(fixture_path("elementary")), "--intermediate", str(mid)]) == 0
    data = mid.read_bytes()
    mid.write_bytes(data[: len(data) // 2])
    assert main(["roundtrip", str(fixture_path("elementary")), "--from-intermediate", str(mid)]) == 2


def test_roundtrip_mismatch_reports_difference(tmp_path, capsys):
    mid = tmp_path / "mid.owl"
    assert main(["roundtrip", str(fixture_path("elementary")), "--intermediate", str(mid)]) == 0
    mid.write_text(mid.read_text().replace(">do work<", ">do play<"))
    assert main(["roundtrip", str(fixture_path("elementary")), "--from-intermediate", str(mid)]) == 1
    out = capsys.readouterr().out
    assert "differs" in out and "do play" in out


def test_transform_and_reload(tmp_path):
    out = tmp_path / "qa.sbpm.owl"
    assert main(["transform", str(fixture_path("question_answer")), "-o", str(out)]) == 0
    model = load_sbpm_owl(out.read_bytes())
    assert len(model.subjects) == 2
    assert model == transform(parse_bpmn(fixture_bytes("question_answer")))


def test_transform_unsupported(capsys):
    assert main(["transform", str(FIXTURES / "negative" / "parallel_gateway.bpmn")]) == 1
    err = capsys.readouterr().err
    assert "parallelGateway" in err and "/definitions/process[1]/parallelGateway[1]" in err


def test_run_completed_footer(tmp_path):
    model = tmp_path / "qa.owl"
    trace = tmp_path / "t.jsonl"
    assert main(["transform", str(fixture_path("question_answer")), "-o", str(model)]) == 0
    assert main(["run", str(model), "--scenario", str(SCENARIOS / "decide_yes.json"), "-o", str(trace)]) == 0
    footer = json.loads(trace.read_text().splitlines()[-1])
    assert footer["terminal"] == "completed" and footer["unconsumed_total"] == 0
    assert main(["replay", str(model), str(trace), "--scenario", str(SCENARIOS / "decide_yes.json")]) == 0
    assert main(["replay", str(model), str(trace), "--scenario", str(SCENARIOS / "decide_no.json")]) == 1


def test_run_deadlock(tmp_path, capsys):
    trace = tmp_path / "t.jsonl"
    assert main(["run", str(fixture_path("deadlock")), "-o", str(trace)]) == 1
    assert "alice, bob" in capsys.readouterr().err
    footer = json.loads(trace.read_text().splitlines()[-1])
    assert footer["terminal"] == "deadlock" and footer["waiting"] == ["alice", "bob"]


def test_run_missing_choice(capsys):
    assert main(["run", str(fixture_path("question_answer"))]) == 2
    assert "ScenarioMissingChoice" in capsys.readouterr().err


def test_run_step_limit(tmp_path):
    assert main(["run", str(fixture_path("question_answer")), "--scenario", str(SCENARIOS / "decide_yes.json"),
                 "--max-steps", "2", "-o", str(tmp_path / "t.jsonl")]) == 1


def test_reverse(tmp_path):
    model = tmp_path / "qa.owl"
    back = tmp_path / "qa.bpmn"
    assert main(["transform", str(fixture_path("question_answer")), "-o", str(model)]) == 0
    assert main(["reverse", str(model), "-o", str(back)]) == 0
    assert main(["verify", str(back)]) == 0
    assert transform(parse_bpmn(back.read_bytes())) == load_sbpm_owl(model.read_bytes())

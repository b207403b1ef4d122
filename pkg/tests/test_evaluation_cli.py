from __future__ import annotations

import json
import subprocess
import sys
from fractions import Fraction
from importlib import resources

import jsonschema
import pytest

from bqual.evaluation import (
    EvaluationConfig,
    EvaluationError,
    evaluate,
    load_required,
    parse_goals,
    render_report,
    report_to_json,
)
from bqual.metrics import GoalSpec

from conftest import corpus_path, corpus_source

CM1 = str(corpus_path("CM1.mch"))
CM2 = str(corpus_path("CM2.mch"))
GOALS = str(corpus_path("goals-cm1.txt"))
PLAN = str(corpus_path("cm5-plan.json"))


def run_cli(*args, **kwargs):
    return subprocess.run(
        [sys.executable, "-m", "bqual.cli", *args],
        capture_output=True,
        text=True,
        **kwargs,
    )


def load_schema():
    with resources.files("bqual").joinpath("report.schema.json").open() as handle:
        return json.load(handle)


class TestLoadRequired:
    def test_reference_mode(self, cm2_machine):
        spec = load_required(cm2_machine, reference_path=CM1)
        assert len(spec.required_transitions) == 1440
        assert spec.required_operations == {"inc_minute", "inc_hour", "next_day"}
        assert len(spec.required_pairs) == 1440

    def test_reference_variable_mismatch(self, cm2_machine, tmp_path):
        other = tmp_path / "other.mch"
        other.write_text(
            "MACHINE O VARIABLES a INVARIANT a : 0..1 INITIALISATION a := 0 "
            "OPERATIONS o = skip END",
            encoding="utf-8",
        )
        with pytest.raises(EvaluationError, match="hour"):
            load_required(cm2_machine, reference_path=str(other))

    def test_transitions_file_mode(self, cm1_machine, tmp_path):
        path = tmp_path / "req.jsonl"
        path.write_text(
            '{"pre": {"hour": 0, "minute": 0}, "op": "inc_minute", '
            '"post": {"hour": 0, "minute": 1}}\n',
            encoding="utf-8",
        )
        spec = load_required(cm1_machine, required_path=str(path))
        assert len(spec.required_transitions) == 1

    def test_empty_file_rejected(self, cm1_machine, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        with pytest.raises(EvaluationError, match="no required transitions"):
            load_required(cm1_machine, required_path=str(path))

    def test_unknown_variable_named(self, cm1_machine, tmp_path):
        path = tmp_path / "req.jsonl"
        path.write_text(
            '{"pre": {"hour": 0, "second": 0}, "op": "a", '
            '"post": {"hour": 0, "second": 1}}\n',
            encoding="utf-8",
        )
        with pytest.raises(Exception, match="second"):
            load_required(cm1_machine, required_path=str(path))

    def test_exactly_one_source(self, cm1_machine):
        with pytest.raises(EvaluationError, match="exactly one"):
            load_required(cm1_machine)
        with pytest.raises(EvaluationError, match="exactly one"):
            load_required(cm1_machine, required_path="a", reference_path="b")


class TestParseGoals:
    def test_corpus_goals(self, cm1_machine):
        goals = parse_goals(corpus_source("goals-cm1.txt"), cm1_machine)
        assert [name for name, _ in goals.goals] == ["G1", "G2"]

    def test_blank_lines_skipped(self, cm1_machine):
        goals = parse_goals("\nG1: hour = 0\n\n", cm1_machine)
        assert len(goals.goals) == 1

    def test_bad_line(self, cm1_machine):
        with pytest.raises(EvaluationError, match="line 1"):
            parse_goals("no colon here", cm1_machine)

    def test_membership_goal_splits_on_first_colon(self, cm1_machine):
        goals = parse_goals("G3: hour : 0..5", cm1_machine)
        assert len(goals.goals) == 1 and goals.goals[0][0] == "G3"

    def test_duplicate_name(self, cm1_machine):
        with pytest.raises(EvaluationError, match="duplicate"):
            parse_goals("G: hour = 0\nG: hour = 1", cm1_machine)

    def test_empty_text(self, cm1_machine):
        assert parse_goals("", cm1_machine) == GoalSpec(goals=())


class TestEvaluatePipeline:
    def test_cm2_against_reference(self):
        config = EvaluationConfig(
            machine_path=CM2, reference_path=CM1, trials=0, goals_path=GOALS
        )
        report = evaluate(config)
        assert report.value("tfcomp") == Fraction(1394, 1440)
        assert report.value("pfcomp") == Fraction(7062, 7200)
        assert report.value("tfcorr") == Fraction(1394, 1417)
        assert report.value("pfcorr") == Fraction(7062, 7085)
        assert report.value("tfappr") == Fraction(1394, 1440)
        assert report.value("pfappr") == Fraction(5645, 5760)
        assert report.value("availability") == 1
        assert report.value("goal_appropriateness") == Fraction(1, 2)
        assert report.capacity == 1417 + 1417

    def test_cm1_against_itself(self):
        config = EvaluationConfig(machine_path=CM1, reference_path=CM1, trials=0)
        report = evaluate(config)
        for name in ("tfcomp", "pfcomp", "tfcorr", "pfcorr", "tfappr", "pfappr"):
            assert report.value(name) == 1
        assert report.value("invariant_satisfiability") == 1
        assert report.value("reusability") == Fraction(1437, 1440)
        assert report.capacity == 2880

    def test_plan_mode(self):
        config = EvaluationConfig(machine_path=CM1, plan_path=PLAN, trials=0)
        report = evaluate(config)
        assert report.value("fault_tolerance") == 1 - Fraction(1, 1050)
        assert report.value("recoverability") == Fraction(1049, 1440)
        assert report.value("functional_analysability") == 1 - Fraction(1050, 1440)
        assert report.value("fault_analysability") == 1
        # reachability masking strands hours 6..11, so the scoped
        # operation keeps 17 of the 24 label-foreign transitions
        assert report.per_operation_modularity["inc_minute"] == Fraction(17, 24)
        assert report.per_operation_modularity["inc_hour"] == 1
        assert report.value("modularity") is not None

    def test_no_required_source_marks_functional(self):
        config = EvaluationConfig(machine_path=CM1, trials=0)
        report = evaluate(config)
        for name in ("tfcomp", "pfcomp", "tfcorr", "pfcorr", "tfappr", "pfappr", "availability"):
            assert report.value(name) is None
            assert name in report.reasons
        assert report.value("invariant_satisfiability") == 1

    def test_seeded_trials_recorded(self):
        config = EvaluationConfig(machine_path=CM1, trials=3, seed=5, n_extra=2, n_missing=2)
        report = evaluate(config)
        assert report.provenance["mutation"]["mode"] == "seeded"
        assert report.provenance["mutation"]["trials"] == 3
        assert report.value("fault_tolerance") is not None
        assert set(report.trial_exclusions) == {
            "fault_tolerance",
            "recoverability",
            "functional_analysability",
            "fault_analysability",
        }

    def test_seed_env_fallback(self, monkeypatch):
        monkeypatch.setenv("BQUAL_SEED", "17")
        config = EvaluationConfig(machine_path=CM1, trials=1, n_extra=1, n_missing=1)
        report = evaluate(config)
        assert report.provenance["mutation"]["seed"] == 17
        monkeypatch.setenv("BQUAL_SEED", "nope")
        with pytest.raises(EvaluationError, match="BQUAL_SEED"):
            evaluate(config)


@pytest.fixture(scope="module")
def report():
    config = EvaluationConfig(
        machine_path=CM2, reference_path=CM1, trials=1, seed=0,
        n_extra=1, n_missing=1, goals_path=GOALS,
    )
    return evaluate(config)


class TestRendering:
    def test_json_has_three_digit_decimals_and_exact(self, report):
        obj = report_to_json(report)
        assert obj["metrics"]["tfcomp"] == 0.968
        assert obj["exact"]["tfcomp"] == "697/720"
        assert obj["metrics"]["invariant_satisfability"] == obj["metrics"][
            "invariant_satisfiability"
        ]

    def test_not_computed_rendering(self):
        config = EvaluationConfig(machine_path=CM1, trials=0)
        obj = report_to_json(evaluate(config))
        assert obj["metrics"]["goal_appropriateness"] == "not-computed"
        assert "goal_appropriateness" in obj["not_computed_reasons"]
        assert "goal_appropriateness" not in obj["exact"]

    def test_metering_emitted(self, report):
        obj = report_to_json(report)
        assert obj["metrics"]["cpu_seconds"] >= 0
        assert obj["metrics"]["peak_memory_bytes"] > 0

    def test_schema_valid(self, report):
        jsonschema.validate(report_to_json(report), load_schema())

    def test_schema_valid_without_required(self):
        config = EvaluationConfig(machine_path=CM1, trials=0)
        jsonschema.validate(report_to_json(evaluate(config)), load_schema())

    def test_table_contains_groups(self, report):
        text = render_report(report, "table")
        for label in ("TFComp", "Inv. Sat.", "Fau. Tol.", "Peak Mem.", "GAppr"):
            assert label in text

    def test_unknown_format(self, report):
        with pytest.raises(EvaluationError):
            render_report(report, "yaml")


def _strip_metering(obj):
    del obj["metrics"]["cpu_seconds"]
    del obj["metrics"]["peak_memory_bytes"]
    return obj


class TestCli:
    def test_evaluate_exit_zero_and_schema(self, tmp_path):
        out = tmp_path / "report.json"
        result = run_cli(
            "evaluate", "--machine", CM2, "--reference", CM1,
            "--goals", GOALS, "--trials", "2", "--seed", "3",
            "--out", str(out), "--format", "table",
        )
        assert result.returncode == 0, result.stderr
        assert "TFComp" in result.stdout
        obj = json.loads(out.read_text(encoding="utf-8"))
        jsonschema.validate(obj, load_schema())
        assert obj["metrics"]["tfcomp"] == 0.968

    def test_rerun_identical_except_metering(self, tmp_path):
        args = (
            "evaluate", "--machine", CM2, "--reference", CM1,
            "--trials", "2", "--seed", "9", "--format", "json",
        )
        first = run_cli(*args)
        second = run_cli(*args)
        assert first.returncode == second.returncode == 0
        a = _strip_metering(json.loads(first.stdout))
        b = _strip_metering(json.loads(second.stdout))
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_plan_mode_cli(self):
        result = run_cli(
            "evaluate", "--machine", CM1, "--plan", PLAN, "--format", "json"
        )
        assert result.returncode == 0, result.stderr
        obj = json.loads(result.stdout)
        assert obj["exact"]["fault_tolerance"] == "1049/1050"
        assert obj["exact"]["recoverability"] == "1049/1440"
        assert obj["metrics"]["functional_analysability"] == 0.271
        assert obj["metrics"]["fault_analysability"] == 1.0
        assert obj["provenance"]["mutation"]["mode"] == "plan"

    def test_parse_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.mch"
        bad.write_text("MACHINE Broken VARIABLES", encoding="utf-8")
        result = run_cli("evaluate", "--machine", str(bad))
        assert result.returncode == 2
        assert "parse error" in result.stderr

    def test_strict_truncation_exit_code(self):
        result = run_cli(
            "evaluate", "--machine", CM1, "--max-states", "10",
            "--trials", "0", "--strict",
        )
        assert result.returncode == 3
        assert "truncated" in result.stderr

    def test_strict_not_computable_exit_code(self):
        result = run_cli("evaluate", "--machine", CM1, "--trials", "0", "--strict")
        assert result.returncode == 4
        assert "tfcomp" in result.stderr

    def test_non_strict_still_writes_partial_report(self, tmp_path):
        out = tmp_path / "partial.json"
        result = run_cli(
            "evaluate", "--machine", CM1, "--trials", "0", "--out", str(out)
        )
        assert result.returncode == 0
        obj = json.loads(out.read_text(encoding="utf-8"))
        assert obj["metrics"]["tfcomp"] == "not-computed"

    def test_explore_roundtrip_through_required(self, tmp_path):
        dump = tmp_path / "cm1.jsonl"
        result = run_cli("explore", "--machine", CM1, "--out", str(dump))
        assert result.returncode == 0, result.stderr
        summary = json.loads(result.stdout)
        assert summary["summary"]["transitions"] == 1440
        evaluated = run_cli(
            "evaluate", "--machine", CM2, "--required", str(dump),
            "--trials", "0", "--format", "json",
        )
        assert evaluated.returncode == 0, evaluated.stderr
        obj = json.loads(evaluated.stdout)
        assert obj["exact"]["tfcomp"] == "697/720"

    def test_missing_file_exit_one(self):
        result = run_cli("evaluate", "--machine", "/nonexistent.mch")
        assert result.returncode == 1

    def test_truncation_without_strict_exits_zero(self):
        result = run_cli(
            "evaluate", "--machine", CM1, "--max-states", "10",
            "--trials", "0", "--format", "json",
        )
        assert result.returncode == 0
        assert json.loads(result.stdout)["summary"]["truncated"] is True

    def test_version_flag(self):
        result = run_cli("--version")
        assert result.returncode == 0
        assert "bqual" in result.stdout

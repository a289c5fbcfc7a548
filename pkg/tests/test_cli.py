"""Config validation and CLI command tests (in-process, exit-code driven)."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from claimaudit.audit import load_template, use_template_directory
from claimaudit.cli import main
from claimaudit.config import load_config
from claimaudit.corpus import SCENARIO_LABELS
from claimaudit.evaluation import ALL_METHODS, load_records
from claimaudit.threshold import ConfigError

from test_corpus import make_manifest

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

CALIBRATION_LINES = [
    {"specificity": 7, "testability": 8, "required_standard": "RobustStudy", "boldness_target": 0.7,
     "tallies": {"h_support": 1.6, "h_refute": 0.2, "h_neutral": 0.1}, "human_verdict": "Support", "confidence": 80},
    {"specificity": 4, "testability": 5, "required_standard": "PlausibleEvidence", "boldness_target": 0.5,
     "tallies": {"h_support": 0.2, "h_refute": 1.4, "h_neutral": 0.0}, "human_verdict": "Contradict", "confidence": 75},
    {"specificity": 9, "testability": 9, "required_standard": "SettledScience", "boldness_target": 0.8,
     "tallies": {"h_support": 1.1, "h_refute": 0.3, "h_neutral": 0.2}, "human_verdict": "Support", "confidence": 90},
    {"specificity": 5, "testability": 6, "required_standard": "RobustStudy", "boldness_target": 0.6,
     "tallies": {"h_support": 0.4, "h_refute": 0.9, "h_neutral": 0.3}, "human_verdict": "Contradict", "confidence": 70},
]


def setup_workspace(tmp_path, config_extra: dict | None = None) -> Path:
    """Manifest + calibration + config in one directory; returns the config path."""
    (tmp_path / "manifest.json").write_text(json.dumps(make_manifest()), encoding="utf-8")
    (tmp_path / "calibration.jsonl").write_text(
        "\n".join(json.dumps(line) for line in CALIBRATION_LINES) + "\n", encoding="utf-8"
    )
    payload = {
        "paths": {"manifest": "manifest.json", "calibration": "calibration.jsonl", "output": "out"},
        "seed": 0,
    }
    payload.update(config_extra or {})
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(payload), encoding="utf-8")
    return config_path


class TestLoadConfig:
    def test_defaults_and_path_resolution(self, tmp_path):
        cfg = load_config(setup_workspace(tmp_path))
        assert cfg.manifest == tmp_path / "manifest.json"
        assert cfg.output == tmp_path / "out"
        assert cfg.store == tmp_path / "out" / "store"
        assert cfg.params == tmp_path / "out" / "params.json"
        assert cfg.calibration == tmp_path / "calibration.jsonl"
        assert cfg.templates is None
        assert cfg.methods == ALL_METHODS
        assert cfg.scenarios == SCENARIO_LABELS
        assert cfg.retrieval_k == 10 and cfg.seed == 0
        assert cfg.hv.alpha == 0.5 and cfg.hv.lambda_ == 0.1

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)

    def test_manifest_must_exist(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"paths": {"manifest": "missing.json"}}), encoding="utf-8")
        with pytest.raises(ConfigError, match="does not exist"):
            load_config(path)

    @pytest.mark.parametrize(
        "mutation,needle",
        [
            ({"bogus": 1}, "bogus"),
            ({"paths": {"manifest": "manifest.json", "extra": "x"}}, "extra"),
            ({"hv": {"alpha": 0.5, "beta": 1}}, "beta"),
            ({"threshold": {"priors": {"RobustStudy": 0.75}, "smoothing": 1}}, "smoothing"),
            ({"llm": {"hostname": "x"}}, "hostname"),
            ({"embedding": {"dims": 64}}, "dims"),
            ({"run": {"k": 10}}, "'k'"),
            ({"ablations": {"use_turbo": True}}, "use_turbo"),
        ],
    )
    def test_unknown_keys_rejected_at_every_level(self, tmp_path, mutation, needle):
        config_path = setup_workspace(tmp_path)
        payload = json.loads(config_path.read_text(encoding="utf-8"))
        payload.update(mutation)
        config_path.write_text(json.dumps(payload), encoding="utf-8")
        with pytest.raises(ConfigError, match=needle):
            load_config(config_path)

    def test_env_interpolation_resolves_set_variables(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CA_TEST_URL", "https://llm.example")
        config_path = setup_workspace(tmp_path, {"llm": {"base_url": "${CA_TEST_URL}", "model": "m-1"}})
        cfg = load_config(config_path)
        assert cfg.llm.base_url == "https://llm.example"
        assert cfg.llm.model == "m-1"

    def test_whole_string_reference_to_unset_variable_becomes_absent(self, tmp_path, monkeypatch):
        monkeypatch.delenv("CA_TEST_KEY", raising=False)
        config_path = setup_workspace(tmp_path, {"llm": {"api_key": "${CA_TEST_KEY}"}})
        assert load_config(config_path).llm.api_key is None

    def test_embedded_reference_to_unset_variable_is_an_error(self, tmp_path, monkeypatch):
        monkeypatch.delenv("CA_TEST_SUFFIX", raising=False)
        config_path = setup_workspace(tmp_path, {"llm": {"model": "model-${CA_TEST_SUFFIX}"}})
        with pytest.raises(ConfigError, match="CA_TEST_SUFFIX"):
            load_config(config_path)

    def test_threshold_section_parses(self, tmp_path):
        config_path = setup_workspace(
            tmp_path,
            {
                "threshold": {
                    "priors": {"PlausibleEvidence": 0.55, "RobustStudy": 0.7, "SettledScience": 0.85},
                    "C": 0.1,
                    "N_base": 5,
                    "clamp": [0.4, 0.9],
                }
            },
        )
        threshold = load_config(config_path).threshold
        assert threshold.scaling_c == 0.1 and threshold.n_base == 5
        assert threshold.clamp_lo == 0.4 and threshold.clamp_hi == 0.9

    def test_unknown_prior_standard_rejected(self, tmp_path):
        config_path = setup_workspace(tmp_path, {"threshold": {"priors": {"FolkWisdom": 0.5}}})
        with pytest.raises(ConfigError, match="FolkWisdom"):
            load_config(config_path)

    def test_unknown_method_and_scenario_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="oracle"):
            load_config(setup_workspace(tmp_path, {"run": {"methods": ["oracle"]}}))
        with pytest.raises(ConfigError, match="TY9"):
            load_config(setup_workspace(tmp_path, {"run": {"scenarios": ["TY9"]}}))

    def test_grid_override(self, tmp_path):
        config_path = setup_workspace(
            tmp_path, {"grid": {"alpha_values": [0.0, 0.5], "lambda_values": [0.1, 0.2], "gamma": 2.0}}
        )
        cfg = load_config(config_path)
        assert cfg.grid.alpha_values == (0.0, 0.5)
        assert cfg.gamma == 2.0

    def test_bad_grid_axis_rejected(self, tmp_path):
        config_path = setup_workspace(tmp_path, {"grid": {"lambda_values": [0.2, 0.1]}})
        with pytest.raises(ConfigError, match="increasing"):
            load_config(config_path)


class TestTemplateOverride:
    def test_directory_shadows_packaged_templates(self, tmp_path):
        (tmp_path / "cot_verdict.txt").write_text("CUSTOM {{CLAIM_TEXT}}", encoding="utf-8")
        use_template_directory(tmp_path)
        try:
            assert load_template("cot_verdict") == "CUSTOM {{CLAIM_TEXT}}"
            assert "CUSTOM" not in load_template("batch_audit")
        finally:
            use_template_directory(None)
        assert "CUSTOM" not in load_template("cot_verdict")


class TestUsageErrors:
    def test_no_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["audit-everything"])
        assert exc.value.code == 2

    def test_missing_config_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "--mock"])
        assert exc.value.code == 2

    def test_unknown_method_exits_2(self, tmp_path):
        config_path = setup_workspace(tmp_path)
        with pytest.raises(SystemExit) as exc:
            main(["--config", str(config_path), "verify", "--method", "verirag-turbo"])
        assert exc.value.code == 2


class TestIngestAndEmbed:
    def test_ingest_writes_store(self, tmp_path, capsys):
        config_path = setup_workspace(tmp_path)
        assert main(["--config", str(config_path), "ingest"]) == 0
        assert "4 documents" in capsys.readouterr().out
        assert (tmp_path / "out" / "store" / "manifest.json").exists()

    def test_ingest_is_idempotent(self, tmp_path):
        config_path = setup_workspace(tmp_path)
        assert main(["--config", str(config_path), "ingest"]) == 0
        first = (tmp_path / "out" / "store" / "manifest.json").read_bytes()
        assert main(["--config", str(config_path), "ingest"]) == 0
        assert (tmp_path / "out" / "store" / "manifest.json").read_bytes() == first

    def test_ingest_integrity_error_exits_1(self, tmp_path, capsys):
        payload = make_manifest()
        payload["evidence_map"]["K01"] = ["GHOST-c0"]
        (tmp_path / "manifest.json").write_text(json.dumps(payload), encoding="utf-8")
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"paths": {"manifest": "manifest.json"}}), encoding="utf-8")
        assert main(["--config", str(config_path), "ingest"]) == 1
        assert "GHOST" in capsys.readouterr().err

    def test_embed_populates_embeddings(self, tmp_path):
        config_path = setup_workspace(tmp_path)
        assert main(["--config", str(config_path), "ingest"]) == 0
        assert main(["--config", str(config_path), "embed"]) == 0
        assert (tmp_path / "out" / "store" / "embeddings.jsonl").exists()

    def test_embed_without_prior_ingest_starts_from_manifest(self, tmp_path):
        config_path = setup_workspace(tmp_path)
        assert main(["--config", str(config_path), "embed"]) == 0
        assert (tmp_path / "out" / "store" / "embeddings.jsonl").exists()


class TestCalibrate:
    def test_writes_params(self, tmp_path, capsys):
        config_path = setup_workspace(tmp_path)
        assert main(["--config", str(config_path), "calibrate"]) == 0
        params_path = tmp_path / "out" / "params.json"
        assert params_path.exists()
        payload = json.loads(params_path.read_text(encoding="utf-8"))
        assert set(payload) == {"alpha", "lambda", "ridge"}
        assert set(payload["ridge"]) == {"weights", "intercept", "gamma"}
        assert "calibrated alpha=" in capsys.readouterr().out

    def test_rerun_is_byte_identical(self, tmp_path):
        config_path = setup_workspace(tmp_path)
        assert main(["--config", str(config_path), "calibrate"]) == 0
        first = (tmp_path / "out" / "params.json").read_bytes()
        assert main(["--config", str(config_path), "calibrate"]) == 0
        assert (tmp_path / "out" / "params.json").read_bytes() == first

    def test_no_calibration_path_exits_1(self, tmp_path, capsys):
        (tmp_path / "manifest.json").write_text(json.dumps(make_manifest()), encoding="utf-8")
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"paths": {"manifest": "manifest.json"}}), encoding="utf-8")
        assert main(["--config", str(config_path), "calibrate"]) == 1
        assert "calibration" in capsys.readouterr().err

    def test_empty_calibration_file_exits_1(self, tmp_path, capsys):
        config_path = setup_workspace(tmp_path)
        (tmp_path / "calibration.jsonl").write_text("", encoding="utf-8")
        assert main(["--config", str(config_path), "calibrate"]) == 1
        assert "no calibration records" in capsys.readouterr().err


class TestVerify:
    def test_mock_verify_writes_records(self, tmp_path, capsys):
        config_path = setup_workspace(tmp_path)
        assert main(["--config", str(config_path), "embed"]) == 0
        assert main(["--config", str(config_path), "verify", "--mock", "--seed", "7"]) == 0
        out = capsys.readouterr().out
        assert "verdict records" in out
        records = load_records(tmp_path / "out" / "records.jsonl")
        assert len(records) == 2 * len(ALL_METHODS) * len(SCENARIO_LABELS)

    def test_mock_verify_is_byte_identical_across_reruns(self, tmp_path):
        config_path = setup_workspace(tmp_path)
        assert main(["--config", str(config_path), "embed"]) == 0
        assert main(["--config", str(config_path), "verify", "--mock", "--seed", "7"]) == 0
        first = (tmp_path / "out" / "records.jsonl").read_bytes()
        assert main(["--config", str(config_path), "verify", "--mock", "--seed", "7"]) == 0
        assert (tmp_path / "out" / "records.jsonl").read_bytes() == first

    def test_seed_changes_records(self, tmp_path):
        config_path = setup_workspace(tmp_path)
        assert main(["--config", str(config_path), "embed"]) == 0
        assert main(["--config", str(config_path), "verify", "--mock", "--seed", "7"]) == 0
        first = (tmp_path / "out" / "records.jsonl").read_bytes()
        assert main(["--config", str(config_path), "verify", "--mock", "--seed", "8"]) == 0
        assert (tmp_path / "out" / "records.jsonl").read_bytes() != first

    def test_method_scenario_and_claim_filters(self, tmp_path):
        config_path = setup_workspace(tmp_path)
        assert main(["--config", str(config_path), "embed"]) == 0
        assert (
            main(
                [
                    "--config", str(config_path), "verify", "--mock",
                    "--method", "audit", "--scenario", "TY0", "--claim-id", "K01",
                ]
            )
            == 0
        )
        records = load_records(tmp_path / "out" / "records.jsonl")
        assert len(records) == 1
        assert records[0].claim_id == "K01"
        assert records[0].method == "audit"
        assert records[0].scenario == "TY0"

    def test_unknown_claim_id_exits_1(self, tmp_path, capsys):
        config_path = setup_workspace(tmp_path)
        assert main(["--config", str(config_path), "verify", "--mock", "--claim-id", "K99"]) == 1
        assert "K99" in capsys.readouterr().err

    def test_uses_calibrated_params_when_present(self, tmp_path):
        config_path = setup_workspace(tmp_path)
        assert main(["--config", str(config_path), "embed"]) == 0
        args = ["--config", str(config_path), "verify", "--mock", "--seed", "7", "--method", "audit"]
        assert main(args) == 0
        before = (tmp_path / "out" / "records.jsonl").read_bytes()
        assert main(["--config", str(config_path), "calibrate"]) == 0
        assert main(args) == 0
        assert (tmp_path / "out" / "records.jsonl").read_bytes() != before

    def test_live_mode_without_api_key_exits_1_before_any_network_call(self, tmp_path, monkeypatch, capsys):
        import requests

        def explode(*args, **kwargs):
            raise AssertionError("a network call was attempted")

        monkeypatch.setattr(requests.Session, "post", explode)
        monkeypatch.setattr(requests.Session, "request", explode)
        monkeypatch.delenv("LLM_API_KEY", raising=False)
        config_path = setup_workspace(
            tmp_path, {"llm": {"base_url": "https://llm.example", "model": "m-1", "api_key": "${LLM_API_KEY}"}}
        )
        assert main(["--config", str(config_path), "verify"]) == 1
        assert "LLM_API_KEY" in capsys.readouterr().err


class TestReport:
    def _verified_workspace(self, tmp_path, capsys):
        config_path = setup_workspace(tmp_path)
        assert main(["--config", str(config_path), "embed"]) == 0
        assert main(["--config", str(config_path), "verify", "--mock", "--seed", "7"]) == 0
        capsys.readouterr()  # drain setup output so tests see only their command
        return config_path

    def test_report_renders_table_and_writes_json(self, tmp_path, capsys):
        config_path = self._verified_workspace(tmp_path, capsys)
        assert main(["--config", str(config_path), "report"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("method")
        assert "TY0" in out and "TY5" in out
        assert "token counts are approximate" in out
        payload = json.loads((tmp_path / "out" / "report.json").read_text(encoding="utf-8"))
        assert len(payload["cells"]) == len(ALL_METHODS) * len(SCENARIO_LABELS)

    def test_report_csv_emits_one_row_per_cell(self, tmp_path, capsys):
        config_path = self._verified_workspace(tmp_path, capsys)
        assert main(["--config", str(config_path), "report", "--csv"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith("method,scenario,")
        assert len(lines) == 1 + len(ALL_METHODS) * len(SCENARIO_LABELS)

    def test_report_is_byte_identical_across_reruns(self, tmp_path, capsys):
        config_path = self._verified_workspace(tmp_path, capsys)
        assert main(["--config", str(config_path), "report"]) == 0
        first = (tmp_path / "out" / "report.json").read_bytes()
        assert main(["--config", str(config_path), "report"]) == 0
        assert (tmp_path / "out" / "report.json").read_bytes() == first

    def test_report_without_records_exits_1(self, tmp_path, capsys):
        config_path = setup_workspace(tmp_path)
        assert main(["--config", str(config_path), "report"]) == 1
        assert "run verify first" in capsys.readouterr().err


class TestShippedFixtures:
    def test_generator_reproduces_committed_fixtures(self, tmp_path):
        script = FIXTURES.parent / "demos" / "build_demo_corpus.py"
        result = subprocess.run(
            [sys.executable, str(script), str(tmp_path / "regen")], capture_output=True, text=True
        )
        assert result.returncode == 0, result.stderr
        for name in ("manifest.json", "calibration.jsonl", "config.json"):
            assert (tmp_path / "regen" / name).read_bytes() == (FIXTURES / name).read_bytes(), name

    def test_fixture_matrix_runs_clean(self, tmp_path, capsys):
        config_path = tmp_path / "config.json"
        config_path.write_text(
            json.dumps(
                {
                    "paths": {
                        "manifest": str(FIXTURES / "manifest.json"),
                        "calibration": str(FIXTURES / "calibration.jsonl"),
                        "output": str(tmp_path / "out"),
                    },
                    "seed": 0,
                }
            ),
            encoding="utf-8",
        )
        assert main(["--config", str(config_path), "verify", "--mock", "--seed", "7"]) == 0
        records = load_records(tmp_path / "out" / "records.jsonl")
        assert len(records) == 10 * len(ALL_METHODS) * len(SCENARIO_LABELS)
        assert all(record.failure is None for record in records)
        assert main(["--config", str(config_path), "report"]) == 0
        assert (tmp_path / "out" / "report.json").exists()

import json

import pytest

from app import main


class TestSynthCommand:
    def test_writes_cohort_and_embeddings(self, tmp_path, capsys):
        out = tmp_path / "cohort.jsonl"
        code = main(["--seed", "4", "synth", "--n", "40", "--prevalence", "0.1", "--out", str(out)])
        assert code == 0
        assert out.exists()
        assert (tmp_path / "cohort.vectors.txt").exists()
        assert "4 positive" in capsys.readouterr().out

    def test_missing_out_is_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main(["synth", "--n", "40"])
        assert info.value.code == 2

    def test_infeasible_spec(self, tmp_path):
        assert main(["synth", "--n", "10", "--prevalence", "0.01", "--out", str(tmp_path / "c.jsonl")]) == 3


class TestValidateCommand:
    def test_ok(self, synthetic_config, capsys):
        assert main(["validate", "--config", str(synthetic_config)]) == 0
        assert capsys.readouterr().out.strip() == "ok"

    def test_unknown_key(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"window": {"horizon": 4}}), encoding="utf-8")
        assert main(["validate", "--config", str(path)]) == 3
        assert "window.horizon: unknown key" in capsys.readouterr().err

    def test_missing_config_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main(["validate"])
        assert info.value.code == 2


class TestRunCommand:
    def test_run_writes_to_out_dir(self, synthetic_config, tmp_path):
        out_dir = tmp_path / "results"
        assert main(["run", "--config", str(synthetic_config), "--out-dir", str(out_dir)]) == 0
        assert (out_dir / "report.json").exists()
        assert main(["audit", "--config", str(synthetic_config), "--out-dir", str(out_dir)]) == 0

    def test_missing_cohort_is_validation_error(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"window": {"modality": "structured"}}), encoding="utf-8")
        assert main(["run", "--config", str(path)]) == 3

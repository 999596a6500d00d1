"""End-to-end CLI: synth -> inspect -> run."""

import json
import subprocess
import sys

from rapf.cli import main


def invoke(args):
    return main(args)


class TestSynth:
    def test_writes_loadable_store(self, tmp_path, capsys):
        out = tmp_path / "toy.rapfemb"
        code = invoke(
            ["synth", "--classes", "6", "--dim", "16", "--train-per-class", "5",
             "--test-per-class", "2", "--seed", "7", "--out", str(out)]
        )
        assert code == 0
        assert out.exists()
        assert "6 classes" in capsys.readouterr().out

    def test_reports_config_errors(self, tmp_path, capsys):
        code = invoke(["synth", "--classes", "1", "--out", str(tmp_path / "x.bin")])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestInspect:
    def test_summarizes_store(self, tmp_path, capsys):
        out = tmp_path / "toy.rapfemb"
        invoke(["synth", "--classes", "8", "--dim", "16", "--train-per-class", "4",
                "--test-per-class", "2", "--confusable", "0.5", "--seed", "1",
                "--out", str(out)])
        capsys.readouterr()
        assert invoke(["inspect", "--emb", str(out)]) == 0
        text = capsys.readouterr().out
        assert "classes: 8" in text
        assert "histogram" in text
        assert "pairs under 0.65" in text

    def test_missing_file(self, tmp_path):
        try:
            invoke(["inspect", "--emb", str(tmp_path / "nope.bin")])
        except FileNotFoundError:
            pass  # surfaced as the usual OS error


class TestRun:
    def test_full_protocol_writes_report(self, tmp_path, capsys):
        emb = tmp_path / "bench.rapfemb"
        invoke(["synth", "--classes", "8", "--dim", "16", "--train-per-class", "8",
                "--test-per-class", "3", "--seed", "5", "--out", str(emb)])
        report = tmp_path / "report.json"
        code = invoke(
            ["run", "--emb", str(emb), "--base", "2", "--inc", "2", "--epochs", "3",
             "--replay-per-epoch", "10", "--batch-size", "8", "--pair-samples", "2",
             "--seeds", "0,1", "--out", str(report)]
        )
        assert code == 0
        text = capsys.readouterr().out
        assert "mean over 2 seeds" in text
        payload = json.loads(report.read_text())
        assert payload["config"]["epochs"] == 3
        assert len(payload["seeds"]) == 2

    def test_base_zero_maps_to_inc(self, tmp_path, capsys):
        emb = tmp_path / "bench.rapfemb"
        invoke(["synth", "--classes", "8", "--dim", "16", "--train-per-class", "6",
                "--test-per-class", "2", "--seed", "5", "--out", str(emb)])
        report = tmp_path / "r.json"
        code = invoke(
            ["run", "--emb", str(emb), "--base", "0", "--inc", "4", "--epochs", "2",
             "--replay-per-epoch", "8", "--batch-size", "8", "--seeds", "0",
             "--out", str(report)]
        )
        assert code == 0
        payload = json.loads(report.read_text())
        assert [len(t) for t in payload["seeds"][0]["tasks"]] == [4, 4]

    def test_module_entrypoint(self, tmp_path):
        out = tmp_path / "m.rapfemb"
        proc = subprocess.run(
            [sys.executable, "-m", "rapf.cli", "synth", "--classes", "4",
             "--dim", "16", "--train-per-class", "3", "--test-per-class", "1",
             "--out", str(out)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert out.exists()

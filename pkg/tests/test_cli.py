import json
import subprocess
import sys

import pytest

from streammem.cli import main
from streammem.stream_io import load_stream


@pytest.fixture
def stream_path(tmp_path):
    path = tmp_path / "stream.jsonl"
    main(["synth", "--seed", "3", "--turns", "120", "--topics", "3",
          "--probe-rate", "0.15", "--out", str(path),
          "--config-out", str(tmp_path / "config.json")])
    return path


class TestSynthCommand:
    def test_writes_parseable_stream_and_config(self, stream_path, tmp_path):
        events = load_stream(stream_path)
        assert len(events) == 120
        config = json.loads((tmp_path / "config.json").read_text())
        assert config["plugins"]["scene_keywords"]
        assert config["params"]["alpha"] == 0.6

    def test_same_seed_same_bytes(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for out in (a, b):
            main(["synth", "--seed", "9", "--turns", "50", "--out", str(out)])
        assert a.read_bytes() == b.read_bytes()


class TestReplayCommand:
    def test_end_to_end_with_outputs(self, stream_path, tmp_path, capsys):
        out_dir = tmp_path / "out"
        code = main([
            "replay", str(stream_path),
            "--config", str(tmp_path / "config.json"),
            "--audit", "--out", str(out_dir),
        ])
        assert code == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert report["budget_violations"] == 0
        csv_lines = (out_dir / "update_latencies.csv").read_text().splitlines()
        assert csv_lines[0] == "turn,latency_ms"
        assert len(csv_lines) > 50
        assert (out_dir / "audit.jsonl").exists()
        summary = json.loads(capsys.readouterr().out)
        assert summary["turns"] == 120

    def test_regret_over_audit(self, stream_path, tmp_path, capsys):
        out_dir = tmp_path / "out"
        main(["replay", str(stream_path), "--audit", "--out", str(out_dir)])
        capsys.readouterr()
        code = main(["regret", "--audit", str(out_dir / "audit.jsonl"),
                     "--gamma", "0.9"])
        assert code == 0
        result = json.loads(capsys.readouterr().out)
        assert result["gamma"] == 0.9
        assert "steps" in result


class TestOracleCommand:
    def test_documented_instance(self, tmp_path, capsys):
        items = tmp_path / "items.json"
        items.write_text(json.dumps([[6, 3], [5, 2], [4, 2]]))
        code = main(["oracle", "--items", str(items), "--capacity", "4"])
        assert code == 0
        result = json.loads(capsys.readouterr().out)
        assert result == {"subset": [1, 2], "value": 9.0}


class TestServeCommand:
    def test_feed_snapshot_search_over_stdio(self, tmp_path):
        requests = [
            {"op": "feed", "event": {"type": "utterance", "turn": 1,
                                     "speaker": "amy", "text": "visited Crystal Lake"}},
            {"op": "feed", "event": {"type": "probe", "turn": 2,
                                     "question": "recall about Crystal Lake",
                                     "answer": None, "keywords": [],
                                     "evidence_turns": [1]}},
            {"op": "search", "query": "Crystal Lake", "k_amu": 2},
            {"op": "snapshot"},
            {"op": "feed", "event": {"type": "utterance", "turn": 1,
                                     "speaker": "amy", "text": "stale turn"}},
            {"op": "close"},
        ]
        payload = "".join(json.dumps(r) + "\n" for r in requests)
        proc = subprocess.run(
            [sys.executable, "-m", "streammem.cli", "serve"],
            input=payload, capture_output=True, text=True, timeout=60,
        )
        lines = [json.loads(line) for line in proc.stdout.splitlines()]
        assert lines[0] == {"ok": True, "result": None}
        assert lines[1]["ok"] and lines[1]["result"]["answer"]
        assert lines[2]["ok"]
        snapshot = json.loads(lines[3]["snapshot"])
        assert snapshot["clock"] == 2
        assert lines[4]["ok"] is False
        assert lines[4]["error"]["type"] == "PreconditionError"
        assert lines[5] == {"ok": True, "op": "close"}
        assert proc.returncode == 0

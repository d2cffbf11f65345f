from __future__ import annotations

import json
import shutil
from pathlib import Path

import pytest

from hypergrain.cli import main

DATA = Path(__file__).parent / "data"


@pytest.fixture
def workspace(tmp_path):
    """Copy of the corpus fixtures plus room for a KB."""
    corpus = tmp_path / "corpus"
    shutil.copytree(DATA / "corpus", corpus)
    shutil.copy(DATA / "config.yaml", tmp_path / "config.yaml")
    shutil.copy(DATA / "dataset.jsonl", tmp_path / "dataset.jsonl")
    return tmp_path


def run(argv: list[str], capsys) -> tuple[int, str, str]:
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def build_kb(workspace, capsys, extra: list[str] = ()) -> Path:
    kb_path = workspace / "kb"
    code, out, err = run(
        [
            "build",
            "--manifest", str(workspace / "corpus" / "manifest.jsonl"),
            "--out", str(kb_path),
            "--config", str(workspace / "config.yaml"),
            *extra,
        ],
        capsys,
    )
    assert code == 0, err
    return kb_path


class TestBuild:
    def test_build_and_inspect(self, workspace, capsys):
        kb_path = build_kb(workspace, capsys)
        code, out, _ = run(["inspect", "--kb", str(kb_path)], capsys)
        assert code == 0
        assert "38 entities" in out
        assert "37 hyperedges" in out
        assert "47 edges" in out
        assert "7 clusters" in out

    def test_rerun_served_from_cache(self, workspace, capsys):
        kb_path = build_kb(workspace, capsys)
        shutil.rmtree(kb_path)  # simulate a lost output, cache intact
        code, out, _ = run(
            [
                "build",
                "--manifest", str(workspace / "corpus" / "manifest.jsonl"),
                "--out", str(kb_path),
                "--config", str(workspace / "config.yaml"),
            ],
            capsys,
        )
        assert code == 0
        assert "construction usage: 0 calls" in out  # documents came from cache

    def test_invalid_config_rejected_before_work(self, workspace, capsys):
        bad = workspace / "bad.yaml"
        bad.write_text("window:\n  g_max: 3\n  g_overlap: 3\n", encoding="utf-8")
        code, _, err = run(
            [
                "build",
                "--manifest", str(workspace / "corpus" / "manifest.jsonl"),
                "--out", str(workspace / "kb2"),
                "--config", str(bad),
            ],
            capsys,
        )
        assert code == 1
        assert "g_overlap" in err
        assert not (workspace / "kb2").exists()

    def test_no_sw_recorded_in_manifest(self, workspace, capsys):
        kb_path = build_kb(workspace, capsys, ["--no-sw", "--no-ssc"])
        manifest = json.loads((kb_path / "manifest.json").read_text())
        assert manifest["config"]["sliding_window"] is False
        assert manifest["config"]["ssc"] is False
        code, out, _ = run(["inspect", "--kb", str(kb_path)], capsys)
        assert code == 0
        assert "0 clusters" in out


class TestQuery:
    def test_hybrid_answer(self, workspace, capsys):
        kb_path = build_kb(workspace, capsys)
        code, out, _ = run(
            ["query", "Who founded Acme?", "--kb", str(kb_path),
             "--config", str(workspace / "config.yaml")],
            capsys,
        )
        assert code == 0
        assert "Alice" in out

    def test_graph_mode_bundle_has_no_clusters(self, workspace, capsys):
        kb_path = build_kb(workspace, capsys)
        code, out, _ = run(
            ["query", "Who founded Acme?", "--kb", str(kb_path),
             "--config", str(workspace / "config.yaml"),
             "--mode", "graph", "--verbose"],
            capsys,
        )
        assert code == 0
        bundle = json.loads(out[out.index("{"):])
        assert bundle["clusters"] == []
        assert bundle["hyperedges"] == []
        assert bundle["edges"]

    def test_missing_kb_is_usage_error(self, workspace, capsys):
        code, _, err = run(
            ["query", "Anything?", "--kb", str(workspace / "nope")], capsys
        )
        assert code == 1
        assert "nope" in err

    def test_integrity_failure_exit_code(self, workspace, capsys):
        kb_path = build_kb(workspace, capsys)
        records = (kb_path / "entities.jsonl").read_text().splitlines()
        (kb_path / "entities.jsonl").write_text("\n".join(records[1:]) + "\n")
        code, _, err = run(
            ["query", "Who founded Acme?", "--kb", str(kb_path),
             "--config", str(workspace / "config.yaml")],
            capsys,
        )
        assert code == 3
        assert "integrity" in err.lower()

    def test_provider_failure_exit_code(self, workspace, capsys):
        kb_path = build_kb(workspace, capsys)
        offline = workspace / "offline.yaml"
        offline.write_text(
            (workspace / "config.yaml").read_text().replace(
                "kind: mock",
                "kind: http\n  base_url: http://127.0.0.1:9\n  max_retries: 0",
            ),
            encoding="utf-8",
        )
        code, _, err = run(
            ["query", "Who founded Acme?", "--kb", str(kb_path),
             "--config", str(offline)],
            capsys,
        )
        assert code == 2
        assert "provider" in err.lower()


class TestEval:
    def test_eval_report_and_flags(self, workspace, capsys):
        kb_path = build_kb(workspace, capsys)
        report_path = workspace / "report.json"
        code, out, _ = run(
            ["eval", "--kb", str(kb_path),
             "--dataset", str(workspace / "dataset.jsonl"),
             "--config", str(workspace / "config.yaml"),
             "--no-hr", "--no-ssc",
             "--out", str(report_path)],
            capsys,
        )
        assert code == 0
        report = json.loads(report_path.read_text())
        assert report["flags"] == ["no-hr", "no-ssc"]
        assert "generation usage:" in out
        assert "prompt tokens" in out

    def test_hybrid_at_least_as_good_as_no_er(self, workspace, capsys):
        kb_path = build_kb(workspace, capsys)
        scores = {}
        for tag, flags in [("hybrid", []), ("no-er", ["--no-er"])]:
            report_path = workspace / f"report-{tag}.json"
            code, _, _ = run(
                ["eval", "--kb", str(kb_path),
                 "--dataset", str(workspace / "dataset.jsonl"),
                 "--config", str(workspace / "config.yaml"),
                 "--out", str(report_path), *flags],
                capsys,
            )
            assert code == 0
            scores[tag] = json.loads(report_path.read_text())["em_mean"]
        assert scores["hybrid"] >= scores["no-er"]
        assert scores["hybrid"] > scores["no-er"]  # edge evidence decides >=1 item

    def test_no_sw_flag_requires_matching_kb(self, workspace, capsys):
        kb_path = build_kb(workspace, capsys)
        code, _, err = run(
            ["eval", "--kb", str(kb_path),
             "--dataset", str(workspace / "dataset.jsonl"),
             "--config", str(workspace / "config.yaml"),
             "--no-sw"],
            capsys,
        )
        assert code == 1
        assert "build-time" in err

    def test_no_sw_flag_accepted_on_matching_kb(self, workspace, capsys):
        kb_path = workspace / "kb-nosw"
        code, _, _ = run(
            ["build",
             "--manifest", str(workspace / "corpus" / "manifest.jsonl"),
             "--out", str(kb_path),
             "--config", str(workspace / "config.yaml"),
             "--no-sw"],
            capsys,
        )
        assert code == 0
        code, out, _ = run(
            ["eval", "--kb", str(kb_path),
             "--dataset", str(workspace / "dataset.jsonl"),
             "--config", str(workspace / "config.yaml"),
             "--no-sw"],
            capsys,
        )
        assert code == 0

    def test_sweep_writes_report(self, workspace, capsys):
        kb_path = build_kb(workspace, capsys)
        report_path = workspace / "sweep.json"
        code, out, _ = run(
            ["eval", "--kb", str(kb_path),
             "--dataset", str(workspace / "dataset.jsonl"),
             "--config", str(workspace / "config.yaml"),
             "--sweep", "1,3,5",
             "--out", str(report_path)],
            capsys,
        )
        assert code == 0
        report = json.loads(report_path.read_text())
        assert [p["value"] for p in report["points"]] == [1, 3, 5]


class TestInspect:
    def test_cluster_dump(self, workspace, capsys):
        kb_path = build_kb(workspace, capsys)
        code, out, _ = run(["inspect", "--kb", str(kb_path), "--clusters"], capsys)
        assert code == 0
        assert "members(k_index)" in out

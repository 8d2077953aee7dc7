"""CLI: offline end-to-end runs, ablations, corpus/calibrate/score/evaluate."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from commitopt import cli
from commitopt.embedding import HashEmbedClient
from commitopt.gateway import MockChatGateway

from conftest import FIXTURES, git

GOLDEN = FIXTURES / "golden"


@pytest.fixture()
def corpus_index(demo_repo, tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("corpus") / "demo.idx"
    code = cli.main(
        ["corpus", "build", "--repos", str(demo_repo), "--out", str(out), "--mock"]
    )
    assert code == 0
    return out


def run_cli(args: list[str], capsys) -> tuple[int, str, str]:
    code = cli.main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class RecordingMock(MockChatGateway):
    instances: list["RecordingMock"] = []

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        type(self).instances.append(self)


@pytest.fixture()
def recording_gateway(monkeypatch):
    RecordingMock.instances = []
    monkeypatch.setattr("commitopt.config.MockChatGateway", RecordingMock)
    return RecordingMock


class TestCorpusCommands:
    def test_build_and_info(self, corpus_index, capsys):
        code, out, _ = run_cli(["corpus", "info", "--index", str(corpus_index)], capsys)
        assert code == 0
        meta = json.loads(out)
        assert meta["count"] == 4  # 5 commits in the demo repo, one is a merge
        assert meta["diff_embedder"].startswith("mock-hash")

    def test_build_with_llm_filter(self, demo_repo, tmp_path, capsys):
        out_path = tmp_path / "filtered.idx"
        code, out, _ = run_cli(
            ["corpus", "build", "--repos", str(demo_repo), "--out", str(out_path),
             "--mock", "--filter", "llm"],
            capsys,
        )
        assert code == 0
        assert json.loads(out)["count"] == 4  # default mock filter accepts


def _optimize_args(repo: Path, corpus: Path, trace: Path, commit: str = "HEAD") -> list[str]:
    return [
        "optimize",
        "--repo", str(repo),
        "--commit", commit,
        "--mock",
        "--equation", "even",
        "--corpus", str(corpus),
        "--step-limit", "6",
        "--p", "5",
        "--trace-out", str(trace),
    ]


class TestOptimizeEndToEnd:
    def test_mock_run_byte_deterministic(self, demo_repo, corpus_index, tmp_path, capsys):
        trace_a = tmp_path / "a.jsonl"
        code_a, out_a, _ = run_cli(_optimize_args(demo_repo, corpus_index, trace_a), capsys)
        trace_b = tmp_path / "b.jsonl"
        code_b, out_b, _ = run_cli(_optimize_args(demo_repo, corpus_index, trace_b), capsys)
        assert code_a == code_b == 0
        assert out_a == out_b
        assert trace_a.read_bytes() == trace_b.read_bytes()

        result = json.loads(out_a)
        assert set(result) == {"message", "metric_scores", "opt_score", "stop_reason", "steps_used"}
        assert result["opt_score"] >= 0

    def test_mock_run_matches_golden(self, demo_repo, corpus_index, tmp_path, capsys):
        trace = tmp_path / "t.jsonl"
        code, out, _ = run_cli(_optimize_args(demo_repo, corpus_index, trace), capsys)
        assert code == 0
        assert out == (GOLDEN / "e2e_result.json").read_text(encoding="utf-8")
        assert trace.read_text(encoding="utf-8") == (GOLDEN / "e2e_trace.jsonl").read_text(
            encoding="utf-8"
        )

    def test_missing_corpus_with_sim_enabled_exits_1(self, demo_repo, tmp_path, capsys):
        code, _, err = run_cli(
            ["optimize", "--repo", str(demo_repo), "--commit", "HEAD",
             "--mock", "--equation", "even"],
            capsys,
        )
        assert code == 1
        assert "corpus" in err

    def test_diff_file_and_message_inputs(self, demo_repo, corpus_index, tmp_path, capsys):
        diff_path = tmp_path / "change.diff"
        diff_path.write_text(git(demo_repo, "show", "HEAD", "--format=", "--patch"))
        code, out, _ = run_cli(
            ["optimize", "--diff-file", str(diff_path), "--message", "fix rounding",
             "--source-tree", str(demo_repo), "--mock", "--equation", "even",
             "--corpus", str(corpus_index), "--step-limit", "3"],
            capsys,
        )
        assert code == 0
        assert json.loads(out)["steps_used"] <= 3


class TestAblate:
    def test_no_search_single_update_call(self, demo_repo, corpus_index, capsys,
                                          recording_gateway):
        code, out, _ = run_cli(
            ["ablate", "--mode", "no-search", "--repo", str(demo_repo), "--commit", "HEAD",
             "--mock", "--equation", "even", "--corpus", str(corpus_index)],
            capsys,
        )
        assert code == 0
        result = json.loads(out)
        assert result["stop_reason"] == "no_search"
        assert result["steps_used"] == 1
        updates = [
            r
            for gw in recording_gateway.instances
            for r in gw.calls
            if r.purpose in ("update", "update.all")
        ]
        assert len(updates) == 1

    def test_disable_inapplicable_tool_reproduces_full_result(
        self, demo_repo, corpus_index, tmp_path, capsys
    ):
        docs_commit = git(demo_repo, "log", "--format=%H", "--grep", "docs:").strip()
        assert docs_commit
        trace_full = tmp_path / "full.jsonl"
        code, out_full, _ = run_cli(
            _optimize_args(demo_repo, corpus_index, trace_full, commit=docs_commit), capsys
        )
        assert code == 0
        trace_ablated = tmp_path / "ablated.jsonl"
        code, out_ablated, _ = run_cli(
            ["ablate", "--mode", "disable-tool:MethodBodySummary"]
            + _optimize_args(demo_repo, corpus_index, trace_ablated, commit=docs_commit)[1:],
            capsys,
        )
        assert code == 0
        assert out_ablated == out_full
        assert trace_ablated.read_bytes() == trace_full.read_bytes()

    def test_disable_applicable_tool_changes_available_contexts(
        self, demo_repo, corpus_index, tmp_path, capsys, recording_gateway
    ):
        code, _, _ = run_cli(
            ["ablate", "--mode", "disable-tool:ImportantFileInfo"]
            + _optimize_args(demo_repo, corpus_index, tmp_path / "x.jsonl")[1:],
            capsys,
        )
        assert code == 0
        kinds = {
            r.meta.get("context_kind")
            for gw in recording_gateway.instances
            for r in gw.calls
            if r.purpose == "update"
        }
        assert "ImportantFileInfo" not in kinds

    def test_unknown_tool_exits_1(self, demo_repo, corpus_index, capsys):
        code, _, err = run_cli(
            ["ablate", "--mode", "disable-tool:Bogus", "--repo", str(demo_repo),
             "--commit", "HEAD", "--mock", "--equation", "even",
             "--corpus", str(corpus_index)],
            capsys,
        )
        assert code == 1
        assert "Bogus" in err


class TestScore:
    def test_json_with_four_metric_fields(self, demo_repo, corpus_index, capsys):
        code, out, _ = run_cli(
            ["score", "--repo", str(demo_repo), "--commit", "HEAD", "--mock",
             "--equation", "even", "--corpus", str(corpus_index)],
            capsys,
        )
        assert code == 0
        doc = json.loads(out)
        assert set(doc["metric_scores"]) == {
            "rationality", "comprehensiveness", "conciseness", "expressiveness",
        }
        assert 0 <= doc["opt_score"] <= 16


class TestCalibrate:
    def test_synthetic_perfect_sim_correlation(self, demo_repo, corpus_index, tmp_path, capsys):
        # human scores constructed to equal the (scaled) similarity score,
        # so sim_coeff calibrates to ~1 for every metric
        from commitopt.corpus import load_index
        from commitopt.diffs import parse_unified_diff
        from commitopt.evaluate import Evaluator, EvaluatorWeights

        index = load_index(corpus_index)
        embedder = HashEmbedClient(dim=64)
        probe = Evaluator(
            gateway=MockChatGateway(), weights=EvaluatorWeights.even(),
            embed_client=embedder, index=index, k=10,
        )
        diff_text = git(demo_repo, "show", "HEAD", "--format=", "--patch")
        diff = parse_unified_diff(diff_text)
        lines = []
        for i in range(12):
            message = f"candidate message number {i} improving things"
            sim = probe.sim_score(diff, message).value
            human = round(min(4.0, max(0.0, 4.0 * sim)), 6)
            lines.append(json.dumps({
                "diff": diff_text,
                "message": message,
                "human_scores": {name: human for name in (
                    "rationality", "comprehensiveness", "conciseness", "expressiveness")},
            }))
        labeled = tmp_path / "labeled.jsonl"
        labeled.write_text("\n".join(lines) + "\n")

        weights_out = tmp_path / "weights.json"
        code, out, _ = run_cli(
            ["calibrate", "--labeled", str(labeled), "--out", str(weights_out),
             "--mock", "--corpus", str(corpus_index)],
            capsys,
        )
        assert code == 0
        doc = json.loads(weights_out.read_text())
        assert doc["equation"] == "correlation"
        for name, coeffs in doc["metrics"].items():
            assert coeffs["sim_coeff"] == pytest.approx(1.0, abs=1e-6)

    def test_weights_usable_by_optimize(self, demo_repo, corpus_index, tmp_path, capsys):
        weights = tmp_path / "w.json"
        weights.write_text(json.dumps({
            "equation": "correlation",
            "metrics": {name: {"sim_coeff": 0.5, "llm_coeff": 0.5} for name in (
                "rationality", "comprehensiveness", "conciseness", "expressiveness")},
        }))
        code, out, _ = run_cli(
            ["optimize", "--repo", str(demo_repo), "--commit", "HEAD", "--mock",
             "--equation", "correlation", "--weights", str(weights),
             "--corpus", str(corpus_index), "--step-limit", "3"],
            capsys,
        )
        assert code == 0
        assert json.loads(out)["steps_used"] <= 3

    def test_correlation_without_weights_exits_1(self, demo_repo, corpus_index, capsys):
        code, _, err = run_cli(
            ["optimize", "--repo", str(demo_repo), "--commit", "HEAD", "--mock",
             "--equation", "correlation", "--corpus", str(corpus_index)],
            capsys,
        )
        assert code == 1
        assert "calibrate" in err


class TestEvaluateCommand:
    def test_reports_and_means(self, tmp_path, capsys):
        cands = tmp_path / "c.txt"
        refs = tmp_path / "r.txt"
        cands.write_text("fix the bug\nsomething unrelated\n")
        refs.write_text("fix the bug\nfix the parser crash\n")
        code, out, _ = run_cli(
            ["evaluate", "--candidates", str(cands), "--references", str(refs)], capsys
        )
        assert code == 0
        doc = json.loads(out)
        assert len(doc["pairs"]) == 2
        assert doc["pairs"][0]["bleu"] == pytest.approx(1.0)
        assert doc["pairs"][0]["rouge_l"] == pytest.approx(1.0)
        assert 0 <= doc["means"]["meteor"] <= 1

    def test_length_mismatch_exits_1(self, tmp_path, capsys):
        cands = tmp_path / "c.txt"
        refs = tmp_path / "r.txt"
        cands.write_text("a\nb\n")
        refs.write_text("a\n")
        code, _, err = run_cli(
            ["evaluate", "--candidates", str(cands), "--references", str(refs)], capsys
        )
        assert code == 1


class TestConfigFile:
    def test_config_file_with_flag_override(self, demo_repo, corpus_index, tmp_path, capsys):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({
            "mock": True, "equation": "even", "corpus_path": str(corpus_index),
            "step_limit": 2, "p": 10.0,
        }))
        code, out, _ = run_cli(
            ["optimize", "--config", str(config), "--repo", str(demo_repo),
             "--commit", "HEAD", "--step-limit", "1"],
            capsys,
        )
        assert code == 0
        assert json.loads(out)["steps_used"] == 1

    def test_unknown_config_key_exits_1(self, demo_repo, tmp_path, capsys):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"mock": True, "nonsense": 1}))
        code, _, err = run_cli(
            ["optimize", "--config", str(config), "--repo", str(demo_repo),
             "--commit", "HEAD"],
            capsys,
        )
        assert code == 1
        assert "nonsense" in err

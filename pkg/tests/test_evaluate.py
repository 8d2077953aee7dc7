"""Objective function: combination equations, Pearson, calibration, caching."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commitopt.corpus import CorpusEntry, CorpusIndex
from commitopt.diffs import parse_unified_diff
from commitopt.embedding import normalize
from commitopt.errors import ConfigError, DegenerateInput, UnparseableResponse
from commitopt.evaluate import (
    CalibrationItem,
    Evaluator,
    EvaluatorWeights,
    MetricScores,
    SimScore,
    calibrate_weights,
    combine,
    optimization_score,
    pearson,
)
from commitopt.gateway import MockChatGateway

DIFF = parse_unified_diff(
    "diff --git a/f.txt b/f.txt\n"
    "index 1..2 100644\n"
    "--- a/f.txt\n"
    "+++ b/f.txt\n"
    "@@ -1,1 +1,2 @@\n"
    " keep\n"
    "+added\n"
)


def uniform(value: float) -> MetricScores:
    return MetricScores(value, value, value, value)


class TestCombine:
    def test_even_formula(self):
        result = combine(SimScore(0.75), uniform(3.0), EvaluatorWeights.even())
        for value in result.as_dict().values():
            assert value == pytest.approx(3.0, abs=1e-12)

    def test_correlation_formula(self):
        weights = EvaluatorWeights.correlation(
            {name: (0.3, 0.6) for name in ("rationality", "comprehensiveness", "conciseness", "expressiveness")}
        )
        result = combine(SimScore(0.5), uniform(3.0), weights)
        for value in result.as_dict().values():
            assert value == pytest.approx(8.0 / 3.0, abs=1e-12)

    def test_zero_sim_coeff_uses_llm_alone(self):
        coeffs = {name: (0.4, 0.5) for name in ("rationality", "comprehensiveness", "expressiveness")}
        coeffs["conciseness"] = (0.0, 0.7)
        weights = EvaluatorWeights.correlation(coeffs)
        llm = MetricScores(2.0, 3.0, 3.0, 1.0)
        result = combine(SimScore(0.9), llm, weights)
        assert result.conciseness == llm.conciseness

    def test_equal_coefficients_reduce_to_even(self):
        even = EvaluatorWeights.even()
        equal = EvaluatorWeights.correlation(
            {name: (0.37, 0.37) for name in ("rationality", "comprehensiveness", "conciseness", "expressiveness")}
        )
        rng = np.random.default_rng(7)
        for _ in range(200):
            sim = SimScore(float(rng.uniform(0, 1)))
            llm = MetricScores(*(float(rng.uniform(0, 4)) for _ in range(4)))
            a = combine(sim, llm, even).as_dict()
            b = combine(sim, llm, equal).as_dict()
            for name in a:
                assert abs(a[name] - b[name]) < 1e-12


@settings(max_examples=150, deadline=None)
@given(
    sim=st.floats(min_value=0, max_value=1),
    llm=st.floats(min_value=0, max_value=4),
    sc=st.floats(min_value=0, max_value=1),
    lc=st.floats(min_value=0.01, max_value=1),
)
def test_combined_metric_in_range(sim, llm, sc, lc):
    weights = EvaluatorWeights.correlation(
        {name: (sc, lc) for name in ("rationality", "comprehensiveness", "conciseness", "expressiveness")}
    )
    result = combine(SimScore(sim), uniform(llm), weights)
    for value in result.as_dict().values():
        assert 0.0 <= value <= 4.0


class TestOptimizationScore:
    def test_reported_row_sum(self):
        assert optimization_score(MetricScores(3.054, 3.283, 4.0, 3.274)) == pytest.approx(
            13.611, abs=1e-12
        )

    def test_extremes(self):
        assert optimization_score(uniform(0.0)) == 0.0
        assert optimization_score(uniform(4.0)) == 16.0

    def test_monotone_in_each_metric(self):
        base = MetricScores(1.0, 1.0, 1.0, 1.0)
        for name in base.as_dict():
            bumped = MetricScores(**{**base.as_dict(), name: 2.0})
            assert optimization_score(bumped) > optimization_score(base)


class TestPearson:
    def test_perfect_positive(self):
        r, p = pearson([1, 2, 3], [2, 4, 6])
        assert r == 1.0
        assert p == 0.0

    def test_perfect_negative(self):
        r, p = pearson([1, 2, 3], [3, 2, 1])
        assert r == -1.0
        assert p == 0.0

    def test_constant_series_degenerate(self):
        with pytest.raises(DegenerateInput):
            pearson([1.0, 1.0, 1.0], [1, 2, 3])

    def test_twenty_point_fixture_matches_independent_oracle(self):
        # oracle values computed once with scipy.stats.pearsonr and frozen
        xs = [1.635531, 2.492267, 4.011729, 1.070693, 1.014269, 3.236557,
              3.239336, 1.214539, 2.16468, 1.169699, 2.088318, 4.230078,
              1.247078, 2.299686, 1.290543, 3.055338, 0.915164, 2.485468,
              1.687583, 2.523318]
        ys = [1.038737, 1.886676, 3.941619, 1.254541, 0.451419, 1.27319,
              2.197614, 1.373198, 0.841365, 0.223982, -0.601792, 4.497395,
              1.163038, 1.639273, 0.073725, 1.699439, 1.981732, 1.614126,
              -0.875027, 3.173592]
        r, p = pearson(xs, ys)
        assert r == pytest.approx(0.6816619874494307, abs=1e-9)
        assert p == pytest.approx(0.0009331879089065392, abs=1e-9)

    def test_insignificant_fixture(self):
        xs = [1.88187, -0.990044, -0.113624, 0.953384, 1.566565, -0.538185,
              -0.57163, 0.575928, 0.884976, -0.735215, -0.893301, -1.147359]
        ys = [0.704013, 0.204438, 0.185184, -0.571528, -0.588822, -1.12779,
              -1.311536, -1.10005, -2.079789, -0.033337, 1.039657, -0.660371]
        r, p = pearson(xs, ys)
        assert r == pytest.approx(-0.1189214893564358, abs=1e-9)
        assert p == pytest.approx(0.7127903701820981, abs=1e-9)


def _score_handler(mapping: dict[str, int]):
    def handler(request):
        if request.purpose.startswith("score."):
            return str(mapping[request.purpose.split(".", 1)[1]])
        return None

    return handler


class MappedEmbedClient:
    """Embeds via an explicit text -> vector mapping (tests only)."""

    def __init__(self, table: dict[str, list[float]], default_dim: int = 4):
        self.table = table
        self.default_dim = default_dim

    def embed(self, kind: str, body: str):
        if body in self.table:
            return normalize(np.asarray(self.table[body], dtype=np.float64))
        vec = np.zeros(self.default_dim)
        vec[0] = 1.0
        return vec

    def model_id(self, kind: str) -> str:
        return "mapped"


def _index_with_message_vectors(vectors: list[list[float]]) -> CorpusIndex:
    entries = []
    for i, vec in enumerate(vectors):
        entries.append(
            CorpusEntry(
                commit_id=f"e{i}",
                diff_text=f"indexed diff {i}",
                message_text=f"indexed message {i}",
                diff_embedding=normalize(np.asarray([1.0, 0, 0, 0]) + i * 1e-6),
                message_embedding=normalize(np.asarray(vec, dtype=np.float64)),
            )
        )
    return CorpusIndex(entries=entries, metadata={"count": len(entries)})


class TestEvaluator:
    def test_llm_scores_from_fixture_mapping(self):
        gw = MockChatGateway(handler=_score_handler(
            {"rationality": 2, "comprehensiveness": 2, "conciseness": 4, "expressiveness": 3}
        ))
        ev = Evaluator(gateway=gw, weights=EvaluatorWeights.correlation(
            {name: (0.0, 1.0) for name in ("rationality", "comprehensiveness", "conciseness", "expressiveness")}
        ))
        scores = ev.llm_metric_scores(DIFF, "a message")
        assert scores == MetricScores(2, 2, 4, 3)

    def test_memoized_four_calls_total(self):
        gw = MockChatGateway(handler=_score_handler(
            {"rationality": 1, "comprehensiveness": 1, "conciseness": 1, "expressiveness": 1}
        ))
        ev = Evaluator(gateway=gw, weights=EvaluatorWeights.correlation(
            {name: (0.0, 1.0) for name in ("rationality", "comprehensiveness", "conciseness", "expressiveness")}
        ))
        ev.llm_metric_scores(DIFF, "same message")
        ev.llm_metric_scores(DIFF, "same message")
        assert len(gw.calls) == 4

    def test_unparseable_score_raises(self):
        gw = MockChatGateway(handler=lambda r: "five")
        ev = Evaluator(gateway=gw, weights=EvaluatorWeights.correlation(
            {name: (0.0, 1.0) for name in ("rationality", "comprehensiveness", "conciseness", "expressiveness")}
        ))
        with pytest.raises(UnparseableResponse):
            ev.llm_metric_scores(DIFF, "msg")

    def test_sim_self_identical_message_is_one(self):
        table = {"the candidate": [0, 1, 0, 0], DIFF.raw_text: [1, 0, 0, 0]}
        index = _index_with_message_vectors([[0, 1, 0, 0]])
        ev = Evaluator(
            gateway=MockChatGateway(),
            weights=EvaluatorWeights.even(),
            embed_client=MappedEmbedClient(table),
            index=index,
            k=1,
        )
        assert ev.sim_score(DIFF, "the candidate").value == pytest.approx(1.0, abs=1e-12)

    def test_sim_orthogonal_is_zero(self):
        table = {"the candidate": [0, 0, 0, 1], DIFF.raw_text: [1, 0, 0, 0]}
        index = _index_with_message_vectors([[0, 1, 0, 0], [0, 0, 1, 0]])
        ev = Evaluator(
            gateway=MockChatGateway(),
            weights=EvaluatorWeights.even(),
            embed_client=MappedEmbedClient(table),
            index=index,
            k=2,
        )
        assert ev.sim_score(DIFF, "the candidate").value == 0.0

    def test_sim_hand_computed_mean_with_clamp(self):
        # candidate along [1,1,0,0]/sqrt2; entries at [1,0], [0,1], [-1,0]
        table = {"the candidate": [1, 1, 0, 0], DIFF.raw_text: [1, 0, 0, 0]}
        index = _index_with_message_vectors([[1, 0, 0, 0], [0, 1, 0, 0], [-1, 0, 0, 0]])
        ev = Evaluator(
            gateway=MockChatGateway(),
            weights=EvaluatorWeights.even(),
            embed_client=MappedEmbedClient(table),
            index=index,
            k=3,
        )
        inv_sqrt2 = 1 / np.sqrt(2)
        expected = (inv_sqrt2 + inv_sqrt2 + 0.0) / 3  # negative cosine clamps to 0
        assert ev.sim_score(DIFF, "the candidate").value == pytest.approx(expected, abs=1e-12)

    def test_evaluate_composition_even(self):
        gw = MockChatGateway(handler=_score_handler(
            {"rationality": 2, "comprehensiveness": 2, "conciseness": 4, "expressiveness": 3}
        ))
        # sim = 0.5: candidate matches one entry exactly, orthogonal to the other
        table = {"msg under test": [0, 1, 0, 0], DIFF.raw_text: [1, 0, 0, 0]}
        index = _index_with_message_vectors([[0, 1, 0, 0], [0, 0, 1, 0]])
        ev = Evaluator(
            gateway=gw,
            weights=EvaluatorWeights.even(),
            embed_client=MappedEmbedClient(table),
            index=index,
            k=2,
        )
        scores, total = ev.evaluate(DIFF, "msg under test")
        assert scores == MetricScores(2.0, 2.0, 3.0, 2.5)
        assert total == pytest.approx(9.5, abs=1e-12)

    def test_evaluate_memoized_no_new_calls(self):
        gw = MockChatGateway(handler=_score_handler(
            {"rationality": 2, "comprehensiveness": 2, "conciseness": 4, "expressiveness": 3}
        ))
        table = {"msg under test": [0, 1, 0, 0], DIFF.raw_text: [1, 0, 0, 0]}
        index = _index_with_message_vectors([[0, 1, 0, 0]])
        ev = Evaluator(
            gateway=gw, weights=EvaluatorWeights.even(),
            embed_client=MappedEmbedClient(table), index=index, k=1,
        )
        first = ev.evaluate(DIFF, "msg under test")
        calls = len(gw.calls)
        second = ev.evaluate(DIFF, "msg under test")
        assert len(gw.calls) == calls
        assert first == second

    def test_sim_enabled_without_corpus_is_config_error(self):
        with pytest.raises(ConfigError):
            Evaluator(gateway=MockChatGateway(), weights=EvaluatorWeights.even())

    def test_empty_message_rejected(self):
        ev = Evaluator(gateway=MockChatGateway(), weights=EvaluatorWeights.correlation(
            {name: (0.0, 1.0) for name in ("rationality", "comprehensiveness", "conciseness", "expressiveness")}
        ))
        with pytest.raises(ValueError):
            ev.evaluate(DIFF, "   ")


class _StubScoringEvaluator:
    """Duck-typed evaluator feeding controlled series into calibration."""

    def __init__(self, sims: dict[str, float], llms: dict[str, MetricScores]):
        self.sims = sims
        self.llms = llms

    def sim_score(self, diff, message):
        return SimScore(self.sims[message])

    def llm_metric_scores(self, diff, message):
        return self.llms[message]


def _item(i: int, human: MetricScores) -> CalibrationItem:
    return CalibrationItem(diff=DIFF, message=f"m{i}", human=human)


class TestCalibration:
    def test_sim_tracks_human_llm_noise(self):
        rng = np.random.default_rng(3)
        n = 16
        humans = [float(i % 5) for i in range(n)]
        sims = {f"m{i}": humans[i] / 4.0 for i in range(n)}
        noise = {f"m{i}": uniform(float(rng.integers(0, 5))) for i in range(n)}
        items = [_item(i, uniform(humans[i])) for i in range(n)]
        weights = calibrate_weights(items, _StubScoringEvaluator(sims, noise))
        for name, w in weights.metrics:
            assert w.sim_coeff == pytest.approx(1.0, abs=1e-9)
            assert w.llm_coeff == 0.0

    def test_constant_sim_series_zeroed(self):
        n = 12
        humans = [float(i % 5) for i in range(n)]
        sims = {f"m{i}": 0.5 for i in range(n)}
        llms = {f"m{i}": uniform(humans[i]) for i in range(n)}
        items = [_item(i, uniform(humans[i])) for i in range(n)]
        weights = calibrate_weights(items, _StubScoringEvaluator(sims, llms))
        for name, w in weights.metrics:
            assert w.sim_coeff == 0.0
            assert w.llm_coeff == pytest.approx(1.0, abs=1e-9)

    def test_both_insignificant_fall_back_to_even(self):
        n = 12
        sims = {f"m{i}": 0.25 for i in range(n)}
        llms = {f"m{i}": uniform(2.0) for i in range(n)}
        items = [_item(i, uniform(float(i % 5))) for i in range(n)]
        weights = calibrate_weights(items, _StubScoringEvaluator(sims, llms))
        for name, w in weights.metrics:
            assert w.sim_coeff == w.llm_coeff == 1.0

    def test_minimum_set_size(self):
        items = [_item(i, uniform(1.0)) for i in range(5)]
        with pytest.raises(ValueError):
            calibrate_weights(items, _StubScoringEvaluator({}, {}))

    def test_weights_json_roundtrip(self):
        weights = EvaluatorWeights.correlation(
            {
                "rationality": (0.5, 0.6),
                "comprehensiveness": (0.2, 0.9),
                "conciseness": (0.0, 1.0),
                "expressiveness": (0.3, 0.3),
            }
        )
        assert EvaluatorWeights.from_json(weights.to_json()) == weights

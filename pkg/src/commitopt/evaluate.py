"""The objective function: per-metric LLM scores, retrieval similarity,
their combination (even or correlation-weighted), and calibration.

The combined score per metric is a convex combination of the similarity
score scaled to [0, 4] and the LLM score:

    even:         0.5 * (4 * sim) + 0.5 * llm
    correlation:  (4 * sim) * sc/(sc+lc) + llm * lc/(sc+lc)

where sc/lc are per-metric Pearson coefficients against human labels,
zeroed when insignificant (p > 0.05) or non-positive. Equal coefficients
reduce the correlation form to the even form exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import CorpusEntry, CorpusIndex, retrieve_similar
from .diffs import CodeDiff
from .embedding import KIND_CODE_DIFF, KIND_TEXT, EmbedClient
from .errors import ConfigError, DegenerateInput
from .gateway import ChatGateway, request_score
from .prompts import METRIC_NAMES, build_score_prompt

DEFAULT_RETRIEVAL_K = 10


@dataclass(frozen=True)
class MetricScores:
    rationality: float
    comprehensiveness: float
    conciseness: float
    expressiveness: float

    def __post_init__(self):
        for name in METRIC_NAMES:
            value = getattr(self, name)
            if not 0.0 <= value <= 4.0:
                raise ValueError(f"{name} score {value} outside [0, 4]")

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}

    @classmethod
    def from_dict(cls, values: dict[str, float]) -> "MetricScores":
        return cls(**{name: float(values[name]) for name in METRIC_NAMES})


@dataclass(frozen=True)
class SimScore:
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"sim score {self.value} outside [0, 1]")


@dataclass(frozen=True)
class MetricWeights:
    sim_coeff: float
    llm_coeff: float

    def __post_init__(self):
        if self.sim_coeff < 0 or self.llm_coeff < 0:
            raise ValueError("coefficients must be >= 0")


@dataclass(frozen=True)
class EvaluatorWeights:
    equation: str  # even | correlation
    metrics: tuple[tuple[str, MetricWeights], ...] = ()

    def __post_init__(self):
        if self.equation not in ("even", "correlation"):
            raise ValueError(f"unknown equation {self.equation!r}")
        if self.equation == "correlation":
            by_name = dict(self.metrics)
            for name in METRIC_NAMES:
                w = by_name.get(name)
                if w is None:
                    raise ValueError(f"correlation weights missing metric {name}")
                if w.sim_coeff + w.llm_coeff <= 0:
                    raise ValueError(f"metric {name}: sim_coeff + llm_coeff must be > 0")

    @classmethod
    def even(cls) -> "EvaluatorWeights":
        return cls(equation="even")

    @classmethod
    def correlation(cls, coeffs: dict[str, tuple[float, float]]) -> "EvaluatorWeights":
        return cls(
            equation="correlation",
            metrics=tuple(
                (name, MetricWeights(*coeffs[name])) for name in METRIC_NAMES
            ),
        )

    def weights_for(self, name: str) -> MetricWeights:
        return dict(self.metrics)[name]

    def needs_sim(self) -> bool:
        if self.equation == "even":
            return True
        return any(w.sim_coeff > 0 for _, w in self.metrics)

    def to_json(self) -> str:
        doc = {
            "equation": self.equation,
            "metrics": {
                name: {"sim_coeff": w.sim_coeff, "llm_coeff": w.llm_coeff}
                for name, w in self.metrics
            },
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EvaluatorWeights":
        doc = json.loads(text)
        by_name = doc.get("metrics", {})
        metrics = tuple(
            (name, MetricWeights(by_name[name]["sim_coeff"], by_name[name]["llm_coeff"]))
            for name in METRIC_NAMES
            if name in by_name
        )
        return cls(equation=doc["equation"], metrics=metrics)


def combine(sim: SimScore, llm: MetricScores, weights: EvaluatorWeights) -> MetricScores:
    """Per-metric combination of the scaled similarity score and LLM score."""
    scaled = 4.0 * sim.value
    combined = {}
    for name in METRIC_NAMES:
        llm_value = getattr(llm, name)
        if weights.equation == "even":
            combined[name] = 0.5 * scaled + 0.5 * llm_value
        else:
            w = weights.weights_for(name)
            denom = w.sim_coeff + w.llm_coeff
            combined[name] = (
                scaled * (w.sim_coeff / denom) + llm_value * (w.llm_coeff / denom)
            )
    return MetricScores(**combined)


def optimization_score(scores: MetricScores) -> float:
    """Scalar objective: the sum of the four metric scores, in [0, 16]."""
    return sum(scores.as_dict().values())


# ----------------------------------------------------------------------
# Pearson correlation with two-tailed p-value
# ----------------------------------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    max_iterations = 300
    eps = 3e-16
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iterations + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def _betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def pearson(xs: list[float], ys: list[float]) -> tuple[float, float]:
    """Pearson r and the two-tailed p-value from the Student-t statistic
    t = r * sqrt((n-2) / (1-r^2)) with n-2 degrees of freedom."""
    n = len(xs)
    if n != len(ys):
        raise ValueError("series lengths differ")
    if n < 3:
        raise ValueError("need at least 3 points")
    mean_x = math.fsum(xs) / n
    mean_y = math.fsum(ys) / n
    sxx = math.fsum((x - mean_x) ** 2 for x in xs)
    syy = math.fsum((y - mean_y) ** 2 for y in ys)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInput("constant series has no defined correlation")
    sxy = math.fsum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    r = sxy / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if 1.0 - r * r <= 0.0:
        return r, 0.0
    df = n - 2
    t_squared = r * r * df / (1.0 - r * r)
    p = _betainc_reg(df / 2.0, 0.5, df / (df + t_squared))
    return r, max(0.0, min(1.0, p))


# ----------------------------------------------------------------------
# evaluator
# ----------------------------------------------------------------------


def _hash_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class Evaluator:
    """Composed objective function with memoization on (diff, message).

    LLM scoring runs at temperature 0 and is treated as deterministic under
    a fixed model id; the caches are lock-guarded so candidate evaluations
    may run concurrently.
    """

    def __init__(
        self,
        gateway: ChatGateway,
        weights: EvaluatorWeights,
        embed_client: EmbedClient | None = None,
        index: CorpusIndex | None = None,
        k: int = DEFAULT_RETRIEVAL_K,
        model: str = "default",
    ):
        if weights.needs_sim() and (embed_client is None or index is None):
            raise ConfigError(
                "similarity scoring is enabled but no corpus index/embedder is configured"
            )
        self.gateway = gateway
        self.weights = weights
        self.embed_client = embed_client
        self.index = index
        self.k = k
        self.model = model
        self._lock = threading.Lock()
        self._llm_cache: dict[tuple[str, str], MetricScores] = {}
        self._sim_cache: dict[tuple[str, str], SimScore] = {}
        self._retrieval_cache: dict[str, list[CorpusEntry]] = {}
        self._embed_cache: dict[tuple[str, str], np.ndarray] = {}

    # -- components ----------------------------------------------------

    def llm_metric_scores(self, diff: CodeDiff, message: str) -> MetricScores:
        key = (_hash_text(diff.raw_text), _hash_text(message))
        with self._lock:
            cached = self._llm_cache.get(key)
        if cached is not None:
            return cached
        values = {
            name: float(
                request_score(
                    self.gateway,
                    build_score_prompt(diff.raw_text, message, name, model=self.model),
                )
            )
            for name in METRIC_NAMES
        }
        scores = MetricScores(**values)
        with self._lock:
            self._llm_cache[key] = scores
        return scores

    def _embed(self, kind: str, body: str) -> np.ndarray:
        assert self.embed_client is not None
        key = (kind, _hash_text(body))
        with self._lock:
            cached = self._embed_cache.get(key)
        if cached is not None:
            return cached
        vector = self.embed_client.embed(kind, body)
        with self._lock:
            self._embed_cache[key] = vector
        return vector

    def retrieved_for(self, diff: CodeDiff) -> list[CorpusEntry]:
        assert self.index is not None
        key = _hash_text(diff.raw_text)
        with self._lock:
            cached = self._retrieval_cache.get(key)
        if cached is not None:
            return cached
        entries = retrieve_similar(
            self.index, self._embed(KIND_CODE_DIFF, diff.raw_text), self.k
        )
        with self._lock:
            self._retrieval_cache[key] = entries
        return entries

    def similar_examples(self, diff: CodeDiff) -> list[tuple[str, str]]:
        """(diff_text, message) exemplars for the update prompt."""
        if self.index is None or self.embed_client is None:
            return []
        return [(e.diff_text, e.message_text) for e in self.retrieved_for(diff)]

    def sim_score(self, diff: CodeDiff, message: str) -> SimScore:
        """Mean cosine between the candidate message embedding and the
        messages of the top-k diff-similar entries; negatives clamp to 0."""
        key = (_hash_text(diff.raw_text), _hash_text(message))
        with self._lock:
            cached = self._sim_cache.get(key)
        if cached is not None:
            return cached
        entries = self.retrieved_for(diff)
        msg_vec = self._embed(KIND_TEXT, message)
        sims = [
            min(1.0, max(0.0, float(msg_vec @ e.message_embedding))) for e in entries
        ]
        score = SimScore(math.fsum(sims) / len(sims))
        with self._lock:
            self._sim_cache[key] = score
        return score

    # -- composition -----------------------------------------------------

    def evaluate(self, diff: CodeDiff, message: str) -> tuple[MetricScores, float]:
        llm = self.llm_metric_scores(diff, message)
        if self.weights.needs_sim():
            sim = self.sim_score(diff, message)
        else:
            sim = SimScore(0.0)
        combined = combine(sim, llm, self.weights)
        return combined, optimization_score(combined)


# ----------------------------------------------------------------------
# calibration
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationItem:
    diff: CodeDiff
    message: str
    human: MetricScores


def calibrate_weights(
    items: list[CalibrationItem],
    evaluator: Evaluator,
    significance: float = 0.05,
) -> EvaluatorWeights:
    """Per-metric correlation coefficients of sim/LLM scores against human
    labels. Insignificant (p > 0.05), non-positive, or degenerate
    coefficients are zeroed; a metric where both zero out falls back to
    even weighting (equal coefficients)."""
    if len(items) < 10:
        raise ValueError("calibration needs at least 10 labeled items")
    sims = [evaluator.sim_score(item.diff, item.message).value for item in items]
    llms = [evaluator.llm_metric_scores(item.diff, item.message) for item in items]

    coeffs: dict[str, tuple[float, float]] = {}
    for name in METRIC_NAMES:
        humans = [getattr(item.human, name) for item in items]
        sim_coeff = _significant_positive(sims, humans, significance)
        llm_series = [getattr(scores, name) for scores in llms]
        llm_coeff = _significant_positive(llm_series, humans, significance)
        if sim_coeff == 0.0 and llm_coeff == 0.0:
            sim_coeff = llm_coeff = 1.0
        coeffs[name] = (sim_coeff, llm_coeff)
    return EvaluatorWeights.correlation(coeffs)


def _significant_positive(xs: list[float], ys: list[float], significance: float) -> float:
    try:
        r, p = pearson(xs, ys)
    except DegenerateInput:
        return 0.0
    if p > significance or r <= 0.0:
        return 0.0
    return r


def load_calibration_file(path: str | Path) -> list[CalibrationItem]:
    """JSON-lines loader: {"diff": ..., "message": ..., "human_scores": {...}}."""
    from .diffs import parse_unified_diff

    items = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        items.append(
            CalibrationItem(
                diff=parse_unified_diff(doc["diff"]),
                message=doc["message"],
                human=MetricScores.from_dict(doc["human_scores"]),
            )
        )
    return items

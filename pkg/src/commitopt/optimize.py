"""Best-first search over message candidates.

The search starts from the human-written message, expands the best-scoring
candidate with every not-yet-considered context (one context per child),
and stops on (a) the step limit, (b) the decaying improvement threshold:
when the gap between the newest best score and the best score from two
updates earlier falls below the threshold — with a one-time grace in which
the sampling temperature is escalated and the run continues; a second trip
halts — or (c) queue exhaustion. With deterministic gateway/evaluator
mocks the whole run is deterministic and the emitted trace replayable.
"""

from __future__ import annotations

import heapq
import itertools
import json
import logging
from dataclasses import dataclass, field

from .contexts import CommitType, ContextItem, ContextKind
from .diffs import CodeDiff
from .errors import GatewayError, NoContexts
from .evaluate import Evaluator, MetricScores
from .gateway import ChatGateway
from .prompts import build_update_all_prompt, build_update_prompt

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MessageCandidate:
    id: int
    text: str
    considered: frozenset[ContextKind]
    scores: MetricScores
    opt_score: float
    parent_id: int | None
    created_at_step: int
    temperature_used: float


@dataclass
class OptimizerConfig:
    step_limit: int = 50
    p: float = 5.0  # percentage of the initial score
    base_temperature: float = 0.0
    escalated_temperature: float = 1.0
    k: int = 10
    equation: str = "correlation"
    model: str = "default"
    max_output_tokens: int = 512

    def __post_init__(self):
        if self.step_limit < 1:
            raise ValueError("step_limit must be positive")
        if not 0 < self.p <= 100:
            raise ValueError("p must be a percentage in (0, 100]")
        if self.escalated_temperature <= self.base_temperature:
            raise ValueError("escalated_temperature must exceed base_temperature")


@dataclass
class OptimizationTrace:
    steps: list[dict] = field(default_factory=list)
    result: dict = field(default_factory=dict)

    def to_jsonl(self) -> str:
        lines = [json.dumps(s, sort_keys=True) for s in self.steps]
        lines.append(json.dumps(self.result, sort_keys=True))
        return "\n".join(lines) + "\n"


@dataclass
class OptimizationResult:
    message: str
    scores: MetricScores
    opt_score: float
    stop_reason: str  # step_limit | threshold | exhausted | no_search
    steps_used: int
    trace: OptimizationTrace

    def to_json(self) -> str:
        return json.dumps(
            {
                "message": self.message,
                "metric_scores": self.scores.as_dict(),
                "opt_score": self.opt_score,
                "stop_reason": self.stop_reason,
                "steps_used": self.steps_used,
            },
            sort_keys=True,
            indent=2,
        )


def initial_threshold(initial_score: float, config: OptimizerConfig) -> tuple[float, float]:
    """(threshold0, min_threshold): p percent of the initial score, floored
    at threshold0 / step_limit."""
    threshold0 = initial_score * config.p / 100.0
    return threshold0, threshold0 / config.step_limit


def threshold_schedule(
    t_prev: float, step: int, step_limit: int, min_threshold: float
) -> float:
    """Decay for one step: max(t_prev * (1 - step/step_limit), min_threshold)."""
    if step < 1:
        raise ValueError("step must be >= 1")
    return max(t_prev - (t_prev * step) / step_limit, min_threshold)


@dataclass
class OptimizationShared:
    """Inputs shared by every UPDATE call in one run."""

    diff: CodeDiff
    evaluator: Evaluator
    gateway: ChatGateway
    commit_type: CommitType
    similar_examples: list[tuple[str, str]]
    config: OptimizerConfig
    _ids: itertools.count = field(default_factory=lambda: itertools.count(1))

    def allocate_id(self) -> int:
        return next(self._ids)


def update_candidate(
    cur: MessageCandidate,
    context: ContextItem,
    shared: OptimizationShared,
    temperature: float,
    step: int,
) -> MessageCandidate:
    """Generate and score one child candidate from one new context."""
    if context.kind in cur.considered:
        raise ValueError(f"context {context.kind.value} already considered")
    request = build_update_prompt(
        diff_text=shared.diff.raw_text,
        prev_message=cur.text,
        new_context_kind=context.kind.value,
        new_context_payload=context.payload,
        considered=[k.value for k in _kind_order(cur.considered)],
        scores=cur.scores.as_dict(),
        commit_type=shared.commit_type.label,
        similar_examples=shared.similar_examples,
        temperature=temperature,
        model=shared.config.model,
        max_output_tokens=shared.config.max_output_tokens,
    )
    text = shared.gateway.chat(request).strip()
    scores, opt = shared.evaluator.evaluate(shared.diff, text)
    return MessageCandidate(
        id=shared.allocate_id(),
        text=text,
        considered=cur.considered | {context.kind},
        scores=scores,
        opt_score=opt,
        parent_id=cur.id,
        created_at_step=step,
        temperature_used=temperature,
    )


def _kind_order(kinds: frozenset[ContextKind] | set[ContextKind]) -> list[ContextKind]:
    return [k for k in ContextKind if k in kinds]


class _PriorityQueue:
    """Max-queue on opt_score; ties prefer fewer considered contexts, then
    insertion order."""

    def __init__(self):
        self._heap: list[tuple[float, int, int, MessageCandidate]] = []
        self._counter = itertools.count()

    def push(self, candidate: MessageCandidate) -> None:
        heapq.heappush(
            self._heap,
            (-candidate.opt_score, len(candidate.considered), next(self._counter), candidate),
        )

    def pop(self) -> MessageCandidate:
        return heapq.heappop(self._heap)[3]

    def peek(self) -> MessageCandidate:
        return self._heap[0][3]

    def __len__(self) -> int:
        return len(self._heap)


def optimize(
    diff: CodeDiff,
    human_msg: str,
    contexts: list[ContextItem],
    config: OptimizerConfig,
    evaluator: Evaluator,
    gateway: ChatGateway,
    commit_type: CommitType,
) -> OptimizationResult:
    """Run the full search; returns the best message seen plus the trace."""
    if not contexts:
        raise NoContexts("no software contexts available")
    by_kind = {c.kind: c for c in contexts}

    shared = OptimizationShared(
        diff=diff,
        evaluator=evaluator,
        gateway=gateway,
        commit_type=commit_type,
        similar_examples=evaluator.similar_examples(diff),
        config=config,
    )

    scores0, opt0 = evaluator.evaluate(diff, human_msg)
    root = MessageCandidate(
        id=0,
        text=human_msg,
        considered=frozenset(),
        scores=scores0,
        opt_score=opt0,
        parent_id=None,
        created_at_step=0,
        temperature_used=config.base_temperature,
    )
    threshold, min_threshold = initial_threshold(opt0, config)

    queue = _PriorityQueue()
    queue.push(root)
    highest = opt0
    best = root
    history = [opt0]  # every value highest has taken, initialization included
    escalated = False
    stop_reason: str | None = None
    trace = OptimizationTrace()

    step = 0
    while step < config.step_limit:
        if len(queue) == 0:
            stop_reason = "exhausted"
            break
        step += 1
        threshold = threshold_schedule(threshold, step, config.step_limit, min_threshold)
        cur = queue.pop()

        temperature = (
            config.escalated_temperature if escalated else config.base_temperature
        )
        children: list[dict] = []
        failed: list[dict] = []
        for kind in _kind_order(set(by_kind) - cur.considered):
            try:
                child = update_candidate(cur, by_kind[kind], shared, temperature, step)
            except GatewayError as exc:
                log.warning("update with %s failed: %s", kind.value, exc)
                failed.append({"kind": kind.value, "error": str(exc)})
                continue
            queue.push(child)
            children.append(
                {
                    "id": child.id,
                    "kind": kind.value,
                    "opt_score": child.opt_score,
                    "temperature": child.temperature_used,
                }
            )

        improved = False
        if len(queue) > 0:
            head = queue.peek()
            if head.opt_score > highest:
                improved = True
                highest = head.opt_score
                best = head
                history.append(highest)
                if len(history) >= 3 and history[-1] - history[-3] < threshold:
                    if not escalated:
                        escalated = True
                    else:
                        stop_reason = "threshold"

        trace.steps.append(
            {
                "event": "step",
                "step": step,
                "threshold": threshold,
                "dequeued": {"id": cur.id, "opt_score": cur.opt_score},
                "children": children,
                "failed": failed,
                "improved": improved,
                "highest": highest,
                "best_id": best.id,
                "escalated": escalated,
            }
        )
        if stop_reason is not None:
            break

    if stop_reason is None:
        stop_reason = "step_limit"

    result = OptimizationResult(
        message=best.text,
        scores=best.scores,
        opt_score=highest,
        stop_reason=stop_reason,
        steps_used=step,
        trace=trace,
    )
    trace.result = {
        "event": "result",
        "message": best.text,
        "metric_scores": best.scores.as_dict(),
        "opt_score": highest,
        "stop_reason": stop_reason,
        "steps_used": step,
    }
    return result


def optimize_no_search(
    diff: CodeDiff,
    human_msg: str,
    contexts: list[ContextItem],
    config: OptimizerConfig,
    evaluator: Evaluator,
    gateway: ChatGateway,
    commit_type: CommitType,
) -> OptimizationResult:
    """Ablation mode: every context in a single prompt, one UPDATE call,
    one evaluation, no search."""
    if not contexts:
        raise NoContexts("no software contexts available")
    ordered = sorted(contexts, key=lambda c: list(ContextKind).index(c.kind))
    request = build_update_all_prompt(
        diff_text=diff.raw_text,
        prev_message=human_msg,
        contexts=[(c.kind.value, c.payload) for c in ordered],
        commit_type=commit_type.label,
        similar_examples=evaluator.similar_examples(diff),
        temperature=config.base_temperature,
        model=config.model,
        max_output_tokens=config.max_output_tokens,
    )
    text = gateway.chat(request).strip()
    scores, opt = evaluator.evaluate(diff, text)
    trace = OptimizationTrace(
        steps=[
            {
                "event": "step",
                "step": 1,
                "mode": "no_search",
                "contexts": [c.kind.value for c in ordered],
                "opt_score": opt,
            }
        ],
        result={
            "event": "result",
            "message": text,
            "metric_scores": scores.as_dict(),
            "opt_score": opt,
            "stop_reason": "no_search",
            "steps_used": 1,
        },
    )
    return OptimizationResult(
        message=text,
        scores=scores,
        opt_score=opt,
        stop_reason="no_search",
        steps_used=1,
        trace=trace,
    )

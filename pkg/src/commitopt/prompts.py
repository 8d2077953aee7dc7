"""Prompt templates for message updating, scoring, classification, summaries.

Each template renders to a (system, user) pair; rendering with an unfilled
slot raises :class:`SlotMissing`. The update prompt keeps its sections in a
fixed order so rendered prompts are stable enough for golden-file tests.
"""

from __future__ import annotations

from collections.abc import Mapping
from string import Template

from .errors import SlotMissing
from .gateway import ChatRequest

# Rubrics shared by the scorer and the update prompt. Scale: 0 poor,
# 1 marginal, 2 acceptable, 3 good, 4 excellent.
METRIC_RUBRICS: dict[str, str] = {
    "rationality": (
        "Rationality: does the message give a logical reason for the code "
        "changes (the 'Why' information) and state the commit type? "
        "0 = no rationale, 4 = clear and correct rationale plus commit type."
    ),
    "comprehensiveness": (
        "Comprehensiveness: does the message summarize what was changed "
        "(the 'What' information) and cover all changed files? "
        "0 = no summary, 4 = complete coverage of the change."
    ),
    "conciseness": (
        "Conciseness: does the message convey the information succinctly, "
        "staying readable and quick to comprehend? "
        "0 = rambling or noisy, 4 = succinct and readable."
    ),
    "expressiveness": (
        "Expressiveness: is the message grammatically correct and fluent? "
        "0 = broken language, 4 = fluent and well formed."
    ),
}

METRIC_NAMES = tuple(METRIC_RUBRICS)

DIFF_DEFINITION = (
    "A git diff describes code changes between two versions of a project. "
    "It is organized per file; each file section contains hunks introduced "
    "by '@@ -<old_start>,<old_len> +<new_start>,<new_len> @@' headers. "
    "Inside a hunk, lines starting with '+' were added, lines starting with "
    "'-' were removed, and lines starting with a space are unchanged context."
)

MESSAGE_FORMAT = (
    "A commit message starts with a short summary line naming the commit "
    "type and the change, optionally followed by a body that explains what "
    "was changed and why."
)


class PromptTemplate:
    """Named template with ``${slot}`` placeholders in system/user parts."""

    def __init__(self, template_id: str, system: str, user: str):
        self.template_id = template_id
        self._system = Template(system)
        self._user = Template(user)

    def render(self, **slots: str) -> tuple[str, str]:
        try:
            return self._system.substitute(slots), self._user.substitute(slots)
        except KeyError as exc:
            raise SlotMissing(
                f"template {self.template_id!r}: slot {exc.args[0]!r} unfilled"
            ) from exc


def _rubric_block() -> str:
    return "\n".join(METRIC_RUBRICS[name] for name in METRIC_NAMES)


SCORE_TEMPLATE = PromptTemplate(
    "score",
    system=(
        "You grade commit messages against a single quality metric. "
        "Respond with one integer from 0 to 4 and nothing else."
    ),
    user=(
        "Metric: ${metric_name}\n"
        "Scoring rubric (0 poor, 1 marginal, 2 acceptable, 3 good, 4 excellent):\n"
        "${rubric}\n"
        "\n"
        "Git diff:\n"
        "${diff}\n"
        "\n"
        "Commit message:\n"
        "${message}\n"
        "\n"
        "Score (single integer 0-4):"
    ),
)

UPDATE_TEMPLATE = PromptTemplate(
    "update",
    system=(
        "You improve commit messages for code changes. You are given the "
        "change, quality criteria, examples from similar changes, and one "
        "new piece of software context to take into account."
    ),
    user=(
        "GIT DIFF DEFINITION\n"
        "${diff_definition}\n"
        "\n"
        "TARGET GIT DIFF\n"
        "${diff}\n"
        "\n"
        "EXPECTED MESSAGE FORMAT\n"
        "${message_format}\n"
        "Commit type of this change: ${commit_type}\n"
        "\n"
        "QUALITY METRICS AND SCORING CRITERIA\n"
        "${metric_definitions}\n"
        "\n"
        "MESSAGES FROM SIMILAR CHANGES\n"
        "${similar_examples}\n"
        "\n"
        "CURRENT CANDIDATE MESSAGE\n"
        "${previous_candidate}\n"
        "\n"
        "CONTEXTS ALREADY CONSIDERED\n"
        "${considered_contexts}\n"
        "\n"
        "CURRENT EVALUATION SCORES\n"
        "${current_scores}\n"
        "\n"
        "NEW SOFTWARE CONTEXT (${new_context_kind})\n"
        "${new_context_payload}\n"
        "\n"
        "INSTRUCTIONS\n"
        "Taking the new software context into account, improve the existing "
        "candidate message so it scores higher on the metrics above. Do not "
        "write an entirely new message: keep the existing message's content "
        "and intent, and refine it. Reply with the improved commit message "
        "only."
    ),
)

UPDATE_ALL_TEMPLATE = PromptTemplate(
    "update_all",
    system=(
        "You improve commit messages for code changes. You are given the "
        "change, quality criteria, examples from similar changes, and all "
        "available software contexts at once."
    ),
    user=(
        "GIT DIFF DEFINITION\n"
        "${diff_definition}\n"
        "\n"
        "TARGET GIT DIFF\n"
        "${diff}\n"
        "\n"
        "EXPECTED MESSAGE FORMAT\n"
        "${message_format}\n"
        "Commit type of this change: ${commit_type}\n"
        "\n"
        "QUALITY METRICS AND SCORING CRITERIA\n"
        "${metric_definitions}\n"
        "\n"
        "MESSAGES FROM SIMILAR CHANGES\n"
        "${similar_examples}\n"
        "\n"
        "CURRENT CANDIDATE MESSAGE\n"
        "${previous_candidate}\n"
        "\n"
        "AVAILABLE SOFTWARE CONTEXTS\n"
        "${all_contexts}\n"
        "\n"
        "INSTRUCTIONS\n"
        "Taking every software context above into account, improve the "
        "existing candidate message so it scores higher on the metrics "
        "above. Do not write an entirely new message: keep the existing "
        "message's content and intent, and refine it. Reply with the "
        "improved commit message only."
    ),
)

CLASSIFY_TEMPLATE = PromptTemplate(
    "classify",
    system=(
        "You classify code changes into commit types. Respond with exactly "
        "one label from the allowed set and nothing else."
    ),
    user=(
        "Allowed commit types: ${taxonomy}\n"
        "\n"
        "Git diff:\n"
        "${diff}\n"
        "\n"
        "Commit message written by the developer:\n"
        "${message}\n"
        "\n"
        "Commit type:"
    ),
)

SUMMARIZE_TEMPLATE = PromptTemplate(
    "summarize",
    system="You write one-paragraph natural-language summaries of source code.",
    user=(
        "Summarize the following ${unit} in one paragraph of at most "
        "${budget} tokens. Describe what it does, not how it is formatted.\n"
        "\n"
        "${body}"
    ),
)

GOOD_MESSAGE_TEMPLATE = PromptTemplate(
    "good_filter",
    system=(
        "You judge whether a commit message contains both a summary of what "
        "was changed and the reason why. Respond with 'yes' or 'no' only."
    ),
    user=(
        "Commit message:\n"
        "${message}\n"
        "\n"
        "Does this message state both what was changed and why? (yes/no):"
    ),
)


def metric_definitions_block() -> str:
    return _rubric_block()


def format_similar_examples(examples: list[tuple[str, str]]) -> str:
    """Serialize (diff_text, message) exemplar pairs for the update prompt."""
    if not examples:
        return "(none available)"
    parts = []
    for i, (diff_text, message) in enumerate(examples, start=1):
        parts.append(
            f"--- similar change {i} ---\n{diff_text.rstrip()}\n"
            f"--- its commit message ---\n{message.strip()}"
        )
    return "\n".join(parts)


def build_score_prompt(
    diff_text: str,
    message: str,
    metric: str,
    model: str = "default",
    max_output_tokens: int = 8,
) -> ChatRequest:
    """Scoring request for one metric: asks for a single integer 0-4."""
    if not message.strip():
        raise ValueError("message must be non-empty")
    if metric not in METRIC_RUBRICS:
        raise KeyError(f"unknown metric {metric!r}")
    system, user = SCORE_TEMPLATE.render(
        metric_name=metric,
        rubric=METRIC_RUBRICS[metric],
        diff=diff_text,
        message=message,
    )
    return ChatRequest(
        system=system,
        user=user,
        temperature=0.0,
        max_output_tokens=max_output_tokens,
        model=model,
        purpose=f"score.{metric}",
    )


def build_update_prompt(
    diff_text: str,
    prev_message: str,
    new_context_kind: str,
    new_context_payload: str,
    considered: list[str],
    scores: Mapping[str, float],
    commit_type: str,
    similar_examples: list[tuple[str, str]],
    temperature: float = 0.0,
    model: str = "default",
    max_output_tokens: int = 512,
) -> ChatRequest:
    """One-context update request. ``considered`` lists the kinds already
    folded into ``prev_message``; the new kind must not be among them."""
    if new_context_kind in considered:
        raise ValueError(f"context {new_context_kind} already considered")
    score_line = ", ".join(f"{name}={scores[name]:g}" for name in METRIC_NAMES)
    system, user = UPDATE_TEMPLATE.render(
        diff_definition=DIFF_DEFINITION,
        diff=diff_text,
        message_format=MESSAGE_FORMAT,
        commit_type=commit_type,
        metric_definitions=metric_definitions_block(),
        similar_examples=format_similar_examples(similar_examples),
        previous_candidate=prev_message,
        considered_contexts=", ".join(considered) if considered else "(none yet)",
        current_scores=score_line,
        new_context_kind=new_context_kind,
        new_context_payload=new_context_payload,
    )
    return ChatRequest(
        system=system,
        user=user,
        temperature=temperature,
        max_output_tokens=max_output_tokens,
        model=model,
        purpose="update",
        meta={"prev_message": prev_message, "context_kind": new_context_kind},
    )


def build_update_all_prompt(
    diff_text: str,
    prev_message: str,
    contexts: list[tuple[str, str]],
    commit_type: str,
    similar_examples: list[tuple[str, str]],
    temperature: float = 0.0,
    model: str = "default",
    max_output_tokens: int = 512,
) -> ChatRequest:
    """Single-shot update request carrying every context at once."""
    blocks = [f"[{kind}]\n{payload}" for kind, payload in contexts]
    system, user = UPDATE_ALL_TEMPLATE.render(
        diff_definition=DIFF_DEFINITION,
        diff=diff_text,
        message_format=MESSAGE_FORMAT,
        commit_type=commit_type,
        metric_definitions=metric_definitions_block(),
        similar_examples=format_similar_examples(similar_examples),
        previous_candidate=prev_message,
        all_contexts="\n\n".join(blocks),
    )
    return ChatRequest(
        system=system,
        user=user,
        temperature=temperature,
        max_output_tokens=max_output_tokens,
        model=model,
        purpose="update.all",
        meta={
            "prev_message": prev_message,
            "context_kind": "+".join(kind for kind, _ in contexts),
        },
    )

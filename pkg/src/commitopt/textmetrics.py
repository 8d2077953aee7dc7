"""Reference-based text metrics for baseline comparison: BLEU, ROUGE-L, METEOR.

Single-reference, sentence-level variants. BLEU is BLEU-4 with add-one
smoothing on the higher-order n-gram precisions (Lin & Och style; unigram
precision stays raw so fully disjoint pairs score 0). METEOR uses exact and
stem matching only; the synonym stage needs a lexical database and is omitted.
All metrics are normalized to [0, 1].
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

from .errors import EmptyReference

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


@dataclass(frozen=True)
class MetricReport:
    bleu: float
    meteor: float
    rouge_l: float


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace and punctuation boundaries."""
    return _TOKEN_RE.findall(text.lower())


def _as_tokens(value: str | list[str]) -> list[str]:
    return tokenize(value) if isinstance(value, str) else list(value)


def _require_reference(reference: list[str]) -> None:
    if not reference:
        raise EmptyReference("reference tokenized to nothing")


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str | list[str], reference: str | list[str]) -> float:
    """Sentence-level BLEU-4 with brevity penalty.

    Clipped n-gram precisions for n = 1..4; add-one smoothing applied to
    n >= 2 (a zero unigram precision yields 0.0 outright).
    """
    cand = _as_tokens(candidate)
    ref = _as_tokens(reference)
    _require_reference(ref)
    if not cand:
        return 0.0

    log_sum = 0.0
    for n in range(1, 5):
        cand_ngrams = _ngrams(cand, n)
        ref_ngrams = _ngrams(ref, n)
        matches = sum(min(count, ref_ngrams[g]) for g, count in cand_ngrams.items())
        total = max(len(cand) - n + 1, 0)
        if n == 1:
            if matches == 0:
                return 0.0
            precision = matches / total
        else:
            precision = (matches + 1) / (total + 1)
        log_sum += 0.25 * math.log(precision)

    brevity = 1.0 if len(cand) >= len(ref) else math.exp(1 - len(ref) / len(cand))
    return brevity * math.exp(log_sum)


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[len(b)]


def rouge_l(candidate: str | list[str], reference: str | list[str]) -> float:
    """LCS-based F1: P = LCS/|candidate|, R = LCS/|reference|."""
    cand = _as_tokens(candidate)
    ref = _as_tokens(reference)
    _require_reference(ref)
    if not cand:
        return 0.0
    lcs = _lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 2 * precision * recall / (precision + recall)


_STEM_SUFFIXES = ("ingly", "edly", "ing", "ies", "ied", "ed", "es", "ly", "s")


def stem(token: str) -> str:
    """Light suffix stripper, enough for the exact+stem METEOR stage."""
    for suffix in _STEM_SUFFIXES:
        if token.endswith(suffix) and len(token) - len(suffix) >= 3:
            base = token[: -len(suffix)]
            if suffix in ("ies", "ied"):
                base += "y"
            return base
    return token


def _align(cand: list[str], ref: list[str]) -> list[tuple[int, int]]:
    """Greedy in-order alignment: exact matches first, then stem matches."""
    pairs: list[tuple[int, int]] = []
    used_ref: set[int] = set()
    matched_cand: set[int] = set()
    for stage_key in (lambda t: t, stem):
        ref_keys = [stage_key(t) for t in ref]
        for i, tok in enumerate(cand):
            if i in matched_cand:
                continue
            key = stage_key(tok)
            for j, ref_key in enumerate(ref_keys):
                if j not in used_ref and ref_key == key:
                    pairs.append((i, j))
                    used_ref.add(j)
                    matched_cand.add(i)
                    break
    return sorted(pairs)


def _chunks(pairs: list[tuple[int, int]]) -> int:
    count = 0
    prev: tuple[int, int] | None = None
    for i, j in pairs:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            count += 1
        prev = (i, j)
    return count


def meteor_basic(
    candidate: str | list[str],
    reference: str | list[str],
    alpha: float = 0.9,
    beta: float = 3.0,
    gamma: float = 0.5,
) -> float:
    """METEOR with exact + stem matching stages and the standard
    F-mean / fragmentation penalty (default parameters)."""
    cand = _as_tokens(candidate)
    ref = _as_tokens(reference)
    _require_reference(ref)
    if not cand:
        return 0.0

    pairs = _align(cand, ref)
    matches = len(pairs)
    if matches == 0:
        return 0.0
    precision = matches / len(cand)
    recall = matches / len(ref)
    fmean = precision * recall / (alpha * precision + (1 - alpha) * recall)
    penalty = gamma * (_chunks(pairs) / matches) ** beta
    return fmean * (1 - penalty)


def report(candidate: str, reference: str) -> MetricReport:
    return MetricReport(
        bleu=bleu(candidate, reference),
        meteor=meteor_basic(candidate, reference),
        rouge_l=rouge_l(candidate, reference),
    )

"""Software-context extraction: the seven injectable context kinds plus the
commit-type label delivered alongside them.

Static extractors (invoked methods, variable types, enclosing blocks) run on
the post-change source tree through the pluggable grammar; summaries and the
commit-type classifier go through the chat gateway at temperature 0; linked
issue/PR titles come from the forge client. Per-file parse failures are
reported and never abort the other extractors.
"""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import forge as forge_mod
from .diffs import ChangedRegion, CodeDiff, changed_regions, region_anchor_new_line
from .errors import CommitOptError, UnparseableFile, UnparseableResponse
from .forge import ForgeConfig
from .gateway import ChatGateway, ChatRequest
from .grammar import CurlyGrammar, Grammar, SourceFile
from .prompts import CLASSIFY_TEMPLATE, SUMMARIZE_TEMPLATE

log = logging.getLogger(__name__)


class ContextKind(enum.Enum):
    """The injectable context kinds, in injection order."""

    ImportantFileInfo = "ImportantFileInfo"
    PullRequestIssueTitle = "PullRequestIssueTitle"
    MethodBodySummary = "MethodBodySummary"
    ClassBodySummary = "ClassBodySummary"
    SyntacticBlock = "SyntacticBlock"
    InvokedMethods = "InvokedMethods"
    VariableDataTypes = "VariableDataTypes"


@dataclass(frozen=True)
class ContextItem:
    kind: ContextKind
    payload: str
    provenance: str

    def __post_init__(self):
        if not self.payload:
            raise ValueError("context payload must be non-empty")


DEFAULT_TAXONOMY = ("feat", "fix", "refactor", "docs", "test", "style", "build", "chore")


@dataclass(frozen=True)
class CommitType:
    label: str
    taxonomy: tuple[str, ...] = DEFAULT_TAXONOMY

    def __post_init__(self):
        if self.label not in self.taxonomy:
            raise ValueError(f"label {self.label!r} outside taxonomy {self.taxonomy}")


@dataclass
class SummaryConfig:
    max_input_tokens: int = 3000  # prompt body budget, ~4 chars/token
    max_summary_tokens: int = 120
    model: str = "default"


class SourceTree:
    """Post-change working tree; parses and caches source files lazily."""

    def __init__(self, root: str | Path, grammar: Grammar | None = None):
        self.root = Path(root)
        self.grammar = grammar or CurlyGrammar()
        self._cache: dict[str, SourceFile] = {}

    def has(self, relpath: str) -> bool:
        return (self.root / relpath).is_file()

    def parse(self, relpath: str) -> SourceFile:
        if relpath not in self._cache:
            text = (self.root / relpath).read_text(encoding="utf-8", errors="replace")
            self._cache[relpath] = self.grammar.parse(text, relpath)
        return self._cache[relpath]

    def source_paths(self) -> list[str]:
        paths = []
        for ext in self.grammar.extensions:
            paths.extend(
                str(p.relative_to(self.root)) for p in self.root.rglob(f"*{ext}")
            )
        return sorted(paths)

    def is_source(self, relpath: str) -> bool:
        return any(relpath.endswith(ext) for ext in self.grammar.extensions)


def _added_lines_by_file(diff: CodeDiff) -> dict[str, set[int]]:
    by_file: dict[str, set[int]] = {}
    for region in changed_regions(diff):
        if region.new_line_range is None:
            continue
        start, end = region.new_line_range
        by_file.setdefault(region.path, set()).update(range(start, end + 1))
    return by_file


def _note_failure(warnings: list[str] | None, tool: str, exc: Exception) -> None:
    message = f"{tool}: {exc}"
    log.warning("%s", message)
    if warnings is not None:
        warnings.append(message)


def extract_invoked_methods(
    diff: CodeDiff,
    tree: SourceTree,
    warnings: list[str] | None = None,
) -> list[tuple[str, str]]:
    """(signature, body text) of project-defined methods invoked on changed
    lines. Methods resolved outside the project tree are skipped."""
    index: dict[str, list[tuple[str, object]]] = {}
    for path in tree.source_paths():
        try:
            src = tree.parse(path)
        except UnparseableFile as exc:
            _note_failure(warnings, "invoked-methods", exc)
            continue
        for m in src.methods():
            index.setdefault(m.name, []).append((path, m))

    results: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    for path, lines in _added_lines_by_file(diff).items():
        if not tree.is_source(path) or not tree.has(path):
            continue
        try:
            src = tree.parse(path)
        except UnparseableFile as exc:
            _note_failure(warnings, "invoked-methods", exc)
            continue
        for call in src.calls_on_lines(lines):
            candidates = index.get(call.name, [])
            if not candidates:
                continue  # third-party or language-level, skipped
            same_arity = [c for c in candidates if len(c[1].params) == call.arg_count]
            pick_from = same_arity or candidates
            local = [c for c in pick_from if c[0] == path]
            decl_path, decl = (local or pick_from)[0]
            key = (decl_path, decl.signature)
            if key in seen:
                continue
            seen.add(key)
            results.append((decl.signature, decl.text))
    return results


def extract_variable_types(
    diff: CodeDiff,
    tree: SourceTree,
    warnings: list[str] | None = None,
) -> list[tuple[str, str, str]]:
    """(name, declared type, modifiers) for variables referenced on changed
    lines; unresolved names are omitted, innermost declaration wins."""
    results: list[tuple[str, str, str]] = []
    seen: set[tuple[str, str]] = set()
    for path, lines in _added_lines_by_file(diff).items():
        if not tree.is_source(path) or not tree.has(path):
            continue
        try:
            src = tree.parse(path)
        except UnparseableFile as exc:
            _note_failure(warnings, "variable-types", exc)
            continue
        for name, line in src.identifiers_on_lines(lines):
            decl = src.resolve_variable(name, line)
            if decl is None:
                continue
            key = (name, decl.type)
            if key in seen:
                continue
            seen.add(key)
            results.append((name, decl.type, " ".join(decl.modifiers)))
    return results


def extract_enclosing_block(
    diff: CodeDiff,
    tree: SourceTree,
    warnings: list[str] | None = None,
) -> list[tuple[ChangedRegion, str]]:
    """Smallest statement block (or enclosing declaration) containing each
    changed region, on the post-change side. Pure file additions have no
    surrounding block and are skipped."""
    added_files = {f.path for f in diff.files if f.change_kind == "added"}
    results: list[tuple[ChangedRegion, str]] = []
    for region in changed_regions(diff):
        if region.path in added_files:
            continue
        if not tree.is_source(region.path) or not tree.has(region.path):
            continue
        try:
            src = tree.parse(region.path)
        except UnparseableFile as exc:
            _note_failure(warnings, "syntactic-block", exc)
            continue
        if region.new_line_range is not None:
            first, last = region.new_line_range
        else:
            anchor = region_anchor_new_line(diff, region)
            first = last = anchor
        block = src.enclosing_block(first, last)
        results.append((region, block.text))
    return results


def _fit_budget(body: str, max_input_tokens: int) -> str:
    cap = max_input_tokens * 4
    if len(body) <= cap:
        return body
    return body[:cap] + "\n... (truncated to fit the summarization budget)"


def _summarize(
    body: str, unit: str, gateway: ChatGateway, config: SummaryConfig
) -> str:
    if not body.strip():
        raise ValueError(f"empty {unit} body")
    system, user = SUMMARIZE_TEMPLATE.render(
        unit=unit,
        budget=str(config.max_summary_tokens),
        body=_fit_budget(body, config.max_input_tokens),
    )
    request = ChatRequest(
        system=system,
        user=user,
        temperature=0.0,
        max_output_tokens=config.max_summary_tokens * 4,
        model=config.model,
        purpose=f"summarize.{unit}",
    )
    return gateway.chat(request).strip()


def summarize_method_body(body: str, gateway: ChatGateway, config: SummaryConfig | None = None) -> str:
    return _summarize(body, "method", gateway, config or SummaryConfig())


def summarize_class_body(body: str, gateway: ChatGateway, config: SummaryConfig | None = None) -> str:
    return _summarize(body, "class", gateway, config or SummaryConfig())


def classify_commit_type(
    diff: CodeDiff,
    human_msg: str,
    gateway: ChatGateway,
    taxonomy: tuple[str, ...] = DEFAULT_TAXONOMY,
    model: str = "default",
) -> CommitType:
    """Classify the change into one taxonomy label. The prompt carries both
    the raw diff and the human-written message; temperature 0."""
    if not human_msg.strip():
        raise ValueError("human message must be non-empty")
    system, user = CLASSIFY_TEMPLATE.render(
        taxonomy=", ".join(taxonomy), diff=diff.raw_text, message=human_msg
    )
    request = ChatRequest(
        system=system,
        user=user,
        temperature=0.0,
        max_output_tokens=16,
        model=model,
        purpose="classify",
        meta={"taxonomy": ",".join(taxonomy)},
    )
    attempts = 3  # initial call plus two retries
    for _ in range(attempts):
        response = gateway.chat(request)
        label = _parse_label(response, taxonomy)
        if label is not None:
            return CommitType(label=label, taxonomy=taxonomy)
    raise UnparseableResponse(
        f"no taxonomy label in classifier response after {attempts} attempts"
    )


def _parse_label(response: str, taxonomy: tuple[str, ...]) -> str | None:
    lowered = response.lower()
    hits = []
    for label in taxonomy:
        m = re.search(rf"\b{re.escape(label.lower())}\b", lowered)
        if m:
            hits.append((m.start(), label))
    return min(hits)[1] if hits else None


def fetch_linked_artifact_titles(
    message: str, config: ForgeConfig | None
) -> ContextItem | None:
    """Titles of issues/PRs referenced by the message; None when the message
    carries no reference or nothing resolves."""
    if config is None:
        return None
    refs = forge_mod.extract_refs(message)
    if not refs:
        return None
    titles = forge_mod.fetch_titles(refs, config)
    if not titles:
        return None
    payload = "\n".join(f"{ref}: {title}" for ref, title, _ in titles)
    return ContextItem(
        kind=ContextKind.PullRequestIssueTitle,
        payload=payload,
        provenance=titles[0][2],
    )


def important_file_info(diff: CodeDiff) -> ContextItem:
    """Per-file churn counts with the maximal-churn file flagged; ties break
    by lexicographic path."""
    churn: dict[str, tuple[int, int]] = {}
    for f in diff.files:
        adds = dels = 0
        for hunk in f.hunks:
            for ln in hunk.lines:
                if ln.tag == "added":
                    adds += 1
                elif ln.tag == "removed":
                    dels += 1
        churn[f.path] = (adds, dels)
    ranked = sorted(churn.items(), key=lambda kv: (-(kv[1][0] + kv[1][1]), kv[0]))
    lines = []
    for i, (path, (adds, dels)) in enumerate(ranked):
        marker = "  <- most important file" if i == 0 else ""
        lines.append(f"{path}: {adds + dels} changed lines (+{adds}/-{dels}){marker}")
    return ContextItem(
        kind=ContextKind.ImportantFileInfo,
        payload="\n".join(lines),
        provenance=ranked[0][0],
    )


@dataclass
class ContextCollector:
    """Runs every applicable context tool for a diff and merges the results
    in :class:`ContextKind` declaration order."""

    gateway: ChatGateway
    forge_config: ForgeConfig | None = None
    summary_config: SummaryConfig = field(default_factory=SummaryConfig)
    disabled: frozenset[ContextKind] = frozenset()

    def collect(
        self,
        diff: CodeDiff,
        tree: SourceTree,
        message: str,
        warnings: list[str] | None = None,
    ) -> list[ContextItem]:
        builders = {
            ContextKind.ImportantFileInfo: lambda: important_file_info(diff),
            ContextKind.PullRequestIssueTitle: lambda: fetch_linked_artifact_titles(
                message, self.forge_config
            ),
            ContextKind.MethodBodySummary: lambda: self._method_summaries(
                diff, tree, warnings
            ),
            ContextKind.ClassBodySummary: lambda: self._class_summaries(
                diff, tree, warnings
            ),
            ContextKind.SyntacticBlock: lambda: self._syntactic_blocks(
                diff, tree, warnings
            ),
            ContextKind.InvokedMethods: lambda: self._invoked_methods(
                diff, tree, warnings
            ),
            ContextKind.VariableDataTypes: lambda: self._variable_types(
                diff, tree, warnings
            ),
        }
        items: list[ContextItem] = []
        for kind in ContextKind:
            if kind in self.disabled:
                continue
            try:
                item = builders[kind]()
            except (CommitOptError, OSError) as exc:
                _note_failure(warnings, kind.value, exc)
                continue
            if item is not None:
                items.append(item)
        return items

    def _method_summaries(self, diff, tree, warnings) -> ContextItem | None:
        found: list[tuple[str, object]] = []
        seen: set[tuple[str, int]] = set()
        for path, lines in _added_lines_by_file(diff).items():
            if not tree.is_source(path) or not tree.has(path):
                continue
            try:
                src = tree.parse(path)
            except UnparseableFile as exc:
                _note_failure(warnings, "method-summary", exc)
                continue
            for line in sorted(lines):
                method = src.method_enclosing_line(line)
                if method is None or (path, method.decl_start) in seen:
                    continue
                seen.add((path, method.decl_start))
                found.append((path, method))
        if not found:
            return None
        parts = []
        for path, method in found:
            summary = summarize_method_body(method.text, self.gateway, self.summary_config)
            parts.append(f"{path} :: {method.signature}\n{summary}")
        first_path, first_method = found[0]
        return ContextItem(
            kind=ContextKind.MethodBodySummary,
            payload="\n\n".join(parts),
            provenance=f"{first_path}:{first_method.start_line}-{first_method.end_line}",
        )

    def _class_summaries(self, diff, tree, warnings) -> ContextItem | None:
        found: list[tuple[str, object]] = []
        seen: set[tuple[str, int]] = set()
        for path, lines in _added_lines_by_file(diff).items():
            if not tree.is_source(path) or not tree.has(path):
                continue
            try:
                src = tree.parse(path)
            except UnparseableFile as exc:
                _note_failure(warnings, "class-summary", exc)
                continue
            for line in sorted(lines):
                cls = src.class_enclosing_line(line)
                if cls is None or (path, cls.decl_start) in seen:
                    continue
                seen.add((path, cls.decl_start))
                found.append((path, cls))
        if not found:
            return None
        parts = []
        for path, cls in found:
            summary = summarize_class_body(cls.text, self.gateway, self.summary_config)
            parts.append(f"{path} :: {cls.kind} {cls.name}\n{summary}")
        first_path, first_cls = found[0]
        return ContextItem(
            kind=ContextKind.ClassBodySummary,
            payload="\n\n".join(parts),
            provenance=f"{first_path}:{first_cls.start_line}-{first_cls.end_line}",
        )

    def _syntactic_blocks(self, diff, tree, warnings) -> ContextItem | None:
        blocks = extract_enclosing_block(diff, tree, warnings)
        if not blocks:
            return None
        parts = []
        seen_texts: set[str] = set()
        for region, text in blocks:
            if text in seen_texts:
                continue
            seen_texts.add(text)
            where = (
                f"lines {region.new_line_range[0]}-{region.new_line_range[1]}"
                if region.new_line_range
                else f"around removed lines {region.old_line_range[0]}-{region.old_line_range[1]}"
            )
            parts.append(f"{region.path} ({where}):\n{text}")
        first = blocks[0][0]
        return ContextItem(
            kind=ContextKind.SyntacticBlock,
            payload="\n\n".join(parts),
            provenance=f"{first.path}",
        )

    def _invoked_methods(self, diff, tree, warnings) -> ContextItem | None:
        methods = extract_invoked_methods(diff, tree, warnings)
        if not methods:
            return None
        payload = "\n\n".join(f"{sig}\n{body}" for sig, body in methods)
        return ContextItem(
            kind=ContextKind.InvokedMethods,
            payload=payload,
            provenance=methods[0][0],
        )

    def _variable_types(self, diff, tree, warnings) -> ContextItem | None:
        variables = extract_variable_types(diff, tree, warnings)
        if not variables:
            return None
        lines = []
        for name, vtype, mods in variables:
            suffix = f" ({mods})" if mods else ""
            lines.append(f"{name}: {vtype}{suffix}")
        return ContextItem(
            kind=ContextKind.VariableDataTypes,
            payload="\n".join(lines),
            provenance="declarations in the post-change tree",
        )

"""Unified git-diff model: parsing, re-serialization, and changed regions.

Supports the standard unified-diff dialect emitted by ``git diff`` including
rename headers. Extended headers other than rename/new/deleted-file are kept
as opaque text so re-serialization stays byte-identical. CRLF input is
normalized to LF in the structured form; the verbatim bytes are retained in
``CodeDiff.raw_text``.
"""

from __future__ import annotations

import re
import subprocess
from dataclasses import dataclass

from .errors import MalformedDiff, RepoUnavailable

CONTEXT = "context"
ADDED = "added"
REMOVED = "removed"

_TAG_BY_PREFIX = {" ": CONTEXT, "+": ADDED, "-": REMOVED}
_PREFIX_BY_TAG = {v: k for k, v in _TAG_BY_PREFIX.items()}

_HUNK_RE = re.compile(
    r"^@@ -(?P<old_start>\d+)(?:,(?P<old_len>\d+))? "
    r"\+(?P<new_start>\d+)(?:,(?P<new_len>\d+))? @@"
)
_DIFF_GIT_RE = re.compile(r'^diff --git (?:"?a/(?P<a>.*?)"?) (?:"?b/(?P<b>.*?)"?)$')
_NO_NEWLINE = "\\ No newline at end of file"


@dataclass(frozen=True)
class HunkLine:
    tag: str  # context | added | removed
    text: str  # line content without the +/-/space prefix
    no_newline: bool = False  # followed by a "\ No newline..." marker


@dataclass(frozen=True)
class Hunk:
    old_start: int
    old_len: int
    new_start: int
    new_len: int
    lines: tuple[HunkLine, ...]
    header: str  # verbatim "@@ ... @@" line, including any section heading

    def to_lines(self) -> list[str]:
        out = [self.header]
        for ln in self.lines:
            out.append(_PREFIX_BY_TAG[ln.tag] + ln.text)
            if ln.no_newline:
                out.append(_NO_NEWLINE)
        return out


@dataclass(frozen=True)
class FileDiff:
    old_path: str
    new_path: str
    change_kind: str  # modified | added | deleted | renamed
    hunks: tuple[Hunk, ...]
    header_lines: tuple[str, ...]  # everything from "diff --git" through "+++", verbatim

    @property
    def path(self) -> str:
        """Path of the file on the side that exists after the change."""
        return self.old_path if self.change_kind == "deleted" else self.new_path

    def to_lines(self) -> list[str]:
        out = list(self.header_lines)
        for hunk in self.hunks:
            out.extend(hunk.to_lines())
        return out


@dataclass(frozen=True)
class CodeDiff:
    files: tuple[FileDiff, ...]
    raw_text: str  # verbatim input, used in prompts and embeddings

    def to_text(self) -> str:
        """Re-serialize the structured form (LF line endings)."""
        lines: list[str] = []
        for f in self.files:
            lines.extend(f.to_lines())
        text = "\n".join(lines)
        if lines:
            text += "\n"
        return text


@dataclass(frozen=True)
class ChangedRegion:
    """One maximal run of added/removed lines. Ranges are inclusive."""

    path: str
    new_line_range: tuple[int, int] | None = None
    old_line_range: tuple[int, int] | None = None

    def __post_init__(self):
        if self.new_line_range is None and self.old_line_range is None:
            raise ValueError("region must carry at least one line range")


def parse_unified_diff(text: str) -> CodeDiff:
    """Parse unified-diff text into a :class:`CodeDiff`.

    Raises :class:`MalformedDiff` (with the offending 1-based line number)
    on empty input, bad hunk headers, or hunk line-count mismatches.
    """
    if not text:
        raise MalformedDiff("empty diff text", 1)

    lines = text.replace("\r\n", "\n").split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    files: list[FileDiff] = []
    i = 0
    n = len(lines)

    # Tolerate preamble (e.g. commit headers from `git show`) before the
    # first file entry; it is kept only in raw_text.
    while i < n and not lines[i].startswith("diff --git "):
        i += 1
    if i == n:
        raise MalformedDiff("no 'diff --git' file entry found", 1)

    while i < n:
        i, file_diff = _parse_file(lines, i)
        files.append(file_diff)

    diff = CodeDiff(files=tuple(files), raw_text=text)
    for f in diff.files:
        if f.change_kind == "renamed" and f.old_path == f.new_path:
            raise MalformedDiff(f"rename with identical paths: {f.old_path}", 1)
    return diff


def _parse_file(lines: list[str], i: int) -> tuple[int, FileDiff]:
    n = len(lines)
    start = i
    m = _DIFF_GIT_RE.match(lines[i])
    if not m:
        raise MalformedDiff(f"expected 'diff --git' header, got {lines[i]!r}", i + 1)
    old_path, new_path = m.group("a"), m.group("b")
    change_kind = "modified"
    rename_from = rename_to = None
    i += 1

    while i < n and not lines[i].startswith(("@@", "diff --git ")):
        line = lines[i]
        if line.startswith("new file mode"):
            change_kind = "added"
        elif line.startswith("deleted file mode"):
            change_kind = "deleted"
        elif line.startswith(("rename from ", "copy from ")):
            rename_from = line.split(" from ", 1)[1]
        elif line.startswith(("rename to ", "copy to ")):
            rename_to = line.split(" to ", 1)[1]
        elif line.startswith("--- "):
            p = _strip_path(line[4:])
            if p is not None:
                old_path = p
        elif line.startswith("+++ "):
            p = _strip_path(line[4:])
            if p is not None:
                new_path = p
        i += 1

    if rename_from is not None and rename_to is not None:
        change_kind = "renamed"
        old_path, new_path = rename_from, rename_to
    elif change_kind == "added":
        old_path = new_path
    elif change_kind == "deleted":
        new_path = old_path

    header_lines = tuple(lines[start:i])
    hunks: list[Hunk] = []
    while i < n and lines[i].startswith("@@"):
        i, hunk = _parse_hunk(lines, i)
        hunks.append(hunk)

    return i, FileDiff(
        old_path=old_path,
        new_path=new_path,
        change_kind=change_kind,
        hunks=tuple(hunks),
        header_lines=header_lines,
    )


def _parse_hunk(lines: list[str], i: int) -> tuple[int, Hunk]:
    n = len(lines)
    header = lines[i]
    m = _HUNK_RE.match(header)
    if not m:
        raise MalformedDiff(f"bad hunk header {header!r}", i + 1)
    old_start = int(m.group("old_start"))
    old_len = int(m.group("old_len") or 1)
    new_start = int(m.group("new_start"))
    new_len = int(m.group("new_len") or 1)
    i += 1

    body: list[HunkLine] = []
    old_seen = new_seen = 0
    while i < n and (old_seen < old_len or new_seen < new_len):
        line = lines[i]
        if line == _NO_NEWLINE:
            if not body:
                raise MalformedDiff("no-newline marker before any hunk line", i + 1)
            body[-1] = HunkLine(body[-1].tag, body[-1].text, no_newline=True)
            i += 1
            continue
        prefix, text = (line[:1], line[1:]) if line else (" ", "")
        tag = _TAG_BY_PREFIX.get(prefix or " ")
        if tag is None:
            raise MalformedDiff(f"unexpected line in hunk body: {line!r}", i + 1)
        if tag in (CONTEXT, REMOVED):
            old_seen += 1
        if tag in (CONTEXT, ADDED):
            new_seen += 1
        body.append(HunkLine(tag, text))
        i += 1

    if old_seen != old_len or new_seen != new_len:
        raise MalformedDiff(
            f"hunk line-count mismatch: header says -{old_len}/+{new_len}, "
            f"body has -{old_seen}/+{new_seen}",
            i,
        )
    if i < n and lines[i] == _NO_NEWLINE:
        body[-1] = HunkLine(body[-1].tag, body[-1].text, no_newline=True)
        i += 1

    return i, Hunk(old_start, old_len, new_start, new_len, tuple(body), header)


def _strip_path(raw: str) -> str | None:
    """Strip the a/ or b/ prefix from a ---/+++ path; None for /dev/null."""
    raw = raw.split("\t")[0].strip().strip('"')
    if raw == "/dev/null":
        return None
    if raw[:2] in ("a/", "b/"):
        return raw[2:]
    return raw


def changed_regions(diff: CodeDiff) -> list[ChangedRegion]:
    """Maximal runs of added/removed lines, in file order then line order."""
    regions: list[ChangedRegion] = []
    for f in diff.files:
        for hunk in f.hunks:
            regions.extend(_hunk_regions(f.path, hunk))
    return regions


def _hunk_regions(path: str, hunk: Hunk) -> list[ChangedRegion]:
    regions: list[ChangedRegion] = []
    old_line = hunk.old_start
    new_line = hunk.new_start
    run_old: list[int] = []
    run_new: list[int] = []

    def flush():
        if run_old or run_new:
            regions.append(
                ChangedRegion(
                    path=path,
                    new_line_range=(run_new[0], run_new[-1]) if run_new else None,
                    old_line_range=(run_old[0], run_old[-1]) if run_old else None,
                )
            )
            run_old.clear()
            run_new.clear()

    for ln in hunk.lines:
        if ln.tag == CONTEXT:
            flush()
            old_line += 1
            new_line += 1
        elif ln.tag == REMOVED:
            run_old.append(old_line)
            old_line += 1
        else:
            run_new.append(new_line)
            new_line += 1
    flush()
    return regions


def region_anchor_new_line(diff: CodeDiff, region: ChangedRegion) -> int:
    """New-side line number that locates ``region`` in the post-change file.

    For regions with added lines this is the first added line. For pure
    deletions it is the new-side position at which the removal occurred
    (clamped to 1), letting syntax lookups resolve against the post tree.
    """
    if region.new_line_range is not None:
        return region.new_line_range[0]
    assert region.old_line_range is not None
    target = region.old_line_range[0]
    for f in diff.files:
        if f.path != region.path:
            continue
        for hunk in f.hunks:
            old_line = hunk.old_start
            new_line = hunk.new_start
            for ln in hunk.lines:
                if ln.tag == REMOVED:
                    if old_line == target:
                        return max(1, new_line - 1)
                    old_line += 1
                elif ln.tag == CONTEXT:
                    old_line += 1
                    new_line += 1
                else:
                    new_line += 1
    return 1


def diff_for_commit(repo_path: str, commitish: str) -> str:
    """Unified diff text for a commit, via the git CLI."""
    try:
        out = subprocess.run(
            ["git", "-C", repo_path, "show", commitish, "--format=", "--patch", "--no-color"],
            capture_output=True,
            text=True,
            check=True,
        )
    except (subprocess.CalledProcessError, FileNotFoundError) as exc:
        detail = getattr(exc, "stderr", "") or str(exc)
        raise RepoUnavailable(f"{repo_path}@{commitish}: {detail.strip()}") from exc
    return out.stdout


def commit_message(repo_path: str, commitish: str) -> str:
    """Full commit message body for a commit, via the git CLI."""
    try:
        out = subprocess.run(
            ["git", "-C", repo_path, "log", "-1", "--format=%B", commitish],
            capture_output=True,
            text=True,
            check=True,
        )
    except (subprocess.CalledProcessError, FileNotFoundError) as exc:
        detail = getattr(exc, "stderr", "") or str(exc)
        raise RepoUnavailable(f"{repo_path}@{commitish}: {detail.strip()}") from exc
    return out.stdout.strip("\n")

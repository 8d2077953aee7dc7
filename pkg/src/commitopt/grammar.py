"""Reference grammar for a single curly-brace language (Java dialect).

The backend is deliberately pluggable: extractors consume the small
:class:`SourceFile` surface (methods, classes, call sites, variable
resolution, enclosing blocks), and any richer parser can be swapped in via
the :class:`Grammar` protocol. This reference implementation is a masked
lexical analyzer: comments and string/char literals are blanked out, braces
and parentheses are matched positionally, and declarations are recognized
from the masked text. It covers the common shapes of Java-style source
(classes, methods, constructors, fields, locals, for-header declarations,
single-declarator statements); exotic constructs such as lambdas with block
bodies or anonymous classes are outside its remit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol

from .errors import UnparseableFile

KEYWORDS = frozenset(
    """
    abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package
    private protected public return short static strictfp super switch
    synchronized this throw throws transient try void volatile while
    null true false var record yield
    """.split()
)

MODIFIERS = frozenset(
    "public private protected static final abstract synchronized native "
    "transient volatile strictfp default".split()
)

_IDENT_RE = re.compile(r"[A-Za-z_$][\w$]*")
_WORD_RE = re.compile(r"\w+")


@dataclass(frozen=True)
class MethodDecl:
    name: str
    signature: str  # normalized one-line signature, no body
    modifiers: tuple[str, ...]
    params: tuple[tuple[str, str], ...]  # (type, name)
    start_line: int
    end_line: int
    decl_start: int  # char offset of the declaration (incl. modifiers)
    body_open: int  # char offset of '{'
    body_close: int  # char offset of matching '}'
    text: str  # full declaration including body


@dataclass(frozen=True)
class ClassDecl:
    name: str
    kind: str  # class | interface | enum
    modifiers: tuple[str, ...]
    start_line: int
    end_line: int
    decl_start: int
    body_open: int
    body_close: int
    text: str


@dataclass(frozen=True)
class VarDecl:
    name: str
    type: str
    modifiers: tuple[str, ...]
    kind: str  # field | local | param
    line: int
    decl_pos: int
    scope_start: int
    scope_end: int


@dataclass(frozen=True)
class CallSite:
    name: str
    receiver: str | None
    arg_count: int
    line: int


@dataclass(frozen=True)
class BlockSpan:
    start_line: int
    end_line: int
    text: str


class SourceFile(Protocol):
    path: str
    text: str

    def methods(self) -> list[MethodDecl]: ...
    def classes(self) -> list[ClassDecl]: ...
    def calls_on_lines(self, lines: set[int]) -> list[CallSite]: ...
    def identifiers_on_lines(self, lines: set[int]) -> list[tuple[str, int]]: ...
    def resolve_variable(self, name: str, line: int) -> VarDecl | None: ...
    def enclosing_block(self, first_line: int, last_line: int) -> BlockSpan: ...


class Grammar(Protocol):
    extensions: tuple[str, ...]

    def parse(self, text: str, path: str) -> SourceFile: ...


def mask_noncode(text: str) -> str:
    """Blank out comments and string/char literals, preserving offsets."""
    out = list(text)
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        nxt = text[i + 1] if i + 1 < n else ""
        if ch == "/" and nxt == "/":
            while i < n and text[i] != "\n":
                out[i] = " "
                i += 1
        elif ch == "/" and nxt == "*":
            out[i] = out[i + 1] = " "
            i += 2
            while i < n and not (text[i] == "*" and i + 1 < n and text[i + 1] == "/"):
                if text[i] != "\n":
                    out[i] = " "
                i += 1
            if i + 1 < n:
                out[i] = out[i + 1] = " "
                i += 2
        elif ch in ('"', "'"):
            quote = ch
            out[i] = " "
            i += 1
            while i < n and text[i] != quote:
                if text[i] == "\\" and i + 1 < n:
                    out[i] = out[i + 1] = " "
                    i += 2
                    continue
                if text[i] != "\n":
                    out[i] = " "
                i += 1
            if i < n:
                out[i] = " "
                i += 1
        else:
            i += 1
    return "".join(out)


class CurlySource:
    """Analyzed source file for the curly-brace reference grammar."""

    def __init__(self, text: str, path: str = "<memory>"):
        self.path = path
        self.text = text
        self.masked = mask_noncode(text)
        self._line_starts = self._index_lines()
        self._brace_match: dict[int, int] = {}
        self._paren_match: dict[int, int] = {}
        self._match_pairs()
        self._classes = self._scan_classes()
        self._methods = self._scan_methods()
        self._vars = self._scan_variables()

    # ------------------------------------------------------------------
    # positional helpers
    # ------------------------------------------------------------------

    def _index_lines(self) -> list[int]:
        starts = [0]
        for i, ch in enumerate(self.text):
            if ch == "\n":
                starts.append(i + 1)
        return starts

    def line_of(self, pos: int) -> int:
        lo, hi = 0, len(self._line_starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self._line_starts[mid] <= pos:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1

    def line_span(self, line: int) -> tuple[int, int]:
        start = self._line_starts[line - 1]
        end = (
            self._line_starts[line] - 1
            if line < len(self._line_starts)
            else len(self.text)
        )
        return start, end

    def _match_pairs(self) -> None:
        braces: list[int] = []
        parens: list[int] = []
        for i, ch in enumerate(self.masked):
            if ch == "{":
                braces.append(i)
            elif ch == "}":
                if not braces:
                    raise UnparseableFile(self.path, f"unbalanced '}}' at line {self.line_of(i)}")
                o = braces.pop()
                self._brace_match[o] = i
                self._brace_match[i] = o
            elif ch == "(":
                parens.append(i)
            elif ch == ")":
                if not parens:
                    raise UnparseableFile(self.path, f"unbalanced ')' at line {self.line_of(i)}")
                o = parens.pop()
                self._paren_match[o] = i
                self._paren_match[i] = o
        if braces:
            raise UnparseableFile(self.path, f"unbalanced '{{' at line {self.line_of(braces[-1])}")
        if parens:
            raise UnparseableFile(self.path, f"unbalanced '(' at line {self.line_of(parens[-1])}")

    def _skip_ws(self, pos: int) -> int:
        while pos < len(self.masked) and self.masked[pos].isspace():
            pos += 1
        return pos

    def _word_at(self, pos: int) -> str:
        m = _WORD_RE.match(self.masked, pos)
        return m.group(0) if m else ""

    def _ident_before(self, pos: int) -> tuple[str, int] | None:
        """Identifier ending right before ``pos`` (skipping whitespace)."""
        j = pos - 1
        while j >= 0 and self.masked[j].isspace():
            j -= 1
        end = j + 1
        while j >= 0 and (self.masked[j].isalnum() or self.masked[j] in "_$"):
            j -= 1
        if j + 1 == end:
            return None
        return self.masked[j + 1 : end], j + 1

    def _stmt_start(self, pos: int) -> int:
        """Start offset of the statement whose text ends at ``pos``.

        Walks backwards past whitespace and matched paren groups until a
        statement boundary (';', '{', '}') or the file start.
        """
        j = pos - 1
        while j >= 0:
            ch = self.masked[j]
            if ch == ")":
                j = self._paren_match[j] - 1
                continue
            if ch in ";{}":
                break
            j -= 1
        return self._skip_ws(j + 1)

    # ------------------------------------------------------------------
    # declaration scans
    # ------------------------------------------------------------------

    _CLASS_RE = re.compile(r"\b(class|interface|enum)\s+([A-Za-z_$][\w$]*)")

    def _scan_classes(self) -> list[ClassDecl]:
        found = []
        for m in self._CLASS_RE.finditer(self.masked):
            brace = self.masked.find("{", m.end())
            semi = self.masked.find(";", m.end())
            if brace == -1 or (semi != -1 and semi < brace):
                continue
            decl_start = self._stmt_start(m.start())
            body_close = self._brace_match[brace]
            mods = tuple(
                w for w in self.masked[decl_start : m.start()].split() if w in MODIFIERS
            )
            found.append(
                ClassDecl(
                    name=m.group(2),
                    kind=m.group(1),
                    modifiers=mods,
                    start_line=self.line_of(decl_start),
                    end_line=self.line_of(body_close),
                    decl_start=decl_start,
                    body_open=brace,
                    body_close=body_close,
                    text=self.text[decl_start : body_close + 1],
                )
            )
        return found

    def _scan_methods(self) -> list[MethodDecl]:
        found = []
        self._decl_name_positions: set[int] = set()
        for open_paren, close_paren in sorted(self._paren_match.items()):
            if close_paren < open_paren:
                continue
            ident = self._ident_before(open_paren)
            if ident is None:
                continue
            name, name_pos = ident
            if name in KEYWORDS:
                continue
            before = self._ident_before(name_pos)
            prev_nonws = name_pos - 1
            while prev_nonws >= 0 and self.masked[prev_nonws].isspace():
                prev_nonws -= 1
            if prev_nonws >= 0 and self.masked[prev_nonws] == ".":
                continue  # member call, not a declaration
            if before is not None and before[0] == "new":
                continue  # constructor invocation
            j = self._skip_ws(close_paren + 1)
            if self._word_at(j) == "throws":
                j += len("throws")
                while j < len(self.masked) and self.masked[j] not in "{;":
                    j += 1
            else:
                j = self._skip_ws(j)
            if j >= len(self.masked) or self.masked[j] != "{":
                continue
            decl_start = self._stmt_start(name_pos)
            header = self.masked[decl_start:name_pos]
            header_words = header.split()
            # A declaration carries a return type or modifiers before the
            # name (constructors: modifiers or nothing). Expression calls
            # followed by blocks have operators/keywords there instead.
            if any(w in ("return", "throw", "=", "new") for w in header_words):
                continue
            body_open = j
            body_close = self._brace_match[body_open]
            mods = tuple(w for w in header_words if w in MODIFIERS)
            params = self._parse_params(open_paren, close_paren)
            signature = " ".join(self.text[decl_start:close_paren + 1].split())
            self._decl_name_positions.add(name_pos)
            found.append(
                MethodDecl(
                    name=name,
                    signature=signature,
                    modifiers=mods,
                    params=params,
                    start_line=self.line_of(decl_start),
                    end_line=self.line_of(body_close),
                    decl_start=decl_start,
                    body_open=body_open,
                    body_close=body_close,
                    text=self.text[decl_start : body_close + 1],
                )
            )
        return found

    def _parse_params(self, open_paren: int, close_paren: int) -> tuple[tuple[str, str], ...]:
        inner = self.masked[open_paren + 1 : close_paren]
        if not inner.strip():
            return ()
        parts: list[str] = []
        depth = 0
        start = 0
        for i, ch in enumerate(inner):
            if ch in "<([":
                depth += 1
            elif ch in ">)]":
                depth -= 1
            elif ch == "," and depth == 0:
                parts.append(inner[start:i])
                start = i + 1
        parts.append(inner[start:])
        params = []
        for part in parts:
            tokens = part.split()
            tokens = [t for t in tokens if t not in ("final",)]
            if len(tokens) >= 2:
                params.append((" ".join(tokens[:-1]), tokens[-1]))
        return tuple(params)

    _LOCAL_RE = re.compile(
        r"(?:^|[;{}(])\s*"
        r"((?:final\s+)?[A-Za-z_$][\w$.]*(?:<[^;(){}=]*>)?(?:\[\])*)"
        r"\s+([A-Za-z_$][\w$]*)\s*(?=[=;:)])"
    )

    def _scan_variables(self) -> list[VarDecl]:
        decls: list[VarDecl] = []
        # fields: direct statements of each class body
        for cls in self._classes:
            depth_positions = self._direct_statements(cls.body_open, cls.body_close)
            for stmt_start, stmt_end in depth_positions:
                stmt = self.masked[stmt_start:stmt_end]
                decl_part = stmt.split("=", 1)[0].strip()
                if "(" in decl_part or "{" in decl_part or "," in decl_part:
                    continue
                m = re.match(
                    r"^(?P<head>.+)\s+(?P<name>[A-Za-z_$][\w$]*)$", decl_part, re.S
                )
                if not m:
                    continue
                head_tokens = [t for t in m.group("head").split() if not t.startswith("@")]
                mods = tuple(t for t in head_tokens if t in MODIFIERS)
                type_tokens = [t for t in head_tokens if t not in MODIFIERS]
                if not type_tokens or any(t in KEYWORDS and t not in (
                    "int", "long", "short", "byte", "char", "boolean", "float", "double", "var"
                ) for t in type_tokens):
                    continue
                decls.append(
                    VarDecl(
                        name=m.group("name"),
                        type=" ".join(type_tokens),
                        modifiers=mods,
                        kind="field",
                        line=self.line_of(stmt_start),
                        decl_pos=stmt_start,
                        scope_start=cls.body_open,
                        scope_end=cls.body_close,
                    )
                )
        # params + locals per method
        for method in self._methods:
            for ptype, pname in method.params:
                decls.append(
                    VarDecl(
                        name=pname,
                        type=ptype,
                        modifiers=(),
                        kind="param",
                        line=method.start_line,
                        decl_pos=method.decl_start,
                        scope_start=method.body_open,
                        scope_end=method.body_close,
                    )
                )
            body = self.masked[method.body_open : method.body_close]
            for m in self._LOCAL_RE.finditer(body):
                type_text = m.group(1)
                type_tokens = [t for t in type_text.split() if t != "final"]
                base = type_tokens[0].split("<")[0].rstrip("[]") if type_tokens else ""
                if base in KEYWORDS and base not in (
                    "int", "long", "short", "byte", "char", "boolean", "float", "double", "var"
                ):
                    continue
                decl_pos = method.body_open + m.start(2)
                scope_start = self._innermost_brace_open(decl_pos)
                decls.append(
                    VarDecl(
                        name=m.group(2),
                        type=" ".join(type_tokens),
                        modifiers=("final",) if "final" in m.group(1) else (),
                        kind="local",
                        line=self.line_of(decl_pos),
                        decl_pos=decl_pos,
                        scope_start=scope_start,
                        scope_end=self._brace_match[scope_start],
                    )
                )
        return decls

    def _direct_statements(self, body_open: int, body_close: int) -> list[tuple[int, int]]:
        """(start, end) spans of ';'-terminated statements at body depth,
        skipping nested brace groups."""
        spans = []
        i = body_open + 1
        start = i
        while i < body_close:
            ch = self.masked[i]
            if ch == "{":
                i = self._brace_match[i] + 1
                start = i
                continue
            if ch == ";":
                spans.append((self._skip_ws(start), i))
                start = i + 1
            i += 1
        return spans

    def _innermost_brace_open(self, pos: int) -> int:
        best = -1
        for o, c in self._brace_match.items():
            if c > o and o < pos <= c and o > best:
                best = o
        if best == -1:
            raise UnparseableFile(self.path, f"no enclosing block at offset {pos}")
        return best

    # ------------------------------------------------------------------
    # public query surface
    # ------------------------------------------------------------------

    def methods(self) -> list[MethodDecl]:
        return list(self._methods)

    def classes(self) -> list[ClassDecl]:
        return list(self._classes)

    def method_enclosing_line(self, line: int) -> MethodDecl | None:
        best = None
        for m in self._methods:
            if m.start_line <= line <= m.end_line:
                if best is None or m.decl_start > best.decl_start:
                    best = m
        return best

    def class_enclosing_line(self, line: int) -> ClassDecl | None:
        best = None
        for c in self._classes:
            if c.start_line <= line <= c.end_line:
                if best is None or c.decl_start > best.decl_start:
                    best = c
        return best

    def calls_on_lines(self, lines: set[int]) -> list[CallSite]:
        calls = []
        for line in sorted(lines):
            start, end = self.line_span(line)
            for m in _IDENT_RE.finditer(self.masked, start, end):
                name = m.group(0)
                if name in KEYWORDS:
                    continue
                j = self._skip_ws(m.end())
                if j >= len(self.masked) or self.masked[j] != "(":
                    continue
                if m.start() in self._decl_name_positions:
                    continue
                before = self._ident_before(m.start())
                if before is not None and before[0] == "new":
                    continue
                receiver = None
                k = m.start() - 1
                while k >= 0 and self.masked[k].isspace():
                    k -= 1
                if k >= 0 and self.masked[k] == ".":
                    recv = self._ident_before(k)
                    receiver = recv[0] if recv else None
                close = self._paren_match[j]
                calls.append(
                    CallSite(
                        name=name,
                        receiver=receiver,
                        arg_count=self._count_args(j, close),
                        line=line,
                    )
                )
        return calls

    def _count_args(self, open_paren: int, close_paren: int) -> int:
        inner = self.masked[open_paren + 1 : close_paren]
        if not inner.strip():
            return 0
        depth = 0
        commas = 0
        for ch in inner:
            if ch in "<([":
                depth += 1
            elif ch in ">)]":
                depth -= 1
            elif ch == "," and depth == 0:
                commas += 1
        return commas + 1

    def identifiers_on_lines(self, lines: set[int]) -> list[tuple[str, int]]:
        idents = []
        for line in sorted(lines):
            start, end = self.line_span(line)
            for m in _IDENT_RE.finditer(self.masked, start, end):
                name = m.group(0)
                if name in KEYWORDS:
                    continue
                j = self._skip_ws(m.end())
                if j < len(self.masked) and self.masked[j] == "(":
                    continue  # call, handled by calls_on_lines
                k = m.start() - 1
                while k >= 0 and self.masked[k].isspace():
                    k -= 1
                if k >= 0 and self.masked[k] == ".":
                    continue  # member access on a receiver
                idents.append((name, line))
        return idents

    def resolve_variable(self, name: str, line: int) -> VarDecl | None:
        line_start, line_end = self.line_span(line)
        best = None
        for decl in self._vars:
            if decl.name != name:
                continue
            if not (decl.scope_start <= line_start <= decl.scope_end or decl.line == line):
                continue
            if decl.kind == "local" and decl.decl_pos > line_end:
                continue  # declared after the use site
            if best is None or decl.scope_start > best.scope_start:
                best = decl
        return best

    def enclosing_block(self, first_line: int, last_line: int) -> BlockSpan:
        innermost = None
        for o, c in self._brace_match.items():
            if c <= o:
                continue
            if self.line_of(o) <= first_line and self.line_of(c) >= last_line:
                if innermost is None or o > innermost[0]:
                    innermost = (o, c)
        if innermost is None:
            cls = self.class_enclosing_line(first_line)
            if cls is not None:
                return BlockSpan(cls.start_line, cls.end_line, cls.text)
            return BlockSpan(1, self.line_of(len(self.text)), self.text)

        o, c = innermost
        for m in self._methods:
            if m.body_open == o:
                return BlockSpan(m.start_line, m.end_line, m.text)
        for cls in self._classes:
            if cls.body_open == o:
                return BlockSpan(cls.start_line, cls.end_line, cls.text)
        return self._statement_block(o)

    def _statement_block(self, body_open: int) -> BlockSpan:
        head = self._stmt_start(body_open)
        # Re-anchor continuation clauses (catch/finally/else) to the
        # statement that introduces the construct.
        guard = 0
        while self._word_at(head) in ("catch", "finally", "else") and guard < 32:
            j = head - 1
            while j >= 0 and self.masked[j].isspace():
                j -= 1
            if j < 0 or self.masked[j] != "}":
                break
            head = self._stmt_start(self._brace_match[j])
            guard += 1

        head_word = self._word_at(head)
        end = self._brace_match[body_open]
        # Walk the whole construct forward from its first block.
        first_open = self.masked.find("{", head)
        end = max(end, self._brace_match[first_open])
        while True:
            j = self._skip_ws(end + 1)
            word = self._word_at(j)
            if head_word in ("try",) and word in ("catch", "finally"):
                end = self._consume_clause(j + len(word))
            elif head_word in ("if",) and word == "else":
                end = self._consume_clause(j + len(word))
            elif head_word == "do" and word == "while":
                k = self._skip_ws(j + len(word))
                if k < len(self.masked) and self.masked[k] == "(":
                    k = self._paren_match[k] + 1
                    k = self._skip_ws(k)
                    if k < len(self.masked) and self.masked[k] == ";":
                        end = k
                break
            else:
                break
        return BlockSpan(self.line_of(head), self.line_of(end), self.text[head : end + 1])

    def _consume_clause(self, pos: int) -> int:
        """Consume ``[if] (...) { ... }`` after a continuation keyword."""
        j = self._skip_ws(pos)
        if self._word_at(j) == "if":
            j = self._skip_ws(j + 2)
        if j < len(self.masked) and self.masked[j] == "(":
            j = self._skip_ws(self._paren_match[j] + 1)
        if j < len(self.masked) and self.masked[j] == "{":
            return self._brace_match[j]
        # single-statement clause: runs to the next ';'
        k = self.masked.find(";", j)
        return k if k != -1 else j


class CurlyGrammar:
    """Default grammar: Java-style curly-brace sources."""

    extensions: tuple[str, ...] = (".java",)

    def parse(self, text: str, path: str = "<memory>") -> CurlySource:
        return CurlySource(text, path)

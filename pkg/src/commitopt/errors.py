"""Exception types shared across the toolchain."""

from __future__ import annotations


class CommitOptError(Exception):
    """Base class for all toolchain errors."""


class MalformedDiff(CommitOptError):
    """Unified diff text could not be parsed.

    Carries the 1-based line number of the offending input line.
    """

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnparseableFile(CommitOptError):
    """A source file could not be analyzed by the configured grammar."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path


class GatewayError(CommitOptError):
    """Chat endpoint failure. ``kind`` is one of timeout|rate_limit|http_status|protocol."""

    def __init__(self, kind: str, detail: str = "", status: int | None = None):
        super().__init__(f"{kind}: {detail}" if detail else kind)
        self.kind = kind
        self.status = status


class UnparseableResponse(CommitOptError):
    """Model response did not match the expected shape after reprompting."""


class SlotMissing(CommitOptError):
    """A prompt template was rendered with an unfilled slot."""


class ForgeUnreachable(CommitOptError):
    """Issue/PR forge endpoint could not be reached."""


class AuthFailure(CommitOptError):
    """Forge rejected the configured credentials."""


class RepoUnavailable(CommitOptError):
    """A repository could not be read or cloned during mining."""


class EmbedServiceError(CommitOptError):
    """Embedding endpoint failure."""


class BuildError(CommitOptError):
    """Corpus index build failed."""


class EmptyCorpus(BuildError):
    """No records survived mining/filtering; nothing to index."""


class EmptyIndex(CommitOptError):
    """Retrieval attempted against an empty corpus index."""


class DegenerateInput(CommitOptError):
    """Statistical input with no variance (or otherwise unusable)."""


class EmptyReference(CommitOptError):
    """Reference text for a text metric tokenized to nothing."""


class NoContexts(CommitOptError):
    """Optimization started with no available software contexts."""


class UnknownTool(CommitOptError):
    """Ablation referenced a context kind that does not exist."""


class ConfigError(CommitOptError):
    """Run configuration is invalid or incomplete for the requested mode."""

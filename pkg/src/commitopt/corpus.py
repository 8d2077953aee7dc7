"""Commit corpus: mining, quality filtering, embedding index, retrieval.

Index file layout (single self-describing binary file):

    magic   b"CMIX0001\\n"
    u32     header length (big-endian)
    bytes   header JSON: version, counts, dims, embedder ids, built_at,
            source_repos, dtype ("<f8")
    u32     entries length
    bytes   entries JSON array: [{commit_id, diff_text, message_text}, ...]
    bytes   diff embedding matrix, count x diff_dim float64, row-major
    bytes   message embedding matrix, count x message_dim float64, row-major

Everything except ``built_at`` is a pure function of the inputs, so
rebuilding from identical inputs yields a byte-identical file modulo that
one header field. Retrieval is an exact brute-force cosine scan (the
reference implementation any accelerated index must match).
"""

from __future__ import annotations

import json
import logging
import struct
import subprocess
import tempfile
from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .embedding import KIND_CODE_DIFF, KIND_TEXT, EmbedClient, normalize
from .errors import EmptyCorpus, EmptyIndex, GatewayError, RepoUnavailable
from .gateway import ChatGateway, ChatRequest
from .prompts import GOOD_MESSAGE_TEMPLATE

log = logging.getLogger(__name__)

MAGIC = b"CMIX0001\n"


@dataclass(frozen=True)
class MinedCommit:
    commit_id: str
    diff_text: str
    message_text: str


@dataclass(frozen=True)
class CorpusEntry:
    commit_id: str
    diff_text: str
    message_text: str
    diff_embedding: np.ndarray
    message_embedding: np.ndarray


@dataclass
class CorpusIndex:
    entries: list[CorpusEntry]
    metadata: dict

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def diff_matrix(self) -> np.ndarray:
        return np.stack([e.diff_embedding for e in self.entries])


# ----------------------------------------------------------------------
# mining
# ----------------------------------------------------------------------


def _git(repo: str | Path, *args: str) -> str:
    result = subprocess.run(
        ["git", "-C", str(repo), *args], capture_output=True, text=True
    )
    if result.returncode != 0:
        raise RepoUnavailable(f"{repo}: git {' '.join(args)}: {result.stderr.strip()}")
    return result.stdout


def _is_binary_only(diff_text: str) -> bool:
    has_hunk = any(line.startswith("@@") for line in diff_text.splitlines())
    mentions_binary = "Binary files " in diff_text or "GIT binary patch" in diff_text
    return mentions_binary and not has_hunk


def mine_commits(
    repos: Iterable[str | Path],
    max_commits: int | None = None,
    on_repo_error: Callable[[RepoUnavailable], None] | None = None,
) -> Iterator[MinedCommit]:
    """One record per non-merge commit with a non-empty message and a
    non-binary diff. Unreadable repos are reported and skipped."""
    for repo in repos:
        workdir = None
        try:
            repo_path = str(repo)
            if repo_path.startswith(("http://", "https://", "git@", "ssh://")):
                workdir = tempfile.mkdtemp(prefix="commitopt-clone-")
                clone = subprocess.run(
                    ["git", "clone", "--quiet", repo_path, workdir],
                    capture_output=True,
                    text=True,
                )
                if clone.returncode != 0:
                    raise RepoUnavailable(f"{repo_path}: {clone.stderr.strip()}")
                repo_path = workdir
            hashes = _git(repo_path, "log", "--no-merges", "--format=%H").split()
        except RepoUnavailable as exc:
            log.warning("%s", exc)
            if on_repo_error:
                on_repo_error(exc)
            continue

        count = 0
        for commit_id in hashes:
            if max_commits is not None and count >= max_commits:
                break
            message = _git(repo_path, "log", "-1", "--format=%B", commit_id).strip()
            if not message:
                continue
            diff_text = _git(
                repo_path, "show", commit_id, "--format=", "--patch", "--no-color"
            )
            if not diff_text.strip() or _is_binary_only(diff_text):
                continue
            count += 1
            yield MinedCommit(commit_id, diff_text, message)


# ----------------------------------------------------------------------
# quality filtering
# ----------------------------------------------------------------------


def accept_all(_: MinedCommit) -> bool:
    return True


class LlmGoodMessageFilter:
    """Prompted what+why classifier; gateway failures skip the record."""

    def __init__(self, gateway: ChatGateway, model: str = "default"):
        self.gateway = gateway
        self.model = model
        self.failures = 0
        self.calls = 0

    def __call__(self, record: MinedCommit) -> bool:
        system, user = GOOD_MESSAGE_TEMPLATE.render(message=record.message_text)
        request = ChatRequest(
            system=system,
            user=user,
            temperature=0.0,
            max_output_tokens=8,
            model=self.model,
            purpose="filter.good",
        )
        self.calls += 1
        try:
            response = self.gateway.chat(request)
        except GatewayError as exc:
            self.failures += 1
            log.warning("good-message filter skipped %s: %s", record.commit_id, exc)
            return False
        return response.strip().lower().startswith("y")


def filter_good(
    records: Iterable[MinedCommit],
    keep: Callable[[MinedCommit], bool] = accept_all,
) -> Iterator[MinedCommit]:
    for record in records:
        if keep(record):
            yield record


# ----------------------------------------------------------------------
# index build / persistence
# ----------------------------------------------------------------------


def build_index(
    records: Iterable[MinedCommit],
    embed_client: EmbedClient,
    out_path: str | Path | None = None,
    source_repos: list[str] | None = None,
) -> CorpusIndex:
    """Embed every record (diff and message), normalize, optionally persist.

    Duplicate commit ids are dropped (first occurrence wins). Raises
    :class:`EmptyCorpus` when no records survive.
    """
    entries: list[CorpusEntry] = []
    seen: set[str] = set()
    for record in records:
        if record.commit_id in seen:
            continue
        seen.add(record.commit_id)
        entries.append(
            CorpusEntry(
                commit_id=record.commit_id,
                diff_text=record.diff_text,
                message_text=record.message_text,
                diff_embedding=normalize(
                    embed_client.embed(KIND_CODE_DIFF, record.diff_text)
                ),
                message_embedding=normalize(
                    embed_client.embed(KIND_TEXT, record.message_text)
                ),
            )
        )
    if not entries:
        raise EmptyCorpus("no records to index")

    metadata = {
        "version": 1,
        "count": len(entries),
        "diff_dim": int(entries[0].diff_embedding.shape[0]),
        "message_dim": int(entries[0].message_embedding.shape[0]),
        "diff_embedder": embed_client.model_id(KIND_CODE_DIFF),
        "message_embedder": embed_client.model_id(KIND_TEXT),
        "built_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "source_repos": sorted(source_repos or []),
        "dtype": "<f8",
    }
    index = CorpusIndex(entries=entries, metadata=metadata)
    if out_path is not None:
        save_index(index, out_path)
    return index


def save_index(index: CorpusIndex, path: str | Path) -> None:
    header = json.dumps(index.metadata, sort_keys=True, ensure_ascii=False).encode("utf-8")
    entries_json = json.dumps(
        [
            {
                "commit_id": e.commit_id,
                "diff_text": e.diff_text,
                "message_text": e.message_text,
            }
            for e in index.entries
        ],
        sort_keys=True,
        ensure_ascii=False,
    ).encode("utf-8")
    diff_matrix = np.stack([e.diff_embedding for e in index.entries]).astype("<f8")
    msg_matrix = np.stack([e.message_embedding for e in index.entries]).astype("<f8")

    target = Path(path)
    tmp = target.with_suffix(target.suffix + ".tmp")
    with tmp.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack(">I", len(header)))
        fh.write(header)
        fh.write(struct.pack(">I", len(entries_json)))
        fh.write(entries_json)
        fh.write(diff_matrix.tobytes(order="C"))
        fh.write(msg_matrix.tobytes(order="C"))
    tmp.replace(target)


def load_index(path: str | Path) -> CorpusIndex:
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise EmptyIndex(f"{path}: not a corpus index file")
    offset = len(MAGIC)
    (header_len,) = struct.unpack_from(">I", raw, offset)
    offset += 4
    metadata = json.loads(raw[offset : offset + header_len])
    offset += header_len
    (entries_len,) = struct.unpack_from(">I", raw, offset)
    offset += 4
    entry_dicts = json.loads(raw[offset : offset + entries_len])
    offset += entries_len

    count = metadata["count"]
    diff_dim = metadata["diff_dim"]
    msg_dim = metadata["message_dim"]
    diff_matrix = np.frombuffer(
        raw, dtype="<f8", count=count * diff_dim, offset=offset
    ).reshape(count, diff_dim)
    offset += count * diff_dim * 8
    msg_matrix = np.frombuffer(
        raw, dtype="<f8", count=count * msg_dim, offset=offset
    ).reshape(count, msg_dim)

    entries = [
        CorpusEntry(
            commit_id=d["commit_id"],
            diff_text=d["diff_text"],
            message_text=d["message_text"],
            diff_embedding=diff_matrix[i].copy(),
            message_embedding=msg_matrix[i].copy(),
        )
        for i, d in enumerate(entry_dicts)
    ]
    return CorpusIndex(entries=entries, metadata=metadata)


# ----------------------------------------------------------------------
# retrieval
# ----------------------------------------------------------------------


def retrieve_similar(
    index: CorpusIndex, diff_embedding: np.ndarray, k: int
) -> list[CorpusEntry]:
    """Top-k entries by cosine similarity of diff embeddings, descending;
    ties break by commit id. k past the corpus size returns everything."""
    if len(index) == 0:
        raise EmptyIndex("retrieval against an empty index")
    if k < 1:
        raise ValueError("k must be >= 1")
    query = normalize(diff_embedding)
    scores = index.diff_matrix @ query
    order = sorted(
        range(len(index)), key=lambda i: (-scores[i], index.entries[i].commit_id)
    )
    return [index.entries[i] for i in order[: min(k, len(index))]]

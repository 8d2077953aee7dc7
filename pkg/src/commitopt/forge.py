"""Minimal issue/PR forge client: resolves artifact references to titles.

Recognized references: ``#123``, full forge URLs ending in a numeric id,
and ``PROJECT-123`` issue keys. Titles are fetched from
``GET {base_url}/issues/{ref}`` expecting a JSON body with a ``title``
field; the auth token comes from the FORGE_API_TOKEN environment variable.
"""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass

import requests

from .errors import AuthFailure, ForgeUnreachable

log = logging.getLogger(__name__)

TOKEN_ENV = "FORGE_API_TOKEN"

_REF_PATTERNS = (
    re.compile(r"(?<![\w.])#(\d+)\b"),
    re.compile(r"https?://\S+/(?:issues|pull|pulls|merge_requests)/(\d+)"),
    re.compile(r"\b([A-Z][A-Z0-9]+-\d+)\b"),
)


@dataclass(frozen=True)
class ForgeConfig:
    base_url: str
    timeout: float = 10.0


def extract_refs(message: str) -> list[str]:
    """Artifact references in a commit message, in order of appearance."""
    found: list[tuple[int, str]] = []
    for pattern in _REF_PATTERNS:
        for m in pattern.finditer(message):
            found.append((m.start(), m.group(1)))
    seen: set[str] = set()
    refs = []
    for _, ref in sorted(found):
        if ref not in seen:
            seen.add(ref)
            refs.append(ref)
    return refs


def fetch_titles(refs: list[str], config: ForgeConfig) -> list[tuple[str, str, str]]:
    """Resolve refs to (ref, title, url); 404s are skipped with a warning."""
    headers = {}
    token = os.environ.get(TOKEN_ENV, "")
    if token:
        headers["Authorization"] = f"Bearer {token}"
    results = []
    for ref in refs:
        url = f"{config.base_url.rstrip('/')}/issues/{ref}"
        try:
            resp = requests.get(url, headers=headers, timeout=config.timeout)
        except requests.RequestException as exc:
            raise ForgeUnreachable(f"{url}: {exc}") from exc
        if resp.status_code in (401, 403):
            raise AuthFailure(f"{url}: HTTP {resp.status_code}")
        if resp.status_code == 404:
            log.warning("forge returned 404 for reference %s", ref)
            continue
        if resp.status_code != 200:
            raise ForgeUnreachable(f"{url}: HTTP {resp.status_code}")
        try:
            title = resp.json().get("title", "")
        except ValueError as exc:
            raise ForgeUnreachable(f"{url}: non-JSON body") from exc
        if title:
            results.append((ref, title, url))
    return results

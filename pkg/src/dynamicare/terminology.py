"""Diagnosis-name to ICD-9 code mapping.

A persistent TSV cache (``name<TAB>code``) fronts an ontology search
service; every successful lookup is written through, so repeated runs are
reproducible and service-optional.  Names that cannot be mapped stay
unmapped for the current run only (a later run may retry them).
"""

from __future__ import annotations

import logging
import os
import threading
from pathlib import Path

from .errors import GatewayError
from .records import ICD9_PATTERN

logger = logging.getLogger(__name__)

ENV_TERM_KEY = "DYNAMICARE_TERM_KEY"


def normalize_name(name) -> str:
    return " ".join(str(name).split()).lower()


def clean_code(raw) -> str | None:
    """Undotted ICD-9 code, or None when the value fails the code grammar."""
    code = str(raw).strip().upper().replace(".", "")
    return code if ICD9_PATTERN.match(code) else None


class TsvCache:
    """Append-only name-to-code store; one tab-separated pair per line."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self._entries: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line_no, line in enumerate(fh, 1):
                    line = line.rstrip("\n")
                    if not line:
                        continue
                    name, sep, code = line.partition("\t")
                    if not sep:
                        raise ValueError(f"{self.path}:{line_no}: expected name<TAB>code")
                    self._entries[normalize_name(name)] = code

    def get(self, name: str) -> str | None:
        return self._entries.get(normalize_name(name))

    def put(self, name: str, code: str) -> None:
        key = normalize_name(name)
        with self._lock:
            if self._entries.get(key) == code:
                return
            self._entries[key] = code
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(f"{key}\t{code}\n")

    def __len__(self) -> int:
        return len(self._entries)


class TerminologyClient:
    """Ontology search client, restricted to ICD-9.

    Expects a REST endpoint taking a text query and returning ranked hits
    whose records carry the concept code; only the top hit is used.
    """

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        ontology: str = "ICD9CM",
        timeout: float = 30.0,
    ):
        if not base_url:
            raise GatewayError("terminology client needs a search endpoint URL")
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_TERM_KEY, "")
        self.ontology = ontology
        self.timeout = timeout

    @staticmethod
    def _code_of(hit: dict) -> str | None:
        for field in ("code", "notation", "conceptId"):
            if hit.get(field):
                return str(hit[field])
        identifier = str(hit.get("@id", ""))
        if identifier:
            return identifier.rsplit("/", 1)[-1]
        return None

    def search(self, name: str) -> str | None:
        import requests as _requests

        params = {"q": name, "ontologies": self.ontology, "pagesize": 1}
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"apikey token={self.api_key}"
        try:
            response = _requests.get(
                self.base_url, params=params, headers=headers, timeout=self.timeout
            )
        except _requests.RequestException as exc:
            raise GatewayError(f"terminology search failed: {exc}") from exc
        if response.status_code != 200:
            raise GatewayError(
                f"terminology search HTTP {response.status_code}: {response.text[:200]}"
            )
        payload = response.json()
        hits = payload.get("collection") if isinstance(payload, dict) else payload
        if not hits:
            return None
        return clean_code(self._code_of(hits[0]))


class CachedMapper:
    """Cache-first mapper; service misses are remembered in-memory per run."""

    def __init__(self, cache: TsvCache, client: TerminologyClient | None = None):
        self.cache = cache
        self.client = client
        self._negative: set[str] = set()
        self._lock = threading.Lock()

    def lookup(self, name: str) -> str | None:
        key = normalize_name(name)
        if not key:
            return None
        cached = self.cache.get(key)
        if cached is not None:
            return cached
        with self._lock:
            if key in self._negative:
                return None
        if self.client is None:
            logger.warning("no terminology service configured; %r stays unmapped", name)
            with self._lock:
                self._negative.add(key)
            return None
        try:
            code = self.client.search(name)
        except GatewayError as exc:
            logger.warning("terminology lookup for %r failed (%s); unmapped", name, exc)
            with self._lock:
                self._negative.add(key)
            return None
        if code is None:
            with self._lock:
                self._negative.add(key)
            return None
        self.cache.put(key, code)
        return code

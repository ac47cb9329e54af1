"""Clients for remote completion/translation models plus deterministic doubles.

The wire protocol is the OpenAI-compatible completions shape (POST
{endpoint}/v1/completions), which llama-style inference servers speak.
Scoring uses echo mode with max_tokens=0 so candidate likelihoods come back
as per-token logprobs with character offsets.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import requests
import tomli

from .corpus import Sentence, count_tokens, join_with_separator, split_on_separator
from .errors import (
    BackendTimeoutError,
    EmptyContinuationError,
    EmptyFieldError,
    FixtureParseError,
    ProtocolError,
    RemoteError,
    UnsupportedCapabilityError,
)

DEFAULT_MAX_INFLIGHT = 4
DEFAULT_MAX_RETRIES = 3
DEFAULT_BACKOFF_BASE_S = 0.25
DEFAULT_BACKOFF_FACTOR = 4.0


@dataclass(frozen=True)
class CompletionRequest:
    """One generation call; the forced prefix is continued, never re-generated."""

    prompt: str
    forced_prefix: str = ""
    max_new_tokens: int = 256
    stop_sequences: tuple[str, ...] = ()
    temperature: float = 0.0
    want_logprobs: bool = False

    def __post_init__(self) -> None:
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class CompletionResult:
    """Generated text with the stop sequence stripped."""

    text: str
    finish_reason: str  # "stop" | "length" | "error"
    token_logprobs: tuple[tuple[str, float, int], ...] | None = None


@dataclass(frozen=True)
class BackendDescriptor:
    """Config-file description of one reachable model."""

    name: str
    kind: str  # "completion" | "translation" | "embedding"
    endpoint: str  # http(s) URL or "scripted:<path>"
    model_id: str = ""
    timeout_s: float = 30.0
    max_retries: int = DEFAULT_MAX_RETRIES
    max_inflight: int = DEFAULT_MAX_INFLIGHT
    backoff_base_s: float = DEFAULT_BACKOFF_BASE_S
    backoff_factor: float = DEFAULT_BACKOFF_FACTOR


def composed_text(prompt: str, forced_prefix: str = "") -> str:
    """Full text a backend conditions on: prompt plus the forced continuation."""
    if forced_prefix:
        return f"{prompt} {forced_prefix}"
    return prompt


def scripted_digest(prompt: str, forced_prefix: str = "") -> str:
    return hashlib.sha256(composed_text(prompt, forced_prefix).encode("utf-8")).hexdigest()


def truncate_at_stop(text: str, stop_sequences: Sequence[str]) -> tuple[str, bool]:
    """Cut at the earliest stop occurrence; returns (text, stop_found)."""
    cut = len(text)
    found = False
    for stop in stop_sequences:
        pos = text.find(stop)
        if pos != -1 and pos < cut:
            cut = pos
            found = True
    return text[:cut], found


class CompletionBackend:
    """Interface shared by HTTP and scripted completion backends."""

    descriptor: BackendDescriptor

    def complete(self, request: CompletionRequest) -> CompletionResult:
        raise NotImplementedError

    def score_continuation(self, prompt: str, continuation: str) -> float:
        raise NotImplementedError


class TranslationBackend:
    descriptor: BackendDescriptor

    def translate(self, sentence: Sentence) -> Sentence:
        raise NotImplementedError


def _boundary_sum(
    tokens: Sequence[str],
    logprobs: Sequence[float | None],
    offsets: Sequence[int],
    boundary: int,
) -> float:
    """Sum logprobs of tokens belonging to the continuation region.

    A token counts toward the continuation when it extends past the boundary,
    so boundary-straddling tokens are attributed to the continuation. Tokens
    with a null logprob (servers return null for the first echoed token) are
    skipped.
    """
    total = 0.0
    for tok, lp, off in zip(tokens, logprobs, offsets):
        if lp is None:
            continue
        if off + len(tok) > boundary:
            total += lp
    return total


class HttpCompletionBackend(CompletionBackend):
    """OpenAI-compatible /v1/completions client with bounded retries."""

    def __init__(self, descriptor: BackendDescriptor):
        self.descriptor = descriptor
        self._gate = threading.Semaphore(descriptor.max_inflight)

    def _post(self, payload: dict) -> dict:
        url = self.descriptor.endpoint.rstrip("/") + "/v1/completions"
        delay = self.descriptor.backoff_base_s
        last: Exception | None = None
        for attempt in range(self.descriptor.max_retries + 1):
            if attempt > 0:
                time.sleep(delay)
                delay *= self.descriptor.backoff_factor
            try:
                resp = requests.post(url, json=payload, timeout=self.descriptor.timeout_s)
            except requests.exceptions.Timeout as exc:
                last = BackendTimeoutError(f"{self.descriptor.name}: {exc}")
                continue
            except requests.exceptions.RequestException as exc:
                last = RemoteError(f"{self.descriptor.name}: {exc}")
                continue
            if resp.status_code >= 500:
                last = RemoteError(f"{self.descriptor.name}: HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise RemoteError(f"{self.descriptor.name}: HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                body = resp.json()
                body["choices"][0]
            except (ValueError, KeyError, IndexError) as exc:
                last = ProtocolError(f"{self.descriptor.name}: malformed response: {exc}")
                continue
            return body
        assert last is not None
        raise last

    def complete(self, request: CompletionRequest) -> CompletionResult:
        payload = {
            "model": self.descriptor.model_id,
            "prompt": composed_text(request.prompt, request.forced_prefix),
            "max_tokens": request.max_new_tokens,
            "temperature": request.temperature,
        }
        if request.stop_sequences:
            payload["stop"] = list(request.stop_sequences)
        if request.want_logprobs:
            payload["logprobs"] = 0
        with self._gate:
            body = self._post(payload)
        choice = body["choices"][0]
        raw = choice.get("text", "")
        # Servers already honor `stop`, but re-truncate defensively.
        text, stop_found = truncate_at_stop(raw, request.stop_sequences)
        finish = choice.get("finish_reason") or "stop"
        if stop_found:
            finish = "stop"
        token_logprobs = None
        lp = choice.get("logprobs")
        if lp and lp.get("tokens"):
            base = lp["text_offset"][0] if lp.get("text_offset") else 0
            token_logprobs = tuple(
                (tok, float(p) if p is not None else 0.0, off - base)
                for tok, p, off in zip(lp["tokens"], lp["token_logprobs"], lp["text_offset"])
            )
        return CompletionResult(text=text.strip(), finish_reason=finish, token_logprobs=token_logprobs)

    def score_continuation(self, prompt: str, continuation: str) -> float:
        if not continuation:
            raise EmptyContinuationError("continuation must be non-empty")
        full = prompt + continuation
        payload = {
            "model": self.descriptor.model_id,
            "prompt": full,
            "max_tokens": 0,
            "temperature": 0.0,
            "echo": True,
            "logprobs": 0,
        }
        with self._gate:
            body = self._post(payload)
        lp = body["choices"][0].get("logprobs")
        if not lp or not lp.get("tokens"):
            raise UnsupportedCapabilityError(f"{self.descriptor.name} cannot echo logprobs")
        return _boundary_sum(lp["tokens"], lp["token_logprobs"], lp["text_offset"], len(prompt))


class HttpTranslationBackend(TranslationBackend):
    """NMT endpoint speaking the same completions wire; prompt = source text."""

    def __init__(self, descriptor: BackendDescriptor):
        self.descriptor = descriptor
        self._client = HttpCompletionBackend(replace(descriptor, kind="completion"))

    def translate(self, sentence: Sentence) -> Sentence:
        if not sentence.text.strip():
            raise EmptyFieldError("cannot translate an empty sentence")
        request = CompletionRequest(
            prompt=sentence.text,
            max_new_tokens=2 * sentence.token_count + 32,
            stop_sequences=("\n",),
        )
        result = self._client.complete(request)
        return Sentence.from_text(result.text)


@dataclass(frozen=True)
class ScriptedRule:
    """Regex rewrite of the prompt's hypothesis region.

    ``when_context`` (a regex over the full composed text) restricts when the
    rule fires, which is how fixtures make outputs context-sensitive.
    """

    pattern: str
    replace: str
    when_context: str | None = None


@dataclass
class ScriptedEntry:
    response: str
    logprobs: tuple[tuple[str, float], ...] | None = None


HYP_REGION_MARKER = "German Translation: "


class ScriptedBackend(CompletionBackend, TranslationBackend):
    """Deterministic backend driven by a fixture table.

    Responses are keyed by digest of the composed text; rule entries rewrite
    the hypothesis region of post-editing prompts for anything not explicitly
    scripted. Scoring walks whitespace tokens against a per-token score table.
    """

    def __init__(
        self,
        descriptor: BackendDescriptor | None = None,
        entries: Mapping[str, ScriptedEntry] | None = None,
        rules: Sequence[ScriptedRule] = (),
        token_scores: Mapping[str, float] | None = None,
        default_token_logprob: float = -0.5,
        supports_logprobs: bool = True,
        translation_table: Mapping[str, str] | None = None,
        marker: str = "",
    ):
        self.descriptor = descriptor or BackendDescriptor(
            name="scripted", kind="completion", endpoint="scripted:<memory>"
        )
        self._entries: dict[str, ScriptedEntry] = dict(entries or {})
        self._rules = list(rules)
        self._token_scores = dict(token_scores or {})
        self._default_token_logprob = default_token_logprob
        self._supports_logprobs = supports_logprobs
        self._translation_table = dict(translation_table) if translation_table is not None else None
        self._marker = marker
        self.calls = 0  # completion calls; tests assert call budgets

    def add_response(
        self,
        prompt: str,
        response: str,
        forced_prefix: str = "",
        logprobs: Sequence[tuple[str, float]] | None = None,
    ) -> None:
        entry = ScriptedEntry(response=response, logprobs=tuple(logprobs) if logprobs else None)
        self._entries[scripted_digest(prompt, forced_prefix)] = entry

    def add_rule(self, pattern: str, replace: str, when_context: str | None = None) -> None:
        self._rules.append(ScriptedRule(pattern, replace, when_context))

    def _rule_response(self, full: str, forced_prefix: str) -> str | None:
        marker_pos = full.find(HYP_REGION_MARKER)
        if marker_pos == -1:
            return None
        region_start = marker_pos + len(HYP_REGION_MARKER)
        region_end = full.find("\n", region_start)
        if region_end == -1:
            region_end = len(full)
        region = full[region_start:region_end]
        for rule in self._rules:
            if rule.when_context is not None and not re.search(rule.when_context, full):
                continue
            rewritten = re.sub(rule.pattern, rule.replace, region)
            if not forced_prefix:
                return f" {rewritten}"
            done = len(split_on_separator(forced_prefix))
            parts = split_on_separator(rewritten)
            return f" {join_with_separator(parts[done:])}"
        return None

    def complete(self, request: CompletionRequest) -> CompletionResult:
        self.calls += 1
        full = composed_text(request.prompt, request.forced_prefix)
        digest = hashlib.sha256(full.encode("utf-8")).hexdigest()
        entry = self._entries.get(digest)
        if entry is not None:
            raw = entry.response
        else:
            rule_out = self._rule_response(full, request.forced_prefix)
            if rule_out is None:
                raise RemoteError(f"{self.descriptor.name}: unscripted prompt (digest {digest[:12]})")
            raw = rule_out
        text, stop_found = truncate_at_stop(raw, request.stop_sequences)
        finish = "stop"
        if not stop_found and count_tokens(text) > request.max_new_tokens:
            text = " ".join(text.split()[: request.max_new_tokens])
            finish = "length"
        return CompletionResult(text=text.strip(), finish_reason=finish)

    def _token_table(self, full: str) -> tuple[list[str], list[float], list[int]]:
        digest = hashlib.sha256(full.encode("utf-8")).hexdigest()
        entry = self._entries.get(digest)
        if entry is not None and entry.logprobs is not None:
            tokens, lps, offsets = [], [], []
            cursor = 0
            for tok, lp in entry.logprobs:
                pos = full.find(tok, cursor)
                if pos == -1:
                    raise ProtocolError(f"fixture token {tok!r} not found in scored text")
                tokens.append(tok)
                lps.append(lp)
                offsets.append(pos)
                cursor = pos + len(tok)
            return tokens, lps, offsets
        tokens, lps, offsets = [], [], []
        for match in re.finditer(r"\S+", full):
            tok = match.group()
            tokens.append(tok)
            lps.append(self._token_scores.get(tok, self._default_token_logprob))
            offsets.append(match.start())
        return tokens, lps, offsets

    def score_continuation(self, prompt: str, continuation: str) -> float:
        if not continuation:
            raise EmptyContinuationError("continuation must be non-empty")
        if not self._supports_logprobs:
            raise UnsupportedCapabilityError(f"{self.descriptor.name} cannot echo logprobs")
        full = prompt + continuation
        tokens, lps, offsets = self._token_table(full)
        return _boundary_sum(tokens, lps, offsets, len(prompt))

    def translate(self, sentence: Sentence) -> Sentence:
        if not sentence.text.strip():
            raise EmptyFieldError("cannot translate an empty sentence")
        if self._translation_table is None:
            raise RemoteError(f"{self.descriptor.name}: fixture has no translation table")
        mapped = " ".join(self._translation_table.get(tok, tok) for tok in sentence.text.split())
        if self._marker:
            mapped = f"{self._marker} {mapped}"
        return Sentence.from_text(mapped)


class DictTranslationBackend(TranslationBackend):
    """Token-mapping translation double; the marker labels which mock answered."""

    def __init__(self, mapping: Mapping[str, str], marker: str = "", name: str = "dict-nmt"):
        self.descriptor = BackendDescriptor(name=name, kind="translation", endpoint="scripted:<memory>")
        self._inner = ScriptedBackend(
            descriptor=self.descriptor, translation_table=mapping, marker=marker
        )

    def translate(self, sentence: Sentence) -> Sentence:
        return self._inner.translate(sentence)


def load_scripted_backend(path: str | Path, descriptor: BackendDescriptor | None = None) -> ScriptedBackend:
    """Parse a record-per-line fixture into a ScriptedBackend.

    Records: {"digest"|"prompt", "response", "logprobs"?}, {"rule": {...}},
    {"defaults": {...}}, {"translate": {...}, "marker"?}.
    """
    entries: dict[str, ScriptedEntry] = {}
    rules: list[ScriptedRule] = []
    token_scores: dict[str, float] = {}
    default_lp = -0.5
    supports_logprobs = True
    translation_table = None
    marker = ""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FixtureParseError(f"invalid JSON: {exc.msg}", lineno) from exc
            if not isinstance(record, dict):
                raise FixtureParseError("record must be an object", lineno)
            if "digest" in record or "prompt" in record:
                if "response" not in record:
                    raise FixtureParseError("response field missing", lineno)
                digest = record.get("digest") or scripted_digest(
                    record["prompt"], record.get("forced_prefix", "")
                )
                logprobs = record.get("logprobs")
                entries[digest] = ScriptedEntry(
                    response=record["response"],
                    logprobs=tuple((t, float(p)) for t, p in logprobs) if logprobs else None,
                )
            elif "rule" in record:
                rule = record["rule"]
                if "pattern" not in rule or "replace" not in rule:
                    raise FixtureParseError("rule needs pattern and replace", lineno)
                rules.append(ScriptedRule(rule["pattern"], rule["replace"], rule.get("when_context")))
            elif "defaults" in record:
                d = record["defaults"]
                default_lp = float(d.get("token_logprob", default_lp))
                token_scores.update({k: float(v) for k, v in d.get("token_scores", {}).items()})
                supports_logprobs = bool(d.get("logprobs", supports_logprobs))
            elif "translate" in record:
                translation_table = dict(record["translate"])
                marker = record.get("marker", marker)
            else:
                raise FixtureParseError("unknown record kind", lineno)
    return ScriptedBackend(
        descriptor=descriptor,
        entries=entries,
        rules=rules,
        token_scores=token_scores,
        default_token_logprob=default_lp,
        supports_logprobs=supports_logprobs,
        translation_table=translation_table,
        marker=marker,
    )


def build_backend(descriptor: BackendDescriptor) -> CompletionBackend | TranslationBackend:
    """Instantiate the client matching a descriptor's endpoint and kind."""
    if descriptor.endpoint.startswith("scripted:"):
        return load_scripted_backend(descriptor.endpoint[len("scripted:") :], descriptor)
    if descriptor.kind == "completion":
        return HttpCompletionBackend(descriptor)
    if descriptor.kind == "translation":
        return HttpTranslationBackend(descriptor)
    raise UnsupportedCapabilityError(
        f"backend kind {descriptor.kind!r} has no client; embeddings come from precomputed files"
    )


def load_backend_config(path: str | Path) -> dict[str, BackendDescriptor]:
    """Read [[backends]] descriptors from a TOML config file.

    Relative scripted: paths are resolved against the config file's directory.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        data = tomli.load(fh)
    descriptors: dict[str, BackendDescriptor] = {}
    for raw in data.get("backends", []):
        endpoint = raw["endpoint"]
        if endpoint.startswith("scripted:"):
            fixture = Path(endpoint[len("scripted:") :])
            if not fixture.is_absolute():
                endpoint = f"scripted:{(path.parent / fixture)}"
        desc = BackendDescriptor(
            name=raw["name"],
            kind=raw.get("kind", "completion"),
            endpoint=endpoint,
            model_id=raw.get("model_id", ""),
            timeout_s=float(raw.get("timeout_s", 30.0)),
            max_retries=int(raw.get("max_retries", DEFAULT_MAX_RETRIES)),
            max_inflight=int(raw.get("max_inflight", DEFAULT_MAX_INFLIGHT)),
            backoff_base_s=float(raw.get("backoff_base_s", DEFAULT_BACKOFF_BASE_S)),
            backoff_factor=float(raw.get("backoff_factor", DEFAULT_BACKOFF_FACTOR)),
        )
        if desc.name in descriptors:
            raise ValueError(f"duplicate backend name {desc.name!r} in {path}")
        descriptors[desc.name] = desc
    return descriptors


def complete(backend: CompletionBackend, request: CompletionRequest) -> CompletionResult:
    if backend.descriptor.kind != "completion":
        raise UnsupportedCapabilityError(f"{backend.descriptor.name} is not a completion backend")
    return backend.complete(request)


def score_continuation(backend: CompletionBackend, prompt: str, continuation: str) -> float:
    if backend.descriptor.kind != "completion":
        raise UnsupportedCapabilityError(f"{backend.descriptor.name} is not a completion backend")
    return backend.score_continuation(prompt, continuation)


def translate(backend: TranslationBackend, sentence: Sentence) -> Sentence:
    if backend.descriptor.kind != "translation":
        raise UnsupportedCapabilityError(f"{backend.descriptor.name} is not a translation backend")
    return backend.translate(sentence)

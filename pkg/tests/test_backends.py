"""Completion/translation backends: scripted doubles, HTTP client, config."""

from __future__ import annotations

import json

import pytest

from docape.backends import (
    BackendDescriptor,
    CompletionRequest,
    DictTranslationBackend,
    HttpCompletionBackend,
    ScriptedBackend,
    build_backend,
    complete,
    load_backend_config,
    load_scripted_backend,
    translate,
    truncate_at_stop,
)
from docape.corpus import Sentence
from docape.errors import (
    BackendTimeoutError,
    EmptyContinuationError,
    EmptyFieldError,
    FixtureParseError,
    RemoteError,
    UnsupportedCapabilityError,
)

from conftest import failing_backend, identity_backend


def fast_descriptor(endpoint: str, **kwargs) -> BackendDescriptor:
    defaults = dict(
        name="llm",
        kind="completion",
        endpoint=endpoint,
        model_id="test-model",
        timeout_s=2.0,
        max_retries=2,
        backoff_base_s=0.01,
        backoff_factor=1.0,
    )
    defaults.update(kwargs)
    return BackendDescriptor(**defaults)


class TestScriptedComplete:
    def test_stop_truncation(self):
        backend = ScriptedBackend()
        backend.add_response("P", "abc <SS> def")
        result = backend.complete(CompletionRequest(prompt="P", stop_sequences=("<SS>",)))
        assert result.text == "abc"
        assert result.finish_reason == "stop"

    def test_unscripted_prompt_errors(self):
        with pytest.raises(RemoteError, match="unscripted prompt"):
            failing_backend().complete(CompletionRequest(prompt="never seen"))

    def test_finish_reason_length(self):
        backend = ScriptedBackend()
        backend.add_response("P", "one two three four five")
        result = backend.complete(CompletionRequest(prompt="P", max_new_tokens=3))
        assert result.finish_reason == "length"
        assert result.text == "one two three"

    def test_forced_prefix_keys_digest(self):
        backend = ScriptedBackend()
        backend.add_response("P", "with prefix", forced_prefix="t1 <SS>")
        request = CompletionRequest(prompt="P", forced_prefix="t1 <SS>")
        assert backend.complete(request).text == "with prefix"
        with pytest.raises(RemoteError):
            backend.complete(CompletionRequest(prompt="P"))

    def test_identity_rule_echoes_hypothesis_region(self):
        backend = identity_backend()
        prompt = "English: a <SS> b\nGerman Translation: x <SS> y\nPost-Edited Translation:"
        result = backend.complete(CompletionRequest(prompt=prompt))
        assert result.text == "x <SS> y"

    def test_rule_rewrites_hypothesis_region(self):
        backend = ScriptedBackend()
        backend.add_rule("Haus", "Gebäude")
        prompt = "English: the house\nGerman Translation: das Haus\nPost-Edited Translation:"
        result = backend.complete(CompletionRequest(prompt=prompt))
        assert result.text == "das Gebäude"

    def test_rule_skips_forced_sentences(self):
        backend = identity_backend()
        prompt = "English: a <SS> b <SS> c\nGerman Translation: x <SS> y <SS> z\nPost-Edited Translation:"
        request = CompletionRequest(
            prompt=prompt, forced_prefix="x <SS> y <SS>", stop_sequences=("<SS>",)
        )
        assert backend.complete(request).text == "z"

    def test_deterministic(self):
        backend = identity_backend()
        prompt = "English: a\nGerman Translation: x\nPost-Edited Translation:"
        request = CompletionRequest(prompt=prompt)
        assert backend.complete(request) == backend.complete(request)


class TestScriptedScoring:
    def test_half_logprob_per_token(self):
        backend = ScriptedBackend(default_token_logprob=-0.5)
        assert backend.score_continuation("P:", " a b c d") == pytest.approx(-2.0)

    def test_empty_continuation(self):
        with pytest.raises(EmptyContinuationError):
            ScriptedBackend().score_continuation("P:", "")

    def test_additivity(self):
        backend = ScriptedBackend(default_token_logprob=-0.25)
        prompt = "Post-Edited Translation:"
        a = " t1 und t2"
        b = " t3 oder t4"
        combined = backend.score_continuation(prompt, a + b)
        split = backend.score_continuation(prompt, a) + backend.score_continuation(prompt + a, b)
        assert split == pytest.approx(combined)

    def test_token_score_overrides(self):
        backend = ScriptedBackend(token_scores={"Er": -0.1}, default_token_logprob=-1.0)
        er = backend.score_continuation("P:", " Er kommt")
        sie = backend.score_continuation("P:", " Es kommt")
        assert er == pytest.approx(-1.1)
        assert sie == pytest.approx(-2.0)

    def test_unsupported_logprobs(self):
        backend = ScriptedBackend(supports_logprobs=False)
        with pytest.raises(UnsupportedCapabilityError):
            backend.score_continuation("P:", " x")

    def test_digest_logprob_table(self):
        # scoring looks up the digest of the full prompt+continuation text
        backend = ScriptedBackend()
        backend.add_response("abcd", "", logprobs=[("a", -1.0), ("b", -2.0), ("cd", -4.0)])
        assert backend.score_continuation("ab", "cd") == pytest.approx(-4.0)


class TestTranslationDoubles:
    def test_dictionary_mapping(self):
        backend = DictTranslationBackend({"cat": "Katze"})
        result = backend.translate(Sentence.from_text("cat ."))
        assert result.text == "Katze ."

    def test_empty_sentence_rejected(self):
        with pytest.raises(EmptyFieldError):
            DictTranslationBackend({}).translate(Sentence.from_text(""))

    def test_output_sanitized(self):
        backend = ScriptedBackend(translation_table={"x": "<SS>"},
                                  descriptor=BackendDescriptor("n", "translation", "scripted:<memory>"))
        assert backend.translate(Sentence.from_text("x")).text == "< SS >"

    def test_marker_prefix(self):
        backend = DictTranslationBackend({"cat": "Katze"}, marker="[A]")
        assert backend.translate(Sentence.from_text("cat")).text == "[A] Katze"

    def test_kind_enforced(self):
        backend = identity_backend()
        with pytest.raises(UnsupportedCapabilityError):
            translate(backend, Sentence.from_text("x"))
        nmt = DictTranslationBackend({})
        with pytest.raises(UnsupportedCapabilityError):
            complete(nmt, CompletionRequest(prompt="x"))  # type: ignore[arg-type]


class TestTruncateAtStop:
    def test_earliest_stop_wins(self):
        text, found = truncate_at_stop("abc\ndef <SS> ghi", ("<SS>", "\n"))
        assert text == "abc"
        assert found

    def test_no_stop(self):
        text, found = truncate_at_stop("abc", ("\n",))
        assert text == "abc"
        assert not found


class TestFixtureFile:
    def test_load_and_serve(self, tmp_path):
        prompt = "English: a\nGerman Translation: x\nPost-Edited Translation:"
        fixture = tmp_path / "llm.jsonl"
        records = [
            {"prompt": prompt, "response": " fixed"},
            {"rule": {"pattern": "Haus", "replace": "Gebäude"}},
            {"defaults": {"token_logprob": -0.25, "token_scores": {"Er": -0.125}}},
        ]
        fixture.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")
        backend = load_scripted_backend(fixture)
        assert backend.complete(CompletionRequest(prompt=prompt)).text == "fixed"
        other = "English: b\nGerman Translation: ein Haus\nPost-Edited Translation:"
        assert backend.complete(CompletionRequest(prompt=other)).text == "ein Gebäude"
        assert backend.score_continuation("P:", " Er da") == pytest.approx(-0.375)

    def test_parse_error_carries_line(self, tmp_path):
        fixture = tmp_path / "bad.jsonl"
        fixture.write_text('{"prompt": "a", "response": "b"}\nnot json\n', encoding="utf-8")
        with pytest.raises(FixtureParseError) as info:
            load_scripted_backend(fixture)
        assert info.value.line == 2

    def test_unknown_record_kind(self, tmp_path):
        fixture = tmp_path / "bad.jsonl"
        fixture.write_text('{"mystery": 1}\n', encoding="utf-8")
        with pytest.raises(FixtureParseError) as info:
            load_scripted_backend(fixture)
        assert info.value.line == 1


class TestHttpBackend:
    def test_complete_round_trip(self, stub_server):
        stub_server.responder = lambda req: (
            200,
            {"choices": [{"text": " Hallo Welt\nextra", "finish_reason": "length"}]},
        )
        backend = HttpCompletionBackend(fast_descriptor(stub_server.endpoint))
        result = backend.complete(
            CompletionRequest(prompt="Hello", stop_sequences=("\n",), max_new_tokens=8)
        )
        assert result.text == "Hallo Welt"
        assert result.finish_reason == "stop"
        sent = stub_server.requests[-1]
        assert sent["prompt"] == "Hello"
        assert sent["stop"] == ["\n"]
        assert sent["max_tokens"] == 8

    def test_forced_prefix_composed_into_prompt(self, stub_server):
        stub_server.responder = lambda req: (200, {"choices": [{"text": " t3", "finish_reason": "stop"}]})
        backend = HttpCompletionBackend(fast_descriptor(stub_server.endpoint))
        backend.complete(CompletionRequest(prompt="base:", forced_prefix="t1 <SS> t2 <SS>"))
        assert stub_server.requests[-1]["prompt"] == "base: t1 <SS> t2 <SS>"

    def test_retry_then_success(self, stub_server):
        attempts = []

        def responder(req):
            attempts.append(1)
            if len(attempts) < 3:
                return 500, {"error": "boom"}
            return 200, {"choices": [{"text": "ok", "finish_reason": "stop"}]}

        stub_server.responder = responder
        backend = HttpCompletionBackend(fast_descriptor(stub_server.endpoint, max_retries=3))
        assert backend.complete(CompletionRequest(prompt="x")).text == "ok"
        assert len(attempts) == 3

    def test_retries_exhausted(self, stub_server):
        stub_server.responder = lambda req: (500, {"error": "down"})
        backend = HttpCompletionBackend(fast_descriptor(stub_server.endpoint, max_retries=1))
        with pytest.raises(RemoteError):
            backend.complete(CompletionRequest(prompt="x"))
        assert len(stub_server.requests) == 2

    def test_timeout_surfaced(self, stub_server):
        import time as _time

        def responder(req):
            _time.sleep(0.3)
            return 200, {"choices": [{"text": "late", "finish_reason": "stop"}]}

        stub_server.responder = responder
        backend = HttpCompletionBackend(
            fast_descriptor(stub_server.endpoint, timeout_s=0.05, max_retries=1)
        )
        with pytest.raises(BackendTimeoutError):
            backend.complete(CompletionRequest(prompt="x"))

    def test_score_continuation_recorded_fixture(self, stub_server):
        # Recorded echo-mode response: tokens, per-token logprobs, offsets into
        # the echoed text. The token "bc" straddles the prompt/continuation
        # boundary at offset 2 and must count toward the continuation.
        recorded = {
            "choices": [
                {
                    "text": "abcd",
                    "finish_reason": "stop",
                    "logprobs": {
                        "tokens": ["a", "bc", "d"],
                        "token_logprobs": [None, -1.5, -2.25],
                        "text_offset": [0, 1, 3],
                    },
                }
            ]
        }
        stub_server.responder = lambda req: (200, recorded)
        backend = HttpCompletionBackend(fast_descriptor(stub_server.endpoint))
        score = backend.score_continuation("ab", "cd")
        # manual summation over the fixture: "a" ends at 1 <= 2 and is prompt-side
        # (its logprob is null anyway); "bc" ends at 3 > 2; "d" ends at 4 > 2.
        assert score == pytest.approx(-1.5 + -2.25)
        sent = stub_server.requests[-1]
        assert sent["echo"] is True
        assert sent["max_tokens"] == 0
        assert sent["prompt"] == "abcd"

    def test_score_without_logprobs_unsupported(self, stub_server):
        stub_server.responder = lambda req: (200, {"choices": [{"text": "abcd"}]})
        backend = HttpCompletionBackend(fast_descriptor(stub_server.endpoint))
        with pytest.raises(UnsupportedCapabilityError):
            backend.score_continuation("ab", "cd")


class TestBackendConfig:
    def test_load_and_build(self, tmp_path):
        fixture = tmp_path / "llm.jsonl"
        fixture.write_text('{"rule": {"pattern": "(?!)", "replace": ""}}\n', encoding="utf-8")
        nmt_fixture = tmp_path / "nmt.jsonl"
        nmt_fixture.write_text('{"translate": {"cat": "Katze"}}\n', encoding="utf-8")
        config = tmp_path / "backends.toml"
        config.write_text(
            "\n".join(
                [
                    "[[backends]]",
                    'name = "llm"',
                    'kind = "completion"',
                    'endpoint = "scripted:llm.jsonl"',
                    "",
                    "[[backends]]",
                    'name = "nmt"',
                    'kind = "translation"',
                    'endpoint = "scripted:nmt.jsonl"',
                    "max_retries = 5",
                ]
            ),
            encoding="utf-8",
        )
        descriptors = load_backend_config(config)
        assert set(descriptors) == {"llm", "nmt"}
        assert descriptors["nmt"].max_retries == 5
        nmt = build_backend(descriptors["nmt"])
        assert nmt.translate(Sentence.from_text("cat")).text == "Katze"
        llm = build_backend(descriptors["llm"])
        prompt = "English: a\nGerman Translation: x\nPost-Edited Translation:"
        assert llm.complete(CompletionRequest(prompt=prompt)).text == "x"

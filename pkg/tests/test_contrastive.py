"""Contrastive pronoun scoring: argmax, ties, shift invariance, benchmarks."""

from __future__ import annotations

import pytest

from docape.backends import BackendDescriptor, CompletionBackend, ScriptedBackend
from docape.contrastive import (
    ContrastiveInstance,
    read_instances,
    run_benchmark,
    score_instance,
)
from docape.errors import EmptyBenchmarkError, LengthMismatchError
from docape.prompts import render_doc_ape

from conftest import identity_nmt


class FixedScoreBackend(CompletionBackend):
    """Scores a continuation by the first matching substring in a table."""

    def __init__(self, table: dict[str, float]):
        self.descriptor = BackendDescriptor("fixed", "completion", "scripted:<memory>")
        self.table = table
        self.scored: list[tuple[str, str]] = []

    def score_continuation(self, prompt: str, continuation: str) -> float:
        self.scored.append((prompt, continuation))
        for key, value in self.table.items():
            if key in continuation:
                return value
        raise AssertionError(f"no table entry for {continuation!r}")


def instance(candidates=("Er kommt .", "Sie kommt .", "Es kommt ."), correct=0, ctx=()):
    return ContrastiveInstance(
        src="he arrives .",
        candidates=tuple(candidates),
        correct_index=correct,
        src_context=tuple(ctx),
    )


class TestScoreInstance:
    def test_argmax(self):
        backend = FixedScoreBackend({"Er": -0.5, "Sie": -1.2, "Es": -3.0})
        result = score_instance(instance(), identity_nmt(), backend)
        assert result.chosen == 0
        assert result.correct

    def test_tie_goes_to_lowest_index(self):
        backend = FixedScoreBackend({"Er": -1.0, "Sie": -1.0, "Es": -2.0})
        result = score_instance(instance(), identity_nmt(), backend)
        assert result.chosen == 0

    def test_constant_shift_keeps_choice(self):
        base = {"Er": -0.5, "Sie": -1.2, "Es": -3.0}
        shifted = {k: v - 7.5 for k, v in base.items()}
        first = score_instance(instance(), identity_nmt(), FixedScoreBackend(base))
        second = score_instance(instance(), identity_nmt(), FixedScoreBackend(shifted))
        assert first.chosen == second.chosen

    def test_ctx_zero_scores_candidate_alone(self):
        backend = FixedScoreBackend({"Er": -0.5, "Sie": -1.2, "Es": -3.0})
        inst = instance(ctx=("context a .", "context b ."))
        score_instance(inst, identity_nmt(), backend, ctx_size=0)
        prompt, continuation = backend.scored[0]
        # no context: the prompt covers only the current sentence and the
        # region is the bare candidate
        expected = render_doc_ape(["he arrives ."], ["he arrives ."]).prompt_text
        assert prompt == expected
        assert continuation == " Er kommt ."

    def test_context_included_at_ctx_two(self):
        backend = FixedScoreBackend({"Er": -0.5, "Sie": -1.2, "Es": -3.0})
        inst = instance(ctx=("context a .", "context b ."))
        score_instance(inst, identity_nmt(), backend, ctx_size=2)
        prompt, continuation = backend.scored[0]
        assert "context a . <SS> context b . <SS> he arrives ." in prompt
        assert continuation == " context a . <SS> context b . <SS> Er kommt ."

    def test_provided_context_hyps_skip_translation(self):
        calls = []

        class CountingNmt(type(identity_nmt())):
            def translate(self, sentence):
                calls.append(sentence.text)
                return super().translate(sentence)

        nmt = CountingNmt({})
        backend = FixedScoreBackend({"Er": -0.5, "Sie": -1.0, "Es": -2.0})
        inst = ContrastiveInstance(
            src="he arrives .",
            candidates=("Er kommt .", "Sie kommt .", "Es kommt ."),
            correct_index=0,
            src_context=("ctx one .",),
            tgt_context_hyps=("Kontext eins .",),
        )
        score_instance(inst, nmt, backend, ctx_size=1)
        # only the current source needed translation
        assert calls == ["he arrives ."]
        assert "Kontext eins ." in backend.scored[0][1]

    def test_scripted_token_scores_end_to_end(self):
        backend = ScriptedBackend(token_scores={"Er": -0.1, "Sie": -2.0, "Es": -3.0})
        result = score_instance(instance(), identity_nmt(), backend)
        assert result.chosen == 0
        # same-length candidates: non-pronoun tokens contribute equally
        assert result.scores[1] - result.scores[0] == pytest.approx(-1.9)

    def test_mismatched_context_hyps_rejected(self):
        with pytest.raises(LengthMismatchError):
            ContrastiveInstance(
                src="s",
                candidates=("a", "b"),
                correct_index=0,
                src_context=("c1", "c2"),
                tgt_context_hyps=("t1",),
            )


class TestBenchmark:
    def test_always_correct_backend_scores_one(self):
        backend = FixedScoreBackend({"Er": -0.5, "Sie": -1.2, "Es": -3.0})
        instances = [instance(correct=0) for _ in range(4)]
        result = run_benchmark(instances, identity_nmt(), backend)
        assert result.accuracy == 1.0

    def test_half_correct_backend_scores_half(self):
        backend = FixedScoreBackend({"Er": -0.5, "Sie": -1.2, "Es": -3.0})
        instances = [instance(correct=0), instance(correct=1)]
        result = run_benchmark(instances, identity_nmt(), backend)
        assert result.accuracy == 0.5

    def test_empty_benchmark(self):
        with pytest.raises(EmptyBenchmarkError):
            run_benchmark([], identity_nmt(), FixedScoreBackend({}))

    def test_permutation_invariant_accuracy(self):
        backend = FixedScoreBackend({"Er": -0.5, "Sie": -1.2, "Es": -3.0})
        instances = [instance(correct=0), instance(correct=1), instance(correct=2)]
        forward = run_benchmark(instances, identity_nmt(), backend).accuracy
        backward = run_benchmark(instances[::-1], identity_nmt(), backend).accuracy
        assert forward == backward

    def test_per_instance_log(self, tmp_path):
        backend = FixedScoreBackend({"Er": -0.5, "Sie": -1.2, "Es": -3.0})
        result = run_benchmark([instance()], identity_nmt(), backend)
        assert result.per_instance[0]["scores"] == [-0.5, -1.2, -3.0]
        out = tmp_path / "results.jsonl"
        result.write(out)
        assert out.read_text(encoding="utf-8").count("\n") == 2


class TestInstanceIO:
    def test_read_instances(self, tmp_path):
        path = tmp_path / "instances.jsonl"
        path.write_text(
            '{"src": "s", "candidates": ["a", "b"], "correct_index": 1, '
            '"src_context": ["c"], "tgt_context_hyps": ["t"]}\n',
            encoding="utf-8",
        )
        [inst] = read_instances(path)
        assert inst.correct_index == 1
        assert inst.tgt_context_hyps == ("t",)

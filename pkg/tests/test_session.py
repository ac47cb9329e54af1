"""Manual post-editing sessions: prefix preservation, immutability, replay."""

from __future__ import annotations

import pytest

from docape.backends import ScriptedBackend, ScriptedRule
from docape.decoding import Provenance, Strategy
from docape.errors import (
    BackendUnavailableError,
    EmptyFieldError,
    IndexOutOfRangeError,
    LengthMismatchError,
)
from docape.session import SentenceStatus, apply_edit, create_session, edit_effort, levenshtein

from conftest import IDENTITY_RULE, failing_backend, identity_backend, identity_nmt, make_doc
from oracles import oracle_levenshtein


@pytest.fixture
def doc5(small_doc):
    return small_doc


def fresh_session(doc, llm=None, strategy=Strategy.CONTINUOUS_SW):
    return create_session(doc, strategy, identity_nmt(), llm or identity_backend(), chunk_limit=64)


class TestCreateSession:
    def test_initial_state(self, doc5):
        session = fresh_session(doc5)
        assert session.n == 5
        assert session.revision == 1
        assert len(session.outputs) == 5
        assert all(s is SentenceStatus.MACHINE for s in session.statuses)
        # identity NMT + identity post-editor: outputs echo the source text
        assert session.outputs[0].text == doc5.sentences[0].text

    def test_translation_backend_down(self, doc5):
        broken = ScriptedBackend()  # no translation table
        broken.descriptor = broken.descriptor
        with pytest.raises(BackendUnavailableError):
            create_session(doc5, Strategy.SENTENCE, broken, identity_backend())

    def test_sentence_strategy_initial_decode(self, doc5):
        # sentence strategy renders sentence prompts only: the identity rule
        # echoes the hypothesis region, which for SentencePE holds one sentence
        session = fresh_session(doc5, strategy=Strategy.SENTENCE)
        assert [o.text for o in session.outputs] == session.nmt_hyps

    def test_failing_llm_marks_fallback(self, doc5):
        session = fresh_session(doc5, llm=failing_backend())
        assert all(s is SentenceStatus.FALLBACK for s in session.statuses)


class TestApplyEdit:
    def test_prefix_preserved_and_suffix_regenerated(self, doc5):
        session = fresh_session(doc5)
        before = [o.text for o in session.outputs]
        apply_edit(session, 2, "KORRIGIERT zwei .", identity_backend())
        after = [o.text for o in session.outputs]
        assert after[:2] == before[:2]
        assert after[2] == "KORRIGIERT zwei ."
        assert session.outputs[2].provenance is Provenance.HUMAN
        assert session.statuses[2] is SentenceStatus.HUMAN
        # suffix regenerated (identity backend keeps hypothesis text, LLM provenance)
        assert session.statuses[3] is SentenceStatus.MACHINE
        assert session.statuses[4] is SentenceStatus.MACHINE

    def test_edit_last_sentence_no_regeneration(self, doc5):
        session = fresh_session(doc5)
        backend = identity_backend()
        calls_before = backend.calls
        apply_edit(session, 4, "Letzter Satz .", backend)
        assert backend.calls == calls_before

    def test_revision_increments(self, doc5):
        session = fresh_session(doc5)
        rev = session.revision
        apply_edit(session, 2, "Neu .", identity_backend())
        # one bump for the edit + one per regenerated sentence (indices 3, 4)
        assert session.revision == rev + 3

    def test_index_out_of_range(self, doc5):
        session = fresh_session(doc5)
        with pytest.raises(IndexOutOfRangeError):
            apply_edit(session, 7, "x", identity_backend())

    def test_empty_text_rejected(self, doc5):
        session = fresh_session(doc5)
        with pytest.raises(EmptyFieldError):
            apply_edit(session, 1, "   ", identity_backend())

    def test_human_sentences_survive_later_edits(self, doc5):
        session = fresh_session(doc5)
        llm = identity_backend()
        apply_edit(session, 3, "MENSCH drei .", llm)
        apply_edit(session, 1, "MENSCH eins .", llm)
        assert session.outputs[3].text == "MENSCH drei ."
        assert session.statuses[3] is SentenceStatus.HUMAN
        assert session.outputs[1].text == "MENSCH eins ."

    def test_replay_determinism(self, doc5):
        edits = [(2, "zwei NEU ."), (1, "eins NEU ."), (4, "vier NEU .")]
        finals = []
        for _ in range(2):
            session = fresh_session(doc5)
            llm = identity_backend()
            for index, text in edits:
                apply_edit(session, index, text, llm)
            finals.append([o.text for o in session.outputs])
        assert finals[0] == finals[1]

    def test_edit_text_sanitized(self, doc5):
        session = fresh_session(doc5)
        apply_edit(session, 0, "mit <SS> drin", identity_backend())
        assert "<SS>" not in session.outputs[0].text


class TestContextSensitivePropagation:
    def test_edit_effort_strictly_decreases(self):
        doc = make_doc("d", ["the cat sleeps .", "it sleeps ."])
        refs = ["Die Katze schläft tief .", "Er schläft ."]
        # NMT (identity) leaves English; the post-editor echoes hypotheses
        # except when the forced context contains the corrected first sentence,
        # in which case it fixes the downstream pronoun.
        llm = ScriptedBackend(
            rules=[
                ScriptedRule(pattern=r"it sleeps", replace="Er schläft", when_context="tief"),
                IDENTITY_RULE,
            ]
        )
        session = create_session(doc, Strategy.CONTINUOUS_SW, identity_nmt(), llm, chunk_limit=64)
        outputs_before = [o.text for o in session.outputs]
        _, total_before = edit_effort(outputs_before, refs)
        _, downstream_before = edit_effort(outputs_before[1:], refs[1:])
        apply_edit(session, 0, refs[0], llm)
        outputs_after = [o.text for o in session.outputs]
        _, total_after = edit_effort(outputs_after, refs)
        _, downstream_after = edit_effort(outputs_after[1:], refs[1:])
        assert outputs_after[1] == "Er schläft ."
        assert downstream_after < downstream_before
        assert total_after < total_before


class TestEditEffort:
    def test_identical(self):
        per, total = edit_effort(["a", "b"], ["a", "b"])
        assert per == [0, 0]
        assert total == 0

    def test_single_substitution(self):
        assert levenshtein("abc", "abd") == 1

    def test_per_sentence_and_total(self):
        per, total = edit_effort(["ab", "c"], ["ab", "cd"])
        assert per == [0, 1]
        assert total == 1

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            edit_effort(["a"], ["a", "b"])

    def test_matches_full_matrix_oracle(self):
        import random

        rng = random.Random(23)
        for _ in range(50):
            a = "".join(rng.choices("abcde", k=rng.randint(0, 12)))
            b = "".join(rng.choices("abcde", k=rng.randint(0, 12)))
            assert levenshtein(a, b) == oracle_levenshtein(a, b)

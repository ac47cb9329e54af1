"""Rule-based tagging of context-dependent words: pronouns, formality, cohesion.

A deliberately simple stand-in for alignment-based contextual taggers: rules
operate on whitespace tokens with sentence-level source alignment. Lexicons
are fully configurable; an empty lexicon disables exactly that rule.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import tomli

from .corpus import Document
from .errors import LengthMismatchError


class Phenomenon(enum.Enum):
    PRONOUN = "pronoun"
    FORMALITY = "formality"
    LEXICAL_COHESION = "lexical_cohesion"


@dataclass(frozen=True)
class TagSpan:
    phenomenon: Phenomenon
    sentence_index: int
    token_index: int
    surface: str


@dataclass(frozen=True)
class TagLexicons:
    """Rule configuration; sets are matched against whitespace tokens."""

    ambiguous_target_pronouns: frozenset[str] = frozenset()
    source_trigger_pronouns: frozenset[str] = frozenset()
    formality_markers: frozenset[str] = frozenset()
    stopwords: frozenset[str] = frozenset()
    cohesion_min_length: int = 4


# EN->DE defaults: third-person pronouns whose German form depends on the
# antecedent's grammatical gender, the formal second-person paradigm, and a
# small function-word stoplist for the cohesion rule.
DEFAULT_LEXICONS = TagLexicons(
    ambiguous_target_pronouns=frozenset({"er", "sie", "es"}),
    source_trigger_pronouns=frozenset({"it", "they"}),
    formality_markers=frozenset({"Sie", "Ihnen", "Ihrer"}),
    stopwords=frozenset(
        """
        aber alle als also auch auf aus bei bin bist dann das dass dem den denn
        der des dich die dies diese dir doch dort durch eine einem einen einer
        eines für hab habe haben hat hier ich ihm ihn ihr ihre ist kann mein
        mich mir mit nach nicht noch nur oder ohne sehr sein seine sich sind
        über und uns unser vom von vor war waren warum weil wenn wie wir wird
        wurde zum zur
        """.split()
    ),
    cohesion_min_length=4,
)


def tag_document(
    target_doc: Document,
    source_doc: Document | None = None,
    lexicons: TagLexicons = DEFAULT_LEXICONS,
) -> list[TagSpan]:
    """Tag context-dependent tokens of a target document.

    Pronoun tags need the sentence-aligned source document (the rule checks
    for an ambiguous trigger pronoun in the aligned source sentence) and are
    skipped without one. Formality matches case-sensitively; capitalized
    markers only count mid-sentence, where capitalization is informative.
    Cohesion tags content tokens re-occurring from earlier sentences.
    """
    if source_doc is not None and len(source_doc) != len(target_doc):
        raise LengthMismatchError(
            f"source has {len(source_doc)} sentences, target {len(target_doc)}"
        )
    pronoun_on = (
        bool(lexicons.ambiguous_target_pronouns)
        and bool(lexicons.source_trigger_pronouns)
        and source_doc is not None
    )
    formality_on = bool(lexicons.formality_markers)
    cohesion_on = bool(lexicons.stopwords) and lexicons.cohesion_min_length >= 1

    tags: list[TagSpan] = []
    seen_content: set[str] = set()
    for i, sentence in enumerate(target_doc.sentences):
        tokens = sentence.text.split()
        source_triggers = False
        if pronoun_on:
            source_tokens = source_doc.sentences[i].text.split()
            source_triggers = any(
                tok.casefold() in lexicons.source_trigger_pronouns for tok in source_tokens
            )
        sentence_content: list[str] = []
        for k, token in enumerate(tokens):
            folded = token.casefold()
            if pronoun_on and source_triggers and folded in lexicons.ambiguous_target_pronouns:
                tags.append(TagSpan(Phenomenon.PRONOUN, i, k, token))
            if formality_on and token in lexicons.formality_markers:
                if not token[0].isupper() or k > 0:
                    tags.append(TagSpan(Phenomenon.FORMALITY, i, k, token))
            if cohesion_on and len(folded) >= lexicons.cohesion_min_length and folded not in lexicons.stopwords:
                if folded in seen_content:
                    tags.append(TagSpan(Phenomenon.LEXICAL_COHESION, i, k, token))
                sentence_content.append(folded)
        seen_content.update(sentence_content)
    return tags


def tag_corpus(
    target_docs: Iterable[Document],
    source_docs: Iterable[Document] | None = None,
    lexicons: TagLexicons = DEFAULT_LEXICONS,
) -> list[TagSpan]:
    """Tag a whole corpus, shifting sentence indices so they stay unique."""
    targets = list(target_docs)
    sources = list(source_docs) if source_docs is not None else [None] * len(targets)
    if len(sources) != len(targets):
        raise LengthMismatchError(f"{len(sources)} source docs but {len(targets)} target docs")
    tags: list[TagSpan] = []
    offset = 0
    for target, source in zip(targets, sources):
        for tag in tag_document(target, source, lexicons):
            tags.append(
                TagSpan(tag.phenomenon, tag.sentence_index + offset, tag.token_index, tag.surface)
            )
        offset += len(target)
    return tags


def load_lexicons(path: str | Path) -> TagLexicons:
    """Read a [lexicons] TOML table; absent fields keep the EN->DE defaults."""
    with open(path, "rb") as fh:
        data = tomli.load(fh)
    table = data.get("lexicons", data)
    return TagLexicons(
        ambiguous_target_pronouns=frozenset(
            table.get("ambiguous_target_pronouns", DEFAULT_LEXICONS.ambiguous_target_pronouns)
        ),
        source_trigger_pronouns=frozenset(
            table.get("source_trigger_pronouns", DEFAULT_LEXICONS.source_trigger_pronouns)
        ),
        formality_markers=frozenset(table.get("formality_markers", DEFAULT_LEXICONS.formality_markers)),
        stopwords=frozenset(table.get("stopwords", DEFAULT_LEXICONS.stopwords)),
        cohesion_min_length=int(table.get("cohesion_min_length", DEFAULT_LEXICONS.cohesion_min_length)),
    )


def write_tags(tags: Iterable[TagSpan], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tag in tags:
            fh.write(
                json.dumps(
                    {
                        "phenomenon": tag.phenomenon.value,
                        "sentence_index": tag.sentence_index,
                        "token_index": tag.token_index,
                        "surface": tag.surface,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_tags(path: str | Path) -> list[TagSpan]:
    tags = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            tags.append(
                TagSpan(
                    Phenomenon(record["phenomenon"]),
                    record["sentence_index"],
                    record["token_index"],
                    record["surface"],
                )
            )
    return tags

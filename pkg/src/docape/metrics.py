"""Corpus metrics: BLEU, chrF2, and tag-based precision/recall/F1.

These are pinned, oracle-tested conventions, not byte-parity ports of any
external scorer. BLEU-4 pools clipped n-gram counts over the corpus and
multiplies the geometric mean by a brevity penalty; chrF2 averages per-order
F2 scores over pooled character n-gram statistics.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyCorpusError, LengthMismatchError
from .tagger import Phenomenon, TagSpan

BLEU_ORDER = 4
CHRF_ORDER = 6
CHRF_BETA = 2.0

_PUNCT_SPLIT = re.compile(r'([.,!?;:"()])')


def bleu_tokenize(text: str) -> list[str]:
    """Whitespace tokens after splitting punctuation into standalone tokens."""
    return _PUNCT_SPLIT.sub(r" \1 ", text).split()


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hyps: Sequence[str], refs: Sequence[str], smoothing: str = "none") -> float:
    """Corpus-level BLEU-4 in [0, 100].

    Unsmoothed, any order with zero clipped matches (including a hypothesis
    corpus too short to contain that order) makes the score 0. ``add_one``
    smoothing uses (correct+1)/(total+1) for orders 2..4.
    """
    if smoothing not in ("none", "add_one"):
        raise ValueError(f"unknown smoothing {smoothing!r}")
    if len(hyps) != len(refs):
        raise LengthMismatchError(f"{len(hyps)} hypotheses but {len(refs)} references")
    if not hyps:
        raise EmptyCorpusError("BLEU over an empty corpus")
    correct = [0] * BLEU_ORDER
    total = [0] * BLEU_ORDER
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hyps, refs):
        hyp_toks = bleu_tokenize(hyp)
        ref_toks = bleu_tokenize(ref)
        hyp_len += len(hyp_toks)
        ref_len += len(ref_toks)
        for n in range(1, BLEU_ORDER + 1):
            hyp_ngrams = _ngram_counts(hyp_toks, n)
            ref_ngrams = _ngram_counts(ref_toks, n)
            total[n - 1] += sum(hyp_ngrams.values())
            correct[n - 1] += sum((hyp_ngrams & ref_ngrams).values())
    if hyp_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, BLEU_ORDER + 1):
        c, t = correct[n - 1], total[n - 1]
        if smoothing == "add_one" and n >= 2:
            c, t = c + 1, t + 1
        if c == 0 or t == 0:
            return 0.0
        log_sum += math.log(c / t)
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(log_sum / BLEU_ORDER)


def _char_ngram_counts(text: str, n: int) -> Counter:
    return Counter(text[i : i + n] for i in range(len(text) - n + 1))


def chrf2(hyps: Sequence[str], refs: Sequence[str]) -> float:
    """Corpus chrF with beta=2 in [0, 100].

    Whitespace is removed before extracting character n-grams of order 1..6;
    per-order F2 over pooled counts is averaged over the orders for which the
    reference side has any n-grams at all.
    """
    if len(hyps) != len(refs):
        raise LengthMismatchError(f"{len(hyps)} hypotheses but {len(refs)} references")
    if not hyps:
        raise EmptyCorpusError("chrF over an empty corpus")
    stripped_hyps = ["".join(h.split()) for h in hyps]
    stripped_refs = ["".join(r.split()) for r in refs]
    beta_sq = CHRF_BETA * CHRF_BETA
    f_total = 0.0
    used_orders = 0
    for n in range(1, CHRF_ORDER + 1):
        matched = hyp_total = ref_total = 0
        for h, r in zip(stripped_hyps, stripped_refs):
            hyp_ngrams = _char_ngram_counts(h, n)
            ref_ngrams = _char_ngram_counts(r, n)
            hyp_total += sum(hyp_ngrams.values())
            ref_total += sum(ref_ngrams.values())
            matched += sum((hyp_ngrams & ref_ngrams).values())
        if ref_total == 0:
            continue
        used_orders += 1
        precision = matched / hyp_total if hyp_total else 0.0
        recall = matched / ref_total
        if precision + recall > 0:
            f_total += (1 + beta_sq) * precision * recall / (beta_sq * precision + recall)
    if used_orders == 0:
        return 0.0
    return 100.0 * f_total / used_orders


@dataclass(frozen=True)
class Prf:
    precision: float
    recall: float
    f1: float
    hyp_tags: int
    ref_tags: int
    matched: int


def _prf(matched: int, hyp_total: int, ref_total: int) -> Prf:
    if hyp_total == 0 and ref_total == 0:
        return Prf(1.0, 1.0, 1.0, 0, 0, 0)
    p = matched / hyp_total if hyp_total else 0.0
    r = matched / ref_total if ref_total else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return Prf(p, r, f1, hyp_total, ref_total, matched)


def tag_prf(hyp_tags: Iterable[TagSpan], ref_tags: Iterable[TagSpan]) -> dict[Phenomenon, Prf]:
    """Per-phenomenon P/R/F1 over sentence-aligned tag sets.

    Matching is the per-sentence multiset intersection of tagged surface forms
    (case-sensitive); counts pool over all sentences before the ratios.
    """
    by_key_hyp: dict[tuple[Phenomenon, int], Counter] = {}
    by_key_ref: dict[tuple[Phenomenon, int], Counter] = {}
    for tag in hyp_tags:
        by_key_hyp.setdefault((tag.phenomenon, tag.sentence_index), Counter())[tag.surface] += 1
    for tag in ref_tags:
        by_key_ref.setdefault((tag.phenomenon, tag.sentence_index), Counter())[tag.surface] += 1
    result: dict[Phenomenon, Prf] = {}
    for phenomenon in Phenomenon:
        matched = hyp_total = ref_total = 0
        sentences = {k[1] for k in by_key_hyp if k[0] is phenomenon}
        sentences |= {k[1] for k in by_key_ref if k[0] is phenomenon}
        for idx in sentences:
            h = by_key_hyp.get((phenomenon, idx), Counter())
            r = by_key_ref.get((phenomenon, idx), Counter())
            hyp_total += sum(h.values())
            ref_total += sum(r.values())
            matched += sum((h & r).values())
        result[phenomenon] = _prf(matched, hyp_total, ref_total)
    return result


@dataclass
class MetricReport:
    """Sentence- and document-level scores for one hypothesis corpus."""

    bleu: float
    chrf2: float
    tags: dict[Phenomenon, Prf]
    counts: dict[str, int] = field(default_factory=dict)
    comet: float | None = None  # reserved for an externally-supplied score

    def to_dict(self) -> dict:
        tags = {
            ph.value: {
                "p": prf.precision,
                "r": prf.recall,
                "f1": prf.f1,
                "hyp_tags": prf.hyp_tags,
                "ref_tags": prf.ref_tags,
                "matched": prf.matched,
            }
            for ph, prf in self.tags.items()
        }
        out = {"bleu": self.bleu, "chrf2": self.chrf2, "tags": tags, "counts": self.counts}
        if self.comet is not None:
            out["comet"] = self.comet
        return out

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, ensure_ascii=False, indent=2, sort_keys=True)
            fh.write("\n")


def build_report(
    hyps: Sequence[str],
    refs: Sequence[str],
    hyp_tags: Iterable[TagSpan] = (),
    ref_tags: Iterable[TagSpan] = (),
    smoothing: str = "none",
) -> MetricReport:
    return MetricReport(
        bleu=corpus_bleu(hyps, refs, smoothing=smoothing),
        chrf2=chrf2(hyps, refs),
        tags=tag_prf(hyp_tags, ref_tags),
        counts={"sentence_pairs": len(hyps)},
    )

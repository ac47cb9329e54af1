"""Contrastive pronoun evaluation: rank candidate translations by likelihood.

Each instance offers the same sentence with different pronouns; the system
scores every candidate as a continuation of the document post-editing prompt
and must rank the correct one highest. Context targets are shared across
candidates, so they add an equal term and never change the argmax.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .backends import CompletionBackend, TranslationBackend
from .corpus import Sentence, join_with_separator
from .errors import EmptyBenchmarkError, LengthMismatchError
from .prompts import render_doc_ape


@dataclass(frozen=True)
class ContrastiveInstance:
    """A source sentence with candidate translations differing in one pronoun."""

    src: str
    candidates: tuple[str, ...]
    correct_index: int
    src_context: tuple[str, ...] = ()
    tgt_context_hyps: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.candidates) < 2:
            raise ValueError("a contrastive instance needs at least 2 candidates")
        if not 0 <= self.correct_index < len(self.candidates):
            raise ValueError(f"correct_index {self.correct_index} outside candidate list")
        if self.tgt_context_hyps is not None and len(self.tgt_context_hyps) != len(self.src_context):
            raise LengthMismatchError(
                f"{len(self.src_context)} context sentences but "
                f"{len(self.tgt_context_hyps)} context hypotheses"
            )


@dataclass(frozen=True)
class InstanceScore:
    chosen: int
    scores: tuple[float, ...]
    correct: bool


def score_instance(
    instance: ContrastiveInstance,
    translation_backend: TranslationBackend,
    completion_backend: CompletionBackend,
    ctx_size: int = 0,
) -> InstanceScore:
    """Score each candidate under the document prompt; argmax wins, ties go low.

    The scored region is the forced context targets plus the candidate; raw
    logprob sums are compared without length normalization since candidates
    differ in a single pronoun.
    """
    if ctx_size < 0:
        raise ValueError(f"ctx_size must be >= 0, got {ctx_size}")
    ctx_src = list(instance.src_context[len(instance.src_context) - ctx_size :]) if ctx_size else []
    if ctx_src and instance.tgt_context_hyps is not None:
        ctx_hyp = list(instance.tgt_context_hyps[len(instance.tgt_context_hyps) - len(ctx_src) :])
    elif ctx_src:
        ctx_hyp = [
            translation_backend.translate(Sentence.from_text(s)).text for s in ctx_src
        ]
    else:
        ctx_hyp = []
    src_hyp = translation_backend.translate(Sentence.from_text(instance.src)).text
    rendered = render_doc_ape(ctx_src + [instance.src], ctx_hyp + [src_hyp])
    scores = []
    for candidate in instance.candidates:
        region = " " + join_with_separator(ctx_hyp + [candidate])
        scores.append(completion_backend.score_continuation(rendered.prompt_text, region))
    chosen = max(range(len(scores)), key=lambda i: (scores[i], -i))
    return InstanceScore(
        chosen=chosen, scores=tuple(scores), correct=chosen == instance.correct_index
    )


@dataclass
class BenchmarkResult:
    accuracy: float
    instance_count: int
    per_instance: list[dict]

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"accuracy": self.accuracy, "instances": self.instance_count}) + "\n")
            for record in self.per_instance:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def run_benchmark(
    instances: Sequence[ContrastiveInstance],
    translation_backend: TranslationBackend,
    completion_backend: CompletionBackend,
    ctx_size: int = 0,
) -> BenchmarkResult:
    """Accuracy of picking the correct candidate, with a per-instance audit log."""
    if not instances:
        raise EmptyBenchmarkError("benchmark needs at least one instance")
    per_instance = []
    correct = 0
    for k, instance in enumerate(instances):
        score = score_instance(instance, translation_backend, completion_backend, ctx_size)
        correct += score.correct
        per_instance.append(
            {
                "instance": k,
                "chosen": score.chosen,
                "correct_index": instance.correct_index,
                "correct": score.correct,
                "scores": list(score.scores),
            }
        )
    return BenchmarkResult(
        accuracy=correct / len(instances),
        instance_count=len(instances),
        per_instance=per_instance,
    )


def read_instances(path: str | Path) -> list[ContrastiveInstance]:
    """Read record-per-line instances {src_context, src, candidates, correct_index, tgt_context_hyps?}."""
    instances = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            r = json.loads(line)
            hyps = r.get("tgt_context_hyps")
            instances.append(
                ContrastiveInstance(
                    src=r["src"],
                    candidates=tuple(r["candidates"]),
                    correct_index=r["correct_index"],
                    src_context=tuple(r.get("src_context", ())),
                    tgt_context_hyps=tuple(hyps) if hyps is not None else None,
                )
            )
    return instances

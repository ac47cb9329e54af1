"""Batch entry points for every pipeline stage and for serving.

Exit codes: 0 success, 1 validation/usage error, 2 backend or IO failure.
Every file-producing run also writes a manifest (inputs with digests, backend
descriptors, seed, versions) so it can be reproduced bit-for-bit against
scripted backends.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__, templates
from .backends import (
    BackendDescriptor,
    CompletionBackend,
    TranslationBackend,
    build_backend,
    load_backend_config,
)
from .contrastive import read_instances, run_benchmark
from .corpus import (
    Document,
    INFERENCE_CHUNK_LIMIT,
    TRAINING_CHUNK_LIMIT,
    align_hypotheses,
    chunk_document,
    flatten_texts,
    read_corpus,
    write_corpus,
)
from .datagen import (
    cross_translate,
    export_training_examples,
    pair_documents,
    partition_corpus,
    read_triples,
    write_training_records,
    write_triples,
)
from .decoding import Strategy, run_strategy
from .errors import (
    BackendError,
    CorruptStateError,
    DocapeError,
    StorageError,
    VersionMismatchError,
)
from .metrics import build_report
from .prompts import PromptKind
from .session import edit_effort
from .tagger import DEFAULT_LEXICONS, load_lexicons, tag_corpus, tag_document

STRATEGY_CHOICES = [s.value for s in Strategy]


class _Parser(argparse.ArgumentParser):
    """argparse that signals usage errors with exit code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(
    command: str,
    argv: list[str],
    out: str | None,
    inputs: dict[str, str | Path],
    backends: list[BackendDescriptor] = (),
    seed: int | None = None,
    manifest_path: str | None = None,
) -> None:
    path = manifest_path or (f"{out}.manifest.json" if out else None)
    if path is None:
        return
    manifest = {
        "command": command,
        "argv": argv,
        "seed": seed,
        "inputs": {label: {"path": str(p), "sha256": _sha256(p)} for label, p in inputs.items()},
        "backends": [asdict(b) for b in backends],
        "versions": {"docape": __version__, "templates": templates.TEMPLATE_VERSION},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _backend(config_path: str, name: str, kind: str):
    descriptors = load_backend_config(config_path)
    if name not in descriptors:
        raise DocapeError(f"backend {name!r} not found in {config_path}")
    descriptor = descriptors[name]
    if descriptor.kind != kind:
        raise DocapeError(f"backend {name!r} has kind {descriptor.kind!r}, expected {kind!r}")
    return descriptor, build_backend(descriptor)


def cmd_translate(args, argv) -> int:
    docs = read_corpus(args.input)
    descriptor, backend = _backend(args.config, args.backend, "translation")
    assert isinstance(backend, TranslationBackend)
    out_docs = [
        Document.build(doc.doc_id, [backend.translate(s).text for s in doc.sentences])
        for doc in docs
    ]
    write_corpus(out_docs, args.out)
    _write_manifest(
        "translate", argv, args.out, {"input": args.input}, [descriptor], manifest_path=args.manifest
    )
    return 0


def cmd_postedit(args, argv) -> int:
    docs = read_corpus(args.input)
    hyp_docs = read_corpus(args.hyps)
    strategy = Strategy(args.strategy)
    gold_docs = None
    if args.gold_refs:
        if strategy is not Strategy.CONTINUOUS_SW:
            raise DocapeError("--gold-refs requires --strategy continuous-sw")
        gold_docs = read_corpus(args.gold_refs)
        if len(gold_docs) != len(docs):
            raise DocapeError(
                f"--gold-refs has {len(gold_docs)} documents, input has {len(docs)}"
            )
    descriptor, backend = _backend(args.config, args.backend, "completion")
    assert isinstance(backend, CompletionBackend)
    aligned = list(align_hypotheses(docs, hyp_docs))

    def decode_one(k: int):
        doc, hyps = aligned[k]
        gold = gold_docs[k].texts if gold_docs is not None else None
        return run_strategy(
            strategy, doc, hyps, backend, limit=args.chunk_limit, gold_context=gold
        )

    # --jobs bounds document-level parallelism; within a document the
    # strategies keep their own per-backend in-flight limits
    if args.jobs and args.jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(decode_one, range(len(aligned))))
    else:
        results = [decode_one(k) for k in range(len(aligned))]
    with open(args.out, "w", encoding="utf-8") as fh:
        for result in results:
            fh.write(json.dumps(result.to_dict(), ensure_ascii=False) + "\n")
    if args.out_text:
        write_corpus(
            [Document.build(r.doc_id, r.texts) for r in results],
            args.out_text,
        )
    inputs = {"input": args.input, "hyps": args.hyps}
    if args.gold_refs:
        inputs["gold_refs"] = args.gold_refs
    _write_manifest("postedit", argv, args.out, inputs, [descriptor], manifest_path=args.manifest)
    total_fallbacks = sum(r.fallback_count for r in results)
    print(f"post-edited {len(results)} documents ({total_fallbacks} fallback sentences)")
    return 0


def cmd_datagen_split(args, argv) -> int:
    src_docs = read_corpus(args.src)
    ref_docs = read_corpus(args.ref)
    pairs = pair_documents(src_docs, ref_docs)
    half_a, half_b = partition_corpus(pairs, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, half in (("a", half_a), ("b", half_b)):
        write_corpus([p[0] for p in half], out_dir / f"src_{name}.jsonl")
        write_corpus([p[1] for p in half], out_dir / f"ref_{name}.jsonl")
    _write_manifest(
        "datagen-split",
        argv,
        str(out_dir / "split"),
        {"src": args.src, "ref": args.ref},
        seed=args.seed,
        manifest_path=args.manifest,
    )
    print(f"split {len(pairs)} documents into {len(half_a)} + {len(half_b)}")
    return 0


def cmd_datagen_cross(args, argv) -> int:
    half_a = pair_documents(read_corpus(args.src_a), read_corpus(args.ref_a))
    half_b = pair_documents(read_corpus(args.src_b), read_corpus(args.ref_b))
    desc_a, backend_a = _backend(args.config, args.backend_a, "translation")
    desc_b, backend_b = _backend(args.config, args.backend_b, "translation")
    triples, dropped = cross_translate(half_a, half_b, backend_a, backend_b)
    write_triples(triples, args.out)
    if dropped:
        dropped_path = f"{args.out}.dropped.jsonl"
        with open(dropped_path, "w", encoding="utf-8") as fh:
            for d in dropped:
                fh.write(json.dumps(asdict(d), ensure_ascii=False) + "\n")
        print(f"warning: {len(dropped)} triples dropped, see {dropped_path}", file=sys.stderr)
    _write_manifest(
        "datagen-cross",
        argv,
        args.out,
        {"src_a": args.src_a, "ref_a": args.ref_a, "src_b": args.src_b, "ref_b": args.ref_b},
        [desc_a, desc_b],
        manifest_path=args.manifest,
    )
    print(f"wrote {len(triples)} triples")
    return 0


def cmd_export_train(args, argv) -> int:
    triples = read_triples(args.triples)
    kind = PromptKind.SENT_APE if args.kind == "sent" else PromptKind.DOC_APE
    records = export_training_examples(triples, kind, chunk_limit=args.chunk_limit)
    write_training_records(records, args.out)
    _write_manifest(
        "export-train", argv, args.out, {"triples": args.triples}, manifest_path=args.manifest
    )
    print(f"wrote {len(records)} training records")
    return 0


def cmd_eval(args, argv) -> int:
    hyp_docs = read_corpus(args.hyps)
    ref_docs = read_corpus(args.refs)
    hyps = flatten_texts(hyp_docs)
    refs = flatten_texts(ref_docs)
    if len(hyps) != len(refs):
        raise DocapeError(f"{len(hyps)} hypothesis sentences but {len(refs)} references")
    lexicons = load_lexicons(args.lexicons) if args.lexicons else DEFAULT_LEXICONS
    src_docs = read_corpus(args.src) if args.src else None
    report = build_report(
        hyps,
        refs,
        hyp_tags=tag_corpus(hyp_docs, src_docs, lexicons),
        ref_tags=tag_corpus(ref_docs, src_docs, lexicons),
        smoothing=args.smoothing,
    )
    per_sentence, total = edit_effort(hyps, refs)
    report.counts["edit_effort_total"] = total
    report.write(args.out)
    inputs = {"hyps": args.hyps, "refs": args.refs}
    if args.src:
        inputs["src"] = args.src
    _write_manifest("eval", argv, args.out, inputs, manifest_path=args.manifest)
    print(f"BLEU {report.bleu:.2f}  ChrF2 {report.chrf2:.2f}  edit effort {total}")
    return 0


def cmd_contrapro(args, argv) -> int:
    instances = read_instances(args.instances)
    desc_nmt, nmt = _backend(args.config, args.nmt, "translation")
    desc_llm, llm = _backend(args.config, args.llm, "completion")
    result = run_benchmark(instances, nmt, llm, ctx_size=args.ctx_size)
    result.write(args.out)
    _write_manifest(
        "contrapro",
        argv,
        args.out,
        {"instances": args.instances},
        [desc_nmt, desc_llm],
        manifest_path=args.manifest,
    )
    print(f"accuracy {result.accuracy:.4f} over {result.instance_count} instances")
    return 0


def cmd_tag(args, argv) -> int:
    docs = read_corpus(args.input)
    src_docs = read_corpus(args.src) if args.src else [None] * len(docs)
    if len(src_docs) != len(docs):
        raise DocapeError(f"{len(src_docs)} source documents but {len(docs)} target documents")
    lexicons = load_lexicons(args.lexicons) if args.lexicons else DEFAULT_LEXICONS
    count = 0
    with open(args.out, "w", encoding="utf-8") as fh:
        for doc, src in zip(docs, src_docs):
            for tag in tag_document(doc, src, lexicons):
                record = {
                    "doc_id": doc.doc_id,
                    "phenomenon": tag.phenomenon.value,
                    "sentence_index": tag.sentence_index,
                    "token_index": tag.token_index,
                    "surface": tag.surface,
                }
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
                count += 1
    inputs = {"input": args.input}
    if args.src:
        inputs["src"] = args.src
    _write_manifest("tag", argv, args.out, inputs, manifest_path=args.manifest)
    print(f"wrote {count} tags")
    return 0


def cmd_stats_chunks(args, argv) -> int:
    docs = read_corpus(args.input)
    limits = [int(x) for x in args.limits.split(",") if x.strip()]
    if not limits:
        raise DocapeError("--limits needs at least one integer")
    stats = {}
    for limit in limits:
        histogram: dict[int, int] = {}
        chunk_count = 0
        for doc in docs:
            for chunk in chunk_document(doc, limit):
                histogram[len(chunk)] = histogram.get(len(chunk), 0) + 1
                chunk_count += 1
        stats[str(limit)] = {
            "chunks": chunk_count,
            "sentences_per_chunk": {str(k): v for k, v in sorted(histogram.items())},
        }
        print(f"limit {limit}: {chunk_count} chunks")
        for size, count in sorted(histogram.items()):
            print(f"  {size:4d} sentences: {count}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(stats, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _write_manifest(
            "stats-chunks", argv, args.out, {"input": args.input}, manifest_path=args.manifest
        )
    return 0


def cmd_serve(args, argv) -> int:
    from .service import load_service_config, serve

    config = load_service_config(args.config)
    serve(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="docape", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--manifest", help="explicit manifest path (default: <out>.manifest.json)")
        return p

    p = add("translate", cmd_translate, "translate a corpus sentence by sentence")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--config", required=True, help="TOML backend config")
    p.add_argument("--out", required=True)

    p = add("postedit", cmd_postedit, "post-edit NMT hypotheses with an LLM backend")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--hyps", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--strategy", choices=STRATEGY_CHOICES, default=Strategy.SENTENCE.value)
    p.add_argument("--chunk-limit", type=int, default=INFERENCE_CHUNK_LIMIT)
    p.add_argument("--gold-refs", help="references forced as target context (continuous-sw only)")
    p.add_argument("--jobs", type=int, default=None, help="bound on in-flight requests")
    p.add_argument("--out", required=True, help="JSONL of per-document results")
    p.add_argument("--out-text", help="also write outputs as a plain corpus")

    p = add("datagen-split", cmd_datagen_split, "partition a parallel corpus into two halves")
    p.add_argument("--src", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = add("datagen-cross", cmd_datagen_cross, "cross-translate halves into training triples")
    p.add_argument("--src-a", required=True)
    p.add_argument("--ref-a", required=True)
    p.add_argument("--src-b", required=True)
    p.add_argument("--ref-b", required=True)
    p.add_argument("--backend-a", required=True, help="NMT model trained on half A")
    p.add_argument("--backend-b", required=True, help="NMT model trained on half B")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = add("export-train", cmd_export_train, "render triples into masked training records")
    p.add_argument("--triples", required=True)
    p.add_argument("--kind", choices=["sent", "doc"], required=True)
    p.add_argument("--chunk-limit", type=int, default=TRAINING_CHUNK_LIMIT)
    p.add_argument("--out", required=True)

    p = add("eval", cmd_eval, "score hypotheses against references")
    p.add_argument("--hyps", required=True)
    p.add_argument("--refs", required=True)
    p.add_argument("--src", help="source corpus enabling the pronoun tag rule")
    p.add_argument("--lexicons", help="TOML tag lexicon config")
    p.add_argument("--smoothing", choices=["none", "add_one"], default="none")
    p.add_argument("--out", required=True)

    p = add("contrapro", cmd_contrapro, "contrastive pronoun benchmark")
    p.add_argument("--instances", required=True)
    p.add_argument("--nmt", required=True)
    p.add_argument("--llm", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--ctx-size", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("tag", cmd_tag, "tag context-dependent words in a corpus")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--src", help="aligned source corpus for the pronoun rule")
    p.add_argument("--lexicons")
    p.add_argument("--out", required=True)

    p = add("stats-chunks", cmd_stats_chunks, "sentences-per-chunk histogram per limit")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--limits", default=f"{TRAINING_CHUNK_LIMIT},{INFERENCE_CHUNK_LIMIT}")
    p.add_argument("--out", help="optional JSON output")

    p = add("serve", cmd_serve, "run the session HTTP service")
    p.add_argument("--config", required=True)

    return parser


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, argv)
    except (BackendError, StorageError, CorruptStateError, VersionMismatchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DocapeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

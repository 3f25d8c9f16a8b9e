# -*- coding: utf-8 -*-
import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor, as_completed
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from src import config
from src import archive
from src import corpus
from src import deptree
from src import evaluation
from src import gradcheck
from src import s3
from src import trainer
from src.attention import AttentionKind
from src.beam_search import beam_search
from src.checkpoint import load_checkpoint
from src.errors import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, CheckpointError, ConfigurationError, DataError, NumericError, SdattError, UsageError
from src.logger import run_logger
from src.model import attention_config
from src.utils import atomic_write_text, read_lines, rng_streams

log = logging.getLogger(__name__)


class ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors as UsageError so they map to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _write_or_print(text: str, out: Optional[str]) -> None:
    if out:
        atomic_write_text(out, text)
        log.info(f"Wrote {out}")
    else:
        sys.stdout.write(text)


# --- mask ---

def cmd_mask(args) -> int:
    trees = deptree.read_conllu(_existing(args.conllu, "CoNLL-U file"))
    matrices = [deptree.sdc_matrix(tree) for tree in trees]
    log.info(f"Computed {len(matrices)} SDC matrices from {args.conllu}")
    _write_or_print(deptree.format_mask_blocks(matrices), args.out)
    return EXIT_OK


# --- train ---

def _model_config_from_args(args):
    overrides = config.parse_set_option(args.set)
    for key in ("attention", "seed", "epochs"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return config.load_run_config(args.config, overrides, full_scale=args.full_scale)


def _load_training_data(args, model_config):
    if args.synthetic:
        rng = rng_streams(model_config.seed)["data"]
        data = corpus.generate_synthetic(args.synthetic, args.synthetic_pairs + args.synthetic_dev,
                                         args.synthetic_vocab, args.synthetic_max_len, rng)
        return corpus.split_corpus(data, args.synthetic_dev)

    if not args.src or not args.tgt:
        raise UsageError("train needs --src and --tgt, or --synthetic TASK")
    if model_config.kind.uses_syntax and not args.trees:
        raise ConfigurationError(f"Attention kind '{model_config.attention}' needs --trees for the training source")
    train_data = corpus.read_parallel(args.src, args.tgt, args.trees)
    dev_data = corpus.ParallelCorpus(src=[], tgt=[], trees=[] if args.trees else None)
    if args.dev_src or args.dev_tgt:
        if not (args.dev_src and args.dev_tgt):
            raise UsageError("--dev-src and --dev-tgt must be given together")
        if model_config.kind.uses_syntax and not args.dev_trees:
            raise ConfigurationError(f"Attention kind '{model_config.attention}' needs --dev-trees for the dev source")
        dev_data = corpus.read_parallel(args.dev_src, args.dev_tgt, args.dev_trees)
    return train_data, dev_data


def _archive_run(args, run_dir: Path, label: str) -> None:
    created, archive_path, _ = archive.create_run_archive(run_dir, label)
    if not created:
        log.error("Run archive could not be created")
        return
    target = s3.S3Target(bucket=args.s3_bucket, prefix=args.s3_prefix, endpoint_url=args.s3_endpoint,
                         region=args.s3_region, access_key=args.s3_access_key, secret_key=args.s3_secret_key)
    client, enabled = s3.setup_s3_client(target)
    if enabled:
        if not s3.upload_archive(archive_path, client, target):
            log.error("Failed to upload run archive to S3; it remains available locally")
    elif args.s3_bucket:
        log.warning("⚠️ S3 upload skipped; archive remains in local storage")


def cmd_train(args) -> int:
    model_config = _model_config_from_args(args)
    train_data, dev_data = _load_training_data(args, model_config)
    train_data, _ = corpus.filter_max_len(train_data, model_config.max_len)
    if len(train_data) == 0:
        raise DataError("No training pairs left after the max_len filter")
    corpus.require_trees(train_data, model_config.kind.uses_syntax, "training")
    if len(dev_data):
        corpus.require_trees(dev_data, model_config.kind.uses_syntax, "dev")

    src_vocab = corpus.Vocabulary.build(train_data.src, model_config.vocab_limit)
    tgt_vocab = corpus.Vocabulary.build(train_data.tgt, model_config.vocab_limit)
    model_config = config.apply_overrides(
        model_config, {"src_vocab_size": len(src_vocab), "tgt_vocab_size": len(tgt_vocab)}
    ).validate()
    log.info(f"Vocabulary sizes: source {len(src_vocab)}, target {len(tgt_vocab)} (reserved ids included)")

    out_dir = Path(args.out_dir) if args.out_dir else (
        config.RUNS_DIR / f"run_{datetime.now().strftime('%Y%m%d_%H%M%S')}_{model_config.attention}"
    )
    result = trainer.train(
        corpus.encode_corpus(train_data, src_vocab, tgt_vocab),
        corpus.encode_corpus(dev_data, src_vocab, tgt_vocab),
        model_config,
        out_dir=out_dir,
        src_vocab=src_vocab,
        tgt_vocab=tgt_vocab,
        progress=not args.no_progress,
    )
    log.info(f"Checkpoint: {result.checkpoint_path}")
    if args.archive:
        _archive_run(args, out_dir, model_config.attention)
    return EXIT_OK


# --- translate ---

def _format_attention(rows: Sequence) -> str:
    return "".join("\t".join(f"{w:.6f}" for w in row) + "\n" for row in rows)


def cmd_translate(args) -> int:
    ckpt = load_checkpoint(_existing(args.checkpoint, "checkpoint"), attention=args.attention)
    model_config = ckpt.config
    if model_config.kind.uses_syntax and not args.trees:
        raise ConfigurationError(f"Checkpoint uses '{model_config.attention}' attention; pass --trees for the source")
    if ckpt.src_vocab is None or ckpt.tgt_vocab is None:
        raise CheckpointError(f"{args.checkpoint} carries no vocabularies; cannot translate text")

    source = corpus.read_source(args.src, args.trees if model_config.kind.uses_syntax else None)
    beam = args.beam or model_config.beam_size
    max_len = args.max_len or model_config.max_len
    attn = attention_config(model_config)
    tensors = ckpt.params.constants()
    keep_attention = bool(args.attention_out)

    def translate_one(index: int):
        src_ids = ckpt.src_vocab.encode(source.src[index])
        tree = source.trees[index] if source.trees is not None else None
        return beam_search(src_ids, tensors, attn, tree, beam=beam, max_len=max_len, keep_attention=keep_attention)

    n = len(source)
    hyps: List = [None] * n
    errors: Dict[int, SdattError] = {}

    def record(index: int, future_result=None, error: Optional[Exception] = None):
        if error is None:
            hyps[index] = future_result
            run_logger.log_sentence_status(index, "translated")
            return
        run_logger.log_sentence_status(index, "failed", str(error))
        log.error(f"❌ Sentence {index + 1} failed: {error}")
        errors[index] = error if isinstance(error, SdattError) else NumericError(str(error))

    workers = max(1, args.max_workers)
    log.info(f"Translating {n} sentences with beam {beam} ({workers} worker{'s' if workers > 1 else ''})")
    if workers == 1:
        for i in range(n):
            try:
                record(i, translate_one(i))
            except (SdattError, FloatingPointError) as e:
                record(i, error=e)
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = {executor.submit(translate_one, i): i for i in range(n)}
            for future in as_completed(futures):
                i = futures[future]
                try:
                    record(i, future.result())
                except (SdattError, FloatingPointError) as e:
                    record(i, error=e)

    lines = [" ".join(ckpt.tgt_vocab.decode(h.output_ids())) if h is not None else "" for h in hyps]
    _write_or_print("".join(line + "\n" for line in lines), args.out)
    if keep_attention:
        blocks = [_format_attention(h.attention) if h is not None else "" for h in hyps]
        atomic_write_text(args.attention_out, "\n".join(blocks))
        log.info(f"Attention matrices written to {args.attention_out}")

    if errors:
        first = errors[min(errors)]
        log.error(f"{len(errors)} of {n} sentences failed")
        return getattr(first, "exit_code", EXIT_NUMERIC)
    return EXIT_OK


# --- eval ---

def cmd_eval(args) -> int:
    refs = read_lines(_existing(args.ref, "reference file"))
    systems: Dict[str, List[str]] = {}
    for path in args.hyp:
        hyps = read_lines(_existing(path, "hypothesis file"))
        if len(hyps) != len(refs):
            raise DataError(f"Line counts differ: {path} has {len(hyps)} lines, {args.ref} has {len(refs)}")
        name = Path(path).stem
        if name in systems:
            name = path
        systems[name] = hyps

    bleu_kwargs = {"case_insensitive": not args.case_sensitive, "smoothing": args.smoothing}
    report: Dict[str, Dict] = {}
    for name, hyps in systems.items():
        result = evaluation.bleu(hyps, refs, **bleu_kwargs)
        report[name] = {"bleu": result.to_dict()}
        print(evaluation.format_bleu(result, label=name if len(systems) > 1 else None))

    if args.src:
        src = read_lines(_existing(args.src, "source file"))
        if len(src) != len(refs):
            raise DataError(f"Line counts differ: {args.src} has {len(src)} lines, {args.ref} has {len(refs)}")
        src_lens = [len(corpus.tokenize(line)) for line in src]
        buckets = evaluation.compare_buckets(systems, refs, src_lens, args.bucket_width, **bleu_kwargs)
        print(evaluation.format_bucket_table(buckets), end="")
        for name, bucket in buckets.items():
            report[name]["buckets"] = bucket.to_dict()

    if args.json_out:
        atomic_write_text(args.json_out, json.dumps(report, indent=2) + "\n")
    return EXIT_OK


# --- gradcheck ---

def cmd_gradcheck(args) -> int:
    kinds = [k.value for k in AttentionKind] if args.attention == "all" else [args.attention]
    results = gradcheck.run_suite(kinds, seed=args.seed, eps=args.eps)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(f"{r.name:<32} {r.error:.3e}  {'ok' if r.passed else 'FAILED'}")
    if failed:
        log.error(f"❌ {len(failed)} of {len(results)} gradient checks failed")
        return EXIT_NUMERIC
    log.info(f"✅ All {len(results)} gradient checks passed")
    return EXIT_OK


# --- generate ---

def cmd_generate(args) -> int:
    rng = rng_streams(args.seed)["data"]
    data = corpus.generate_synthetic(args.task, args.pairs, args.vocab, args.max_len, rng)
    paths = corpus.write_corpus(data, args.out_prefix)
    log.info("Wrote " + ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


def _existing(path: Optional[str], what: str) -> str:
    if not path or not Path(path).exists():
        raise DataError(f"{what.capitalize()} {path} not found")
    return path


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(description="Syntax-directed attention for neural machine translation.")
    parser.add_argument("--log-level", default=config.LOG_LEVEL,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"], help="Set the logging level")
    parser.add_argument("--log-dir", default=str(config.LOG_DIR), help="Directory for the run log file")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)
    kinds = [k.value for k in AttentionKind]

    p = sub.add_parser("mask", help="Write SDC distance matrices for a CoNLL-U file")
    p.add_argument("conllu", help="CoNLL-U (or ID/FORM/HEAD) file")
    p.add_argument("--out", help="Output TSV file (default: stdout)")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("train", help="Train a model and write checkpoint plus training log")
    p.add_argument("--config", help="JSON file with ModelConfig fields")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="Override one config field (repeatable)")
    p.add_argument("--full-scale", action="store_true", help="Use the published model sizes")
    p.add_argument("--attention", choices=kinds)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--src", help="Training source sentences")
    p.add_argument("--tgt", help="Training target sentences")
    p.add_argument("--trees", help="CoNLL-U trees for the training source")
    p.add_argument("--dev-src")
    p.add_argument("--dev-tgt")
    p.add_argument("--dev-trees")
    p.add_argument("--synthetic", choices=corpus.SYNTHETIC_TASKS, help="Train on a generated task instead of files")
    p.add_argument("--synthetic-pairs", type=int, default=1000)
    p.add_argument("--synthetic-dev", type=int, default=100)
    p.add_argument("--synthetic-vocab", type=int, default=20)
    p.add_argument("--synthetic-max-len", type=int, default=10)
    p.add_argument("--out-dir", help="Run directory (default: a new directory under SDATT_RUNS_DIR)")
    p.add_argument("--no-progress", action="store_true", help="Disable progress bars")
    p.add_argument("--archive", action="store_true", help="Zip the run directory when training ends")
    p.add_argument("--s3-bucket", help="S3 bucket for the run archive")
    p.add_argument("--s3-prefix", help="Prefix (folder path) within the S3 bucket")
    p.add_argument("--s3-endpoint", help="S3 endpoint URL for non-AWS storage")
    p.add_argument("--s3-region", help="S3 region name")
    p.add_argument("--s3-access-key", help="S3 access key ID")
    p.add_argument("--s3-secret-key", help="S3 secret access key")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", help="Beam-search decode a source file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--src", required=True)
    p.add_argument("--trees", help="CoNLL-U trees for the source (syntax attention kinds)")
    p.add_argument("--out", help="Output file (default: stdout)")
    p.add_argument("--beam", type=int, help="Beam size (default: from the checkpoint config)")
    p.add_argument("--max-len", type=int, help="Maximum output tokens (default: from the checkpoint config)")
    p.add_argument("--attention", choices=kinds, help="Reuse the weights under another attention kind")
    p.add_argument("--attention-out",
                   help="Write per-sentence attention matrices as TSV blocks "
                        "(double kinds: global then syntax or local weights per row)")
    p.add_argument("--max-workers", type=int, default=config.DEFAULT_MAX_WORKERS,
                   help="Parallel decoding threads (default: 1)")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("eval", help="Corpus BLEU and length-bucket report")
    p.add_argument("--hyp", nargs="+", required=True, help="One hypothesis file per system")
    p.add_argument("--ref", required=True)
    p.add_argument("--src", help="Source file; enables the length-bucket table")
    p.add_argument("--bucket-width", type=int, default=10)
    p.add_argument("--smoothing", action="store_true", help="Add-one smoothing of n-gram precisions")
    p.add_argument("--case-sensitive", action="store_true")
    p.add_argument("--json-out", help="Write the report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="Finite-difference gradient checks")
    p.add_argument("--attention", default="all", choices=kinds + ["all"])
    p.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    p.add_argument("--eps", type=float, default=config.GRADCHECK_EPS,
                   help="Finite-difference step (env SDATT_GRADCHECK_EPS)")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("generate", help="Write a synthetic parallel corpus with trees")
    p.add_argument("--task", choices=corpus.SYNTHETIC_TASKS, required=True)
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--vocab", type=int, default=20)
    p.add_argument("--max-len", type=int, default=10)
    p.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    p.add_argument("--out-prefix", required=True, help="Writes <prefix>.src, <prefix>.tgt and <prefix>.conllu")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE

    run_logger.setup(log_level=args.log_level, log_dir=args.log_dir, command=args.command)
    try:
        return args.func(args)
    except SdattError as e:
        log.error(f"❌ {type(e).__name__}: {e}")
        return e.exit_code
    except FloatingPointError as e:
        log.error(f"❌ Numeric failure: {e}", exc_info=True)
        return EXIT_NUMERIC
    except Exception as e:
        log.error(f"❌ Unexpected error: {e}", exc_info=True)
        return EXIT_USAGE
    finally:
        run_logger.write_summary()
        run_logger.close()
        run_logger.reset()


if __name__ == "__main__":
    sys.exit(main())

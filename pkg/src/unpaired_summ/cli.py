"""Command-line entry point: ``unpaired-summ <command> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import torch

from . import pretraining
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import (CNNDM_MAX_SRC_LEN, GIGAWORD_VOCAB_SIZE, MAX_SUMMARY_LEN, RealSummaryPool, Vocabulary,
                     build_vocabulary, encode_line, load_documents, read_lines, tokenize)
from .rouge import evaluate_files, lead_k
from .seq2seq import GIGAWORD_DECODE_LEN
from .trainer import PretrainConfig, TrainConfig, Trainer, build_models, pretrain_models, teacher_force_period

logger = logging.getLogger("unpaired_summ")

SENTENCE_END = {".", "!", "?", "。", "！", "？"}


def split_sentences(tokens):
    """Split a token list after sentence-final punctuation."""
    sents, cur = [], []
    for tok in tokens:
        cur.append(tok)
        if tok in SENTENCE_END:
            sents.append(cur)
            cur = []
    if cur:
        sents.append(cur)
    return sents


def _vocab(args) -> Vocabulary:
    if args.vocab and Path(args.vocab).exists():
        return Vocabulary.load(args.vocab)
    sources = [p for p in (getattr(args, "articles", None), getattr(args, "summaries", None)) if p]
    if not sources:
        raise SystemExit("need --vocab or corpus files to build one")
    vocab = build_vocabulary(sources, args.vocab_size, args.char_level)
    if args.vocab:
        vocab.save(args.vocab)
    return vocab


def _config(args, **overrides) -> TrainConfig:
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.config:
        return TrainConfig.from_file(args.config, **{k: str(v) for k, v in overrides.items()})
    return TrainConfig(**overrides)


def _docs(path, vocab, args, max_len=None):
    max_len = max_len or args.max_src_len or CNNDM_MAX_SRC_LEN
    return [d.tokens for d in load_documents(path, vocab, max_len, args.char_level)]


def _pool(path, vocab, args, provenance="same-domain"):
    max_len = args.max_sum_len or MAX_SUMMARY_LEN
    return RealSummaryPool.from_file(path, vocab, max_len, provenance, args.char_level).sentences


def cmd_build_vocab(args):
    vocab = build_vocabulary(args.corpus, args.vocab_size, args.char_level)
    vocab.save(args.output)
    print(f"{len(vocab)} tokens -> {args.output}")


def cmd_make_pretrain_pairs(args):
    vocab = _vocab(args)
    rng = np.random.default_rng(args.seed)
    pairs = []
    if args.recipe == "shuffle":
        pairs = pretraining.shuffle_pairs(_docs(args.articles, vocab, args), args.seed, args.copies)
    elif args.recipe == "next-sentences":
        k = args.k or (pretraining.NEXT_SENTENCES_CHAR if args.char_level else pretraining.NEXT_SENTENCES_LONG)
        docs = [[vocab.encode(s) for s in split_sentences(tokenize(line, args.char_level))]
                for line in read_lines(args.articles) if line.strip()]
        pairs = pretraining.next_sentence_pairs(docs, k)
    else:
        if not args.summaries:
            raise SystemExit("the transfer recipe needs --summaries aligned with --articles")
        for art, summ in zip(read_lines(args.articles), read_lines(args.summaries)):
            doc = encode_line(art, vocab, None, args.char_level)
            sents = [vocab.encode(s) for s in split_sentences(tokenize(summ, args.char_level))]
            if doc is None or not sents:
                continue
            pair = pretraining.make_transfer_pair(doc, sents, rng)
            if pair is not None:
                pairs.append(pair)
    pretraining.write_pairs(pairs, args.output, vocab)
    print(f"{len(pairs)} {args.recipe} pairs -> {args.output}")


def cmd_pretrain(args):
    vocab = _vocab(args)
    cfg = _config(args, mode=args.mode, seed=args.seed, max_sum_len=args.max_sum_len)
    models = {}
    if args.init:
        models = load_checkpoint(args.init, vocab)["models"]
    if args.model == "generator":
        g = models.get("generator") or build_models(cfg, len(vocab))["generator"]
        if args.pairs:
            pairs = pretraining.read_pairs(args.pairs, vocab)
        else:
            pairs = pretraining.shuffle_pairs(_docs(args.articles, vocab, args), args.seed)
        hist = pretraining.pretrain_generator(g, pairs, args.epochs, args.lr, cfg.batch_size, args.seed)
        models["generator"] = g
        print(f"generator loss {hist[0]:.4f} -> {hist[-1]:.4f}")
    else:
        if "generator" not in models:
            raise SystemExit("--init must hold a pre-trained generator")
        docs = _docs(args.articles, vocab, args)
        fresh = build_models(cfg, len(vocab))
        if args.model == "reconstructor":
            r = models.get("reconstructor") or fresh["reconstructor"]
            hist = pretraining.pretrain_reconstructor(models["generator"], r, docs, args.steps,
                                                      cfg.decode_len, cfg.batch_size, args.lr, args.seed)
            models["reconstructor"] = r
            print(f"reconstructor loss {hist[0]:.4f} -> {hist[-1]:.4f}")
        else:
            if not args.summaries:
                raise SystemExit("discriminator pre-training needs --summaries")
            critic = fresh["critic"]
            gaps = pretraining.pretrain_discriminator(models["generator"], critic, cfg.mode, docs,
                                                      _pool(args.summaries, vocab, args), args.steps,
                                                      cfg.decode_len, cfg.beta, cfg.batch_size, args.lr,
                                                      args.seed, cfg.clip_mode, cfg.clip_value)
            models["critic"] = critic
            print(f"critic gap {gaps[0]:.4f} -> {gaps[-1]:.4f}")
    save_checkpoint(args.out, vocab, models)


def cmd_train(args):
    vocab = _vocab(args)
    transfer = bool(args.transfer_summaries)
    cfg = _config(args, mode=args.mode, seed=args.seed, max_sum_len=args.max_sum_len,
                  max_src_len=args.max_src_len, max_updates=args.max_updates,
                  transfer=transfer or None)
    docs = _docs(args.articles, vocab, args, cfg.max_src_len)
    if transfer:
        pool = _pool(args.transfer_summaries, vocab, args, "transfer-source")
    else:
        pool = _pool(args.summaries, vocab, args)
    paired = None
    if args.paired:
        arts, sums = args.paired
        paired = []
        for a, s in zip(read_lines(arts), read_lines(sums)):
            d = encode_line(a, vocab, cfg.max_src_len, args.char_level)
            t = vocab.encode(tokenize(s, args.char_level))[: cfg.max_sum_len]
            if d is not None and t:
                paired.append((d.tokens, t))
        period = teacher_force_period(len(paired)) if args.tf_period == "auto" else int(args.tf_period)
        cfg.tf_period = period
    if args.resume:
        trainer = Trainer.resume(args.resume, docs, pool, vocab, paired)
    else:
        if args.init:
            models = load_checkpoint(args.init, vocab)["models"]
            missing = {"generator", "reconstructor", "critic"} - set(models)
            if missing:
                raise SystemExit(f"{args.init} lacks pre-trained {', '.join(sorted(missing))}")
        elif args.pretrain:
            models, _ = pretrain_models(cfg, len(vocab), docs, pool, PretrainConfig())
        else:
            raise SystemExit("supply --init with pre-trained models, or pass --pretrain")
        trainer = Trainer(cfg, vocab, docs, pool, models, paired)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
    trainer.run(cfg.max_updates, out, log_every=args.log_every)
    print(f"{trainer.t} updates -> {out / 'checkpoint_final.pt'}")


def cmd_summarize(args):
    vocab = Vocabulary.load(args.vocab) if args.vocab else None
    blob = load_checkpoint(args.checkpoint, vocab)
    vocab = blob["vocab"]
    g = blob["models"]["generator"]
    g.eval()
    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    try:
        for line in read_lines(args.input):
            doc = encode_line(line, vocab, args.max_src_len, args.char_level)
            toks = [] if doc is None else g.beam_search(doc.tokens, args.beam, args.max_len)
            sep = "" if args.char_level else " "
            out.write(sep.join(vocab.decode(toks)) + "\n")
    finally:
        if args.output:
            out.close()


def cmd_evaluate(args):
    report = evaluate_files(args.candidates, args.references, args.stem)
    print(report.summary())
    if args.records:
        Path(args.records).write_text("".join(r + "\n" for r in report.records()), encoding="utf-8")


def cmd_baseline(args):
    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    sep = "" if args.char_level else " "
    try:
        for line in read_lines(args.input):
            toks = tokenize(line, args.char_level)
            out.write((sep.join(lead_k(toks, args.lead)) if toks else "") + "\n")
    finally:
        if args.output:
            out.close()


def _corpus_flags(p, articles=True):
    if articles:
        p.add_argument("--articles", help="one document per line")
    p.add_argument("--summaries", help="real summary sentences, one per line")
    p.add_argument("--vocab", help="vocabulary file (built from the corpus if missing)")
    p.add_argument("--vocab-size", type=int, default=GIGAWORD_VOCAB_SIZE)
    p.add_argument("--max-src-len", type=int, help="truncate documents (default 250)")
    p.add_argument("--max-sum-len", type=int, help="summary length cap (default 50 for the real pool)")
    p.add_argument("--char-level", action="store_true", help="one token per character")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unpaired-summ", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-vocab", help="frequency-ranked vocabulary file")
    p.add_argument("corpus", nargs="+")
    p.add_argument("--vocab-size", type=int, default=GIGAWORD_VOCAB_SIZE)
    p.add_argument("--char-level", action="store_true")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("make-pretrain-pairs", help="self-supervised pre-training pairs (TSV)")
    _corpus_flags(p)
    p.add_argument("--recipe", choices=pretraining.RECIPES, default="shuffle")
    p.add_argument("--k", type=int, help="sentences to predict (default 4, or 1 with --char-level)")
    p.add_argument("--copies", type=int, default=1, help="shuffle passes over the corpus")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_make_pretrain_pairs)

    p = sub.add_parser("pretrain", help="pre-train one component")
    _corpus_flags(p)
    p.add_argument("--model", choices=("generator", "reconstructor", "discriminator"), required=True)
    p.add_argument("--mode", default="wgan")
    p.add_argument("--config")
    p.add_argument("--pairs", help="TSV pairs for the generator (default: shuffle recipe)")
    p.add_argument("--init", help="checkpoint to extend")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="joint adversarial training")
    _corpus_flags(p)
    p.add_argument("--mode", choices=("wgan", "reinforce", "adv-reinforce"))
    p.add_argument("--config", help="key=value file of training settings")
    p.add_argument("--paired", nargs=2, metavar=("ARTICLES", "SUMMARIES"),
                   help="aligned labeled files for teacher forcing")
    p.add_argument("--tf-period", default="auto", help="updates between teacher-forcing steps, or auto")
    p.add_argument("--transfer-summaries", help="real summaries from another domain (alpha 50)")
    p.add_argument("--init", help="checkpoint with pre-trained generator, reconstructor, critic")
    p.add_argument("--pretrain", action="store_true", help="pre-train everything first")
    p.add_argument("--resume", help="trainer checkpoint to continue")
    p.add_argument("--max-updates", type=int)
    p.add_argument("--log-every", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("summarize", help="beam-search summaries, one per input line")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--vocab", help="reject the checkpoint unless it matches this vocabulary")
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--max-len", type=int, default=GIGAWORD_DECODE_LEN)
    p.add_argument("--max-src-len", type=int, default=CNNDM_MAX_SRC_LEN)
    p.add_argument("--char-level", action="store_true")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("evaluate", help="ROUGE-1/2/L F1")
    p.add_argument("--candidates", required=True)
    p.add_argument("--references", required=True)
    p.add_argument("--stem", action="store_true", help="Porter-stem English tokens")
    p.add_argument("--records", help="write per-document index/r1/r2/rl lines here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="lead-k summaries")
    p.add_argument("--input", required=True)
    p.add_argument("--lead", type=int, default=8)
    p.add_argument("--output")
    p.add_argument("--char-level", action="store_true")
    p.set_defaults(func=cmd_baseline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s")
    torch.manual_seed(getattr(args, "seed", 0))
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Self-supervised pre-training pairs and the pre-training fits.

Three pair recipes:

* ``shuffle``: scramble 70% of a one-sentence document and predict a 6-11
  word span of it in the original order (a rough language model).
* ``next-sentences``: from the first i sentences predict the next k
  (k=4 for long text, k=1 for character-level corpora).
* ``transfer``: from the first 35-45 words of an article predict one of
  its summary sentences.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from . import gan_reinforce as gr
from .adversarial import canonical_mode, critic_loss
from .corpus import BatchSampler, make_paired_batch
from .reconstruction import per_token_nll, reconstruct_loss
from .seq2seq import PointerGenerator

logger = logging.getLogger(__name__)

SHUFFLE_FRACTION = 0.7
SPAN_MIN, SPAN_MAX = 6, 11
MAX_NOVEL_FRACTION = 0.4
NEXT_SENTENCES_LONG = 4
NEXT_SENTENCES_CHAR = 1
TRANSFER_MIN, TRANSFER_MAX = 35, 45
RECIPES = ("shuffle", "next-sentences", "transfer")


@dataclass(frozen=True)
class PretrainPair:
    input: tuple[int, ...]
    target: tuple[int, ...]
    recipe: str


def _tokens(doc) -> tuple:
    return tuple(getattr(doc, "tokens", doc))


def _cyclic_permutation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Sattolo's algorithm: a uniform single-cycle permutation (no fixed points)."""
    perm = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i))
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def corrupt_order(tokens: Sequence, rng: np.random.Generator,
                  fraction: float = SHUFFLE_FRACTION) -> tuple[list, np.ndarray]:
    """Permute round(fraction * T) randomly chosen positions among themselves.

    Every chosen position receives a token from another chosen position.
    Returns the corrupted tokens and the chosen positions.
    """
    tokens = list(tokens)
    m = int(math.floor(fraction * len(tokens) + 0.5))
    if m < 2:
        return tokens, np.empty(0, dtype=np.int64)
    positions = rng.choice(len(tokens), size=m, replace=False)
    perm = _cyclic_permutation(m, rng)
    out = list(tokens)
    for dst, src in zip(positions, positions[perm]):
        out[dst] = tokens[src]
    return out, positions


def make_shuffle_pair(doc, rng: np.random.Generator,
                      fraction: float = SHUFFLE_FRACTION) -> PretrainPair | None:
    """None when the document is shorter than the minimum span."""
    tokens = _tokens(doc)
    if len(tokens) < SPAN_MIN:
        return None
    span = int(rng.integers(SPAN_MIN, SPAN_MAX + 1))
    start = int(rng.integers(0, len(tokens) - SPAN_MIN + 1))
    target = tokens[start: start + span]
    corrupted, _ = corrupt_order(tokens, rng, fraction)
    return PretrainPair(tuple(corrupted), tuple(target), "shuffle")


def novel_fraction(target: Sequence, context: Sequence) -> float:
    seen = set(context)
    return sum(1 for w in target if w not in seen) / max(len(target), 1)


def make_next_sentences_pair(sentences: Sequence[Sequence[int]], i: int,
                             k: int = NEXT_SENTENCES_LONG,
                             max_novel: float = MAX_NOVEL_FRACTION) -> PretrainPair | None:
    """Context sentences[:i] -> target sentences[i:i+k]; None when too novel."""
    if i < 1 or k < 1 or i + k > len(sentences):
        raise IndexError(f"need 1 <= i and i + k <= {len(sentences)}, got i={i}, k={k}")
    context = tuple(w for s in sentences[:i] for w in s)
    target = tuple(w for s in sentences[i: i + k] for w in s)
    if not target or novel_fraction(target, context) > max_novel:
        return None
    return PretrainPair(context, target, "next-sentences")


def make_transfer_pair(article, summary_sentences: Sequence[Sequence[int]],
                       rng: np.random.Generator) -> PretrainPair | None:
    tokens = _tokens(article)
    if len(tokens) < TRANSFER_MIN or not summary_sentences:
        return None
    n = int(rng.integers(TRANSFER_MIN, TRANSFER_MAX + 1))
    target = summary_sentences[int(rng.integers(0, len(summary_sentences)))]
    return PretrainPair(tokens[:n], tuple(target), "transfer")


def shuffle_pairs(docs: Sequence, seed: int = 0, copies: int = 1) -> list[PretrainPair]:
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(copies):
        for d in docs:
            p = make_shuffle_pair(d, rng)
            if p is not None:
                pairs.append(p)
    return pairs


def next_sentence_pairs(documents: Sequence[Sequence[Sequence[int]]],
                        k: int = NEXT_SENTENCES_LONG) -> list[PretrainPair]:
    pairs = []
    for sents in documents:
        for i in range(1, len(sents) - k + 1):
            p = make_next_sentences_pair(sents, i, k)
            if p is not None:
                pairs.append(p)
    return pairs


def pretrain_generator(model: PointerGenerator, pairs: Sequence[PretrainPair], epochs: int,
                       lr: float = 1e-3, batch_size: int = 32, seed: int = 0) -> list[float]:
    """Teacher-forced fit of target (+EOS) given input.

    Returns per-token losses: entry 0 is measured before any update, then
    one mean per epoch.
    """
    if not pairs:
        raise ValueError("no pre-training pairs")
    rng = np.random.default_rng(seed)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    history = [evaluate_pairs(model, pairs, batch_size)]
    for epoch in range(epochs):
        order = rng.permutation(len(pairs))
        total, count = 0.0, 0
        for start in range(0, len(pairs), batch_size):
            chunk = [pairs[i] for i in order[start: start + batch_size]]
            b = make_paired_batch([p.input for p in chunk], [p.target for p in chunk])
            lp = model.target_log_probs(b.documents, b.doc_lengths, b.targets, b.target_lengths)
            loss = per_token_nll(lp, b.target_lengths).mean()
            opt.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), 5.0)
            opt.step()
            total += loss.item() * len(chunk)
            count += len(chunk)
        history.append(total / count)
        logger.debug("pretrain generator epoch %d loss %.4f", epoch, history[-1])
    return history


@torch.no_grad()
def evaluate_pairs(model: PointerGenerator, pairs: Sequence[PretrainPair], batch_size: int = 64) -> float:
    total, count = 0.0, 0
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start: start + batch_size]
        b = make_paired_batch([p.input for p in chunk], [p.target for p in chunk])
        lp = model.target_log_probs(b.documents, b.doc_lengths, b.targets, b.target_lengths)
        total += float(per_token_nll(lp, b.target_lengths).sum())
        count += len(chunk)
    return total / count


def pretrain_reconstructor(generator: PointerGenerator, reconstructor: PointerGenerator,
                           docs: Sequence, steps: int, decode_len: int, batch_size: int = 32,
                           lr: float = 1e-3, seed: int = 0) -> list[float]:
    """Fit R on (generator sample, source) pairs with the generator frozen."""
    if not docs:
        raise ValueError("no documents")
    sampler = BatchSampler(docs, [(0,)], batch_size, seed)
    gen = torch.Generator().manual_seed(seed)
    opt = torch.optim.Adam(reconstructor.parameters(), lr=lr)
    losses = []
    for _ in range(steps):
        b = sampler.next_batch()
        with torch.no_grad():
            out = generator.sample(b.documents, b.doc_lengths, decode_len, gen, with_greedy=False)
        loss = reconstruct_loss(reconstructor, out.sampled, out.lengths, b.documents, b.doc_lengths).mean()
        opt.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(reconstructor.parameters(), 5.0)
        opt.step()
        losses.append(loss.item())
    return losses


def pretrain_discriminator(generator: PointerGenerator, critic: torch.nn.Module, mode: str,
                           docs: Sequence, pool: Sequence, steps: int, decode_len: int,
                           beta: float, batch_size: int = 32, lr: float = 1e-3, seed: int = 0,
                           clip_mode: str = "penalty", clip_value: float = gr.CLIP_VALUE) -> list[float]:
    """Fit the critic to separate generator samples from real sentences.

    Returns the unpenalized gap mean D(fake) - mean D(real) per step.
    """
    mode = canonical_mode(mode)
    sampler = BatchSampler(docs, pool, batch_size, seed)
    gen = torch.Generator().manual_seed(seed + 1)
    opt = torch.optim.RMSprop(critic.parameters(), lr=lr, alpha=0.9, eps=1e-8)
    gaps = []
    use_penalty = clip_mode == "penalty"
    for _ in range(steps):
        b = sampler.next_batch()
        with torch.no_grad():
            out = generator.sample(b.documents, b.doc_lengths, decode_len, gen, with_greedy=False)
        loss = critic_loss(mode, critic, out, b.summaries, b.summary_lengths, beta=beta,
                           generator=gen, penalty=use_penalty)
        opt.zero_grad()
        loss.total.backward()
        opt.step()
        if not use_penalty:
            gr.clip_weights(critic, clip_value)
        gaps.append((loss.fake - loss.real).item())
    return gaps


def pretrain_critics(generator, reconstructor, critic, mode: str, docs, pool, steps: int,
                     decode_len: int, beta: float, batch_size: int = 32, lr: float = 1e-3,
                     seed: int = 0) -> tuple[list[float], list[float]]:
    r_losses = pretrain_reconstructor(generator, reconstructor, docs, steps, decode_len,
                                      batch_size, lr, seed)
    d_gaps = pretrain_discriminator(generator, critic, mode, docs, pool, steps, decode_len,
                                    beta, batch_size, lr, seed)
    return r_losses, d_gaps


def write_pairs(pairs: Sequence[PretrainPair], path, vocab) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            f.write(" ".join(vocab.decode(p.input, strip=False)) + "\t"
                    + " ".join(vocab.decode(p.target, strip=False)) + "\n")


def read_pairs(path, vocab, recipe: str = "shuffle") -> list[PretrainPair]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if "\t" not in line:
                continue
            src, tgt = line.rstrip("\n").split("\t", 1)
            if src.split() and tgt.split():
                pairs.append(PretrainPair(tuple(vocab.encode(src.split())),
                                          tuple(vocab.encode(tgt.split())), recipe))
    return pairs


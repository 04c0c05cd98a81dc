"""Corpus ingestion: vocabularies, documents, unpaired splits and batching."""

from __future__ import annotations

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
import torch

logger = logging.getLogger(__name__)

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<s>", "</s>"
SPECIALS = (PAD, UNK, BOS, EOS)
PAD_ID, UNK_ID, BOS_ID, EOS_ID = range(len(SPECIALS))

# Corpus presets.
GIGAWORD_VOCAB_SIZE = 15000
CNNDM_VOCAB_SIZE = 15000
CHINESE_VOCAB_SIZE = 4000
CNNDM_MAX_SRC_LEN = 250
CHINESE_MAX_SRC_LEN = 80
MAX_SUMMARY_LEN = 50


def tokenize(line: str, char_level: bool = False) -> list[str]:
    if char_level:
        return [ch for ch in line if not ch.isspace()]
    return line.split()


class Vocabulary:
    """Dense token <-> id map. Specials always occupy ids 0..3."""

    def __init__(self, tokens: Iterable[str]):
        self.tokens: list[str] = list(SPECIALS)
        for tok in tokens:
            if tok in SPECIALS:
                continue
            self.tokens.append(tok)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    pad_id, unk_id, bos_id, eos_id = PAD_ID, UNK_ID, BOS_ID, EOS_ID

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def lookup(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def token_of(self, idx: int) -> str:
        return self.tokens[idx]

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.lookup(t) for t in tokens]

    def decode(self, ids: Iterable[int], strip: bool = True) -> list[str]:
        out = []
        for i in ids:
            i = int(i)
            if strip and i == EOS_ID:
                break
            if strip and i in (PAD_ID, BOS_ID):
                continue
            out.append(self.tokens[i])
        return out

    @property
    def hash(self) -> str:
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> None:
        # Specials are implicit: line number + 4 == id.
        Path(path).write_text("".join(t + "\n" for t in self.tokens[len(SPECIALS):]), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(line for line in lines if line)


def build_vocabulary(corpus_path: str | Path | Sequence[str | Path], size: int,
                     char_level: bool = False) -> Vocabulary:
    """Keep the ``size - 4`` most frequent tokens; ties go to first occurrence."""
    if size <= len(SPECIALS):
        raise ValueError(f"vocabulary size must exceed {len(SPECIALS)} specials, got {size}")
    paths = [corpus_path] if isinstance(corpus_path, (str, Path)) else list(corpus_path)
    counts: Counter[str] = Counter()
    first_seen: dict[str, int] = {}
    for path in paths:
        with open(path, encoding="utf-8") as f:
            for line in f:
                for tok in tokenize(line, char_level):
                    if tok not in first_seen:
                        first_seen[tok] = len(first_seen)
                    counts[tok] += 1
    if not counts:
        raise ValueError(f"empty corpus: {paths}")
    ranked = sorted(counts, key=lambda t: (-counts[t], first_seen[t]))
    return Vocabulary(ranked[: size - len(SPECIALS)])


@dataclass(frozen=True)
class Document:
    tokens: tuple[int, ...]

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("empty document")
        if PAD_ID in self.tokens:
            raise ValueError("document contains PAD")

    def __len__(self) -> int:
        return len(self.tokens)


def encode_line(line: str, vocab: Vocabulary, max_len: int | None = None,
                char_level: bool = False) -> Document | None:
    toks = tokenize(line, char_level)
    if not toks:
        return None
    if max_len is not None:
        toks = toks[:max_len]
    return Document(tuple(vocab.encode(toks)))


def load_documents(path: str | Path, vocab: Vocabulary, max_len: int,
                   char_level: bool = False) -> Iterator[Document]:
    """Stream one document per line, truncated to ``max_len`` tokens."""
    blank = 0
    with open(path, encoding="utf-8") as f:
        for line in f:
            doc = encode_line(line, vocab, max_len, char_level)
            if doc is None:
                blank += 1
                continue
            yield doc
    if blank:
        logger.warning("%s: skipped %d blank lines", path, blank)


@dataclass
class RealSummaryPool:
    sentences: list[tuple[int, ...]]
    provenance: str = "same-domain"

    def __post_init__(self):
        if not self.sentences:
            raise ValueError("empty summary pool")
        if self.provenance not in ("same-domain", "transfer-source"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def __len__(self) -> int:
        return len(self.sentences)

    @classmethod
    def from_file(cls, path: str | Path, vocab: Vocabulary, max_len: int = MAX_SUMMARY_LEN,
                  provenance: str = "same-domain", char_level: bool = False) -> "RealSummaryPool":
        sents = []
        with open(path, encoding="utf-8") as f:
            for line in f:
                toks = tokenize(line, char_level)
                if not toks or len(toks) > max_len:
                    continue
                sents.append(tuple(vocab.encode(toks)))
        return cls(sents, provenance)


def split_unpaired(pairs: Sequence[tuple]) -> tuple[list, list]:
    """First half keeps only articles, second half only summaries."""
    if len(pairs) < 2:
        raise ValueError("need at least 2 pairs to split")
    half = len(pairs) // 2
    return [a for a, _ in pairs[:half]], [s for _, s in pairs[half:]]


def pad_rows(rows: Sequence[Sequence[int]], append_eos: bool = False,
             width: int | None = None) -> tuple[torch.Tensor, torch.Tensor]:
    """Right-pad id rows with PAD. Returns (ids[K, L], lengths[K])."""
    rows = [list(r) + [EOS_ID] if append_eos else list(r) for r in rows]
    lengths = torch.tensor([len(r) for r in rows], dtype=torch.long)
    width = max(len(r) for r in rows) if width is None else width
    out = torch.full((len(rows), width), PAD_ID, dtype=torch.long)
    for i, r in enumerate(rows):
        r = r[:width]
        out[i, : len(r)] = torch.tensor(r, dtype=torch.long)
    return out, lengths.clamp(max=width)


@dataclass(frozen=True)
class Batch:
    """K unpaired documents and K real summaries. Summary rows end with EOS."""

    documents: torch.Tensor
    doc_lengths: torch.Tensor
    summaries: torch.Tensor
    summary_lengths: torch.Tensor
    epoch: int = 0

    @property
    def size(self) -> int:
        return self.documents.size(0)


@dataclass(frozen=True)
class PairedBatch:
    """Documents with their own summaries, for teacher forcing."""

    documents: torch.Tensor
    doc_lengths: torch.Tensor
    targets: torch.Tensor
    target_lengths: torch.Tensor


def make_batch(docs: Sequence[Sequence[int]], summaries: Sequence[Sequence[int]], epoch: int = 0) -> Batch:
    d, dl = pad_rows(docs)
    s, sl = pad_rows(summaries, append_eos=True)
    return Batch(d, dl, s, sl, epoch)


def make_paired_batch(docs: Sequence[Sequence[int]], targets: Sequence[Sequence[int]]) -> PairedBatch:
    d, dl = pad_rows(docs)
    t, tl = pad_rows(targets, append_eos=True)
    return PairedBatch(d, dl, t, tl)


@dataclass
class _Cursor:
    n: int
    perm: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    pos: int = 0


class BatchSampler:
    """Seeded sampler drawing documents and real summaries independently.

    Documents are visited once per epoch in shuffled order (a trailing
    partial batch is dropped); when an epoch is exhausted the order is
    reshuffled and ``epoch`` increments. The summary pool cycles on its own
    permutation, so rows are never aligned with the documents.
    """

    def __init__(self, docs: Sequence, pool: Sequence, batch_size: int, seed: int = 0):
        if batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if not docs or not pool:
            raise ValueError("documents and summaries must be non-empty")
        if batch_size > len(docs):
            raise ValueError(f"batch size {batch_size} exceeds {len(docs)} documents")
        self.docs = [tuple(getattr(d, "tokens", d)) for d in docs]
        self.pool = [tuple(s) for s in getattr(pool, "sentences", pool)]
        self.batch_size = batch_size
        self.rng = np.random.default_rng(seed)
        self.epoch = 0
        self._doc = _Cursor(len(self.docs))
        self._sum = _Cursor(len(self.pool))
        self._doc.perm = self.rng.permutation(self._doc.n)
        self._sum.perm = self.rng.permutation(self._sum.n)

    def _take(self, cur: _Cursor, k: int, wrap: bool) -> list[int]:
        out: list[int] = []
        while len(out) < k:
            if cur.pos >= cur.n or (not wrap and cur.pos + k > cur.n):
                cur.perm = self.rng.permutation(cur.n)
                cur.pos = 0
                if not wrap:
                    self.epoch += 1
                    logger.debug("epoch boundary -> %d", self.epoch)
            step = min(k - len(out), cur.n - cur.pos)
            out.extend(int(i) for i in cur.perm[cur.pos: cur.pos + step])
            cur.pos += step
        return out

    def next_batch(self) -> Batch:
        di = self._take(self._doc, self.batch_size, wrap=False)
        si = self._take(self._sum, self.batch_size, wrap=True)
        return make_batch([self.docs[i] for i in di], [self.pool[i] for i in si], self.epoch)

    def __iter__(self):
        while True:
            yield self.next_batch()

    def state_dict(self) -> dict:
        return {
            "rng": self.rng.bit_generator.state,
            "epoch": self.epoch,
            "doc": (self._doc.perm.copy(), self._doc.pos),
            "sum": (self._sum.perm.copy(), self._sum.pos),
        }

    def load_state_dict(self, state: dict) -> None:
        self.rng.bit_generator.state = state["rng"]
        self.epoch = state["epoch"]
        self._doc.perm, self._doc.pos = state["doc"][0].copy(), state["doc"][1]
        self._sum.perm, self._sum.pos = state["sum"][0].copy(), state["sum"][1]


def next_batch(docs: Sequence, pool: Sequence, batch_size: int, seed: int) -> Batch:
    """One-shot helper: the first batch of a freshly seeded sampler."""
    return BatchSampler(docs, pool, batch_size, seed).next_batch()


def read_lines(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f]

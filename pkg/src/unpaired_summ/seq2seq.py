"""Hybrid pointer-generator encoder-decoder shared by the generator and reconstructor."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .corpus import BOS_ID, EOS_ID, PAD_ID

GIGAWORD_DECODE_LEN = 20
LONG_TEXT_DECODE_LEN = 50
LOG_EPS = 1e-20


def mix_copy(p_vocab: torch.Tensor, attn: torch.Tensor, src: torch.Tensor,
             p_gen: torch.Tensor | float) -> torch.Tensor:
    """p_gen * p_vocab + (1 - p_gen) * (attention mass summed per source id).

    ``p_vocab`` is (..., V), ``attn`` is (..., T) and ``src`` holds the T
    source ids, broadcastable against ``attn``.
    """
    while src.dim() < attn.dim():
        src = src.unsqueeze(-2)
    src = src.expand(attn.shape)
    copy = torch.zeros_like(p_vocab).scatter_add(-1, src, attn)
    return p_gen * p_vocab + (1 - p_gen) * copy


class Encoded(NamedTuple):
    outputs: torch.Tensor  # (B, T, H)
    mask: torch.Tensor  # (B, T) True on real tokens
    src: torch.Tensor  # (B, T)
    state: tuple[torch.Tensor, torch.Tensor]  # final (h, c), each (1, B, H)

    def expand(self, n: int) -> "Encoded":
        return Encoded(self.outputs.expand(n, -1, -1), self.mask.expand(n, -1),
                       self.src.expand(n, -1), self.state)


@dataclass
class GeneratorOutput:
    """Sampled and greedy decodes of one batch.

    ``dists`` are the distributions along the sampled path (rows after EOS
    are one-hot PAD); ``log_probs[k, i]`` is log dists[k, i, sampled[k, i]]
    and is zero past each row's length. Lengths count the EOS token.
    """

    dists: torch.Tensor
    sampled: torch.Tensor
    log_probs: torch.Tensor
    lengths: torch.Tensor
    greedy: torch.Tensor | None = None
    greedy_lengths: torch.Tensor | None = None

    @property
    def mask(self) -> torch.Tensor:
        return length_mask(self.lengths, self.sampled.size(1))


def length_mask(lengths: torch.Tensor, width: int) -> torch.Tensor:
    return torch.arange(width, device=lengths.device)[None, :] < lengths[:, None]


class PointerGenerator(nn.Module):
    """Single-layer LSTM encoder/decoder with multiplicative attention and a copy gate."""

    def __init__(self, vocab_size: int, emb_dim: int = 128, hidden_size: int = 600):
        super().__init__()
        self.config = dict(vocab_size=vocab_size, emb_dim=emb_dim, hidden_size=hidden_size)
        self.vocab_size = vocab_size
        self.hidden_size = hidden_size
        self.embedding = nn.Embedding(vocab_size, emb_dim, padding_idx=PAD_ID)
        self.encoder = nn.LSTM(emb_dim, hidden_size, batch_first=True)
        self.decoder = nn.LSTM(emb_dim, hidden_size, batch_first=True)
        self.attn = nn.Linear(hidden_size, hidden_size, bias=False)
        self.out_hidden = nn.Linear(2 * hidden_size, hidden_size)
        self.out = nn.Linear(hidden_size, vocab_size)
        self.gate = nn.Linear(2 * hidden_size + emb_dim, 1)
        # PAD and BOS are never produced.
        banned = torch.zeros(vocab_size, dtype=torch.bool)
        banned[[PAD_ID, BOS_ID]] = True
        self.register_buffer("banned", banned, persistent=False)
        # Test hook: clamp the copy gate to a constant.
        self.force_p_gen: float | None = None

    def encode(self, src: torch.Tensor, lengths: torch.Tensor | None = None) -> Encoded:
        if src.dim() == 1:
            src = src.unsqueeze(0)
        if lengths is None:
            lengths = (src != PAD_ID).sum(1)
        if src.numel() == 0 or bool((lengths < 1).any()):
            raise ValueError("cannot encode an empty source sequence")
        emb = self.embedding(src)
        packed = pack_padded_sequence(emb, lengths.cpu(), batch_first=True, enforce_sorted=False)
        out, state = self.encoder(packed)
        out, _ = pad_packed_sequence(out, batch_first=True, total_length=src.size(1))
        mask = length_mask(lengths, src.size(1)) & (src != PAD_ID)
        return Encoded(out, mask, src, state)

    def _mix(self, enc: Encoded, dec_out: torch.Tensor, prev_emb: torch.Tensor):
        scores = torch.einsum("bnh,bth->bnt", self.attn(dec_out), enc.outputs)
        scores = scores.masked_fill(~enc.mask[:, None, :], float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        context = attn @ enc.outputs
        hidden = torch.cat([dec_out, context], dim=-1)
        logits = self.out(torch.tanh(self.out_hidden(hidden)))
        p_vocab = torch.softmax(logits.masked_fill(self.banned, float("-inf")), dim=-1)
        if self.force_p_gen is None:
            p_gen = torch.sigmoid(self.gate(torch.cat([context, dec_out, prev_emb], dim=-1)))
        else:
            p_gen = torch.full_like(dec_out[..., :1], self.force_p_gen)
        return mix_copy(p_vocab, attn, enc.src, p_gen), attn, p_gen

    def step(self, enc: Encoded, state, prev: torch.Tensor):
        """One decoder step. Returns (probs[B, V], new state)."""
        emb = self.embedding(prev).unsqueeze(1)
        dec_out, state = self.decoder(emb, state)
        probs, _, _ = self._mix(enc, dec_out, emb)
        return probs[:, 0], state

    def forward(self, src: torch.Tensor, src_lengths: torch.Tensor, tgt_in: torch.Tensor) -> torch.Tensor:
        """Teacher-forced output distributions (B, N, V) for decoder inputs ``tgt_in``."""
        enc = self.encode(src, src_lengths)
        emb = self.embedding(tgt_in)
        dec_out, _ = self.decoder(emb, enc.state)
        probs, _, _ = self._mix(enc, dec_out, emb)
        return probs

    def target_log_probs(self, src, src_lengths, tgt, tgt_lengths) -> torch.Tensor:
        """log p(tgt_i | tgt_<i, src) under teacher forcing; zero on padding."""
        bos = torch.full_like(tgt[:, :1], BOS_ID)
        probs = self(src, src_lengths, torch.cat([bos, tgt[:, :-1]], dim=1))
        lp = probs.gather(-1, tgt.unsqueeze(-1)).squeeze(-1).clamp_min(LOG_EPS).log()
        return lp * length_mask(tgt_lengths, tgt.size(1))

    def decode(self, enc: Encoded, max_len: int, greedy: bool = False,
               generator: torch.Generator | None = None):
        """Free-running decode; the chosen token is fed back at each step."""
        if max_len < 1:
            raise ValueError("max_len must be >= 1")
        batch = enc.src.size(0)
        state = enc.state
        prev = torch.full((batch,), BOS_ID, dtype=torch.long, device=enc.src.device)
        finished = torch.zeros(batch, dtype=torch.bool, device=prev.device)
        lengths = torch.zeros(batch, dtype=torch.long, device=prev.device)
        pad_row = F.one_hot(torch.tensor(PAD_ID), self.vocab_size).to(enc.outputs)
        toks, lps, dists = [], [], []
        for _ in range(max_len):
            probs, state = self.step(enc, state, prev)
            if greedy:
                tok = probs.argmax(-1)
            else:
                tok = torch.multinomial(probs.detach(), 1, generator=generator).squeeze(1)
            tok = tok.masked_fill(finished, PAD_ID)
            lp = probs.gather(1, tok[:, None]).squeeze(1).clamp_min(LOG_EPS).log()
            lps.append(lp.masked_fill(finished, 0.0))
            dists.append(torch.where(finished[:, None], pad_row, probs))
            toks.append(tok)
            lengths += (~finished).long()
            finished = finished | (tok == EOS_ID)
            prev = tok
            if bool(finished.all()):
                break
        return torch.stack(toks, 1), torch.stack(lps, 1), torch.stack(dists, 1), lengths

    def sample(self, src, src_lengths, max_len: int, generator: torch.Generator | None = None,
               with_greedy: bool = True) -> GeneratorOutput:
        enc = self.encode(src, src_lengths)
        toks, lps, dists, lengths = self.decode(enc, max_len, greedy=False, generator=generator)
        out = GeneratorOutput(dists, toks, lps, lengths)
        if with_greedy:
            with torch.no_grad():
                out.greedy, _, _, out.greedy_lengths = self.decode(enc, max_len, greedy=True)
        return out

    def greedy(self, src, src_lengths=None, max_len: int = GIGAWORD_DECODE_LEN):
        enc = self.encode(src, src_lengths)
        toks, _, _, lengths = self.decode(enc, max_len, greedy=True)
        return toks, lengths

    @torch.no_grad()
    def beam_search(self, src: Sequence[int] | torch.Tensor, beam: int = 5,
                    max_len: int = GIGAWORD_DECODE_LEN, block_repeats: bool = True) -> list[int]:
        """Best hypothesis for one source, without the trailing EOS."""
        src = torch.as_tensor(src, dtype=torch.long).view(1, -1)
        enc = self.encode(src)
        h, c = enc.state

        def step_fn(prev, state):
            n = prev.size(0)
            st = (state[0].unsqueeze(0).contiguous(), state[1].unsqueeze(0).contiguous())
            probs, (h2, c2) = self.step(enc.expand(n), st, prev)
            return probs.clamp_min(0).log(), (h2[0], c2[0])

        hyp = beam_search(step_fn, (h[0], c[0]), beam=beam, max_len=max_len,
                          block_repeats=block_repeats)
        toks = hyp.tokens
        return toks[:-1] if toks and toks[-1] == EOS_ID else toks


class Hypothesis(NamedTuple):
    tokens: list[int]
    score: float


def _banned_tokens(seq: Sequence[int], level: int) -> set[int]:
    banned: set[int] = set()
    if level >= 2 or not seq:
        return banned
    banned.add(seq[-1])
    if level == 0 and len(seq) >= 2:
        a, b = seq[-2], seq[-1]
        for i in range(len(seq) - 2):
            if seq[i] == a and seq[i + 1] == b:
                banned.add(seq[i + 2])
    return banned


def apply_repeat_filter(log_probs: torch.Tensor, hyps: Sequence[Sequence[int]],
                  eos_id: int = EOS_ID) -> torch.Tensor:
    """Mask tokens that would repeat the previous token or an earlier trigram.

    EOS is never masked. When every reachable token of a row is masked the
    row falls back to only blocking the immediate repeat, then to no
    blocking at all.
    """
    out = log_probs.clone()
    for row, seq in enumerate(hyps):
        reachable = torch.isfinite(log_probs[row])
        for level in range(3):
            banned = _banned_tokens(seq, level) - {eos_id}
            if not banned:
                break
            candidate = log_probs[row].clone()
            candidate[list(banned)] = float("-inf")
            if bool(torch.isfinite(candidate).any()) or not bool(reachable.any()):
                out[row] = candidate
                break
    return out


def beam_search(step_fn: Callable, state: tuple[torch.Tensor, ...], *, beam: int, max_len: int,
                bos_id: int = BOS_ID, eos_id: int = EOS_ID, block_repeats: bool = True) -> Hypothesis:
    """Beam search over accumulated log-probability.

    ``step_fn(prev_tokens[b], state) -> (log_probs[b, V], state)`` where
    every state tensor is indexed by hypothesis along dim 0. Hypotheses
    finish on EOS or at ``max_len``; the search stops early once the best
    finished score is at least the best live score, since scores never
    increase.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    alive: list[list[int]] = [[]]
    scores = torch.zeros(1, dtype=torch.float64)
    prev = torch.tensor([bos_id], dtype=torch.long)
    finished: list[Hypothesis] = []
    exhausted = True
    for _ in range(max_len):
        log_probs, state = step_fn(prev, state)
        log_probs = log_probs.double()
        if block_repeats:
            log_probs = apply_repeat_filter(log_probs, alive, eos_id)
        vocab = log_probs.size(1)
        cand = (scores[:, None] + log_probs).view(-1)
        k = min(2 * beam, cand.numel())
        top_scores, top_idx = cand.topk(k)
        new_alive, new_scores, origin = [], [], []
        for rank, (sc, flat) in enumerate(zip(top_scores.tolist(), top_idx.tolist())):
            if not math.isfinite(sc):
                break
            h, w = divmod(flat, vocab)
            if w == eos_id:
                if rank < beam:
                    finished.append(Hypothesis(alive[h] + [w], sc))
            elif len(new_alive) < beam:
                new_alive.append(alive[h] + [w])
                new_scores.append(sc)
                origin.append(h)
        if not new_alive:
            exhausted = False
            break
        idx = torch.tensor(origin, dtype=torch.long)
        state = tuple(s[idx] for s in state)
        alive, scores = new_alive, torch.tensor(new_scores, dtype=torch.float64)
        prev = torch.tensor([h[-1] for h in alive], dtype=torch.long)
        if finished and max(f.score for f in finished) >= float(scores.max()):
            exhausted = False
            break
    if exhausted:
        finished.extend(Hypothesis(h, float(s)) for h, s in zip(alive, scores.tolist()))
    if not finished:
        return Hypothesis([], float("-inf"))
    return max(finished, key=lambda hyp: hyp.score)

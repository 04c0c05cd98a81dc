import math
from collections import Counter

import numpy as np
import pytest
import torch
from hypothesis import given, strategies as st

from conftest import tiny_generator
from unpaired_summ.adversarial import make_critic
from unpaired_summ.corpus import Vocabulary
from unpaired_summ.pretraining import (
    MAX_NOVEL_FRACTION, SHUFFLE_FRACTION, PretrainPair, corrupt_order, make_next_sentences_pair,
    make_shuffle_pair, make_transfer_pair, pretrain_critics, pretrain_generator, read_pairs,
    shuffle_pairs, write_pairs)


def test_short_document_is_skipped():
    assert make_shuffle_pair((4, 5, 6, 7, 8), np.random.default_rng(0)) is None


def test_zero_fraction_keeps_document():
    doc = tuple(range(4, 20))
    pair = make_shuffle_pair(doc, np.random.default_rng(0), fraction=0.0)
    assert pair.input == doc


@given(st.integers(6, 60), st.integers(0, 10_000))
def test_shuffle_pair_properties(length, seed):
    doc = tuple(range(4, 4 + length))  # distinct tokens make moved positions observable
    rng = np.random.default_rng(seed)
    pair = make_shuffle_pair(doc, rng)
    assert Counter(pair.input) == Counter(doc)
    moved = sum(a != b for a, b in zip(pair.input, doc))
    assert moved == math.floor(SHUFFLE_FRACTION * length + 0.5)
    assert 6 <= len(pair.target) <= 11
    start = doc.index(pair.target[0])
    assert doc[start: start + len(pair.target)] == pair.target


def test_corrupt_order_reports_positions():
    tokens = list(range(4, 14))
    out, positions = corrupt_order(tokens, np.random.default_rng(1))
    assert len(positions) == 7
    assert sorted(i for i in range(10) if out[i] != tokens[i]) == sorted(positions.tolist())


def test_shuffle_pairs_deterministic():
    docs = [tuple(range(4, 4 + n)) for n in (6, 9, 15)]
    assert shuffle_pairs(docs, seed=3, copies=2) == shuffle_pairs(docs, seed=3, copies=2)
    assert len(shuffle_pairs(docs + [(4, 5)], seed=3)) == 3


def _sentences(novel):
    """A 5-word context and a 10-word target with ``novel`` unseen words."""
    return [[4, 5, 6, 7, 8], [4, 5, 6, 7, 8, 4, 5, 6, 7, 8][: 10 - novel] + list(range(20, 20 + novel))]


@pytest.mark.parametrize("novel,kept", [(0, True), (4, True), (5, False)])
def test_next_sentence_novelty_filter(novel, kept):
    pair = make_next_sentences_pair(_sentences(novel), 1, k=1)
    assert (pair is not None) == kept
    if kept:
        assert pair.input == (4, 5, 6, 7, 8) and len(pair.target) == 10


def test_next_sentences_concatenates_k_sentences():
    sents = [[4, 5], [5, 4], [4], [5], [4, 5], [9]]
    pair = make_next_sentences_pair(sents, 2, k=3)
    assert pair.input == (4, 5, 5, 4) and pair.target == (4, 5, 4, 5)
    for i, k in [(0, 1), (5, 2), (3, 4)]:
        with pytest.raises(IndexError):
            make_next_sentences_pair(sents, i, k)


@given(st.lists(st.lists(st.integers(4, 12), min_size=1, max_size=6), min_size=2, max_size=6))
def test_kept_next_sentence_pairs_respect_threshold(sents):
    pair = make_next_sentences_pair(sents, 1, k=1)
    if pair is not None:
        novel = sum(w not in set(pair.input) for w in pair.target)
        assert novel <= MAX_NOVEL_FRACTION * len(pair.target)


def test_transfer_pair():
    rng = np.random.default_rng(0)
    article = tuple(range(4, 64))
    assert make_transfer_pair(article[:34], [(4,)], rng) is None
    lengths = set()
    for _ in range(200):
        pair = make_transfer_pair(article, [(9, 9)], rng)
        assert pair.target == (9, 9)
        lengths.add(len(pair.input))
    assert min(lengths) >= 35 and max(lengths) <= 45 and len(lengths) == 11


def test_transfer_sentence_choice_is_uniform():
    rng = np.random.default_rng(0)
    article = tuple(range(4, 54))
    counts = Counter(make_transfer_pair(article, [(5,), (6,), (7,)], rng).target for _ in range(10_000))
    for c in counts.values():
        assert abs(c / 10_000 - 1 / 3) <= 0.03


def _pairs(n=10, seed=0):
    gen = torch.Generator().manual_seed(seed)
    out = []
    for _ in range(n):
        src = tuple(torch.randint(4, 20, (6,), generator=gen).tolist())
        out.append(PretrainPair(src, src[1:4], "shuffle"))
    return out


def test_pretrain_generator_memorizes():
    g = tiny_generator(vocab_size=20, emb_dim=16, hidden_size=32, dtype=torch.float32)
    hist = pretrain_generator(g, _pairs(), epochs=200, lr=1e-2, batch_size=10)
    assert hist[-1] < 0.1
    window = [sum(hist[i: i + 20]) / 20 for i in range(1, len(hist) - 20, 20)]
    assert all(a > b for a, b in zip(window, window[1:]))


def test_pretrain_generator_initial_loss_near_log_v():
    g = tiny_generator(vocab_size=20, emb_dim=16, hidden_size=32, dtype=torch.float32)
    hist = pretrain_generator(g, _pairs(), epochs=0)
    assert abs(hist[0] - math.log(20)) < 0.5


def test_pretrain_generator_deterministic_and_rejects_empty():
    runs = []
    for _ in range(2):
        g = tiny_generator(vocab_size=20, emb_dim=8, hidden_size=8, dtype=torch.float32)
        runs.append(pretrain_generator(g, _pairs(), epochs=3, seed=4))
    assert runs[0] == runs[1]
    with pytest.raises(ValueError):
        pretrain_generator(tiny_generator(), [], epochs=1)


@pytest.mark.parametrize("mode", ["wgan", "reinforce"])
def test_pretrain_critics_both_modes(mode):
    torch.manual_seed(0)
    v = 12
    g = tiny_generator(vocab_size=v, emb_dim=8, hidden_size=16, dtype=torch.float32)
    r = tiny_generator(vocab_size=v, emb_dim=8, hidden_size=16, seed=1, dtype=torch.float32)
    critic = make_critic(mode, v, 5, hidden_size=16, n_blocks=2, emb_dim=8)
    gen = torch.Generator().manual_seed(0)
    docs = [tuple(torch.randint(4, v, (6,), generator=gen).tolist()) for _ in range(40)]
    pool = [(4, 5, 6), (5, 6), (4, 6, 5)]
    beta = 10.0 if mode == "wgan" else 1.0
    r_losses, gaps = pretrain_critics(g, r, critic, mode, docs, pool, steps=150, decode_len=5,
                                      beta=beta, batch_size=8, lr=1e-2)
    assert sum(r_losses[-10:]) / 10 < r_losses[0]
    assert sum(gaps[-10:]) / 10 < -1


def test_pair_file_round_trip(tmp_path):
    vocab = Vocabulary([f"w{i}" for i in range(20)])
    pairs = _pairs(4)
    write_pairs(pairs, tmp_path / "p.tsv", vocab)
    assert read_pairs(tmp_path / "p.tsv", vocab) == pairs

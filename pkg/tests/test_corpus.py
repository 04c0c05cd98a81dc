import logging

import numpy as np
import pytest
import torch
from hypothesis import given, strategies as st

from unpaired_summ.corpus import (
    BOS_ID, EOS_ID, PAD_ID, SPECIALS, UNK_ID, BatchSampler, Document, RealSummaryPool, Vocabulary,
    build_vocabulary, load_documents, make_batch, next_batch, pad_rows, split_unpaired)


def test_vocabulary_frequency_order(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("a a b\n", encoding="utf-8")
    vocab = build_vocabulary(path, 4 + 3)
    assert vocab.tokens[:4] == list(SPECIALS)
    assert vocab.tokens[4:] == ["a", "b"]


def test_vocabulary_ties_first_occurrence(vocab_file):
    # a:3, b:2, c:1, d:1 -> c before d
    vocab = build_vocabulary(vocab_file, 100)
    assert vocab.tokens[4:] == ["a", "b", "c", "d"]
    assert build_vocabulary(vocab_file, 6).tokens[4:] == ["a", "b"]


def test_vocabulary_errors(tmp_path, vocab_file):
    empty = tmp_path / "empty.txt"
    empty.write_text("\n\n", encoding="utf-8")
    with pytest.raises(ValueError):
        build_vocabulary(empty, 10)
    with pytest.raises(ValueError):
        build_vocabulary(vocab_file, 4)
    with pytest.raises(FileNotFoundError):
        build_vocabulary(tmp_path / "missing.txt", 10)


def test_vocabulary_ids_dense_and_round_trip(tmp_path, vocab_file):
    vocab = build_vocabulary(vocab_file, 100)
    assert (PAD_ID, UNK_ID, BOS_ID, EOS_ID) == (0, 1, 2, 3)
    for i in range(len(vocab)):
        assert vocab.lookup(vocab.token_of(i)) == i
    assert vocab.lookup("zzz") == UNK_ID
    vocab.save(tmp_path / "v.txt")
    again = Vocabulary.load(tmp_path / "v.txt")
    assert again.tokens == vocab.tokens and again.hash == vocab.hash
    # one token per line, line number + 4 == id
    assert (tmp_path / "v.txt").read_text(encoding="utf-8").splitlines() == ["a", "b", "c", "d"]


@given(st.lists(st.sampled_from(["a", "b", "c", "d"]), max_size=20))
def test_encode_decode_round_trip(tokens):
    vocab = Vocabulary(["a", "b", "c", "d"])
    assert vocab.decode(vocab.encode(tokens)) == tokens


def test_chinese_vocabulary_counts_characters(tmp_path):
    path = tmp_path / "zh.txt"
    path.write_text("我们我\n们好\n", encoding="utf-8")
    vocab = build_vocabulary(path, 4 + 2, char_level=True)
    assert vocab.tokens[4:] == ["我", "们"]


def test_load_documents(tmp_path, caplog):
    vocab = Vocabulary(["the", "cat", "sat"])
    path = tmp_path / "docs.txt"
    path.write_text("the cat sat\n\n" + " ".join(["the"] * 300) + "\nthe dog\n", encoding="utf-8")
    with caplog.at_level(logging.WARNING):
        docs = list(load_documents(path, vocab, 250))
    assert docs[0].tokens == (4, 5, 6)
    assert len(docs[1]) == 250
    assert docs[2].tokens == (4, UNK_ID)
    assert "skipped 1 blank" in caplog.text
    with pytest.raises(FileNotFoundError):
        list(load_documents(tmp_path / "nope.txt", vocab, 10))


def test_load_documents_chinese_truncation(tmp_path):
    vocab = Vocabulary(["字"])
    path = tmp_path / "zh.txt"
    path.write_text("字" * 100 + "\n", encoding="utf-8")
    (doc,) = load_documents(path, vocab, 80, char_level=True)
    assert len(doc) == 80


@given(st.lists(st.integers(4, 30), min_size=1, max_size=60), st.integers(1, 50))
def test_truncation_bound(ids, max_len):
    vocab = Vocabulary([f"t{i}" for i in range(4, 31)])
    from unpaired_summ.corpus import encode_line

    doc = encode_line(" ".join(vocab.token_of(i) for i in ids), vocab, max_len)
    assert 1 <= len(doc) <= max_len
    assert PAD_ID not in doc.tokens


def test_document_invariants():
    with pytest.raises(ValueError):
        Document(())
    with pytest.raises(ValueError):
        Document((5, PAD_ID))


def test_summary_pool_length_cap(tmp_path):
    vocab = Vocabulary(["x"])
    path = tmp_path / "s.txt"
    path.write_text("x x\n" + "x " * 60 + "\n\n", encoding="utf-8")
    pool = RealSummaryPool.from_file(path, vocab)
    assert pool.sentences == [(4, 4)]
    with pytest.raises(ValueError):
        RealSummaryPool([])


@pytest.mark.parametrize("n", [2, 3, 4, 7])
def test_split_unpaired(n):
    pairs = [(("a", i), ("s", i)) for i in range(n)]
    articles, summaries = split_unpaired(pairs)
    assert abs(len(articles) - len(summaries)) <= 1
    assert len(articles) + len(summaries) == n
    assert not {i for _, i in articles} & {i for _, i in summaries}


def test_split_unpaired_cnndm_sizes():
    articles, summaries = split_unpaired([(i, i) for i in range(287227)])
    assert (len(articles), len(summaries)) == (143613, 143614)


def test_split_unpaired_too_small():
    with pytest.raises(ValueError):
        split_unpaired([(1, 1)])


def test_pad_rows_layout():
    ids, lengths = pad_rows([[5, 6, 7], [8]], append_eos=True)
    assert ids.tolist() == [[5, 6, 7, EOS_ID], [8, EOS_ID, PAD_ID, PAD_ID]]
    assert lengths.tolist() == [4, 2]


@given(st.lists(st.lists(st.integers(4, 9), min_size=1, max_size=6), min_size=1, max_size=5))
def test_batch_padding_invariant(rows):
    b = make_batch(rows, rows)
    for tensor in (b.documents, b.summaries):
        for row in tensor.tolist():
            seen_pad = False
            for tok in row:
                if tok == PAD_ID:
                    seen_pad = True
                else:
                    assert not seen_pad


def test_next_batch_single():
    b = next_batch([(5, 6)], [(7,)], 1, seed=0)
    assert b.documents.tolist() == [[5, 6]]
    assert b.summaries.tolist() == [[7, EOS_ID]]


def test_sampler_deterministic():
    docs = [(i + 4,) for i in range(20)]
    pool = [(i + 4, i + 5) for i in range(7)]
    a, b = BatchSampler(docs, pool, 3, seed=5), BatchSampler(docs, pool, 3, seed=5)
    for _ in range(15):
        x, y = a.next_batch(), b.next_batch()
        assert torch.equal(x.documents, y.documents) and torch.equal(x.summaries, y.summaries)


def test_sampler_epochs_cover_documents():
    docs = [(i + 4,) for i in range(100)]
    sampler = BatchSampler(docs, [(4,)], 32, seed=0)
    seen = []
    for _ in range(3):
        b = sampler.next_batch()
        rows = [r[0] for r in b.documents.tolist()]
        assert len(set(rows)) == 32
        assert b.epoch == 0
        seen.extend(rows)
    assert len(set(seen)) == 96
    assert sampler.next_batch().epoch == 1


def test_sampler_state_round_trip():
    docs = [(i + 4,) for i in range(10)]
    pool = [(i + 4,) for i in range(3)]
    a = BatchSampler(docs, pool, 4, seed=1)
    for _ in range(3):
        a.next_batch()
    b = BatchSampler(docs, pool, 4, seed=99)
    b.load_state_dict(a.state_dict())
    for _ in range(5):
        assert torch.equal(a.next_batch().documents, b.next_batch().documents)


def test_sampler_draws_summaries_independently():
    docs = [(i + 4,) for i in range(50)]
    pool = [(i + 4,) for i in range(50)]
    b = BatchSampler(docs, pool, 50, seed=0).next_batch()
    assert not torch.equal(b.documents[:, 0], b.summaries[:, 0])

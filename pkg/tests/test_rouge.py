import pytest
from hypothesis import given, strategies as st

from unpaired_summ.rouge import (
    CHINESE_LEAD, GIGAWORD_LEAD, evaluate, evaluate_files, lcs_length, lead_k, rouge_l, rouge_n,
    score_pair)

tokens = st.lists(st.sampled_from("abcdef"), min_size=1, max_size=12)


def test_hand_examples():
    cand, ref = "the cat sat".split(), "the cat ate".split()
    for score in (rouge_n(cand, ref, 1), rouge_l(cand, ref)):
        assert score.precision == score.recall == score.f1 == pytest.approx(2 / 3)
    assert lcs_length("c b a".split(), "a b c".split()) == 1
    assert rouge_n(cand, ref, 2).f1 == pytest.approx(0.5)


@given(tokens)
def test_identity_and_disjoint(seq):
    for f in (rouge_n(seq, seq, 1).f1, rouge_l(seq, seq).f1):
        assert f == 1.0
    other = [t.upper() for t in seq]
    assert rouge_n(other, seq, 1).f1 == 0.0 and rouge_l(other, seq).f1 == 0.0


def test_empty_candidate_and_reference():
    assert rouge_n([], ["a"], 1).f1 == 0.0 and rouge_l([], ["a"]).f1 == 0.0
    with pytest.raises(ValueError):
        rouge_n(["a"], [], 1)
    with pytest.raises(ValueError):
        rouge_n(["a"], ["a"], 3)


def test_stemming():
    assert rouge_n(["running", "cats"], ["run", "cat"], 1).f1 == 0.0
    assert rouge_n(["running", "cats"], ["run", "cat"], 1, stem=True).f1 == 1.0


@given(tokens, tokens, st.integers(1, 5))
def test_clipping(cand, ref, times):
    t = ref[0]
    before = round(rouge_n(cand, ref, 1).recall * len(ref))
    after = round(rouge_n(cand + [t] * times, ref, 1).recall * len(ref))
    assert after - before == min(times, max(0, ref.count(t) - cand.count(t)))


@given(tokens, tokens)
def test_bounds_and_f1_formula(cand, ref):
    for s in score_pair(cand, ref).values():
        assert 0 <= s.precision <= 1 and 0 <= s.recall <= 1 and 0 <= s.f1 <= 1
        if s.precision + s.recall > 0:
            assert s.f1 == pytest.approx(2 * s.precision * s.recall / (s.precision + s.recall))


@given(tokens, tokens)
def test_relabeling_invariance(cand, ref):
    relabel = {c: i for i, c in enumerate("fedcba")}
    a = score_pair(cand, ref)
    b = score_pair([relabel[t] for t in cand], [relabel[t] for t in ref])
    assert {k: v.f1 for k, v in a.items()} == {k: v.f1 for k, v in b.items()}


@given(tokens, tokens)
def test_lcs_at_least_matched_bigram(cand, ref):
    if rouge_n(cand, ref, 2).f1 > 0:
        assert lcs_length(cand, ref) >= 2


def test_lead_k():
    doc = list(range(20))
    assert lead_k(doc, GIGAWORD_LEAD) == list(range(8))
    assert lead_k(doc, CHINESE_LEAD) == list(range(15))
    assert lead_k([1, 2], 8) == [1, 2]
    with pytest.raises(ValueError):
        lead_k(doc, 0)


def test_corpus_mean_of_three_pairs():
    cands = ["the cat sat".split(), "a b".split(), "x".split()]
    refs = ["the cat ate".split(), "a b".split(), "y".split()]
    report = evaluate(cands, refs)
    assert report.r1 == pytest.approx((2 / 3 + 1 + 0) / 3)
    assert report.rl == pytest.approx((2 / 3 + 1 + 0) / 3)
    assert report.per_doc[0]["r1"] == rouge_n(cands[0], refs[0], 1)
    assert report.records()[1] == "1\t1.000000\t1.000000\t1.000000"
    with pytest.raises(ValueError):
        evaluate(cands, refs[:2])


def test_evaluate_files(tmp_path):
    (tmp_path / "c.txt").write_text("the cat sat\nx y\n", encoding="utf-8")
    (tmp_path / "r.txt").write_text("the cat sat\nx y\n", encoding="utf-8")
    report = evaluate_files(tmp_path / "c.txt", tmp_path / "r.txt")
    assert report.r1 == report.r2 == report.rl == 1.0
    assert "ROUGE-1 F1 100.00" in report.summary()

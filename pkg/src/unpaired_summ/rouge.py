"""ROUGE-1/2/L F1 and the lead-k baseline.

Full-length scores with clipped n-gram counts and plain LCS. English text
is optionally Porter-stemmed before counting.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

GIGAWORD_LEAD = 8
CHINESE_LEAD = 15


class Score(NamedTuple):
    precision: float
    recall: float
    f1: float


def _f1(overlap: int, n_cand: int, n_ref: int) -> Score:
    p = overlap / n_cand if n_cand else 0.0
    r = overlap / n_ref if n_ref else 0.0
    return Score(p, r, 2 * p * r / (p + r) if p + r > 0 else 0.0)


@lru_cache(maxsize=1)
def _stemmer():
    from nltk.stem.porter import PorterStemmer

    return PorterStemmer()


def normalize(tokens: Sequence, stem: bool = False) -> list:
    if not stem:
        return list(tokens)
    s = _stemmer()
    return [s.stem(str(t)) for t in tokens]


def ngrams(tokens: Sequence, n: int) -> Counter:
    return Counter(tuple(tokens[i: i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: Sequence, reference: Sequence, n: int = 1, stem: bool = False) -> Score:
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    if not reference:
        raise ValueError("empty reference")
    cand, ref = ngrams(normalize(candidate, stem), n), ngrams(normalize(reference, stem), n)
    overlap = sum((cand & ref).values())
    return _f1(overlap, sum(cand.values()), sum(ref.values()))


def lcs_length(a: Sequence, b: Sequence) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence, reference: Sequence, stem: bool = False) -> Score:
    if not reference:
        raise ValueError("empty reference")
    cand, ref = normalize(candidate, stem), normalize(reference, stem)
    return _f1(lcs_length(cand, ref), len(cand), len(ref))


def lead_k(doc: Sequence, k: int) -> list:
    if k < 1:
        raise ValueError("k must be >= 1")
    return list(getattr(doc, "tokens", doc))[:k]


@dataclass
class RougeReport:
    """Per-document F1 rows plus corpus means."""

    per_doc: list[dict] = field(default_factory=list)

    @property
    def r1(self) -> float:
        return self._mean("r1")

    @property
    def r2(self) -> float:
        return self._mean("r2")

    @property
    def rl(self) -> float:
        return self._mean("rl")

    def _mean(self, key: str) -> float:
        if not self.per_doc:
            return 0.0
        return sum(d[key].f1 for d in self.per_doc) / len(self.per_doc)

    def summary(self) -> str:
        return (f"documents {len(self.per_doc)}\n"
                f"ROUGE-1 F1 {100 * self.r1:.2f}\n"
                f"ROUGE-2 F1 {100 * self.r2:.2f}\n"
                f"ROUGE-L F1 {100 * self.rl:.2f}")

    def records(self) -> list[str]:
        return [f"{d['index']}\t{d['r1'].f1:.6f}\t{d['r2'].f1:.6f}\t{d['rl'].f1:.6f}"
                for d in self.per_doc]


def score_pair(candidate: Sequence, reference: Sequence, stem: bool = False) -> dict:
    return {"r1": rouge_n(candidate, reference, 1, stem),
            "r2": rouge_n(candidate, reference, 2, stem),
            "rl": rouge_l(candidate, reference, stem)}


def evaluate(candidates: Sequence[Sequence], references: Sequence[Sequence],
             stem: bool = False) -> RougeReport:
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates vs {len(references)} references")
    report = RougeReport()
    for i, (c, r) in enumerate(zip(candidates, references)):
        report.per_doc.append({"index": i, **score_pair(c, r, stem)})
    return report


def evaluate_files(candidates_path, references_path, stem: bool = False) -> RougeReport:
    with open(candidates_path, encoding="utf-8") as f:
        cands = [line.split() for line in f]
    with open(references_path, encoding="utf-8") as f:
        refs = [line.split() for line in f]
    return evaluate(cands, refs, stem)

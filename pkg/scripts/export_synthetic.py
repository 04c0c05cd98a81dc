"""Write the planted-keyword corpus as plain text files for the CLI.

Produces articles.txt, summaries.txt (the unpaired pool), eval_articles.txt
and eval_keywords.txt (references for ``unpaired-summ evaluate``).
"""

import argparse
from pathlib import Path

from unpaired_summ import synthetic


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    corpus = synthetic.make_keyword_corpus(synthetic.KeywordCorpusConfig(seed=args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = {"articles.txt": corpus.docs, "summaries.txt": corpus.pool,
             "eval_articles.txt": corpus.eval_docs, "eval_keywords.txt": corpus.eval_keywords}
    for name, rows in files.items():
        lines = (" ".join(corpus.vocab.decode(r)) for r in rows)
        (out / name).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {', '.join(files)} to {out}")


if __name__ == "__main__":
    main()

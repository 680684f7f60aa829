"""Write a multilingual synthetic corpus (one TSV per language) and a grid manifest.

Every language realises the same sentences with its own random lexicon and
word order, so any pair is a fully aligned parallel corpus. Run the grid with
``bilingseg grid --manifest <out>/manifest.ini``.
"""

import argparse
from pathlib import Path

import numpy as np

from bilingseg.synthetic import random_lexicon


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out")
    ap.add_argument("--languages", nargs="+", default=["aa", "bb", "cc"])
    ap.add_argument("--sentences", type=int, default=500)
    ap.add_argument("--concepts", type=int, default=40)
    ap.add_argument("--mode", default="proportional")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sentences = [rng.integers(0, args.concepts, size=rng.integers(2, 8)) for _ in range(args.sentences)]
    for lang in args.languages:
        lexicon = ["".join(w) for w in random_lexicon(args.concepts, 2, 7, rng)]
        reverse = rng.random() < 0.5
        lines = []
        for i, sent in enumerate(sentences):
            words = [lexicon[c] for c in (sent[::-1] if reverse else sent)]
            lines.append(f"s{i:05d}\t{' '.join(words)}\t{' '.join(words)}\n")
        (out / f"{lang}.tsv").write_text("".join(lines), encoding="utf-8")
    corpora = "".join(f"{lang} = {lang}.tsv\n" for lang in args.languages)
    (out / "manifest.ini").write_text(
        f"[corpora]\n{corpora}\n[experiment]\nmode = {args.mode}\noutput = runs\nseeds = 1 2\n\n"
        "[neural]\nepochs = 30\n\n[bayes]\nsweeps = 500\n", encoding="utf-8")
    print(out / "manifest.ini")


if __name__ == "__main__":
    main()

"""Neural, oracle-hybrid and proportional segmentation of a synthetic word-for-word corpus."""

import argparse
import logging
import tempfile

from bilingseg import harness
from bilingseg.synthetic import bilingual_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sentences", type=int, default=3000)
    ap.add_argument("--words", type=int, default=50)
    ap.add_argument("--epochs", type=int, default=40)
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2])
    ap.add_argument("--modes", nargs="+", default=["proportional", "neural", "hybrid"],
                    choices=harness.MODES)
    ap.add_argument("--soft", choices=("bayes", "gold"), default="gold",
                    help="soft boundaries for hybrid mode")
    ap.add_argument("--sweeps", type=int, default=2000)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    corpus = bilingual_corpus(n_sentences=args.sentences, n_words=args.words)
    with tempfile.TemporaryDirectory() as out:
        man = harness.Manifest(corpora={"src": "", "tgt": ""}, output=out, pairs=[("src", "tgt")],
                               seeds=args.seeds, soft_boundaries=args.soft,
                               neural={"epochs": args.epochs}, bayes={"sweeps": args.sweeps})
        print("mode\tprecision\trecall\tf1\ttype_f1\tbleu")
        for mode in args.modes:
            r = harness.execute_pair(man, "src", "tgt", mode, corpus).report
            bleu = "" if r.bleu is None else f"{r.bleu:.2f}"
            print(f"{mode}\t{r.precision:.4f}\t{r.recall:.4f}\t{r.f1:.4f}\t{r.type_f1:.4f}\t{bleu}", flush=True)


if __name__ == "__main__":
    main()

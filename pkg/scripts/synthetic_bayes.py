"""Gibbs segmentation of a Zipfian synthetic corpus; prints boundary scores per random seed."""

import argparse
import logging

from bilingseg.bayes import BayesHyperparams, GibbsConfig, segment_corpus
from bilingseg.metrics import corpus_boundary_prf
from bilingseg.synthetic import zipf_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--utterances", type=int, default=5000)
    ap.add_argument("--lexicon", type=int, default=100)
    ap.add_argument("--sweeps", type=int, default=2000)
    ap.add_argument("--alpha0", type=float, default=20.0)
    ap.add_argument("--p-hash", type=float, default=0.5)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--corpus-seed", type=int, default=0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    corpus = zipf_corpus(n_utterances=args.utterances, n_words=args.lexicon, seed=args.corpus_seed)
    gold = [p.gold_boundaries for p in corpus]
    print("seed\tprecision\trecall\tf1\ttypes")
    for seed in args.seeds:
        res = segment_corpus(corpus, BayesHyperparams(args.alpha0, args.p_hash),
                             GibbsConfig(sweeps=args.sweeps, seed=seed))
        s = corpus_boundary_prf(gold, [res.segmentations[p.id] for p in corpus])
        print(f"{seed}\t{s.precision:.4f}\t{s.recall:.4f}\t{s.f1:.4f}\t{len(res.state.counts)}", flush=True)


if __name__ == "__main__":
    main()

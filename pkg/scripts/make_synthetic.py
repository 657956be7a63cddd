"""Write a synthetic learner corpus with every side input the taggers need.

    python3 scripts/make_synthetic.py data/ --train 500 --valid 100 --test 100

Produces train/valid/test JSONL, deps.conll, lexicon.txt and frozen.bin.
"""

import argparse

from graminspect.synthetic import write_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir")
    ap.add_argument("--train", type=int, default=500)
    ap.add_argument("--valid", type=int, default=100)
    ap.add_argument("--test", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--error-rate", type=float, default=0.65)
    args = ap.parse_args()
    paths = write_dataset(args.out_dir, {"train": args.train, "valid": args.valid, "test": args.test},
                          seed=args.seed, error_rate=args.error_rate)
    for name, path in paths.items():
        print(f"{name:8s} {path}")


if __name__ == "__main__":
    main()

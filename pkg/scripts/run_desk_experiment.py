"""Desk-scale run: 5-seed toy farm on synthetic data, tuned ensemble, score table.

    python3 scripts/run_desk_experiment.py --workdir runs/desk
"""

import argparse
import json
from pathlib import Path

from graminspect.desk import run_desk


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workdir", default="runs/desk")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=120)
    ap.add_argument("--train", type=int, default=500)
    ap.add_argument("--valid", type=int, default=100)
    ap.add_argument("--test", type=int, default=100)
    ap.add_argument("--data-seed", type=int, default=0)
    args = ap.parse_args()

    res = run_desk(args.workdir, args.train, args.valid, args.test, range(args.seeds),
                   args.epochs, args.data_seed, progress=print)
    print(res.table(), end="")
    print("tuned thresholds:", res.tuned.thetas)
    out = Path(args.workdir) / "results.json"
    out.write_text(json.dumps(res.to_dict(), indent=2) + "\n", encoding="utf-8")
    print("wrote", out)


if __name__ == "__main__":
    main()

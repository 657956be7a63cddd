"""Desk-scale end-to-end experiment on the synthetic corpus.

Trains a farm of toy variant-A taggers that differ only in seed, tunes the
ensemble thresholds on the validation split and scores everything on the
test split.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import synthetic
from .corpus import read_corpus, write_predictions
from .ensemble import EnsembleConfig, ensemble, tune_thresholds
from .evaluate import EvalReport, LEVELS, evaluate, format_table
from .graphs import align_parses, dep_to_char_adjacency, read_dependencies
from .tagger import predict, save_checkpoint, toy_profile, train


@dataclass
class DeskResult:
    seeds: list[int]
    single: list[EvalReport]
    ensemble: EvalReport
    tuned: EnsembleConfig
    train_seconds: list[float] = field(default_factory=list)

    def median_single(self, level: str) -> float:
        return statistics.median(r[level].f1 for r in self.single)

    def table(self) -> str:
        rows = [(f"seed {s}", r) for s, r in zip(self.seeds, self.single)]
        return format_table(rows + [("ensemble", self.ensemble)])

    def to_dict(self) -> dict:
        return {
            "seeds": self.seeds,
            "single_f1": [{lvl: r[lvl].f1 for lvl in LEVELS} for r in self.single],
            "median_single_f1": {lvl: self.median_single(lvl) for lvl in LEVELS},
            "ensemble_f1": {lvl: self.ensemble[lvl].f1 for lvl in LEVELS},
            "tuned_thetas": list(self.tuned.thetas),
            "train_seconds": [round(t, 1) for t in self.train_seconds],
        }


def _graphs(sentences, parses):
    aligned = align_parses(sentences, parses)
    return {s.id: dep_to_char_adjacency(aligned[s.id], s.chars) for s in sentences}


def run_desk(workdir, n_train: int = 500, n_valid: int = 100, n_test: int = 100,
             seeds=range(5), epochs: int = 120, data_seed: int = 0,
             progress: Callable[[str], None] = lambda msg: None) -> DeskResult:
    work = Path(workdir)
    paths = synthetic.write_dataset(work / "data",
                                    {"train": n_train, "valid": n_valid, "test": n_test},
                                    seed=data_seed)
    parses = read_dependencies(paths["deps"])
    splits = {k: read_corpus(paths[k]) for k in ("train", "valid", "test")}
    graphs = {k: _graphs(v, parses) for k, v in splits.items()}

    seeds = list(seeds)
    valid_preds, test_preds, seconds = [], [], []
    for seed in seeds:
        t0 = time.perf_counter()
        m, t = toy_profile(epochs=epochs, seed=seed)
        ckpt, _ = train(splits["train"], m, t, graphs=graphs["train"])
        seconds.append(time.perf_counter() - t0)
        save_checkpoint(ckpt, work / f"seed{seed}.ckpt")
        for name, bucket in (("valid", valid_preds), ("test", test_preds)):
            pred = predict(ckpt, splits[name], graphs[name], model_id=f"seed{seed}")
            write_predictions(pred, work / f"{name}.seed{seed}.tsv")
            bucket.append(pred)
        progress(f"seed {seed}: trained in {seconds[-1]:.1f}s, test "
                 + ", ".join(f"{lvl} {evaluate(test_preds[-1], splits['test'])[lvl].f1:.3f}"
                             for lvl in LEVELS))

    tuned = tune_thresholds(valid_preds, splits["valid"]).config
    final = ensemble(test_preds, tuned, [s.id for s in splits["test"]])
    write_predictions(final, work / "test.ensemble.tsv")
    return DeskResult(seeds, [evaluate(p, splits["test"]) for p in test_preds],
                      evaluate(final, splits["test"]), tuned, seconds)

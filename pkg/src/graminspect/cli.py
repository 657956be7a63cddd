"""``graminspect`` command line: train, predict, ensemble, tune, evaluate, graph, farm.

Exit codes: 0 success, 2 usage or configuration error, 3 unreadable or
malformed input, 4 numeric failure during training, 5 checkpoint integrity
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import KEYS, ConfigError, RunConfig, format_config, load_config
from .corpus import CorpusError, read_corpus, read_predictions, write_predictions
from .ensemble import (EnsembleError, ensemble, load_manifest, read_manifest, tune_thresholds,
                       write_manifest)
from .evaluate import evaluate, format_table
from .graphs import (Lexicon, align_parses, build_lexicon_graph, dep_to_char_adjacency,
                     format_edge_list, read_dependencies)
from .tagger import (CheckpointError, NumericError, load_checkpoint, predict, read_frozen,
                     save_checkpoint, train)
from .tagger.frozen import FrozenEmbeddingTable
from .tagger.model import MissingInputError

EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC, EXIT_INTEGRITY = 2, 3, 4, 5

log = logging.getLogger("graminspect")

MODEL_KEYS = ("variant", "embed_dim", "gat_dims", "gat_heads", "gat_final_activation",
              "leaky_slope", "lstm_hidden", "max_len")
TRAIN_KEYS = ("batch_size", "learning_rate", "epochs", "dropout", "seed")
GRAPH_INPUT_KEYS = ("deps", "lexicon", "frozen")
THETA_KEYS = ("theta1", "theta2", "theta3", "tie_break", "objective")

COMMANDS = {
    "train": ("train a tagger and write a checkpoint",
              ("train", "valid", "out") + GRAPH_INPUT_KEYS + MODEL_KEYS + TRAIN_KEYS),
    "predict": ("decode a corpus with a checkpoint",
                ("checkpoint", "input", "out", "variant") + GRAPH_INPUT_KEYS),
    "ensemble": ("combine the prediction files listed in a manifest",
                 ("models", "out") + THETA_KEYS),
    "tune": ("grid-search ensemble thresholds against gold labels",
             ("models", "gold", "out", "grid", "tie_break", "objective")),
    "evaluate": ("score a prediction file against gold labels",
                 ("gold", "pred", "out", "format")),
    "graph": ("dump character graphs as edge lists",
              ("input", "out", "graph_kind", "deps", "lexicon")),
    "farm": ("train several seeds, predict, and write ensemble manifests",
             ("train", "valid", "input", "out", "farm_size") + GRAPH_INPUT_KEYS + MODEL_KEYS + TRAIN_KEYS),
}


# -- helpers ------------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_run_log(artifact, command: str, cfg: RunConfig, inputs, **extra) -> Path:
    """Sidecar ``<artifact>.log.json`` holding everything needed to rerun the command."""
    record = {
        "tool": "graminspect",
        "version": __version__,
        "command": command,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "inputs": {str(p): sha256_file(p) for p in sorted(set(map(str, inputs)))},
        **extra,
    }
    path = Path(f"{artifact}.log.json")
    path.write_text(json.dumps(record, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                    encoding="utf-8")
    return path


class Inputs:
    """Loads each graph or feature source once and serves per-corpus views."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.used: list[str] = []
        self._parses = None
        self._lexicon = None
        self._frozen = None

    def corpus(self, path):
        self.used.append(str(path))
        return read_corpus(path)

    def parses(self):
        if self._parses is None:
            if not self.cfg.deps:
                raise MissingInputError("dependency graphs need --deps")
            self._parses = [p for path in self.cfg.deps for p in read_dependencies(path)]
            self.used += self.cfg.deps
        return self._parses

    def lexicon(self):
        if self._lexicon is None:
            if not self.cfg.lexicon:
                raise MissingInputError("lexicon graphs need --lexicon")
            self._lexicon = Lexicon.from_file(self.cfg.lexicon)
            self.used.append(self.cfg.lexicon)
        return self._lexicon

    def frozen(self) -> FrozenEmbeddingTable:
        if self._frozen is None:
            if not self.cfg.frozen:
                raise MissingInputError("variant B needs --frozen feature files")
            tables = [read_frozen(p) for p in self.cfg.frozen]
            if len({t.width for t in tables}) != 1:
                raise CorpusError("frozen feature files disagree on width")
            self._frozen = FrozenEmbeddingTable({k: v for t in tables for k, v in t.items()})
            self.used += self.cfg.frozen
        return self._frozen

    def graphs(self, sentences, kind: str):
        if kind == "dependency":
            parses = align_parses(sentences, self.parses())
            return {s.id: dep_to_char_adjacency(parses[s.id], s.chars) for s in sentences}
        if kind == "lexicon":
            lex = self.lexicon()
            return {s.id: build_lexicon_graph(s.chars, lex) for s in sentences}
        raise ConfigError(f"unknown graph kind {kind!r}; expected dependency or lexicon")

    def for_variant(self, variant: str, sentences):
        """(graphs, frozen) as the given variant needs them."""
        if variant == "A":
            return self.graphs(sentences, "dependency"), None
        if variant == "C":
            return self.graphs(sentences, "lexicon"), None
        return None, self.frozen()


def _fit(cfg: RunConfig, inputs: Inputs, train_sents, valid_sents, seed: int):
    frozen_dim = inputs.frozen().width if cfg.variant == "B" else 0
    graphs, frozen = inputs.for_variant(cfg.variant, train_sents)
    valid = None
    if valid_sents is not None:
        vg, vf = inputs.for_variant(cfg.variant, valid_sents)
        valid = (valid_sents, vg, vf)
    return train(train_sents, cfg.model_config(frozen_dim), cfg.train_config(seed),
                 graphs=graphs, frozen=frozen, valid=valid)


# -- commands -----------------------------------------------------------------

def cmd_train(cfg: RunConfig) -> int:
    cfg.require("train", "out")
    inputs = Inputs(cfg)
    train_sents = inputs.corpus(cfg.train)
    valid_sents = inputs.corpus(cfg.valid) if cfg.valid else None
    ckpt, history = _fit(cfg, inputs, train_sents, valid_sents, cfg.seed)
    save_checkpoint(ckpt, cfg.out)
    write_run_log(cfg.out, "train", cfg, inputs.used, fingerprint=ckpt.fingerprint, metrics=history)
    print(f"wrote {cfg.out} (fingerprint {ckpt.fingerprint})")
    return 0


def cmd_predict(cfg: RunConfig) -> int:
    cfg.require("checkpoint", "input", "out")
    ckpt = load_checkpoint(cfg.checkpoint)
    variant = cfg.variant if "variant" in cfg.explicit else None
    ckpt.require(variant=variant)
    inputs = Inputs(cfg)
    inputs.used.append(cfg.checkpoint)
    sents = inputs.corpus(cfg.input)
    graphs, frozen = inputs.for_variant(ckpt.config.variant, sents)
    pred = predict(ckpt, sents, graphs, frozen, variant=variant)
    write_predictions(pred, cfg.out)
    write_run_log(cfg.out, "predict", cfg, inputs.used, model_id=pred.model_id, is_lgn=pred.is_lgn)
    return 0


def _manifest_inputs(path):
    return [path] + [p for p, _ in read_manifest(path)]


def cmd_ensemble(cfg: RunConfig) -> int:
    cfg.require("models", "out")
    preds = load_manifest(cfg.models)
    out = ensemble(preds, cfg.ensemble_config())
    write_predictions(out, cfg.out)
    write_run_log(cfg.out, "ensemble", cfg, _manifest_inputs(cfg.models))
    return 0


def cmd_tune(cfg: RunConfig) -> int:
    cfg.require("models", "gold", "out")
    preds = load_manifest(cfg.models)
    gold = read_corpus(cfg.gold)
    res = tune_thresholds(preds, gold, grid=cfg.grid or None, objective=cfg.objective,
                          tie_break=cfg.tie_break)
    Path(cfg.out).write_text(res.to_tsv(), encoding="utf-8")
    best = dict(zip(("theta1", "theta2", "theta3"), res.config.thetas))
    write_run_log(cfg.out, "tune", cfg, _manifest_inputs(cfg.models) + [cfg.gold],
                  best=best, score=res.score)
    # stdout is itself a valid config fragment for `ensemble --config`
    print(format_config(RunConfig(**best), ("theta1", "theta2", "theta3")), end="")
    print(f"# {cfg.objective} F1 = {res.score:.4f}")
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    cfg.require("gold", "pred")
    gold = read_corpus(cfg.gold)
    report = evaluate(read_predictions(cfg.pred), gold)
    if cfg.format == "tsv":
        text = report.to_tsv()
    elif cfg.format == "table":
        text = format_table([(Path(cfg.pred).stem, report)])
    else:
        raise ConfigError(f"unknown report format {cfg.format!r}; expected tsv or table")
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
        write_run_log(cfg.out, "evaluate", cfg, [cfg.gold, cfg.pred])
    else:
        print(text, end="")
    return 0


def cmd_graph(cfg: RunConfig) -> int:
    cfg.require("input", "out")
    inputs = Inputs(cfg)
    sents = inputs.corpus(cfg.input)
    graphs = inputs.graphs(sents, cfg.graph_kind)
    with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
        for s in sents:
            fh.write(format_edge_list(s.id, graphs[s.id]))
    write_run_log(cfg.out, "graph", cfg, inputs.used)
    return 0


def cmd_farm(cfg: RunConfig) -> int:
    """Seeds ``seed .. seed+farm_size-1``; one manifest per predicted corpus."""
    cfg.require("train", "input", "out")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = Inputs(cfg)
    train_sents = inputs.corpus(cfg.train)
    targets = {}
    for path in filter(None, (cfg.valid, cfg.input)):
        targets[Path(path).stem] = inputs.corpus(path)
    entries = {name: [] for name in targets}
    for seed in range(cfg.seed, cfg.seed + cfg.farm_size):
        ckpt, _ = _fit(cfg, inputs, train_sents, None, seed)
        save_checkpoint(ckpt, out / f"seed{seed}.ckpt")
        for name, sents in targets.items():
            graphs, frozen = inputs.for_variant(cfg.variant, sents)
            pred = predict(ckpt, sents, graphs, frozen)
            fname = f"{name}.seed{seed}.tsv"
            write_predictions(pred, out / fname)
            entries[name].append((fname, pred.is_lgn))
        log.info("farm: seed %d done", seed)
    for name, rows in entries.items():
        write_manifest(rows, out / f"{name}.manifest.tsv")
        print(f"wrote {out / f'{name}.manifest.tsv'}")
    write_run_log(out / "farm", "farm", cfg, inputs.used)
    return 0


HANDLERS = {"train": cmd_train, "predict": cmd_predict, "ensemble": cmd_ensemble, "tune": cmd_tune,
            "evaluate": cmd_evaluate, "graph": cmd_graph, "farm": cmd_farm}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graminspect", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"graminspect {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (help_text, keys) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        for key in keys:
            assert key in KEYS, key
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, default=argparse.SUPPRESS,
                           metavar=key.upper())
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    opts = vars(args)
    command, config_path, verbose = opts.pop("command"), opts.pop("config"), opts.pop("verbose")
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = load_config(config_path, opts)
        return HANDLERS[command](cfg)
    except (ConfigError, MissingInputError, EnsembleError) as exc:
        print(f"graminspect {command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CheckpointError as exc:
        print(f"graminspect {command}: integrity failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (NumericError, FloatingPointError) as exc:
        print(f"graminspect {command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CorpusError, OSError, UnicodeDecodeError, ValueError) as exc:
        line = getattr(exc, "line", None)
        where = f" (line {line})" if line else ""
        print(f"graminspect {command}: input error{where}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

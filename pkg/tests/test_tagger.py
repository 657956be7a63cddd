from dataclasses import replace

import numpy as np
import pytest

from graminspect import synthetic
from graminspect.corpus import Sentence, ErrorSpan, ErrorType, read_predictions, write_predictions
from graminspect.evaluate import evaluate
from graminspect.graphs import Lexicon, build_lexicon_graph, chain_graph, dep_to_char_adjacency
from graminspect.numerics import finite_diff_check, make_rng
from graminspect.tagger import (
    Checkpoint, CheckpointError, FingerprintError, ModelConfig, init_params,
    load_checkpoint, make_instances, model_forward, predict, read_frozen, save_checkpoint,
    sentence_loss, toy_profile, train, write_frozen,
)
from graminspect.tagger.checkpoint import checkpoint_bytes
from graminspect.tagger.config import build_vocab
from graminspect.tagger.lstm import bilstm_forward, init_bilstm
from graminspect.tagger.model import MissingInputError

from cases import bilstm_gradcheck, pipeline_gradcheck, tiny_config
from conftest import random_graph

# -- BiLSTM ------------------------------------------------------------------

def test_bilstm_zero_weights_give_zero_states(rng):
    p = {k: np.zeros_like(v) for k, v in init_bilstm(rng, 4, 5).items()}
    out, _ = bilstm_forward(rng.normal(size=(6, 4)), p)
    assert out.shape == (6, 10) and not out.any()


def test_bilstm_mirror_property(rng):
    p = init_bilstm(rng, 3, 4)
    for k in ("W", "U", "b"):
        p[f"lstm.bw.{k}"] = p[f"lstm.fw.{k}"].copy()
    x = rng.normal(size=(5, 3))
    out, _ = bilstm_forward(x, p)
    rev, _ = bilstm_forward(x[::-1], p)
    assert np.allclose(rev[:, :4], out[::-1, 4:], atol=1e-14)
    assert np.allclose(rev[:, 4:], out[::-1, :4], atol=1e-14)


@pytest.mark.parametrize("seed", range(20))
def test_bilstm_gradient(seed):
    rep = bilstm_gradcheck(seed)
    assert rep.passed, str(rep)


def test_bilstm_width_mismatch(rng):
    with pytest.raises(ValueError):
        bilstm_forward(rng.normal(size=(3, 5)), init_bilstm(rng, 4, 2))


# -- pipelines ------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(20))
def test_variant_a_end_to_end_gradient(seed):
    rep = pipeline_gradcheck(seed, "A")
    assert rep.passed, str(rep)


@pytest.mark.parametrize("variant", ["B", "C"])
@pytest.mark.parametrize("seed", range(5))
def test_other_variants_gradient(variant, seed):
    rep = pipeline_gradcheck(seed, variant)
    assert rep.passed, str(rep)


def test_dropout_path_gradient():
    # fixed masks: replay the same rng state for the analytic and numeric passes
    cfg = tiny_config("A")
    params = init_params(cfg, 3)
    rng = make_rng(0)
    ids, tags, graph = np.array([1, 2, 3, 1]), [0, 1, 2, 0], random_graph(rng, 4)
    state = make_rng(99).bit_generator.state

    def run(with_grad):
        r = make_rng(0)
        r.bit_generator.state = state
        return sentence_loss(params, cfg, ids, tags, graph, rng=r, dropout=0.3, with_grad=with_grad)

    _, grads = run(True)
    rep = finite_diff_check(lambda: run(False)[0], params, grads)
    assert rep.passed, str(rep)


def test_variant_a_single_char_shape():
    cfg = tiny_config("A")
    V, _ = model_forward(init_params(cfg, 0), cfg, [2], chain_graph(1))
    assert V.shape == (1, 9)


def test_missing_inputs_rejected():
    for variant in "AC":
        cfg = tiny_config(variant)
        with pytest.raises(MissingInputError):
            model_forward(init_params(cfg, 0), cfg, [1, 2])
    cfg = tiny_config("B")
    with pytest.raises(MissingInputError):
        model_forward(init_params(cfg, 0), cfg, [1, 2])


def test_variant_b_zero_frozen_equals_ablation():
    cfg = tiny_config("B")
    params = init_params(cfg, 5)
    ids = np.array([1, 3, 2, 2])
    V, _ = model_forward(params, cfg, ids, frozen=np.zeros((4, 2)))
    # same network with the frozen input columns removed, fed no frozen features at all
    ablated_cfg = replace(cfg, frozen_dim=1)
    ablated = {k: v.copy() for k, v in params.items()}
    E = cfg.embed_dim
    for d in ("fw", "bw"):
        ablated[f"lstm.{d}.W"] = np.concatenate(
            [params[f"lstm.{d}.W"][:, :E], np.zeros((params[f"lstm.{d}.W"].shape[0], 1))], axis=1)
    V2, _ = model_forward(ablated, ablated_cfg, ids, frozen=np.zeros((4, 1)))
    assert np.allclose(V, V2, atol=1e-15)


def test_variant_c_has_no_lstm():
    cfg = tiny_config("C")
    params = init_params(cfg, 0)
    assert not any(k.startswith("lstm") for k in params)
    assert params["out.W"].shape == (9, 3)


def test_emissions_deterministic():
    cfg = tiny_config("A")
    g = random_graph(make_rng(1), 4)
    a, _ = model_forward(init_params(cfg, 8), cfg, [1, 2, 3, 0], g)
    b, _ = model_forward(init_params(cfg, 8), cfg, [1, 2, 3, 0], g)
    assert a.tobytes() == b.tobytes()


def test_eval_mode_has_no_dropout():
    cfg = tiny_config("A")
    params = init_params(cfg, 2)
    g = random_graph(make_rng(1), 4)
    a, tr = model_forward(params, cfg, [1, 2, 3, 0], g, dropout=0.5)
    b, _ = model_forward(params, cfg, [1, 2, 3, 0], g)
    assert np.array_equal(a, b) and all(m is None for m in tr.masks.values())


# -- training and prediction ------------------------------------------------------

@pytest.fixture(scope="module")
def small_corpus():
    items = synthetic.generate(40, seed=3, prefix="t")
    sents = [it.sentence for it in items]
    graphs = {it.sentence.id: dep_to_char_adjacency(it.parse, it.sentence.chars) for it in items}
    return sents, graphs


def test_zero_learning_rate_keeps_params(small_corpus):
    sents, graphs = small_corpus
    m, t = toy_profile(epochs=1, learning_rate=0.0, seed=4)
    ckpt, _ = train(sents, m, t, graphs=graphs)
    fresh = init_params(ckpt.config, 4)
    assert all(np.array_equal(fresh[k], ckpt.params[k]) for k in fresh)


def test_training_is_deterministic(small_corpus, tmp_path):
    sents, graphs = small_corpus
    m, t = toy_profile(epochs=2, seed=9)
    a, ha = train(sents, m, t, graphs=graphs)
    b, hb = train(sents, m, t, graphs=graphs)
    assert checkpoint_bytes(a) == checkpoint_bytes(b)
    assert [repr(r["loss"]) for r in ha] == [repr(r["loss"]) for r in hb]
    c, _ = train(sents, m, replace(t, seed=10), graphs=graphs)
    assert checkpoint_bytes(a) != checkpoint_bytes(c)


def test_untrained_zero_heads_predict_correct(small_corpus):
    sents, graphs = small_corpus
    m, _ = toy_profile()
    cfg = replace(m, vocab=build_vocab(s.chars for s in sents))
    params = init_params(cfg, 0)
    params["out.W"][:] = 0.0
    params["out.b"][:] = 0.0
    pred = predict(Checkpoint(cfg, params), sents, graphs)
    assert set(pred.spans) == {s.id for s in sents}
    assert all(not v for v in pred.spans.values())


def test_windowing_splits_long_sentences():
    s = Sentence("long", "甲乙丙甲乙丙甲", frozenset({ErrorSpan(3, 5, ErrorType.W)}))
    cfg = replace(tiny_config("A"), max_len=3)
    insts = make_instances([s], cfg, {"long": chain_graph(7)})
    assert [(i.offset, len(i.ids)) for i in insts] == [(0, 3), (3, 3), (6, 1)]
    assert [i.tags for i in insts] == [[0, 0, 7], [8, 8, 0], [0]]
    assert insts[1].graph.n == 3


@pytest.mark.slow
def test_memorises_small_corpus(tmp_path):
    items = synthetic.generate(200, seed=21, prefix="m")
    sents = [it.sentence for it in items]
    graphs = {it.sentence.id: dep_to_char_adjacency(it.parse, it.sentence.chars) for it in items}
    m, t = toy_profile(epochs=60, seed=0)
    ckpt, _ = train(sents, m, t, graphs=graphs)
    pred = predict(ckpt, sents, graphs)
    assert evaluate(pred, sents).position.f1 >= 0.95
    gold = {(s.id, e) for s in sents for e in s.gold}
    hit = {(sid, e) for sid, spans in pred.spans.items() for e in spans}
    assert len(gold & hit) >= 0.95 * len(gold)
    write_predictions(pred, tmp_path / "p.tsv")
    assert read_predictions(tmp_path / "p.tsv").spans == pred.spans


def test_variant_c_trains_on_lexicon_graph():
    items = synthetic.generate(30, seed=5, prefix="c")
    sents = [it.sentence for it in items]
    lex = Lexicon(synthetic.lexicon_words())
    graphs = {s.id: build_lexicon_graph(s.chars, lex) for s in sents}
    m, t = toy_profile(ModelConfig(variant="C"), epochs=2, seed=1)
    ckpt, hist = train(sents, m, t, graphs=graphs)
    assert hist[-1]["loss"] < hist[0]["loss"]
    assert predict(ckpt, sents, graphs).is_lgn


# -- checkpoints and frozen tables -----------------------------------------------

@pytest.fixture
def ckpt():
    cfg = tiny_config("A")
    return Checkpoint(cfg, init_params(cfg, 1), seed=1, epoch=3)


def test_checkpoint_round_trip(ckpt, tmp_path):
    p = tmp_path / "m.ckpt"
    save_checkpoint(ckpt, p)
    blob = p.read_bytes()
    assert blob.startswith(b"GRAMINSPECT-CKPT-1\n")
    back = load_checkpoint(p)
    assert back.config == ckpt.config and back.seed == 1 and back.epoch == 3
    assert all(np.array_equal(back.params[k], ckpt.params[k]) for k in ckpt.params)
    save_checkpoint(back, tmp_path / "again.ckpt")
    assert (tmp_path / "again.ckpt").read_bytes() == blob


def test_checkpoint_corruption_detected(ckpt, tmp_path):
    p = tmp_path / "m.ckpt"
    save_checkpoint(ckpt, p)
    blob = bytearray(p.read_bytes())
    blob[-5] ^= 0x01
    p.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError, match="checksum"):
        load_checkpoint(p)
    p.write_bytes(checkpoint_bytes(ckpt)[:-10])
    with pytest.raises(CheckpointError, match="payload"):
        load_checkpoint(p)
    p.write_bytes(b"GRAMINSPECT-CKPT-9\n{}\n")
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(p)


def test_checkpoint_fingerprint_guard(ckpt, tmp_path):
    save_checkpoint(ckpt, tmp_path / "m.ckpt")
    with pytest.raises(FingerprintError):
        load_checkpoint(tmp_path / "m.ckpt", expect=tiny_config("B"))
    with pytest.raises(FingerprintError):
        predict(ckpt, [Sentence("x", "甲乙")], frozen={"x": np.zeros((2, 2))}, variant="B")


def test_frozen_table_round_trip(tmp_path):
    rows = {"a": make_rng(0).normal(size=(3, 4)), "b": np.arange(8.0).reshape(2, 4)}
    write_frozen(rows, tmp_path / "f.bin")
    back = read_frozen(tmp_path / "f.bin")
    assert back.width == 4 and set(back) == {"a", "b"}
    assert np.array_equal(back["a"], rows["a"]) and not back["a"].flags.writeable

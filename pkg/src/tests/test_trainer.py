import os
import tempfile

import numpy as np
import pandas as pd
import pytest

import src.model.trainer as trainer_module
from src.core.errors import DivergenceError
from src.eval.classification import node_classification_eval
from src.eval.metrics import score_pairs
from src.graph.graph_io import AttributedGraph, add_isolated_nodes, generate_sbm_attributed
from src.graph.preprocess import attribute_similarity, reconstructed_adjacency, sparsify_similarity
from src.graph.walks import context_pairs, generate_walks
from src.model.config import ModelConfig
from src.model.danrl import encode_all, init_params
from src.model.trainer import (HISTORY_COLUMNS, _check_finite, _epoch_pairs, export_embeddings, load_checkpoint,
                               load_embeddings, prepare_inputs, save_checkpoint, train)

SMALL = dict(layer_dims=(16, 8), r=2, l=10, window=3, neg=3, batch_size=32)


def test_export_single_node_format():
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "emb.txt")
        export_embeddings(np.array([[0.0, 0.0]]), ["paper7"], path)
        with open(path, "rb") as f:
            assert f.read() == b"1 2\npaper7 0 0\n"


def test_export_load_round_trip():
    Y = np.random.default_rng(0).normal(size=(5, 3))
    ids = ["a", "b", "10", "d", "e"]
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "emb.txt")
        export_embeddings(Y, ids, path)
        with open(path, encoding="utf-8") as f:
            assert len(f.read().splitlines()) == 6
        loaded, loaded_ids = load_embeddings(path)
    np.testing.assert_array_equal(loaded, Y)
    assert loaded_ids == ids


def test_zero_epochs_returns_initial_embeddings(sbm_graph):
    config = ModelConfig(epochs=0, **SMALL)
    result = train(sbm_graph, config)
    adj = prepare_inputs(sbm_graph, config)
    expected = encode_all(init_params(config.encoder_dims(sbm_graph.n), config.seed), adj.R)
    np.testing.assert_array_equal(result.embeddings, expected)
    assert result.epochs_run == 0
    assert list(result.history.columns) == HISTORY_COLUMNS


def test_training_is_deterministic(sbm_graph):
    config = ModelConfig(epochs=5, **SMALL)
    a = train(sbm_graph, config)
    b = train(sbm_graph, config)
    assert a.embeddings.tobytes() == b.embeddings.tobytes()
    with tempfile.TemporaryDirectory() as d:
        pa, pb = os.path.join(d, "a.txt"), os.path.join(d, "b.txt")
        export_embeddings(a.embeddings, sbm_graph.node_ids, pa)
        export_embeddings(b.embeddings, sbm_graph.node_ids, pb)
        with open(pa, "rb") as fa, open(pb, "rb") as fb:
            assert fa.read() == fb.read()


def test_history_log_written(sbm_graph):
    config = ModelConfig(epochs=3, **SMALL)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "history.csv")
        result = train(sbm_graph, config, log_path=path)
        history = pd.read_csv(path)
    assert list(history.columns) == HISTORY_COLUMNS
    assert history["epoch"].tolist() == [1, 2, 3]
    assert np.all(np.isfinite(history.to_numpy()))
    assert len(result.history) == 3


@pytest.mark.parametrize("mode", ["alternating", "combined"])
def test_update_modes_and_optimizers_train(sbm_graph, mode):
    for optimizer in ("sgd", "momentum", "adam"):
        config = ModelConfig(epochs=2, update_mode=mode, optimizer=optimizer, **SMALL)
        result = train(sbm_graph, config)
        assert result.embeddings.shape == (sbm_graph.n, 8)
        assert np.all(np.isfinite(result.embeddings))


def test_checkpoint_resume_matches_parameters(sbm_graph):
    config = ModelConfig(epochs=4, **SMALL)
    with tempfile.TemporaryDirectory() as d:
        ckpt = os.path.join(d, "model.npz")
        first = train(sbm_graph, config, checkpoint_path=ckpt)
        params, saved_config, epoch = load_checkpoint(ckpt)
        assert epoch == 4
        assert saved_config == config
        for name, arr in first.params.arrays().items():
            np.testing.assert_array_equal(params.arrays()[name], arr)

        longer = ModelConfig(epochs=6, **SMALL)
        resumed = train(sbm_graph, longer, resume_from=ckpt)
        assert resumed.epochs_run == 2
        assert resumed.history["epoch"].tolist() == [5, 6]


def test_checkpoint_round_trip():
    params = init_params((6, 4, 2), 0)
    config = ModelConfig(layer_dims=(4, 2))
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "c.npz")
        save_checkpoint(params, config, 12, path)
        loaded, loaded_config, epoch = load_checkpoint(path)
    assert epoch == 12 and loaded_config == config
    np.testing.assert_array_equal(loaded.H, params.H)


def test_non_finite_terms_raise():
    with pytest.raises(DivergenceError) as info:
        _check_finite({"sg": float("nan"), "ae": 1.0}, epoch=3, batch=0, step="sg")
    assert info.value.diagnostics["epoch"] == 3


def test_edgeless_graph_trains():
    graph = generate_sbm_attributed(5, 2, 0.0, 0.0, 6, 0.1, seed=0)
    result = train(graph, ModelConfig(epochs=2, **SMALL))
    assert np.all(np.isfinite(result.embeddings))


def test_pair_cap_limits_pairs_per_center(sbm_graph):
    corpus = generate_walks(sbm_graph, r=2, l=10, seed=0, window=3, neg=3)
    every = _epoch_pairs(corpus, 0, 0, np.random.default_rng(0))
    np.testing.assert_array_equal(every, context_pairs(corpus, corpus.round_indices(0)))

    capped = _epoch_pairs(corpus, 0, 5, np.random.default_rng(0))
    per_center = np.bincount(capped[:, 0], minlength=sbm_graph.n)
    available = np.bincount(every[:, 0], minlength=sbm_graph.n)
    np.testing.assert_array_equal(per_center, np.minimum(available, 5))
    assert set(map(tuple, capped.tolist())) <= set(map(tuple, every.tolist()))

    result = train(sbm_graph, ModelConfig(epochs=2, sg_pairs_per_node=5, **SMALL))
    assert np.all(np.isfinite(result.embeddings))


@pytest.mark.parametrize("exclude_center", [False, True])
def test_exclude_center_reaches_negative_draws(sbm_graph, monkeypatch, exclude_center):
    draws = []
    original = trainer_module.sample_negative_matrix

    def recording(sampler, contexts, neg, rng, centers=None):
        negatives = original(sampler, contexts, neg, rng, centers=centers)
        draws.append((centers, negatives))
        return negatives

    monkeypatch.setattr(trainer_module, "sample_negative_matrix", recording)
    train(sbm_graph, ModelConfig(epochs=2, exclude_center=exclude_center, **SMALL))
    assert draws
    for centers, negatives in draws:
        if exclude_center:
            assert centers is not None
            assert not np.any(negatives == centers[:, None])
        else:
            assert centers is None


def test_similarity_top_k_used_by_training(sbm_graph):
    config = ModelConfig(epochs=0, similarity_top_k=3, **SMALL)
    S = sparsify_similarity(attribute_similarity(sbm_graph.X), 3)
    R = reconstructed_adjacency(sbm_graph.adjacency, S, config.eta, config.psi, config.chi).R
    np.testing.assert_array_equal(prepare_inputs(sbm_graph, config).R, R)

    expected = encode_all(init_params(config.encoder_dims(sbm_graph.n), config.seed), R)
    np.testing.assert_array_equal(train(sbm_graph, config).embeddings, expected)
    dense = train(sbm_graph, ModelConfig(epochs=0, **SMALL)).embeddings
    assert not np.array_equal(dense, expected)


def test_first_order_mean_skips_batches_without_edges(monkeypatch):
    """Batches of 3 and 1 on K4: the single-node batch never holds an edge"""
    pairs = [(u, v) for u in range(4) for v in range(u + 1, 4)]
    graph = AttributedGraph.from_pairs(4, pairs, np.eye(4))
    fixed = {"sg": 2.0, "ae": 3.0, "fop": 1.0, "reg": 0.5}

    def constant_loss(params, bundle, weights, activation):
        return dict(fixed), params.zeros_like()

    monkeypatch.setattr(trainer_module, "loss_and_gradients", constant_loss)
    for mode in ("alternating", "combined"):
        config = ModelConfig(layer_dims=(4, 2), r=1, l=5, window=2, neg=1, batch_size=3, epochs=2,
                             update_mode=mode)
        history = train(graph, config).history
        assert history["L_fop"].tolist() == [1.0, 1.0]
        assert history["L_ae"].tolist() == [3.0, 3.0]


def test_sbm_loss_halves_and_classifies(sbm_graph):
    """200 epochs with the default config: loss halves and the blocks separate"""
    result = train(sbm_graph, ModelConfig(epochs=200))
    history = result.history
    assert history["L_total"].iloc[-1] <= 0.5 * history["L_total"].iloc[0]
    assert history["L_total"].iloc[-1] < history["L_total"].iloc[0]
    report = node_classification_eval(result.embeddings, sbm_graph.labels, train_frac=0.3, repeats=10, seed=0)
    assert report.micro_f1_mean >= 0.90
    print(f"✅ SBM end-to-end: micro-F1 {report.micro_f1_mean:.3f}")


def test_isolated_nodes_embed_near_their_block(sbm_graph):
    """Attribute-bearing isolated nodes land next to nodes of the block their attributes match"""
    hits_per_seed = []
    for seed in range(10):
        rng = np.random.default_rng([seed, 9])
        blocks = np.array([0, 1, 0, 1, 0])
        X_new = (np.arange(sbm_graph.num_attributes)[None, :] % 2 == blocks[:, None]).astype(float)
        X_new = np.where(rng.random(X_new.shape) < 0.1, 1.0 - X_new, X_new)
        graph = add_isolated_nodes(sbm_graph, X_new, blocks)
        Y = train(graph, ModelConfig(epochs=30, seed=seed)).embeddings
        new = np.arange(sbm_graph.n, graph.n)
        assert np.all(np.isfinite(Y[new]))
        assert np.all(np.linalg.norm(Y[new], axis=1) > 0)
        hits = 0
        for v, block in zip(new, blocks):
            candidates = np.arange(sbm_graph.n)
            scores = score_pairs(Y, np.column_stack([np.full(len(candidates), v), candidates]))
            hits += int(sbm_graph.labels[candidates[np.argmax(scores)]] == block)
        hits_per_seed.append(hits)
    assert all(h >= 4 for h in hits_per_seed), hits_per_seed

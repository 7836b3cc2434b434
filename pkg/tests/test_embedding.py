"""The embedding discriminator: forward pass, gradients, training, search."""

from __future__ import annotations

import math

import numpy as np
import pytest

from typopredict.data import Dataset, FeatureCell, LanguageRecord, Role
from typopredict.embedding import (
    EmbeddingModel,
    HyperParams,
    NeuralPredictor,
    Vocabulary,
    best_config,
    build_vocab,
    default_grid,
    export_embeddings,
    grid_search,
    load_model,
    make_token,
    predict_feature_neural,
    save_model,
    train_model,
    training_pairs,
)
from typopredict.embedding import GridResult
from typopredict.errors import DataFormatError, DataValidationError
from typopredict.geo import GeoZoning, cluster_dataset
from typopredict.predictions import System

F_PAR = "90A Parity"
F_ECHO = "91A Echo"


def echo_corpus(n=40, mask_rate=0.4, seed=3):
    """Languages whose hidden feature simply repeats a visible one.

    A model that relates tokens to each language's own evidence solves this;
    one that ranks candidates identically for every language cannot beat the
    majority class.  Returns the dataset and the gold values of the masks.
    """
    rng = np.random.default_rng(seed)
    records, gold = [], {}
    for i in range(n):
        par = "1 A" if i % 2 == 0 else "2 B"
        cells = {F_PAR: FeatureCell.known(par)}
        if rng.random() < mask_rate:
            cells[F_ECHO] = FeatureCell.masked()
            gold[(f"el{i:03d}", F_ECHO)] = par
        else:
            cells[F_ECHO] = FeatureCell.known(par)
        records.append(
            LanguageRecord(
                wals_code=f"el{i:03d}",
                name=f"Lang {i}",
                latitude=10.0,
                longitude=20.0,
                genus="G",
                family="F",
                country_codes=frozenset({"FR"}),
                features=cells,
            )
        )
    return Dataset(records=tuple(records), role=Role.TRAIN), gold


def tiny_model(dim=2, n_langs=1, n_tokens=2):
    """A model over a throwaway vocabulary, for poking parameters directly."""
    langs = tuple(f"l{i}" for i in range(n_langs))
    tokens = tuple(f"90A F: {i} v{i}" for i in range(n_tokens))
    vocab = Vocabulary(
        langs=langs,
        tokens=tokens,
        lang_ids={c: i for i, c in enumerate(langs)},
        token_ids={t: i for i, t in enumerate(tokens)},
        feature_values={"90A F": tuple(f"{i} v{i}" for i in range(n_tokens))},
        token_feature={t: "90A F" for t in tokens},
        lang_families={c: "Fam" for c in langs},
    )
    return EmbeddingModel(vocab, HyperParams(dim=dim, dropout=0.0), rng=0)


class TestVocabulary:
    def test_token_format(self):
        token = make_token("81A Order of Subject, Object and Verb", "1 SOV")
        assert token == "81A Order of Subject, Object and Verb: 1 SOV"

    def test_build_vocab_contents(self):
        ds, _ = echo_corpus(n=4, mask_rate=0.0)
        clustering = cluster_dataset(ds, k=1, seed=0)
        vocab = build_vocab(ds, GeoZoning(), clustering)
        assert vocab.langs == tuple(sorted(r.wals_code for r in ds))
        assert vocab.lang_ids == {c: i for i, c in enumerate(vocab.langs)}
        assert vocab.token_ids == {t: i for i, t in enumerate(vocab.tokens)}
        assert "genus: G" in vocab.tokens
        assert "family: F" in vocab.tokens
        assert "cluster: 0" in vocab.tokens
        assert "name: Lang 0" in vocab.tokens
        assert not any(t.startswith("country:") for t in vocab.tokens)
        assert not any(t.startswith(("latzone", "lonzone", "latlon")) for t in vocab.tokens)
        assert vocab.feature_values[F_PAR] == ("1 A", "2 B")
        assert vocab.token_feature[f"{F_PAR}: 1 A"] == F_PAR
        assert vocab.lang_families["el000"] == "F"

    def test_masked_cells_make_no_tokens(self):
        ds, gold = echo_corpus(n=10, mask_rate=0.5)
        clustering = cluster_dataset(ds, k=1, seed=0)
        vocab = build_vocab(ds, GeoZoning(), clustering)
        pairs = training_pairs(vocab, ds, GeoZoning(), clustering)
        echo_tok_ids = {
            vocab.token_ids[make_token(F_ECHO, v)] for v in ("1 A", "2 B")
        }
        for (code, _), _value in gold.items():
            lang_id = vocab.lang_ids[code]
            owned = {tok for lang, tok in pairs if lang == lang_id}
            assert not owned & echo_tok_ids

    def test_json_round_trip(self):
        ds, _ = echo_corpus(n=4, mask_rate=0.0)
        clustering = cluster_dataset(ds, k=1, seed=0)
        vocab = build_vocab(ds, GeoZoning(), clustering)
        rebuilt = Vocabulary.from_json_dict(vocab.to_json_dict())
        assert rebuilt.langs == vocab.langs
        assert rebuilt.tokens == vocab.tokens
        assert rebuilt.feature_values == vocab.feature_values
        assert rebuilt.token_feature == vocab.token_feature
        assert rebuilt.lang_families == vocab.lang_families


class TestForwardPass:
    def test_zero_parameters_mean_even_odds(self):
        model = tiny_model(dim=3)
        model.lang_emb[:] = 0.0
        model.tok_emb[:] = 0.0
        model.w[:] = 0.0
        assert model.logit(0, 0) == 0.0
        assert model.prob(0, 0) == 0.5

    def test_hand_worked_logit(self):
        # affine part 0.175, interaction 0.01, bias 0.2
        model = tiny_model(dim=2)
        model.lang_emb[0] = [0.1, 0.2]
        model.tok_emb[0] = [0.3, -0.1]
        model.w[:] = [0.5, -0.25, 0.75, 0.5]
        model.b[0] = 0.2
        assert model.logit(0, 0) == pytest.approx(0.385, abs=1e-15)
        assert model.prob(0, 0) == pytest.approx(0.595078473866134, abs=1e-15)

    def test_probability_is_clamped(self):
        model = tiny_model(dim=2)
        model.w[:] = 0.0
        model.lang_emb[0] = [100.0, 100.0]
        model.tok_emb[0] = [100.0, 100.0]
        assert model.prob(0, 0) == 1.0 - 1e-15
        model.tok_emb[0] = [-100.0, -100.0]
        assert model.prob(0, 0) == 1e-15

    def test_loss_matches_log_loss(self):
        model = tiny_model(dim=2)
        logit = model.logit(0, 0)
        p = 1.0 / (1.0 + math.exp(-logit))
        loss_pos, _ = model.loss_and_grads(0, 0, 1.0)
        loss_neg, _ = model.loss_and_grads(0, 0, 0.0)
        assert loss_pos == pytest.approx(-math.log(p), abs=1e-12)
        assert loss_neg == pytest.approx(-math.log(1.0 - p), abs=1e-12)

    def test_ones_mask_changes_nothing(self):
        model = tiny_model(dim=4)
        mask = np.ones(8)
        loss_a, grads_a = model.loss_and_grads(0, 1, 1.0)
        loss_b, grads_b = model.loss_and_grads(0, 1, 1.0, mask)
        assert loss_a == loss_b
        for key in grads_a:
            np.testing.assert_array_equal(grads_a[key], grads_b[key])


class TestGradients:
    @pytest.mark.parametrize("label", [0.0, 1.0])
    @pytest.mark.parametrize("masked", [False, True])
    def test_matches_finite_differences(self, label, masked):
        model = tiny_model(dim=4, n_tokens=3)
        mask = None
        if masked:
            rng = np.random.default_rng(11)
            mask = (rng.random(8) >= 0.25) / 0.75
        _, grads = model.loss_and_grads(0, 1, label, mask)
        h = 1e-6

        def loss_at():
            value, _ = model.loss_and_grads(0, 1, label, mask)
            return value

        checks = [
            ("lang", model.lang_emb, (0, slice(None))),
            ("tok", model.tok_emb, (1, slice(None))),
            ("w", model.w, (slice(None),)),
            ("b", model.b, (slice(None),)),
        ]
        for key, param, index in checks:
            flat_view = param[index]
            for i in range(flat_view.size):
                original = flat_view[i]
                flat_view[i] = original + h
                up = loss_at()
                flat_view[i] = original - h
                down = loss_at()
                flat_view[i] = original
                numeric = (up - down) / (2 * h)
                analytic = grads[key][i]
                scale = max(abs(numeric), abs(analytic), 1e-8)
                assert abs(numeric - analytic) / scale < 1e-4, (key, i)


class TestTraining:
    def test_loss_decreases(self):
        ds, _ = echo_corpus(n=20)
        predictor = NeuralPredictor(
            dim=8, dropout=0.0, clusters=1, epochs=30, lr=0.01, seed=0
        )
        predictor.fit(ds, log=lambda *a: None)
        history = predictor.losses_
        assert len(history) == 30
        assert history[-1] < history[0]

    def test_bitwise_deterministic(self):
        ds, _ = echo_corpus(n=12)
        first = NeuralPredictor(dim=8, dropout=0.3, clusters=1, epochs=10, seed=5).fit(ds)
        second = NeuralPredictor(dim=8, dropout=0.3, clusters=1, epochs=10, seed=5).fit(ds)
        np.testing.assert_array_equal(first.model_.lang_emb, second.model_.lang_emb)
        np.testing.assert_array_equal(first.model_.tok_emb, second.model_.tok_emb)
        np.testing.assert_array_equal(first.model_.w, second.model_.w)
        assert first.predict(ds) == second.predict(ds)
        third = NeuralPredictor(dim=8, dropout=0.3, clusters=1, epochs=10, seed=6).fit(ds)
        assert not np.array_equal(first.model_.lang_emb, third.model_.lang_emb)

    def test_negative_sampling_invariants(self):
        ds, _ = echo_corpus(n=12, mask_rate=0.0)
        clustering = cluster_dataset(ds, k=1, seed=0)
        vocab = build_vocab(ds, GeoZoning(), clustering)
        pairs = training_pairs(vocab, ds, GeoZoning(), clustering)
        owned = {}
        for lang, tok in pairs:
            owned.setdefault(lang, set()).add(tok)

        seen = []

        class Recorder(EmbeddingModel):
            def loss_and_grads(self, lang_id, tok_id, label, mask=None):
                seen.append((lang_id, tok_id, label))
                return super().loss_and_grads(lang_id, tok_id, label, mask)

        model = Recorder(vocab, HyperParams(dim=4, dropout=0.0, epochs=20), rng=1)
        train_model(model, pairs, rng=2)
        assert len(seen) == 20 * len(pairs)
        positives = 0
        for lang, tok, label in seen:
            if label == 1.0:
                positives += 1
                assert tok in owned[lang]
            else:
                assert label == 0.0
                assert tok not in owned[lang]
        share = positives / len(seen)
        assert 0.45 < share < 0.55

    def test_language_owning_every_token_is_rejected(self):
        model = tiny_model(dim=2, n_langs=1, n_tokens=2)
        with pytest.raises(DataValidationError):
            train_model(model, [(0, 0), (0, 1)], rng=0)

    def test_empty_pairs_rejected(self):
        model = tiny_model()
        with pytest.raises(DataValidationError):
            train_model(model, [], rng=0)


class TestLearnability:
    def test_echo_feature_is_learned(self):
        """The discriminator recovers a feature that copies visible evidence."""
        ds, gold = echo_corpus()
        predictor = NeuralPredictor(
            dim=16, dropout=0.3, clusters=1, epochs=200, lr=0.01, seed=0
        ).fit(ds)
        preds = predictor.predict(ds)
        correct = sum(preds[cell].value == value for cell, value in gold.items())
        assert correct / len(gold) >= 0.9


class TestPrediction:
    def test_unseen_language_or_feature(self):
        model = tiny_model()
        assert predict_feature_neural(model, model.vocab, "nope", "90A F") is None
        assert predict_feature_neural(model, model.vocab, "l0", "unknown") is None

    def test_tie_keeps_first_candidate(self):
        model = tiny_model(n_tokens=3)
        model.lang_emb[:] = 0.0
        model.tok_emb[:] = 0.0
        model.w[:] = 0.0
        pred = predict_feature_neural(model, model.vocab, "l0", "90A F")
        assert pred.value == "0 v0"
        assert pred.score == 0.5
        assert pred.system is System.NEURAL


class TestPersistence:
    def test_round_trip(self, tmp_path):
        ds, _ = echo_corpus(n=10)
        predictor = NeuralPredictor(dim=8, dropout=0.0, clusters=1, epochs=5, seed=0).fit(ds)
        path = tmp_path / "model.npz"
        save_model(predictor.model_, path)
        loaded = load_model(path)
        np.testing.assert_array_equal(loaded.lang_emb, predictor.model_.lang_emb)
        np.testing.assert_array_equal(loaded.tok_emb, predictor.model_.tok_emb)
        np.testing.assert_array_equal(loaded.w, predictor.model_.w)
        np.testing.assert_array_equal(loaded.b, predictor.model_.b)
        assert loaded.vocab.tokens == predictor.model_.vocab.tokens
        for code in loaded.vocab.langs:
            a = predict_feature_neural(loaded, loaded.vocab, code, F_PAR)
            b = predict_feature_neural(
                predictor.model_, predictor.model_.vocab, code, F_PAR
            )
            assert a == b

    def test_predictor_file_round_trip(self, tmp_path):
        ds, gold = echo_corpus(n=10)
        predictor = NeuralPredictor(dim=8, dropout=0.0, clusters=1, epochs=5, seed=0).fit(ds)
        path = tmp_path / "predictor.npz"
        predictor.save(path)
        loaded = NeuralPredictor.from_file(path)
        assert loaded.predict(ds) == predictor.predict(ds)

    def test_malformed_file_rejected(self, tmp_path):
        path = tmp_path / "junk.npz"
        np.savez(path, lang_emb=np.zeros((2, 2)))
        with pytest.raises(DataFormatError):
            load_model(path)

    def test_shape_mismatch_rejected(self, tmp_path):
        ds, _ = echo_corpus(n=6)
        predictor = NeuralPredictor(dim=4, dropout=0.0, clusters=1, epochs=2, seed=0).fit(ds)
        model = predictor.model_
        path = tmp_path / "model.npz"
        model.lang_emb = model.lang_emb[:-1]
        save_model(model, path)
        with pytest.raises(DataFormatError):
            load_model(path)

    def test_export_embeddings(self, tmp_path):
        ds, _ = echo_corpus(n=6)
        predictor = NeuralPredictor(dim=4, dropout=0.0, clusters=1, epochs=2, seed=0).fit(ds)
        model = predictor.model_
        lang_path = tmp_path / "langs.tsv"
        export_embeddings(model, lang_path, kind="lang")
        lines = lang_path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == model.vocab.n_langs
        label, family, *values = lines[0].split("\t")
        assert label == model.vocab.langs[0]
        assert family == "F"
        np.testing.assert_array_equal(
            np.array([float(v) for v in values]), model.lang_emb[0]
        )
        tok_path = tmp_path / "tokens.tsv"
        export_embeddings(model, tok_path, kind="token")
        assert len(tok_path.read_text(encoding="utf-8").splitlines()) == model.vocab.n_tokens
        with pytest.raises(DataValidationError):
            export_embeddings(model, tmp_path / "x.tsv", kind="word")


class TestHyperParams:
    def test_validation(self):
        with pytest.raises(DataValidationError):
            HyperParams(dim=0)
        with pytest.raises(DataValidationError):
            HyperParams(dropout=1.0)
        with pytest.raises(DataValidationError):
            HyperParams(dropout=-0.1)
        with pytest.raises(DataValidationError):
            HyperParams(clusters=0)
        with pytest.raises(DataValidationError):
            HyperParams(epochs=0)
        with pytest.raises(DataValidationError):
            HyperParams(lr=0.0)

    def test_defaults(self):
        hp = HyperParams()
        assert (hp.dim, hp.dropout, hp.clusters, hp.epochs, hp.lr) == (
            512,
            0.5,
            300,
            200,
            0.001,
        )

    def test_default_grid(self):
        grid = default_grid()
        assert len(grid) == 72
        assert len(set(grid)) == 72
        assert grid[0] == HyperParams(dim=128, dropout=0.0, clusters=1)
        assert grid[-1] == HyperParams(dim=1024, dropout=0.5, clusters=1000)
        # clusters vary slowest, dropout fastest
        assert [hp.clusters for hp in grid[:9]] == [1] * 9
        assert [hp.dropout for hp in grid[:3]] == [0.0, 0.3, 0.5]


class TestGridSearch:
    def micro_grid(self):
        return (
            HyperParams(dim=4, dropout=0.0, clusters=1, epochs=8, lr=0.01),
            HyperParams(dim=8, dropout=0.0, clusters=1, epochs=8, lr=0.01),
        )

    def test_results_in_grid_order(self):
        ds, gold = echo_corpus(n=14)
        gold_ds, _ = echo_corpus(n=14, mask_rate=0.0)
        results = grid_search(ds, gold_ds, self.micro_grid(), seed=0)
        assert [r.hyper for r in results] == list(self.micro_grid())
        assert all(0.0 <= r.accuracy <= 1.0 for r in results)

    def test_parallel_matches_serial(self):
        ds, _ = echo_corpus(n=14)
        gold_ds, _ = echo_corpus(n=14, mask_rate=0.0)
        serial = grid_search(ds, gold_ds, self.micro_grid(), seed=0, jobs=1)
        parallel = grid_search(ds, gold_ds, self.micro_grid(), seed=0, jobs=2)
        assert serial == parallel

    def test_best_config_prefers_earlier_ties(self):
        a = GridResult(HyperParams(dim=4), 0.5)
        b = GridResult(HyperParams(dim=8), 0.7)
        c = GridResult(HyperParams(dim=16), 0.7)
        assert best_config([a, b, c]) is b

    def test_empty_grid_rejected(self):
        ds, _ = echo_corpus(n=6)
        with pytest.raises(DataValidationError):
            grid_search(ds, ds, (), seed=0)

import numpy as np
import pytest

from pairclust import datagen, loss, model
from pairclust import training as train
from pairclust.exceptions import ConfigError, DataError, DivergenceError

from oracles import pairwise_logistic_reference


def clean_setup(n=120, m_pairs=600, seed=0):
    gt = datagen.synth_generate(n, 3, seed=seed)
    ann = datagen.sample_annotations(gt, m_pairs, np.eye(3), seed=seed + 1)
    return gt, ann


class TestTrain:
    def test_loss_descends_on_clean_data(self):
        gt, ann = clean_setup()
        cfg = train.TrainConfig(epochs=20, batch_pairs=64, hidden_dims=(16, 16), seed=0)
        _, log = train.train(gt.x_seen, ann, cfg)
        assert log.records[-1].cc < log.records[0].cc
        assert all(np.isfinite(r.cc) for r in log.records)

    def test_deterministic_given_seed(self):
        gt, ann = clean_setup()
        cfg = train.TrainConfig(epochs=5, batch_pairs=64, hidden_dims=(8,), seed=3,
                                learn_b=True, lam=1e-3)
        p1, log1 = train.train(gt.x_seen, ann, cfg)
        p2, log2 = train.train(gt.x_seen, ann, cfg)
        for a, b in zip(p1.weights, p2.weights):
            assert np.array_equal(a, b)
        assert np.array_equal(p1.b_logits, p2.b_logits)
        for r1, r2 in zip(log1.records, log2.records):
            assert (r1.epoch, r1.cc, r1.vol, r1.clamp_hits) == (
                r2.epoch, r2.cc, r2.vol, r2.clamp_hits
            )

    def test_single_step_is_exactly_minus_lr_times_grad(self):
        gt, _ = clean_setup(n=20)
        ann = datagen.AnnotationSet(np.array([1]), np.array([2]), np.array([1]), gt.seen_count)
        cfg = train.TrainConfig(
            epochs=1, batch_pairs=1, hidden_dims=(4,), seed=5, learn_b=True
        )
        x = gt.x_seen
        # replicate the trainer's step by hand on the seed-5 initial parameters
        p0 = model.init_params([3, 4, 3], seed=5)
        xb = x[:, np.concatenate([ann.i, ann.j])]
        m, tape = model.forward(p0, xb)
        b_mat, _ = model.b_matrix(p0)
        cc = loss.loss_cc(loss.PairBatch(m[:, :1], m[:, 1:], ann.y), b_mat, cfg.clamp)
        grads = model.backward(
            p0, tape, np.concatenate([cc.grad_left, cc.grad_right], axis=1)
        )
        expected_w = [w - cfg.lr_theta * dw for w, dw in zip(p0.weights, grads.weights)]
        expected_b = [b - cfg.lr_theta * db for b, db in zip(p0.biases, grads.biases)]
        expected_logits = p0.b_logits - cfg.lr_bprime * loss.grad_bprime(cc.grad_b, b_mat)

        params, _ = train.train(x, ann, cfg)
        for got, want in zip(params.weights, expected_w):
            assert np.array_equal(got, want)
        for got, want in zip(params.biases, expected_b):
            assert np.array_equal(got, want)
        assert np.array_equal(params.b_logits, expected_logits)

    def test_vanilla_step_loss_matches_reference(self):
        # one epoch, one full batch: the logged loss is the plain pairwise
        # logistic loss of the freshly initialized network
        gt, ann = clean_setup(n=60, m_pairs=50)
        cfg = train.TrainConfig(
            epochs=1, batch_pairs=len(ann), hidden_dims=(8,), seed=7, lam=0.0
        )
        _, log = train.train(gt.x_seen, ann, cfg)
        p0 = model.init_params([3, 8, 3], seed=7)
        m, _ = model.forward(p0, gt.x_seen[:, np.concatenate([ann.i, ann.j])])
        ref = pairwise_logistic_reference(
            m[:, : len(ann)], m[:, len(ann) :], ann.y, cfg.clamp
        )
        assert abs(log.records[0].cc - ref) <= 1e-12

    def test_divergence_error_names_step(self):
        gt, ann = clean_setup(n=60, m_pairs=200)
        x = gt.x_seen.copy()
        x[0, int(ann.i[0])] = np.inf  # poison a referenced feature column
        cfg = train.TrainConfig(epochs=2, batch_pairs=len(ann), hidden_dims=(8,), seed=0)
        with pytest.raises(DivergenceError) as err:
            with np.errstate(invalid="ignore"):
                train.train(x, ann, cfg)
        assert err.value.step == 0

    def test_volume_term_active(self):
        gt, ann = clean_setup()
        cfg = train.TrainConfig(epochs=3, batch_pairs=64, hidden_dims=(8,),
                                seed=1, lam=1e-2, learn_b=True)
        _, log = train.train(gt.x_seen, ann, cfg)
        assert any(r.vol != 0.0 for r in log.records)

    def test_full_matrix_volume_mode(self):
        gt, ann = clean_setup(n=60, m_pairs=200)
        cfg = train.TrainConfig(epochs=2, batch_pairs=64, hidden_dims=(8,),
                                seed=1, lam=1e-3, vol_on_full_matrix=True)
        params, log = train.train(gt.x_seen, ann, cfg)
        assert all(np.isfinite(r.vol) for r in log.records)
        assert all(np.all(np.isfinite(w)) for w in params.weights)

    def test_annotations_must_fit_features(self):
        gt, ann = clean_setup()
        with pytest.raises(DataError):
            train.train(gt.x_seen[:, :10], ann, train.TrainConfig(epochs=1))

    def test_batch_smaller_than_k_rejected_with_volume(self):
        cfg = train.TrainConfig(batch_pairs=1, lam=1e-2, n_clusters=3)
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_early_stopping(self):
        gt, ann = clean_setup(n=60, m_pairs=300)
        train_ann, val_ann = train.split_validation(ann, 0.2, seed=0)
        cfg = train.TrainConfig(epochs=400, batch_pairs=64, hidden_dims=(8,),
                                seed=2, patience=5)
        _, log = train.train(gt.x_seen, train_ann, cfg, validation=val_ann)
        assert len(log.records) < 400


class TestTrainLog:
    def test_csv_round_trip(self, tmp_path):
        gt, ann = clean_setup(n=60, m_pairs=100)
        cfg = train.TrainConfig(epochs=3, batch_pairs=64, hidden_dims=(8,), seed=0)
        _, log = train.train(gt.x_seen, ann, cfg)
        path = tmp_path / "log.csv"
        log.save_csv(path)
        loaded = train.TrainLog.load_csv(path)
        assert [(r.epoch, r.cc, r.vol, r.clamp_hits, r.seconds) for r in loaded.records] == [
            (r.epoch, r.cc, r.vol, r.clamp_hits, r.seconds) for r in log.records
        ]


class TestSplitValidation:
    def test_disjoint_and_complete(self):
        gt, ann = clean_setup(n=60, m_pairs=100)
        tr, va = train.split_validation(ann, 0.1, seed=4)
        assert len(tr) + len(va) == len(ann)
        assert len(va) == 10

    def test_bad_fraction(self):
        gt, ann = clean_setup(n=60, m_pairs=100)
        with pytest.raises(ConfigError):
            train.split_validation(ann, 1.5, seed=0)


class TestSelectLambda:
    def test_singleton_grid(self):
        gt, ann = clean_setup(n=60, m_pairs=300)
        tr, va = train.split_validation(ann, 0.1, seed=0)
        cfg = train.TrainConfig(epochs=3, batch_pairs=64, hidden_dims=(8,),
                                seed=0, lambda_grid=(0.0,))
        best, results = train.select_lambda(gt.x_seen, tr, cfg, va)
        assert best == 0.0
        assert len(results) == 1
        assert results[0].error is None

    def test_selected_is_argmin(self):
        gt, ann = clean_setup(n=80, m_pairs=400)
        tr, va = train.split_validation(ann, 0.1, seed=1)
        cfg = train.TrainConfig(epochs=5, batch_pairs=64, hidden_dims=(8,),
                                seed=1, learn_b=True, lambda_grid=(0.0, 1e-3, 1e-1))
        best, results = train.select_lambda(gt.x_seen, tr, cfg, va)
        chosen = next(r for r in results if r.lam == best)
        assert all(chosen.val_cc <= r.val_cc for r in results if r.error is None)

    def test_needs_grid(self):
        gt, ann = clean_setup(n=60, m_pairs=100)
        cfg = train.TrainConfig(lambda_grid=None)
        with pytest.raises(ConfigError):
            train.select_lambda(gt.x_seen, ann, cfg, ann)

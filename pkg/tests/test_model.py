import numpy as np
import pytest

from pairclust import model
from pairclust.exceptions import ConfigError, ShapeError, StateError
from pairclust.linalg import sigmoid

from oracles import finite_diff, mlp_forward_reference, rel_err

GOLDEN_INPUT = np.array([[0.3, -1.2], [2.0, 0.1], [-0.5, 0.7]])
# forward output of seed-7 [3,4,3] parameters on GOLDEN_INPUT, frozen from a
# straight-line reference evaluation of the same formulas
GOLDEN_OUTPUT = np.array(
    [
        [0.255823532715706, 0.2917490168235947],
        [0.4854262050986998, 0.44100123676745145],
        [0.25875026218559405, 0.26724974640895377],
    ]
)


class TestInit:
    def test_deterministic(self):
        p1 = model.init_params([3, 4, 3], seed=7)
        p2 = model.init_params([3, 4, 3], seed=7)
        for a, b in zip(p1.weights, p2.weights):
            assert np.array_equal(a, b)
        for a, b in zip(p1.biases, p2.biases):
            assert np.array_equal(a, b)
        assert np.array_equal(p1.b_logits, p2.b_logits)

    def test_seeds_differ(self):
        p1 = model.init_params([3, 4, 3], seed=7)
        p2 = model.init_params([3, 4, 3], seed=8)
        assert not np.array_equal(p1.weights[0], p2.weights[0])

    def test_b_logits_layout(self):
        p = model.init_params([3, 4, 3], seed=0)
        expected = np.array([[1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]])
        assert np.array_equal(p.b_logits, expected)

    def test_weight_scale(self):
        p = model.init_params([16, 8, 4], seed=1)
        assert np.abs(p.weights[0]).max() <= 1.0 / 4.0
        assert np.abs(p.weights[1]).max() <= 1.0 / np.sqrt(8.0)
        assert all(np.all(b == 0.0) for b in p.biases)

    def test_invalid_dims(self):
        with pytest.raises(ConfigError):
            model.init_params([3], seed=0)
        with pytest.raises(ConfigError):
            model.init_params([3, 0, 2], seed=0)


class TestForward:
    def test_columns_on_simplex(self):
        rng = np.random.default_rng(0)
        p = model.init_params([5, 16, 4], seed=2)
        m, _ = model.forward(p, rng.normal(size=(5, 40)))
        assert np.abs(m.sum(axis=0) - 1.0).max() <= 1e-9
        assert m.min() >= 0.0

    def test_zero_params_give_uniform(self):
        p = model.init_params([3, 4, 3], seed=0)
        p.weights = [np.zeros_like(w) for w in p.weights]
        m, _ = model.forward(p, np.random.default_rng(1).normal(size=(3, 7)))
        assert np.allclose(m, 1.0 / 3.0)

    def test_golden_snapshot(self):
        p = model.init_params([3, 4, 3], seed=7)
        m, _ = model.forward(p, GOLDEN_INPUT)
        assert np.abs(m - GOLDEN_OUTPUT).max() < 1e-12

    def test_matches_straight_line_reference(self):
        rng = np.random.default_rng(5)
        p = model.init_params([4, 6, 5, 3], seed=9)
        x = rng.normal(size=(4, 11))
        m, _ = model.forward(p, x)
        ref = mlp_forward_reference(p.weights, p.biases, x)
        assert np.abs(m - ref).max() < 1e-12

    def test_shape_error(self):
        p = model.init_params([3, 4, 3], seed=0)
        with pytest.raises(ShapeError):
            model.forward(p, np.zeros((4, 2)))


class TestBackward:
    def test_zero_grad(self):
        p = model.init_params([3, 8, 3], seed=0)
        m, tape = model.forward(p, np.random.default_rng(0).normal(size=(3, 4)))
        grads = model.backward(p, tape, np.zeros_like(m))
        assert all(np.all(g == 0.0) for g in grads.weights)
        assert all(np.all(g == 0.0) for g in grads.biases)

    def test_single_layer_chain_rule(self):
        # one linear layer: dW must equal dz x^T with dz from the softmax Jacobian
        p = model.init_params([3, 3], seed=4)
        rng = np.random.default_rng(2)
        x = rng.normal(size=(3, 5))
        g = rng.normal(size=(3, 5))
        m, tape = model.forward(p, x)
        grads = model.backward(p, tape, g)
        dz = m * (g - np.sum(g * m, axis=0, keepdims=True))
        assert np.allclose(grads.weights[0], dz @ x.T)
        assert np.allclose(grads.biases[0], dz.sum(axis=1))

    def test_finite_differences_all_tensors(self):
        rng = np.random.default_rng(12)
        p = model.init_params([3, 8, 8, 3], seed=6)
        x = rng.normal(size=(3, 5))
        c = rng.normal(size=(3, 5))  # fixed linear functional of the output

        def loss_with(tensors):
            m, _ = model.forward(p, x)
            return float((m * c).sum())

        m, tape = model.forward(p, x)
        grads = model.backward(p, tape, c)
        for li in range(len(p.weights)):
            w0 = p.weights[li].copy()

            def f(w, li=li, w0=w0):
                p.weights[li] = w
                out = loss_with(None)
                p.weights[li] = w0
                return out

            assert rel_err(grads.weights[li], finite_diff(f, w0)) < 1e-4
            b0 = p.biases[li].copy()

            def fb(b, li=li, b0=b0):
                p.biases[li] = b
                out = loss_with(None)
                p.biases[li] = b0
                return out

            assert rel_err(grads.biases[li], finite_diff(fb, b0)) < 1e-4

    def test_tape_mismatch(self):
        p = model.init_params([3, 4, 3], seed=0)
        other = model.init_params([3, 4, 4, 3], seed=0)
        m, tape = model.forward(p, np.zeros((3, 2)))
        with pytest.raises(StateError):
            model.backward(other, tape, np.zeros_like(m))


class TestBMatrix:
    def test_zero_logits(self):
        p = model.init_params([3, 4, 3], seed=0)
        p.b_logits = np.zeros((3, 3))
        b, deriv = model.b_matrix(p)
        assert np.allclose(b, 0.5)
        assert np.allclose(deriv, 0.25)

    def test_initial_logits(self):
        p = model.init_params([3, 4, 3], seed=0)
        b, _ = model.b_matrix(p)
        assert np.allclose(np.diag(b), sigmoid(1.0))
        off = b[~np.eye(3, dtype=bool)]
        assert np.allclose(off, sigmoid(-1.0))
        assert abs(b[0, 0] - 0.7311) < 1e-4 and abs(b[0, 1] - 0.2689) < 1e-4

    def test_open_interval(self):
        p = model.init_params([2, 2], seed=0)
        p.b_logits = np.array([[700.0, -700.0], [0.0, 50.0]])
        b, _ = model.b_matrix(p)
        assert np.all(b > 0.0) and np.all(b < 1.0)

    def test_symmetry_preserved(self):
        rng = np.random.default_rng(3)
        p = model.init_params([2, 4], seed=0)
        s = rng.normal(size=(4, 4))
        p.b_logits = s + s.T
        b, _ = model.b_matrix(p)
        assert np.array_equal(b, b.T)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        p = model.init_params([3, 8, 8, 3], seed=13)
        p.b_logits = np.random.default_rng(1).normal(size=(3, 3))
        path = tmp_path / "ckpt.json"
        model.save_checkpoint(p, path)
        q = model.load_checkpoint(path)
        assert q.layer_dims == p.layer_dims and q.seed == p.seed
        for a, b in zip(p.weights, q.weights):
            assert np.array_equal(a, b)
        for a, b in zip(p.biases, q.biases):
            assert np.array_equal(a, b)
        assert np.array_equal(p.b_logits, q.b_logits)

    def test_version_check(self, tmp_path):
        p = model.init_params([2, 2], seed=0)
        path = tmp_path / "ckpt.json"
        model.save_checkpoint(p, path)
        doc = path.read_text().replace('"format_version": 1', '"format_version": 99')
        path.write_text(doc)
        with pytest.raises(ConfigError):
            model.load_checkpoint(path)

import numpy as np
import pytest

from thermoface.errors import ContractViolation, TrainingDivergedError
from thermoface.network import (
    DpmConfig,
    DpmModel,
    backward,
    forward,
    init_glorot,
    loss,
    map_batch,
    sgd_step,
    tanh_activation,
    train,
)
from thermoface.numerics import Rng


def naive_forward(model, x):
    """Independent scalar per-neuron implementation."""
    h = list(x)
    for w, b in model.layers:
        nh = []
        for i in range(w.shape[0]):
            acc = b[i]
            for j in range(w.shape[1]):
                acc += w[i, j] * h[j]
            nh.append(np.tanh(acc))
        h = nh
    out = []
    for i in range(model.w_out.shape[0]):
        acc = 0.0
        for j in range(model.w_out.shape[1]):
            acc += model.w_out[i, j] * h[j]
        out.append(acc)
    return np.array(out)


def naive_loss(model, x, t, penalty):
    m = x.shape[0]
    total = 0.0
    for i in range(m):
        diff = naive_forward(model, x[i]) - t[i]
        total += float(np.sum(diff * diff))
    j = total / m
    n = len(model.layers)
    reg = 0.0
    for w, b in model.layers:
        reg += float(np.sum(w * w)) + float(np.sum(b * b))
    return j + penalty / n * reg


def random_model(sizes, seed, scale=0.5):
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        layers.append(
            (scale * rng.standard_normal((fan_out, fan_in)), scale * rng.standard_normal(fan_out))
        )
    w_out = scale * rng.standard_normal((sizes[0], sizes[-1]))
    return DpmModel(layers=layers, w_out=w_out)


def finite_difference_grads(model, x, t, penalty, h=1e-6):
    """Central differences on every parameter entry."""

    def j():
        return loss(model, x, t, penalty)

    out_layers = []
    for w, b in model.layers:
        gw = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            orig = w[idx]
            w[idx] = orig + h
            jp = j()
            w[idx] = orig - h
            jm = j()
            w[idx] = orig
            gw[idx] = (jp - jm) / (2 * h)
        gb = np.zeros_like(b)
        for idx in np.ndindex(b.shape):
            orig = b[idx]
            b[idx] = orig + h
            jp = j()
            b[idx] = orig - h
            jm = j()
            b[idx] = orig
            gb[idx] = (jp - jm) / (2 * h)
        out_layers.append((gw, gb))
    gw_out = np.zeros_like(model.w_out)
    for idx in np.ndindex(model.w_out.shape):
        orig = model.w_out[idx]
        model.w_out[idx] = orig + h
        jp = j()
        model.w_out[idx] = orig - h
        jm = j()
        model.w_out[idx] = orig
        gw_out[idx] = (jp - jm) / (2 * h)
    return out_layers, gw_out


def assert_grad_close(analytic, fd, rtol=1e-6, atol=1e-9):
    diff = np.abs(analytic - fd)
    scale = np.maximum(np.abs(analytic), np.abs(fd))
    bad = diff > np.maximum(atol, rtol * scale)
    assert not np.any(bad), f"{int(bad.sum())} gradient entries disagree; worst {diff.max():.3e}"


class TestTanh:
    def test_zero(self):
        assert tanh_activation(np.array([0.0]))[0] == 0.0

    def test_formula_at_one(self):
        expected = (np.e**2 - 1) / (np.e**2 + 1)  # 0.7615941559...
        assert abs(tanh_activation(np.array([1.0]))[0] - expected) <= 1e-15
        assert abs(expected - 0.7615941559557649) <= 1e-15

    def test_saturation_no_nan(self):
        out = tanh_activation(np.array([1000.0, -1000.0, 1e308]))
        assert np.array_equal(out, [1.0, -1.0, 1.0])
        assert np.all(np.isfinite(out))


class TestInitGlorot:
    def test_bounds_66_200(self):
        cfg = DpmConfig(input_dim=66, hidden_sizes=(200,), seed=1)
        model = init_glorot(cfg)
        bound = np.sqrt(6.0) / np.sqrt(266.0)
        assert abs(bound - 0.150188) < 1e-5
        w = model.layers[0][0]
        assert w.shape == (200, 66)
        assert np.all(np.abs(w) <= bound)
        # output layer fan pair is (hidden, d)
        assert np.all(np.abs(model.w_out) <= np.sqrt(6.0) / np.sqrt(266.0))

    def test_biases_zero(self):
        model = init_glorot(DpmConfig(hidden_sizes=(20, 30), seed=2))
        for _, b in model.layers:
            assert np.array_equal(b, np.zeros_like(b))

    def test_seed_determinism(self):
        cfg = DpmConfig(hidden_sizes=(50, 50), seed=3)
        m1, m2 = init_glorot(cfg), init_glorot(cfg)
        for (w1, b1), (w2, b2) in zip(m1.layers, m2.layers):
            assert np.array_equal(w1, w2) and np.array_equal(b1, b2)
        assert np.array_equal(m1.w_out, m2.w_out)


class TestForward:
    def test_zero_parameters_give_zero(self):
        model = random_model([6, 4, 6], seed=0)
        zero = DpmModel(
            layers=[(np.zeros_like(w), np.zeros_like(b)) for w, b in model.layers],
            w_out=np.zeros_like(model.w_out),
        )
        assert np.array_equal(forward(zero, np.ones(6)), np.zeros(6))

    def test_constructed_constant_hidden(self):
        # W1 = 0, b1 = c, output selects the first d units: out = tanh(c) each
        d, m = 3, 5
        c = 0.7
        layers = [(np.zeros((m, d)), np.full(m, c))]
        w_out = np.zeros((d, m))
        w_out[:, :d] = np.eye(d)
        model = DpmModel(layers=layers, w_out=w_out)
        out = forward(model, np.array([9.0, -9.0, 0.5]))
        assert np.allclose(out, np.tanh(c), atol=1e-15)

    def test_matches_naive_scalar_net(self):
        for seed in range(3):
            model = random_model([7, 5, 4, 7], seed=seed)
            rng = np.random.default_rng(seed + 100)
            x = rng.standard_normal(7)
            assert np.max(np.abs(forward(model, x) - naive_forward(model, x))) <= 1e-12

    def test_dim_guard(self):
        model = random_model([5, 3, 5], seed=1)
        with pytest.raises(ContractViolation):
            forward(model, np.zeros(6))

    def test_output_norm_bound(self):
        model = random_model([6, 9, 6], seed=2)
        x = np.random.default_rng(0).standard_normal(6) * 5
        bound = np.linalg.norm(model.w_out) * np.sqrt(model.w_out.shape[1])
        assert np.linalg.norm(forward(model, x)) <= bound


class TestLoss:
    def test_perfect_fit_zero(self):
        model = random_model([4, 3, 4], seed=3)
        x = np.random.default_rng(1).standard_normal((5, 4))
        t = np.stack([forward(model, row) for row in x])
        assert loss(model, x, t, 0.0) <= 1e-24

    def test_zero_model_gives_target_norm(self):
        model = random_model([4, 3, 4], seed=4)
        zero = DpmModel(
            layers=[(np.zeros_like(w), np.zeros_like(b)) for w, b in model.layers],
            w_out=np.zeros_like(model.w_out),
        )
        t = np.array([[1.0, 2.0, 3.0, 4.0]])
        assert loss(zero, np.zeros((1, 4)), t, 0.0) == float(np.sum(t * t))

    def test_matches_naive(self):
        rng = np.random.default_rng(5)
        for seed in range(3):
            model = random_model([6, 4, 6], seed=seed + 10)
            x = rng.standard_normal((4, 6))
            t = rng.standard_normal((4, 6))
            for penalty in (0.0, 1e-4, 0.3):
                assert abs(loss(model, x, t, penalty) - naive_loss(model, x, t, penalty)) <= 1e-12

    def test_penalty_monotone(self):
        model = random_model([5, 4, 5], seed=6)
        rng = np.random.default_rng(7)
        x = rng.standard_normal((3, 5))
        t = rng.standard_normal((3, 5))
        assert loss(model, x, t, 1e-2) >= loss(model, x, t, 0.0) >= 0.0

    def test_empty_batch_guard(self):
        model = random_model([4, 3, 4], seed=8)
        with pytest.raises(ContractViolation):
            loss(model, np.zeros((0, 4)), np.zeros((0, 4)), 0.0)


class TestBackward:
    def test_finite_difference_small_net(self):
        rng = np.random.default_rng(20)
        for seed in range(3):
            model = random_model([6, 5, 4, 6], seed=seed + 30, scale=0.4)
            x = rng.uniform(-0.5, 0.5, (8, 6))
            t = rng.uniform(-0.5, 0.5, (8, 6))
            for penalty in (0.0, 1e-4):
                grads = backward(model, x, t, penalty)
                fd_layers, fd_out = finite_difference_grads(model, x, t, penalty)
                for (gw, gb), (fw, fb) in zip(grads.layers, fd_layers):
                    assert_grad_close(gw, fw)
                    assert_grad_close(gb, fb)
                assert_grad_close(grads.w_out, fd_out)

    def test_stationary_point_all_zero(self):
        model = random_model([4, 3, 4], seed=40)
        zero = DpmModel(
            layers=[(np.zeros_like(w), np.zeros_like(b)) for w, b in model.layers],
            w_out=np.zeros_like(model.w_out),
        )
        grads = backward(zero, np.zeros((2, 4)), np.zeros((2, 4)), 0.0)
        for gw, gb in grads.layers:
            assert np.array_equal(gw, np.zeros_like(gw))
            assert np.array_equal(gb, np.zeros_like(gb))
        assert np.array_equal(grads.w_out, np.zeros_like(grads.w_out))

    def test_penalty_only_gradient(self):
        # zero data term: x = 0 through zero w_out leaves only the penalty
        rng = np.random.default_rng(41)
        layers = [(rng.standard_normal((4, 3)), rng.standard_normal(4)),
                  (rng.standard_normal((5, 4)), rng.standard_normal(5))]
        model = DpmModel(layers=layers, w_out=np.zeros((3, 5)))
        penalty = 0.37
        grads = backward(model, np.zeros((2, 3)), np.zeros((2, 3)), penalty)
        n = len(layers)
        for (gw, gb), (w, b) in zip(grads.layers, layers):
            assert np.allclose(gw, 2 * penalty / n * w, atol=1e-15)
            assert np.allclose(gb, 2 * penalty / n * b, atol=1e-15)

    def test_output_matrix_unregularized(self):
        model = random_model([4, 3, 4], seed=42)
        x = np.random.default_rng(43).standard_normal((3, 4))
        t = np.stack([forward(model, row) for row in x])  # data term = 0
        grads = backward(model, x, t, 0.5)
        assert np.max(np.abs(grads.w_out)) <= 1e-12

    def test_alternative_activations_gradcheck(self):
        rng = np.random.default_rng(44)
        for activation in ("sigmoid", "relu"):
            model = random_model([5, 4, 5], seed=45, scale=0.4)
            model.activation = activation
            x = rng.uniform(-0.5, 0.5, (6, 5))
            t = rng.uniform(-0.5, 0.5, (6, 5))
            grads = backward(model, x, t, 1e-4)
            fd_layers, fd_out = finite_difference_grads(model, x, t, 1e-4)
            for (gw, gb), (fw, fb) in zip(grads.layers, fd_layers):
                assert_grad_close(gw, fw, rtol=1e-5, atol=1e-8)
                assert_grad_close(gb, fb, rtol=1e-5, atol=1e-8)
            assert_grad_close(grads.w_out, fd_out, rtol=1e-5, atol=1e-8)


class TestSgdStep:
    def test_zero_lr_no_change(self):
        model = random_model([4, 3, 4], seed=50)
        grads = backward(model, np.ones((2, 4)), np.zeros((2, 4)), 1e-4)
        stepped = sgd_step(model, grads, 0.0)
        for (w1, b1), (w2, b2) in zip(model.layers, stepped.layers):
            assert np.array_equal(w1, w2) and np.array_equal(b1, b2)
        assert np.array_equal(model.w_out, stepped.w_out)

    def test_scalar_quadratic_step(self):
        # J = (w - 3)^2 at w=0, lr=0.25: gradient -6, step to 1.5
        w, lr, target = 0.0, 0.25, 3.0
        grad = 2 * (w - target)
        assert w - lr * grad == 1.5

    def test_deterministic(self):
        model = random_model([4, 3, 4], seed=51)
        x = np.random.default_rng(52).standard_normal((4, 4))
        grads = backward(model, x, x, 1e-4)
        s1 = sgd_step(model, grads, 0.1)
        s2 = sgd_step(model, grads, 0.1)
        for (w1, _), (w2, _) in zip(s1.layers, s2.layers):
            assert np.array_equal(w1, w2)


class TestTrain:
    def _identity_task(self, n=256, d=10, seed=60):
        rng = Rng(seed)
        x = rng.uniform(-0.8, 0.8, n * d).reshape(n, d)
        return x, x.copy()

    def test_identity_task_converges(self):
        x, t = self._identity_task()
        cfg = DpmConfig(
            input_dim=10, hidden_sizes=(16,), l2_penalty=0.0, learning_rate=0.05,
            epochs=30, batch_size=32, seed=61,
        )
        _, report = train(cfg, x, t)
        assert report.epoch_losses[-1] < 0.05 * report.epoch_losses[0]

    def test_determinism_bitwise(self):
        x, t = self._identity_task(seed=62)
        cfg = DpmConfig(input_dim=10, hidden_sizes=(8, 8), epochs=5, batch_size=32, seed=63)
        m1, r1 = train(cfg, x, t)
        m2, r2 = train(cfg, x, t)
        for (w1, b1), (w2, b2) in zip(m1.layers, m2.layers):
            assert np.array_equal(w1, w2) and np.array_equal(b1, b2)
        assert np.array_equal(m1.w_out, m2.w_out)
        assert r1.epoch_losses == r2.epoch_losses

    def test_divergence_guard(self):
        x, t = self._identity_task(seed=64)
        cfg = DpmConfig(input_dim=10, hidden_sizes=(8,), learning_rate=1e3, epochs=30, seed=65)
        with pytest.raises(TrainingDivergedError) as err:
            train(cfg, x, t)
        assert err.value.epoch >= 0 and err.value.batch >= 0

    def test_report_length(self):
        x, t = self._identity_task(n=64, seed=66)
        cfg = DpmConfig(input_dim=10, hidden_sizes=(4,), epochs=7, batch_size=16, seed=67)
        _, report = train(cfg, x, t)
        assert len(report.epoch_losses) == report.epochs_run == 7


class TestMapBatch:
    def test_single_row_equals_forward(self):
        model = random_model([6, 4, 6], seed=70)
        x = np.random.default_rng(71).standard_normal(6)
        assert np.array_equal(map_batch(model, x[None, :])[0], forward(model, x))

    def test_408_rows(self):
        model = random_model([66, 20, 66], seed=72)
        rows = np.random.default_rng(73).standard_normal((408, 66))
        out = map_batch(model, rows)
        assert out.shape == (408, 66)

    def test_zero_ulp_vs_per_row_forward(self):
        model = random_model([8, 5, 8], seed=74)
        rows = np.random.default_rng(75).standard_normal((32, 8))
        out = map_batch(model, rows)
        for i, row in enumerate(rows):
            assert np.array_equal(out[i], forward(model, row))

    def test_width_guard(self):
        model = random_model([8, 5, 8], seed=76)
        with pytest.raises(ContractViolation):
            map_batch(model, np.zeros((3, 7)))

import math

import numpy as np
import pytest

from isograph import (
    AdamState,
    GraphInstance,
    TrainConfig,
    adam_step,
    build_model,
    cross_entropy,
    flatten,
    forward_full,
    gen_synthetic,
    init_adam,
    motif_matrix,
    named_parameters,
    one_hot,
    train,
)
from isograph.classifier import (
    Gradients,
    MLPGrads,
    MLPParams,
    backward_full,
    feature_shape,
    forward_mlp,
    init_mlp,
)


class TestFlatten:
    def test_single_element(self):
        assert flatten(np.full((1, 1, 1), 0.7)).tolist() == [0.7]

    def test_declared_layout(self):
        q = np.arange(8.0).reshape(2, 2, 2)
        vec = flatten(q)
        # channel-major, then row-major: (0,0,0),(0,0,1),(0,1,0),...
        assert vec.tolist() == [0, 1, 2, 3, 4, 5, 6, 7]
        assert vec[1] == q[0, 0, 1]
        assert vec[2] == q[0, 1, 0]

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        q = rng.random((3, 4, 4))
        assert np.array_equal(flatten(q).reshape(q.shape), q)


class TestForwardMLP:
    def test_zero_parameters_give_uniform_prediction(self):
        params = MLPParams(
            w1=np.zeros((5, 4)), b1=np.zeros(4),
            w2=np.zeros((4, 3)), b2=np.zeros(3),
            w3=np.zeros((3, 2)), b3=np.zeros(2),
        )
        y_hat, _ = forward_mlp(params, np.ones(5))
        assert np.allclose(y_hat, [0.5, 0.5])

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(1)
        params = init_mlp(6, (5, 4, 2), rng)
        for _ in range(10):
            y_hat, _ = forward_mlp(params, rng.standard_normal(6))
            assert abs(y_hat.sum() - 1.0) <= 1e-9
            assert np.all(y_hat > 0)

    def test_relu_zeroes_negative_preactivations(self):
        params = MLPParams(
            w1=-np.ones((3, 4)), b1=np.zeros(4),
            w2=np.zeros((4, 3)), b2=np.zeros(3),
            w3=np.zeros((3, 2)), b3=np.zeros(2),
        )
        _, cache = forward_mlp(params, np.ones(3))
        assert np.all(cache.d1 == 0.0)

    def test_length_mismatch(self):
        params = init_mlp(6, (5, 4, 2))
        with pytest.raises(ValueError):
            forward_mlp(params, np.zeros(7))


class TestCrossEntropy:
    def test_near_perfect_prediction(self):
        loss = cross_entropy(np.array([1.0 - 1e-12, 1e-12]), np.array([1.0, 0.0]))
        assert loss == pytest.approx(0.0, abs=1e-9)

    def test_uniform_prediction_is_ln2(self):
        for y in ([1.0, 0.0], [0.0, 1.0]):
            assert cross_entropy(np.array([0.5, 0.5]), np.array(y)) == pytest.approx(math.log(2))

    def test_log_clamp_keeps_loss_finite(self):
        assert np.isfinite(cross_entropy(np.array([1.0, 0.0]), np.array([0.0, 1.0])))

    def test_non_one_hot_rejected(self):
        with pytest.raises(ValueError):
            cross_entropy(np.array([0.5, 0.5]), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            cross_entropy(np.array([0.5, 0.5]), np.array([1.0, 1.0]))

    def test_one_hot_helper(self):
        assert one_hot(-1).tolist() == [1.0, 0.0]
        assert one_hot(1).tolist() == [0.0, 1.0]
        with pytest.raises(ValueError):
            one_hot(0)


class TestAdam:
    def _tiny_model(self):
        return build_model(4, [(2, 1)], widths=(3, 3, 2), seed=5)

    def _grads_like(self, model, fill):
        layer = [np.full_like(lp.kernels, fill) for lp in model.layers]
        m = model.mlp
        mlp = MLPGrads(*[np.full_like(getattr(m, k), fill) for k in ("w1", "b1", "w2", "b2", "w3", "b3")])
        return Gradients(layer, mlp)

    def test_zero_gradient_leaves_parameters_unchanged(self):
        model = self._tiny_model()
        before = {n: p.copy() for n, p in named_parameters(model)}
        state = init_adam(model)
        adam_step(model, self._grads_like(model, 0.0), state, TrainConfig(epochs=1))
        for name, p in named_parameters(model):
            assert np.array_equal(p, before[name])

    def test_first_step_is_signlike(self):
        model = self._tiny_model()
        before = {n: p.copy() for n, p in named_parameters(model)}
        state = init_adam(model)
        config = TrainConfig(epochs=1, learning_rate=0.001)
        adam_step(model, self._grads_like(model, 2.0), state, config)
        # With constant gradient g: m_hat = g, v_hat = g^2, so the update is
        # -lr * g / (|g| + eps) ~= -lr * sign(g).
        for name, p in named_parameters(model):
            delta = p - before[name]
            assert np.allclose(delta, -0.001, rtol=1e-6)
        assert state.step == 1

    def test_shape_mismatch_rejected(self):
        model = self._tiny_model()
        grads = self._grads_like(model, 1.0)
        grads.mlp.b3 = np.zeros(5)
        with pytest.raises(ValueError):
            adam_step(model, grads, init_adam(model), TrainConfig(epochs=1))


class TestTrainConfig:
    def test_defaults_follow_training_protocol(self):
        config = TrainConfig(epochs=10)
        assert config.learning_rate == 0.001
        assert config.adam_beta1 == 0.9
        assert config.adam_beta2 == 0.999
        assert config.adam_eps == 1e-8
        assert config.batch_size == 16

    def test_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(epochs=1, learning_rate=0.0)


class TestTrain:
    def test_single_sample_loss_decreases(self):
        rng = np.random.default_rng(2)
        upper = np.triu(rng.random((5, 5)) < 0.4, 1).astype(float)
        graph = GraphInstance(upper + upper.T, 1)
        model = build_model(5, [(2, 1)], widths=(6, 4, 2), seed=3)

        def sample_loss():
            y_hat, _ = forward_full(model, graph.adjacency)
            return cross_entropy(y_hat, one_hot(graph.label))

        before = sample_loss()
        train(model, [graph], TrainConfig(epochs=1, seed=0))
        assert sample_loss() < before

    def test_seeded_runs_are_bit_identical(self):
        ds = gen_synthetic(8, 6, motif_matrix("clique3"), seed=4)
        traces = []
        for _ in range(2):
            model = build_model(6, [(2, 1)], widths=(8, 4, 2), seed=7)
            traces.append(train(model, ds.graphs, TrainConfig(epochs=3, seed=9, batch_size=4)))
        assert traces[0] == traces[1]

    def test_loss_trace_finite(self):
        ds = gen_synthetic(6, 6, motif_matrix("clique3"), seed=5)
        model = build_model(6, [(2, 1)], widths=(8, 4, 2), seed=8)
        trace = train(model, ds.graphs, TrainConfig(epochs=5, seed=1, batch_size=3))
        assert len(trace) == 5
        assert all(np.isfinite(v) for v in trace)

    def test_empty_training_set_rejected(self):
        model = build_model(5, [(2, 1)], widths=(4, 3, 2), seed=0)
        with pytest.raises(ValueError):
            train(model, [], TrainConfig(epochs=1))


class TestInitialization:
    def test_feature_shape_arithmetic(self):
        assert feature_shape(12, [(3, 2), (4, 3)]) == (6, 7)
        with pytest.raises(ValueError):
            feature_shape(5, [(4, 1), (5, 1)])

    def test_hidden_preactivation_variance_band(self):
        rng = np.random.default_rng(6)
        params = init_mlp(200, (64, 16, 2), rng)
        x = rng.standard_normal((500, 200))
        var = (x @ params.w1).var()
        assert 0.1 <= var <= 10.0

    def test_kernels_start_in_unit_interval(self):
        model = build_model(6, [(3, 2)], widths=(4, 3, 2), seed=2)
        kernels = model.layers[0].kernels
        assert np.all(kernels >= 0.0) and np.all(kernels < 1.0)

    def test_mlp_default_widths(self):
        model = build_model(8, [(2, 1)], seed=0)
        assert model.mlp.w1.shape == (49, 1024)
        assert model.mlp.w2.shape == (1024, 128)
        assert model.mlp.w3.shape == (128, 2)

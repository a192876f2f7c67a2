import numpy as np
import pytest

from gradrep.errors import TrainingError
from gradrep.learner import (
    AdamState,
    MlpParams,
    TrainConfig,
    adam_update,
    apply_mapping,
    center_loss,
    forward,
    init_mlp,
    loss_and_grads,
    map_repository,
    stop_after_epoch,
    train,
    train_step,
)
from gradrep.selector import Repository

from oracles import finite_difference_grads


def small_net(seed=0, c_in=4, hidden=8, c_out=2):
    return init_mlp(c_in, hidden, c_out, np.random.default_rng(seed))


class TestInit:
    def test_same_seed_bit_identical(self):
        a, b = small_net(3), small_net(3)
        for name in ("w1", "b1", "w2", "b2"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    def test_shapes_and_bounds(self):
        p = small_net()
        assert p.w1.shape == (8, 4) and p.w2.shape == (2, 8)
        assert np.abs(p.w1).max() < 1.0 / np.sqrt(4)
        assert np.abs(p.w2).max() < 1.0 / np.sqrt(8)
        assert not p.b1.any() and not p.b2.any()
        assert all(s.step == 0 and not s.m.any() for s in p.adam.values())

    def test_different_seeds_differ(self):
        assert np.abs(small_net(0).w1 - small_net(1).w1).max() > 0


class TestForward:
    def test_zero_net_maps_to_zero(self):
        p = small_net()
        p.w1[:] = 0; p.w2[:] = 0
        out = forward(p, np.random.default_rng(0).standard_normal((5, 4)))
        np.testing.assert_array_equal(out, np.zeros((5, 2)))

    def test_scalar_chain_hand_values(self):
        p = MlpParams(
            w1=np.array([[2.0]]), b1=np.array([-1.0]),
            w2=np.array([[3.0]]), b2=np.array([0.5]),
        )
        assert forward(p, [[1.0]])[0, 0] == pytest.approx(3.5)
        assert forward(p, [[0.0]])[0, 0] == pytest.approx(0.5)

    def test_identical_rows_identical_outputs(self):
        p = small_net(2)
        row = np.random.default_rng(1).standard_normal(4)
        out = forward(p, np.tile(row, (6, 1)))
        for i in range(1, 6):
            np.testing.assert_array_equal(out[i], out[0])

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ValueError):
            forward(small_net(), np.zeros((3, 5)))


class TestCenterLoss:
    def test_identical_rows_zero_loss_zero_grad(self):
        mapped = np.tile([1.0, -2.0], (4, 1))
        loss, grad = center_loss(mapped)
        assert loss == 0.0
        np.testing.assert_array_equal(grad, np.zeros_like(mapped))

    def test_single_row_zero_loss(self):
        loss, _ = center_loss(np.array([[3.0, 4.0]]))
        assert loss == 0.0

    def test_two_scalar_rows_hand_value(self):
        loss, _ = center_loss(np.array([[0.0], [2.0]]))
        assert loss == pytest.approx(2.0)

    def test_loss_nonnegative_zero_iff_identical(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            rows = rng.standard_normal((5, 3))
            loss, _ = center_loss(rows)
            assert loss > 0
        loss, _ = center_loss(np.tile(rng.standard_normal(3), (5, 1)))
        assert loss == 0.0


class TestAdam:
    def test_first_step_hand_value(self):
        param = np.array([1.0])
        state = AdamState.zeros_like(param)
        adam_update(param, np.array([2.0]), state, lr=1e-4)
        # bias-corrected first step: lr * g / (|g| + eps) ~= lr
        expected = 1.0 - 1e-4 * (2.0 / (np.sqrt(4.0) + 1e-8))
        assert param[0] == pytest.approx(expected, rel=1e-12)
        assert param[0] == pytest.approx(0.9999, abs=1e-8)
        assert state.step == 1

    def test_zero_gradient_batch_only_bumps_step(self):
        p = small_net(4)
        before = {k: v.copy() for k, v in p.tensors().items()}
        batch = np.tile(np.random.default_rng(0).standard_normal(4), (6, 1))
        config = TrainConfig(hidden=8, c_out=2)
        train_step(p, batch, config)
        for name, tensor in p.tensors().items():
            np.testing.assert_array_equal(tensor, before[name])
        assert all(s.step == 1 for s in p.adam.values())

    def test_nonfinite_loss_raises(self):
        p = small_net()
        p.w2[:] = np.inf
        with pytest.raises(TrainingError):
            train_step(p, np.ones((4, 4)), TrainConfig(hidden=8, c_out=2))


class TestGradients:
    @pytest.mark.parametrize("detach", [False, True])
    def test_matches_finite_differences(self, detach):
        rng = np.random.default_rng(9)
        p = init_mlp(4, 8, 2, rng)
        batch = rng.standard_normal((6, 4))
        _, grads = loss_and_grads(p, batch, detach_center=detach)

        def loss_fn():
            return loss_and_grads(p, batch, detach_center=detach)[0]

        fd = finite_difference_grads(loss_fn, p.tensors(), h=1e-3)
        scale = max(max(np.abs(g).max() for g in fd.values()), 1e-8)
        for name in ("w1", "b1", "w2", "b2"):
            assert np.abs(grads[name] - fd[name]).max() / scale <= 1e-4


class TestEarlyStop:
    def test_first_epoch_meeting_condition(self):
        losses = [10.0, 9.0, 7.9]
        assert not stop_after_epoch(losses[:1], 0.8)
        assert not stop_after_epoch(losses[:2], 0.8)
        assert stop_after_epoch(losses, 0.8)  # 7.9 <= 8.0

    def test_eta_one_stops_at_second_epoch_when_nonincreasing(self):
        assert stop_after_epoch([5.0, 5.0], 1.0)

    def test_zero_start_loss_stops_immediately(self):
        assert stop_after_epoch([0.0], 0.8)


class TestTrain:
    @staticmethod
    def repo(rng, m=64, c=6):
        rows = rng.standard_normal((m, c)).astype(np.float32)
        return Repository(rows=rows, provenance=[("s", 0, i) for i in range(m)])

    def config(self, **kw):
        base = dict(hidden=16, c_out=4, batch_size=16, max_epochs=30, seed=5)
        base.update(kw)
        return TrainConfig(**base)

    def test_deterministic_history_and_params(self):
        rng = np.random.default_rng(0)
        repo = self.repo(rng)
        p1, h1 = train(repo, self.config())
        p2, h2 = train(repo, self.config())
        assert h1.epoch_losses == h2.epoch_losses
        assert h1.stopped_epoch == h2.stopped_epoch
        for name in ("w1", "b1", "w2", "b2"):
            np.testing.assert_array_equal(getattr(p1, name), getattr(p2, name))

    def test_stop_condition_semantics(self):
        repo = self.repo(np.random.default_rng(1), m=256)
        _, hist = train(repo, self.config(max_epochs=100, eta=0.8))
        if hist.stop_reason == "condition_met":
            threshold = 0.8 * hist.l_start
            assert hist.epoch_losses[-1] <= threshold
            for earlier in hist.epoch_losses[1:-1]:
                assert earlier > threshold
        else:
            assert hist.stopped_epoch == 100

    def test_identical_rows_stop_immediately(self):
        rows = np.tile(np.float32([1, 2, 3, 4, 5, 6]), (32, 1))
        repo = Repository(rows=rows, provenance=[("s", 0, i) for i in range(32)])
        _, hist = train(repo, self.config())
        assert hist.l_start == 0.0
        assert hist.stopped_epoch == 1
        assert hist.stop_reason == "condition_met"

    def test_empty_repository_rejected(self):
        with pytest.raises(ValueError):
            train(np.zeros((0, 4)), self.config())


class TestMapRepository:
    def test_constant_net_maps_all_rows_to_bias(self):
        p = small_net()
        p.w2[:] = 0.0
        p.b2[:] = [0.5, -1.0]
        repo = Repository(
            rows=np.random.default_rng(0).standard_normal((5, 4)).astype(np.float32),
            provenance=[("s", 0, i) for i in range(5)],
        )
        mapped = map_repository(p, repo)
        np.testing.assert_allclose(mapped.rows, np.tile([0.5, -1.0], (5, 1)))
        assert mapped.provenance == repo.provenance

    def test_batched_equals_rowwise(self):
        p = small_net(7)
        rows = np.random.default_rng(3).standard_normal((9, 4)).astype(np.float32)
        repo = Repository(rows=rows, provenance=[("s", 0, i) for i in range(9)])
        mapped = map_repository(p, repo)
        assert len(mapped) == 9
        for i in range(9):
            np.testing.assert_array_equal(mapped.rows[i], forward(p, rows[i : i + 1])[0])

    def test_identity_mapping_when_params_none(self):
        rows = np.random.default_rng(0).standard_normal((4, 3)).astype(np.float32)
        repo = Repository(rows=rows, provenance=[("s", 0, i) for i in range(4)])
        mapped = map_repository(None, repo)
        np.testing.assert_array_equal(mapped.rows, rows.astype(np.float64))
        out = apply_mapping(None, rows)
        np.testing.assert_array_equal(out, rows.astype(np.float64))

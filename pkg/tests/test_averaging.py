import numpy as np
import pytest

from walab.averaging import (
    EvalConfig,
    PswaPlan,
    SwaPlan,
    dswa_run,
    evaluate,
    pswa_run,
    sgd_baseline_run,
    swa_run,
    tswa_run,
)
from walab.data import BatchStream, Dataset, next_batch, synthetic_blobs
from walab.errors import NumericError, SpecError
from walab.nn import backward, init_weights, mlp_spec
from walab.optim import sgd_init, sgd_step
from walab.schedule import constant, cyclic_linear

SPEC = mlp_spec([6, 8, 3])
NO_EVAL = EvalConfig(eval_samples=False, log_avg=False)


def make_stream(batch_size=20, seed=5):
    ds = synthetic_blobs(3, 20, 6, seed=seed)
    return BatchStream(ds, batch_size=batch_size, epoch_seed_base=123)


def manual_sgd(spec, w, stream, schedule, n, epoch_offset=0):
    """Replay oracle: re-run the raw step loop and record cycle snapshots."""
    from walab.schedule import lr_at

    state = sgd_init(w)
    spe = stream.steps_per_epoch
    trajectory = []
    for i in range(1, n + 1):
        epoch, step = divmod(i - 1, spe)
        batch = next_batch(stream, epoch_offset + epoch, step)
        _, grad = backward(spec, w, batch)
        w, state = sgd_step(w, grad, lr_at(schedule, i - 1), state)
        trajectory.append(w)
    return trajectory


def zero_grad_setup():
    """Exactly-zero gradients: zero inputs, zero biases, class counts and
    batch size all powers of two so softmax columns cancel exactly."""
    spec = mlp_spec([4, 5, 4])
    w = init_weights(spec, 3)
    ds = Dataset(
        "zeros", "train",
        np.zeros((8, 4)), np.repeat(np.arange(4), 2), class_count=4,
    )
    stream = BatchStream(ds, batch_size=8, epoch_seed_base=1)
    return spec, w, stream


class TestSwa:
    def test_single_cycle_averages_seed_and_endpoint(self):
        stream = make_stream()
        w0 = init_weights(SPEC, 1)
        sched = constant(0.05, stream.steps_per_epoch)
        plan = SwaPlan(schedule=sched, cycle_len=3, total_iters=3)
        out = swa_run(SPEC, w0, plan, stream, sgd_init(w0), eval_cfg=NO_EVAL,
                      keep_samples=True)
        w3 = manual_sgd(SPEC, w0, stream, sched, 3)[-1]
        assert np.array_equal(out.samples[1].values, w3.values)
        expected = (w0.values * 1 + w3.values) / 2
        assert np.array_equal(out.final_weights.values, expected)

    def test_sampling_cadence_counts_seed(self):
        stream = make_stream()
        w0 = init_weights(SPEC, 2)
        plan = SwaPlan(constant(0.01, stream.steps_per_epoch), cycle_len=3, total_iters=12)
        out = swa_run(SPEC, w0, plan, stream, sgd_init(w0), eval_cfg=NO_EVAL,
                      keep_samples=True)
        assert len(out.samples) == 12 // 3 + 1
        assert out.steps_taken == 12

    def test_replay_trajectory_oracle(self):
        stream = make_stream()
        w0 = init_weights(SPEC, 4)
        sched = cyclic_linear(3, 0.05, 0.01, stream.steps_per_epoch)
        plan = SwaPlan(sched, cycle_len=3, total_iters=9)
        out = swa_run(SPEC, w0, plan, stream, sgd_init(w0), eval_cfg=NO_EVAL,
                      keep_samples=True)
        traj = manual_sgd(SPEC, w0, stream, sched, 9)
        snapshots = [w0.values, traj[2].values, traj[5].values, traj[8].values]
        for got, want in zip(out.samples, snapshots):
            assert np.array_equal(got.values, want)
        np.testing.assert_allclose(
            out.final_weights.values, np.mean(snapshots, axis=0), rtol=1e-12
        )

    def test_zero_gradient_returns_init(self):
        spec, w, stream = zero_grad_setup()
        _, grad = backward(spec, w, next_batch(stream, 0, 0))
        assert np.all(grad.values == 0.0)
        # single fold: (w*1 + w)/2 is bit-exact
        plan = SwaPlan(constant(0.1, 1), cycle_len=1, total_iters=1)
        out = swa_run(spec, w, plan, stream, sgd_init(w), eval_cfg=NO_EVAL)
        assert np.array_equal(out.final_weights.values, w.values)
        # multiple folds of the identical vector only wiggle the last ulp
        plan = SwaPlan(constant(0.1, 1), cycle_len=1, total_iters=4)
        out = swa_run(spec, w, plan, stream, sgd_init(w), eval_cfg=NO_EVAL)
        np.testing.assert_allclose(out.final_weights.values, w.values, rtol=1e-14, atol=0)

    def test_plan_validation(self):
        sched = constant(0.1, 3)
        with pytest.raises(SpecError):
            SwaPlan(sched, cycle_len=3, total_iters=7)
        with pytest.raises(SpecError):
            SwaPlan(sched, cycle_len=0, total_iters=3)

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_divergence_reports_iteration(self):
        stream = make_stream()
        w0 = init_weights(SPEC, 1)
        plan = SwaPlan(constant(1e200, stream.steps_per_epoch), cycle_len=3, total_iters=9)
        with pytest.raises(NumericError, match="iteration"):
            swa_run(SPEC, w0, plan, stream, sgd_init(w0), eval_cfg=NO_EVAL)


class TestChained:
    def test_dswa_equals_two_manual_stages(self):
        stream = make_stream()
        w0 = init_weights(SPEC, 6)
        sched = cyclic_linear(3, 0.05, 0.01, stream.steps_per_epoch)
        out = dswa_run(SPEC, w0, sched, 3, 12, stream, sgd_init(w0), eval_cfg=NO_EVAL)

        plan = SwaPlan(sched, cycle_len=3, total_iters=6)
        stage1 = swa_run(SPEC, w0, plan, stream, sgd_init(w0), eval_cfg=NO_EVAL)
        stage2 = swa_run(
            SPEC, stage1.final_weights, plan, stream,
            sgd_init(stage1.final_weights), eval_cfg=NO_EVAL,
            epoch_offset=6 // stream.steps_per_epoch,
        )
        assert np.array_equal(out.final_weights.values, stage2.final_weights.values)
        assert np.array_equal(out.checkpoints["stage1"].values, stage1.final_weights.values)
        assert out.steps_taken == 12

    def test_tswa_equals_three_manual_stages(self):
        stream = make_stream()
        w0 = init_weights(SPEC, 7)
        sched = constant(0.04, stream.steps_per_epoch)
        out = tswa_run(SPEC, w0, sched, 3, 18, stream, sgd_init(w0), eval_cfg=NO_EVAL)

        plan = SwaPlan(sched, cycle_len=3, total_iters=6)
        w = w0
        offset = 0
        for _ in range(3):
            stage = swa_run(SPEC, w, plan, stream, sgd_init(w), eval_cfg=NO_EVAL,
                            epoch_offset=offset)
            w = stage.final_weights
            offset += 6 // stream.steps_per_epoch
        assert np.array_equal(out.final_weights.values, w.values)
        assert out.steps_taken == 18

    def test_zero_gradient_chains_return_init(self):
        spec, w, stream = zero_grad_setup()
        sched = constant(0.1, 1)
        out2 = dswa_run(spec, w, sched, 1, 4, stream, sgd_init(w), eval_cfg=NO_EVAL)
        out3 = tswa_run(spec, w, sched, 1, 6, stream, sgd_init(w), eval_cfg=NO_EVAL)
        np.testing.assert_allclose(out2.final_weights.values, w.values, rtol=1e-14, atol=0)
        np.testing.assert_allclose(out3.final_weights.values, w.values, rtol=1e-14, atol=0)

    def test_odd_budget_rejected(self):
        stream = make_stream()
        w0 = init_weights(SPEC, 1)
        sched = constant(0.01, stream.steps_per_epoch)
        with pytest.raises(SpecError):
            dswa_run(SPEC, w0, sched, 3, 9, stream, sgd_init(w0), eval_cfg=NO_EVAL)


class TestBaseline:
    def test_zero_epochs_returns_init(self):
        stream = make_stream()
        w0 = init_weights(SPEC, 9)
        out = sgd_baseline_run(SPEC, w0, constant(0.1, stream.steps_per_epoch), 0,
                               stream, sgd_init(w0), eval_cfg=NO_EVAL)
        assert np.array_equal(out.final_weights.values, w0.values)
        assert out.per_epoch_metrics == []

    def test_bit_reproducible(self):
        stream = make_stream()
        w0 = init_weights(SPEC, 10)
        sched = constant(0.05, stream.steps_per_epoch)
        a = sgd_baseline_run(SPEC, w0, sched, 3, stream, sgd_init(w0), eval_cfg=NO_EVAL)
        b = sgd_baseline_run(SPEC, w0, sched, 3, stream, sgd_init(w0), eval_cfg=NO_EVAL)
        assert np.array_equal(a.final_weights.values, b.final_weights.values)

    def test_epochs_strictly_increasing(self):
        stream = make_stream()
        w0 = init_weights(SPEC, 10)
        ds = stream.dataset
        cfg = EvalConfig(train=ds, test=ds, eval_samples=False)
        out = sgd_baseline_run(SPEC, w0, constant(0.05, stream.steps_per_epoch), 3,
                               stream, sgd_init(w0), eval_cfg=cfg)
        epochs = [r.epoch for r in out.per_epoch_metrics]
        assert epochs == sorted(set(epochs))


class TestPswa:
    def test_window_mean_matches_offline_mean(self):
        stream = make_stream()
        w0 = init_weights(SPEC, 11)
        sched = constant(0.05, stream.steps_per_epoch)
        plan = PswaPlan(start_epoch=1, period_epochs=2, backbone_schedule=sched)
        out = pswa_run(SPEC, w0, plan, 5, stream, sgd_init(w0), eval_cfg=NO_EVAL,
                       keep_samples=True)
        # windows: epochs [1,2] and [3,4]; one snapshot per epoch
        assert len(out.samples) == 4
        np.testing.assert_allclose(
            out.checkpoints["window1"].values,
            np.mean([s.values for s in out.samples[:2]], axis=0),
            rtol=1e-12,
        )
        np.testing.assert_allclose(
            out.checkpoints["window2"].values,
            np.mean([s.values for s in out.samples[2:]], axis=0),
            rtol=1e-12,
        )

    def test_degenerates_to_baseline(self):
        stream = make_stream()
        w0 = init_weights(SPEC, 12)
        sched = constant(0.05, stream.steps_per_epoch)
        plan = PswaPlan(start_epoch=10, period_epochs=2, backbone_schedule=sched)
        pswa = pswa_run(SPEC, w0, plan, 4, stream, sgd_init(w0), eval_cfg=NO_EVAL)
        sgd = sgd_baseline_run(SPEC, w0, sched, 4, stream, sgd_init(w0), eval_cfg=NO_EVAL)
        assert np.array_equal(pswa.final_weights.values, sgd.final_weights.values)

    def test_zero_gradient_window_boundary(self):
        spec, w, stream = zero_grad_setup()
        plan = PswaPlan(start_epoch=1, period_epochs=2,
                        backbone_schedule=constant(0.1, 1))
        out = pswa_run(spec, w, plan, 5, stream, sgd_init(w), eval_cfg=NO_EVAL)
        assert np.array_equal(out.final_weights.values, w.values)

    def test_live_and_avg_rows_logged(self):
        stream = make_stream()
        ds = stream.dataset
        w0 = init_weights(SPEC, 13)
        sched = constant(0.05, stream.steps_per_epoch)
        plan = PswaPlan(start_epoch=1, period_epochs=3, backbone_schedule=sched)
        cfg = EvalConfig(train=None, test=ds, eval_samples=False, log_avg=True)
        out = pswa_run(SPEC, w0, plan, 4, stream, sgd_init(w0), eval_cfg=cfg)
        tags = {(r.epoch, r.controller_tag) for r in out.per_epoch_metrics}
        # epochs 2 and 3 are mid-window: both live and avg rows exist
        assert (2, "pswa") in tags and (2, "pswa_avg") in tags
        assert (3, "pswa") in tags and (3, "pswa_avg") in tags
        # window closes at end of epoch 4: only the live row (now averaged)
        assert (4, "pswa") in tags and (4, "pswa_avg") not in tags

    def test_plan_validation(self):
        sched = constant(0.1, 5)
        with pytest.raises(SpecError):
            PswaPlan(start_epoch=-1, period_epochs=2, backbone_schedule=sched)
        with pytest.raises(SpecError):
            PswaPlan(start_epoch=0, period_epochs=0, backbone_schedule=sched)


class TestEvaluate:
    def test_matches_full_batch_forward(self):
        from walab.nn import Batch, forward_loss

        ds = synthetic_blobs(3, 10, 6, seed=8)
        w = init_weights(SPEC, 14)
        loss_full, acc_full = forward_loss(SPEC, w, Batch(ds.inputs, ds.labels))
        loss, acc = evaluate(SPEC, w, ds, batch_size=7)
        assert loss == pytest.approx(loss_full, rel=1e-12)
        assert acc == pytest.approx(acc_full, rel=1e-12)

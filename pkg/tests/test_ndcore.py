import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from walab.errors import FormatError, LayoutError, NumericError
from walab.ndcore import (
    RunningAverage,
    WeightVector,
    axpy,
    dot,
    interpolate,
    l2_norm,
    layout_hash,
    load_checkpoint,
    running_average_start,
    running_average_update,
    save_checkpoint,
    zeros_like,
)

LAYOUT = layout_hash("test-layout")
OTHER = layout_hash("other-layout")


def wv(values, layout=LAYOUT):
    return WeightVector(np.asarray(values, dtype=np.float64), layout)


class TestWeightVector:
    def test_rejects_nan_inf(self):
        with pytest.raises(NumericError):
            wv([1.0, np.nan])
        with pytest.raises(NumericError):
            wv([np.inf, 0.0])

    def test_rejects_empty_and_2d(self):
        with pytest.raises(LayoutError):
            wv([])
        with pytest.raises(LayoutError):
            WeightVector(np.zeros((2, 2)), LAYOUT)

    def test_values_read_only(self):
        v = wv([1.0, 2.0])
        with pytest.raises(ValueError):
            v.values[0] = 5.0

    def test_view_of_writable_array_is_copied(self):
        base = np.arange(6, dtype=np.float64)
        v = WeightVector(base[2:5], LAYOUT)
        base[3] = 99.0
        assert np.array_equal(v.values, [2.0, 3.0, 4.0])
        assert base.flags.writeable  # the unrelated base stays writable


class TestAxpy:
    def test_a_zero_is_identity(self):
        y = wv([3.0, -1.0, 2.0])
        out = axpy(0.0, wv([9.0, 9.0, 9.0]), y)
        assert np.array_equal(out.values, y.values)

    def test_cancellation(self):
        v = wv([1.5, -2.0])
        out = axpy(1.0, v, wv([-1.5, 2.0]))
        assert np.array_equal(out.values, [0.0, 0.0])

    def test_hand_arithmetic(self):
        out = axpy(2.0, wv([1.0, 2.0]), wv([3.0, 4.0]))
        assert np.array_equal(out.values, [5.0, 8.0])

    def test_layout_mismatch(self):
        with pytest.raises(LayoutError):
            axpy(1.0, wv([1.0]), wv([1.0], OTHER))

    def test_inputs_unmodified(self):
        x, y = wv([1.0, 2.0]), wv([3.0, 4.0])
        axpy(2.0, x, y)
        assert np.array_equal(x.values, [1.0, 2.0])
        assert np.array_equal(y.values, [3.0, 4.0])


class TestInterpolate:
    def test_endpoints(self):
        a, b = wv([1.0, 2.0]), wv([5.0, -3.0])
        assert np.array_equal(interpolate(a, b, 0.0).values, a.values)
        assert np.array_equal(interpolate(a, b, 1.0).values, b.values)

    def test_midpoint(self):
        out = interpolate(wv([0.0, 0.0]), wv([2.0, 4.0]), 0.5)
        assert np.array_equal(out.values, [1.0, 2.0])

    def test_extrapolation_allowed(self):
        out = interpolate(wv([0.0]), wv([1.0]), 2.0)
        assert out.values[0] == pytest.approx(2.0)

    @given(
        t=st.floats(-3, 3),
        raw=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=8),
    )
    @settings(max_examples=200, deadline=None)
    def test_symmetry(self, t, raw):
        a = wv(raw)
        b = wv([x / 3.0 + 1.0 for x in raw])
        lhs = interpolate(a, b, t).values + interpolate(b, a, t).values
        rhs = a.values + b.values
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-9)


class TestNormsAndDot:
    def test_norm_zero(self):
        assert l2_norm(wv([0.0, 0.0])) == 0.0

    def test_dot_with_zero(self):
        v = wv([1.0, 2.0, 3.0])
        assert dot(v, zeros_like(v)) == 0.0

    def test_three_four_five(self):
        assert l2_norm(wv([3.0, 4.0])) == pytest.approx(5.0, rel=1e-15)

    def test_dot_layout_mismatch(self):
        with pytest.raises(LayoutError):
            dot(wv([1.0]), wv([1.0], OTHER))


class TestRunningAverage:
    def test_first_sample(self):
        state = running_average_start(wv([0.0, 0.0]), count=0)
        v = wv([2.0, 7.0])
        state = running_average_update(state, v)
        assert state.count == 1
        assert np.array_equal(state.mean.values, v.values)

    def test_constant_sequence(self):
        v = wv([1.0, -4.0])
        state = running_average_start(v, count=1)
        for _ in range(2):
            state = running_average_update(state, v)
        assert state.count == 3
        np.testing.assert_allclose(state.mean.values, v.values, rtol=1e-15)

    def test_batch_mean_example(self):
        state = running_average_start(wv([0.0, 0.0]), count=0)
        for vals in ([0.0, 0.0], [3.0, 6.0], [6.0, 0.0]):
            state = running_average_update(state, wv(vals))
        assert state.count == 3
        np.testing.assert_allclose(state.mean.values, [3.0, 2.0], rtol=1e-15)

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            RunningAverage(wv([1.0]), count=-1)

    def test_layout_mismatch(self):
        state = running_average_start(wv([1.0]))
        with pytest.raises(LayoutError):
            running_average_update(state, wv([1.0], OTHER))

    def test_batch_mean_equivalence_random(self):
        # Sequential updates must match the directly computed mean to
        # 1e-12 relative error per coordinate.
        rng = np.random.default_rng(42)
        vectors = rng.normal(size=(500, 64)) * rng.lognormal(size=(500, 1))
        state = running_average_start(wv(vectors[0]), count=1)
        for row in vectors[1:]:
            state = running_average_update(state, wv(row))
        expected = vectors.mean(axis=0)
        assert state.count == len(vectors)
        np.testing.assert_allclose(state.mean.values, expected, rtol=1e-12)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        v = wv(rng.normal(size=257) * 1e-3)
        path = tmp_path / "w.ckpt"
        save_checkpoint(path, v)
        back = load_checkpoint(path)
        assert back.layout_id == v.layout_id
        assert np.array_equal(back.values, v.values)
        # and byte-stable on re-save
        save_checkpoint(tmp_path / "w2.ckpt", back)
        assert (tmp_path / "w.ckpt").read_bytes() == (tmp_path / "w2.ckpt").read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        save_checkpoint(path, wv([1.0, 2.0]))
        raw = bytearray(path.read_bytes())
        raw[:4] = b"NOPE"
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_truncation(self, tmp_path):
        path = tmp_path / "trunc.ckpt"
        save_checkpoint(path, wv([1.0, 2.0, 3.0]))
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(FormatError):
            load_checkpoint(path)

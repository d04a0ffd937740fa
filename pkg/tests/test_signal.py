import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tapid.errors import InvalidInputError
from tapid.signal import RawChannel, TapSession, _shift_to_unit, normalize_signal, resample_linear


def piecewise_linear(values, x):
    """Evaluate the polyline through (i, values[i]) at x, one segment at a time."""
    i = min(int(np.floor(x)), len(values) - 2)
    frac = x - i
    return values[i] * (1 - frac) + values[i + 1] * frac


def channel(values):
    return RawChannel(np.asarray(values, float), np.arange(len(values), dtype=float) * 0.01)


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_resample_ramp_matches_hand_interpolation():
    out = resample_linear(channel([0, 1, 2, 3]), 7)
    np.testing.assert_allclose(out, [0, 0.5, 1, 1.5, 2, 2.5, 3], atol=1e-12)


@given(arrays(float, st.integers(2, 40), elements=finite), st.integers(2, 200))
def test_resample_matches_independent_evaluator(values, n):
    out = resample_linear(channel(values), n)
    ref = [piecewise_linear(values, i * (len(values) - 1) / (n - 1)) for i in range(n)]
    assert out.shape == (n,)
    assert out[0] == values[0] and out[-1] == values[-1]
    np.testing.assert_allclose(out, ref, rtol=1e-9, atol=1e-9)


def test_resample_identity_and_constant(rng):
    v = rng.normal(size=150)
    np.testing.assert_array_equal(resample_linear(channel(v), 150), v)
    np.testing.assert_array_equal(resample_linear(channel([5, 5, 5]), 150), np.full(150, 5.0))


def test_resample_rejects_short_channel():
    with pytest.raises(InvalidInputError):
        resample_linear(np.array([1.0]), 150)


@given(arrays(float, st.integers(2, 30), elements=finite), st.floats(-10, 10))
def test_resample_scale_equivariant(values, alpha):
    np.testing.assert_allclose(
        resample_linear(channel(alpha * values), 50), alpha * resample_linear(channel(values), 50), atol=1e-6
    )


@given(arrays(float, st.integers(2, 30), elements=finite))
def test_resample_preserves_monotonicity(values):
    mono = np.sort(values)
    assert np.all(np.diff(resample_linear(channel(mono), 77)) >= -1e-9)


def test_normalize_formula_on_short_illustration():
    np.testing.assert_allclose(_shift_to_unit(np.array([1.0, -1.0, 1.0])), [2 / np.sqrt(8), 0, 2 / np.sqrt(8)])
    np.testing.assert_allclose(2 / np.sqrt(8), 0.70711, atol=1e-5)


def test_normalize_constant_is_zero():
    np.testing.assert_array_equal(normalize_signal(np.full(150, 3.3)), np.zeros(150))


def test_normalize_wrong_length():
    with pytest.raises(InvalidInputError):
        normalize_signal(np.ones(149))


signal150 = arrays(float, 150, elements=st.floats(-100, 100, allow_nan=False))


@settings(max_examples=200)
@given(signal150, st.floats(-50, 50), st.floats(0.01, 100))
def test_normalize_invariances(v, offset, scale):
    if np.ptp(v) < 1e-6:
        return
    base = normalize_signal(v)
    assert base.min() == 0
    assert abs(np.linalg.norm(base) - 1) < 1e-9
    np.testing.assert_allclose(normalize_signal(v + offset), base, atol=1e-7)
    np.testing.assert_allclose(normalize_signal(scale * v), base, atol=1e-9)


def test_session_invariants():
    acc = [channel(np.arange(10.0))] * 3
    gyro = [channel(np.arange(12.0))] * 3
    s = TapSession("u", 0, tuple(acc + gyro))
    assert s.key == ("u", 0)
    with pytest.raises(InvalidInputError):
        TapSession("u", 0, tuple(acc + gyro[:2]))
    with pytest.raises(InvalidInputError):
        TapSession("u", 0, tuple(acc[:2] + [channel(np.arange(11.0))] + gyro))
    with pytest.raises(InvalidInputError):
        RawChannel(np.zeros(3), np.array([0.0, 0.0, 1.0]))

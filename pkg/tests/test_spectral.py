import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ffspec import (
    ForgettingState,
    FrequencyGrid,
    InputError,
    ParameterError,
    StateError,
    batch_weighted_dft,
    classical_periodogram,
    new_state,
    spectral_window,
)
from ffspec.spectral import RENORMALIZE_EVERY, PhaseClock, taper_weights

from conftest import run_stream

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


# ---------------------------------------------------------------- grid


def test_default_real_grid_is_interior():
    g = FrequencyGrid.default(4)
    np.testing.assert_allclose(g.freqs, np.arange(1, 5) / 10)
    assert g.M == 4 and g.denominator == 10


@pytest.mark.parametrize("M", [2, 7, 256])
def test_default_complex_grid_excludes_zero_and_half(M):
    g = FrequencyGrid.default(M, real=False)
    assert np.all(g.freqs != 0) and np.all(np.abs(g.freqs) < 0.5)
    assert np.all(np.diff(g.freqs) > 0)
    assert np.any(g.freqs < 0) and np.any(g.freqs > 0)


def test_complex_grid_of_one_point_would_be_zero():
    with pytest.raises(ParameterError):
        FrequencyGrid.default(1, real=False)


@pytest.mark.parametrize(
    "freqs, real",
    [([], True), ([0.1, 0.1], True), ([0.2, 0.1], True), ([0.0, 0.1], False), ([0.1, 0.5], True), ([-0.1, 0.2], True)],
)
def test_invalid_grids_rejected(freqs, real):
    with pytest.raises(ParameterError):
        FrequencyGrid(np.array(freqs, dtype=float), real=real)


def test_from_values_detects_rational_form():
    g = FrequencyGrid.from_values([0.1, 0.25, 0.3])
    assert g.denominator == 20
    assert list(g.numerators) == [2, 5, 6]
    h = FrequencyGrid.from_values([math.pi / 10])
    assert h.denominator is None


# ---------------------------------------------------------------- phases


def test_exact_phase_clock_matches_direct_exponent():
    g = FrequencyGrid.default(16)
    clock = PhaseClock(g)
    for t in range(1, 200):
        np.testing.assert_allclose(clock.advance(), np.exp(-2j * np.pi * g.freqs * t), atol=1e-12)


def test_irrational_phase_clock_stays_on_unit_circle_past_renormalisation():
    g = FrequencyGrid(np.array([0.1 * math.sqrt(2), 1 / math.pi]))
    clock = PhaseClock(g)
    n = RENORMALIZE_EVERY + 1000
    for _ in range(n):
        ph = clock.advance()
    np.testing.assert_allclose(np.abs(ph), 1.0, atol=1e-12)
    np.testing.assert_allclose(ph, np.exp(-2j * np.pi * g.freqs * n), atol=1e-8)


# ---------------------------------------------------------------- state


def test_new_state_is_empty():
    s = new_state(FrequencyGrid.default(4), 0.9)
    assert s.T == 0 and s.C == 0
    np.testing.assert_array_equal(s.J, np.zeros(4))


def test_lambda_one_is_allowed():
    assert new_state(FrequencyGrid.default(4), 1.0).lam == 1.0


@pytest.mark.parametrize("lam", [1.5, 0.0, -0.2, float("nan")])
def test_lambda_outside_unit_interval_rejected(lam):
    with pytest.raises(ParameterError):
        new_state(FrequencyGrid.default(4), lam)


def test_first_update_sets_phase():
    g = FrequencyGrid(np.array([0.25]))
    s = new_state(g, 0.9).update(1.0)
    np.testing.assert_allclose(s.J, [-1j], atol=1e-15)
    assert s.C == 1.0


def test_zero_stream_accumulates_count_only():
    s = run_stream(new_state(FrequencyGrid.default(8), 1.0), np.zeros(50))
    np.testing.assert_array_equal(s.J, 0)
    assert s.C == 50


def test_non_finite_sample_leaves_state_unchanged(rng):
    s = run_stream(new_state(FrequencyGrid.default(8), 0.9), rng.standard_normal(5))
    J, C, T = s.J.copy(), s.C, s.T
    for bad in (np.nan, np.inf):
        with pytest.raises(InputError):
            s.update(bad)
    np.testing.assert_array_equal(s.J, J)
    assert s.C == C and s.T == T


def test_ffp_before_first_sample_is_state_error():
    with pytest.raises(StateError):
        new_state(FrequencyGrid.default(4), 0.9).ffp()


def test_recursion_matches_batch_oracle_on_normal_stream(rng):
    g = FrequencyGrid.default(32)
    x = rng.standard_normal(100)
    s = run_stream(new_state(g, 0.95), x)
    J, C = batch_weighted_dft(x, np.full(99, 0.95), g)
    np.testing.assert_allclose(s.J, J, rtol=0, atol=1e-12)
    assert abs(s.C - C) <= 1e-12


@given(
    x=arrays(np.float64, st.integers(1, 300), elements=finite),
    lam=st.sampled_from([0.5, 0.9, 0.99, 1.0]),
    M=st.integers(1, 40),
)
def test_recursion_matches_batch_oracle(x, lam, M):
    g = FrequencyGrid.default(M)
    s = run_stream(new_state(g, lam), x)
    J, C = batch_weighted_dft(x, np.full(x.size - 1, lam), g)
    scale = max(1.0, float(np.sum(np.abs(x))))
    np.testing.assert_allclose(s.J, J, rtol=0, atol=1e-12 * scale)
    assert s.C == pytest.approx(C, rel=1e-12)


@given(T=st.integers(1, 3000), lam=st.floats(0.3, 0.9999))
def test_normaliser_closed_form(T, lam):
    s = run_stream(new_state(FrequencyGrid.default(2), lam), np.zeros(T))
    assert abs(s.C - (1 - lam ** (2 * T)) / (1 - lam**2)) <= 1e-9 * s.C


@given(x=arrays(np.float64, st.integers(1, 80), elements=finite), lam=st.floats(0.05, 1.0))
def test_ffp_is_nonnegative(x, lam):
    assert np.all(run_stream(new_state(FrequencyGrid.default(16), lam), x).ffp().values >= 0)


@given(x=arrays(np.float64, st.integers(2, 40), elements=finite), lam=st.floats(0.1, 1.0))
def test_each_update_scales_old_weights_by_lambda(x, lam):
    # weights from the oracle taper: after one more sample every old weight picks up a factor lam
    T = x.size
    h_before = taper_weights(np.full(T - 2, lam), T - 1) if T > 1 else np.array([])
    h_after = taper_weights(np.full(T - 1, lam), T)
    np.testing.assert_allclose(h_after[:-1], lam * h_before, rtol=1e-14)
    assert h_after[-1] == 1.0


@given(
    x=arrays(np.complex128, st.integers(1, 200), elements=st.complex_numbers(max_magnitude=100, allow_nan=False)),
    lam=st.sampled_from([0.5, 0.9, 0.99, 1.0]),
)
def test_complex_stream_matches_oracle_on_two_sided_grid(x, lam):
    g = FrequencyGrid.default(15, real=False)
    s = run_stream(new_state(g, lam), x)
    J, _ = batch_weighted_dft(x, np.full(x.size - 1, lam), g)
    np.testing.assert_allclose(s.J, J, rtol=0, atol=1e-11 * max(1.0, np.abs(x).sum()))


def test_lambda_one_equals_classical_periodogram(rng):
    g = FrequencyGrid.default(32)
    x = rng.standard_normal(64)
    s = run_stream(new_state(g, 1.0), x)
    np.testing.assert_allclose(s.ffp().values, classical_periodogram(x, g), rtol=1e-10)


def test_sequential_centering_cancels_constant_stream():
    s = run_stream(new_state(FrequencyGrid.default(16), 0.97, "sequential"), np.full(300, 3.7))
    np.testing.assert_array_equal(s.ffp().values, 0.0)


@given(T=st.integers(1, 500), lam=st.floats(0.3, 1.0))
def test_mean_normaliser_is_geometric_sum(T, lam):
    s = run_stream(new_state(FrequencyGrid.default(2), lam, "sequential"), np.ones(T))
    expected = float(T) if lam == 1.0 else (1 - lam**T) / (1 - lam)
    assert s.D == pytest.approx(expected, rel=1e-9)


def test_centering_none_leaves_mean_accumulators_zero(rng):
    s = run_stream(new_state(FrequencyGrid.default(8), 0.9), rng.standard_normal(20) + 5)
    assert s.D == 0 and s.mean_bar == 0
    np.testing.assert_array_equal(s.J_mean, 0)


def test_white_noise_ffp_is_unbiased():
    g = FrequencyGrid.default(16)
    R = 10_000
    rng = np.random.default_rng(3)
    s = ForgettingState(g, 0.99, batch_shape=(R,))
    for _ in range(400):
        s.update(rng.standard_normal(R))
    v = s.ffp().values
    se = v.std(axis=0) / math.sqrt(R)
    assert np.all(np.abs(v.mean(axis=0) - 1.0) < 3 * se + 1e-3)


def test_batch_rows_are_independent_streams(rng):
    g = FrequencyGrid.default(8)
    X = rng.standard_normal((3, 40))
    lams = np.array([0.5, 0.9, 1.0])
    batched = ForgettingState(g, lams, batch_shape=(3,))
    for t in range(40):
        batched.update(X[:, t])
    for i in range(3):
        single = run_stream(new_state(g, lams[i]), X[i])
        np.testing.assert_allclose(batched.J[i], single.J, atol=1e-13)


def test_state_size_does_not_grow():
    s = new_state(FrequencyGrid.default(64), 0.99)
    run_stream(s, np.ones(10))
    before = s.nbytes()
    run_stream(s, np.ones(20_000))
    assert s.nbytes() == before


def test_copy_is_independent(rng):
    s = run_stream(new_state(FrequencyGrid.default(8), 0.9), rng.standard_normal(10))
    c = s.copy()
    s.update(1.0)
    assert c.T == 10 and not np.array_equal(c.J, s.J)


# ---------------------------------------------------------------- oracles


def test_batch_dft_single_sample():
    J, C = batch_weighted_dft([1.0], [], FrequencyGrid(np.array([0.25])))
    np.testing.assert_allclose(J, [np.exp(-1j * np.pi / 2)])
    assert C == 1.0


def test_batch_dft_unweighted_normaliser_is_length(rng):
    _, C = batch_weighted_dft(rng.standard_normal(37), np.ones(36), FrequencyGrid.default(4))
    assert C == 37


def test_batch_dft_length_mismatch():
    with pytest.raises(ParameterError):
        batch_weighted_dft(np.ones(5), np.ones(5), FrequencyGrid.default(4))


def test_spectral_window_single_point_is_one():
    np.testing.assert_allclose(spectral_window([], 1, FrequencyGrid.default(8)), 1.0)


def test_spectral_window_lambda_one_is_fejer():
    g = FrequencyGrid.default(64)
    T = 50
    f = g.freqs
    np.testing.assert_allclose(spectral_window(np.ones(T - 1), T, g), np.sin(T * np.pi * f) ** 2 / np.sin(np.pi * f) ** 2, rtol=1e-9, atol=1e-9)


def test_spectral_window_geometric_series():
    g = FrequencyGrid(np.array([0.05, 0.2, 0.41]))
    T, lam = 200, 0.9
    f = g.freqs
    # closed form of sum_{t=1}^T lam^{T-t} e^{-i 2 pi f t}
    z = np.exp(2j * np.pi * f) * lam
    H = np.exp(-2j * np.pi * f * T) * (1 - z**T) / (1 - z)
    np.testing.assert_allclose(spectral_window(np.full(T - 1, lam), T, g), np.abs(H) ** 2, rtol=1e-12)

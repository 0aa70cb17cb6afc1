import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ffspec import (
    ArModel,
    EvaluationError,
    FfweState,
    FrequencyGrid,
    NumericalError,
    OceanModel,
    ParameterError,
    SpectralEstimate,
    ffwe_step,
    likelihood_surface,
    whittle_loglik,
)
from ffspec.models import ArParams
from ffspec.whittle import Axis, fisher_diagonal

from test_models import central_diff, ocean_params


def est_of(values, M=None, real=True):
    values = np.asarray(values, dtype=float)
    grid = FrequencyGrid.default(values.shape[-1], real=real)
    return SpectralEstimate(grid, values, 100)


def test_unit_spectrum_gives_minus_one():
    assert whittle_loglik(est_of(np.ones(16)), ArModel(0), [0.0]).loglik == pytest.approx(-1.0)


@pytest.mark.parametrize("c", [0.2, 1.0, 7.5])
def test_matching_flat_spectrum_is_stationary(c):
    ev = whittle_loglik(est_of(np.full(16, c)), ArModel(0), [math.log(c)])
    assert ev.loglik == pytest.approx(-(math.log(c) + 1))
    assert ev.grad_params[0] == pytest.approx(0.0, abs=1e-14)


def test_non_positive_model_names_the_frequency():
    class Broken(ArModel):
        def sdf(self, theta, freqs):
            out = super().sdf(theta, freqs)
            out[..., 3] = 0.0
            return out

    est = est_of(np.ones(8))
    with pytest.raises(EvaluationError, match=f"{est.grid.freqs[3]:.6g}"):
        whittle_loglik(est, Broken(0), [0.0])


@given(data=st.data(), p=st.integers(1, 3))
def test_ar_loglik_gradient_matches_finite_difference(data, p):
    from test_models import ar_params

    prm = data.draw(ar_params(p))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    est = est_of(rng.exponential(size=32))
    model = ArModel(p)
    fd = central_diff(lambda th: whittle_loglik(est, model, th).loglik, prm.vector())
    an = whittle_loglik(est, model, prm.vector()).grad_params
    np.testing.assert_allclose(an, fd, rtol=1e-5, atol=1e-8)


@given(prm=ocean_params(), seed=st.integers(0, 2**32 - 1))
def test_ocean_loglik_gradient_matches_finite_difference(prm, seed):
    rng = np.random.default_rng(seed)
    model = OceanModel()
    est = est_of(rng.exponential(size=40) * model.sdf(prm.vector(), FrequencyGrid.default(40, real=False).freqs), real=False)
    fd = central_diff(lambda th: whittle_loglik(est, model, th).loglik, prm.vector(), h=1e-7, points=5)
    an = whittle_loglik(est, model, prm.vector()).grad_params
    np.testing.assert_allclose(an, fd, rtol=1e-5, atol=1e-7 * np.abs(an).max())


@given(c=st.floats(0.01, 100), seed=st.integers(0, 2**32 - 1))
def test_scale_equivariance_of_coefficient_gradient(c, seed):
    rng = np.random.default_rng(seed)
    vals = rng.exponential(size=24)
    theta = np.array([0.5, -0.3, 0.2])
    g1 = whittle_loglik(est_of(vals), ArModel(2), theta).grad_params
    g2 = whittle_loglik(est_of(c * vals), ArModel(2), theta + [0, 0, math.log(c)]).grad_params
    np.testing.assert_allclose(g1[:2], g2[:2], rtol=1e-9, atol=1e-12)


def test_truth_beats_white_noise_on_long_ar2_runs():
    from ffspec.online import EstimatorSpec, OnlineEstimator
    from ffspec.simulate import ArSegmentSpec, gen_ar, replication_rng

    R, T = 200, 20000
    spec = ArSegmentSpec(((1, ArParams.from_sigma2([1.46, -0.81])),), T)
    X = np.stack([gen_ar(spec, replication_rng(11, i)) for i in range(R)])
    est = OnlineEstimator(EstimatorSpec(kind="ffp", lam=0.999), FrequencyGrid.default(256), (R,))
    for t in range(T):
        est.step(X[:, t])
    ffp = est.ffp()
    model = ArModel(2)
    at_truth = whittle_loglik(ffp, model, np.broadcast_to([1.46, -0.81, 0.0], (R, 3))).loglik
    white = np.stack([np.zeros(R), np.zeros(R), np.log(X.var(axis=1))], axis=-1)
    at_white = whittle_loglik(ffp, model, white).loglik
    assert np.mean(at_truth > at_white) >= 0.95


# ---------------------------------------------------------------- ffwe_step


def test_zero_gradient_leaves_params():
    st_ = FfweState(np.array([math.log(2.0)]), 0.5)
    ffwe_step(st_, est_of(np.full(8, 2.0)), ArModel(0))
    assert st_.params[0] == pytest.approx(math.log(2.0), abs=1e-15)


def test_tiny_rate_tiny_change():
    rng = np.random.default_rng(0)
    theta = np.array([0.3, -0.2, 0.0])
    st_ = FfweState(theta, 1e-9)
    ffwe_step(st_, est_of(rng.exponential(size=32) * 5), ArModel(2))
    assert np.all(np.abs(st_.params - theta) <= 1e-6)


@given(seed=st.integers(0, 2**32 - 1))
def test_small_steps_ascend(seed):
    rng = np.random.default_rng(seed)
    est = est_of(rng.exponential(size=32) * rng.uniform(0.5, 3))
    model = ArModel(2)
    theta = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3), rng.normal()])
    before = whittle_loglik(est, model, theta).loglik
    rate = 0.05
    for _ in range(30):
        st_ = FfweState(theta, rate)
        ffwe_step(st_, est, model)
        after = whittle_loglik(est, model, st_.params).loglik
        if after >= before:
            break
        rate /= 2
    assert after >= before - 1e-15


def test_white_noise_iterates_to_mean_ordinate():
    rng = np.random.default_rng(5)
    vals = rng.exponential(size=64) * 3
    st_ = FfweState(np.array([0.0]), 0.5)
    est = est_of(vals)
    for _ in range(200):
        ffwe_step(st_, est, ArModel(0))
    assert math.exp(st_.params[0]) == pytest.approx(vals.mean(), rel=1e-6)


def test_projection_keeps_ar_params_stationary():
    model = ArModel(2)
    st_ = FfweState(np.array([1.7, -0.9, 0.0]), 5.0)
    vals = model.sdf(np.array([1.9, -0.95, 0.0]), FrequencyGrid.default(64).freqs)
    for _ in range(50):
        ffwe_step(st_, est_of(vals), model)
        assert model.is_valid(st_.params)


def test_non_finite_gradient_is_rejected_and_counted():
    st_ = FfweState(np.array([[0.0], [0.0]]), 0.5)
    vals = np.ones((2, 8))
    vals[1, 2] = np.inf
    ffwe_step(st_, est_of(vals), ArModel(0))
    assert list(st_.rejected) == [0, 1]
    assert st_.params[1, 0] == 0.0
    strict = FfweState(np.array([0.0]), 0.5, strict=True)
    with pytest.raises(NumericalError):
        ffwe_step(strict, est_of(vals[1]), ArModel(0))


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), [0.0, 0.0]])
def test_learning_rate_validation(bad):
    with pytest.raises(ParameterError):
        FfweState(np.zeros(2), bad)


def test_zero_rate_coordinate_is_frozen():
    rng = np.random.default_rng(1)
    st_ = FfweState(np.array([0.2, 0.0]), np.array([0.0, 0.1]))
    ffwe_step(st_, est_of(rng.exponential(size=16) * 2), ArModel(1))
    assert st_.params[0] == 0.2 and st_.params[1] != 0.0


def test_fisher_diagonal_of_variance_is_one():
    np.testing.assert_allclose(fisher_diagonal(ArModel(2), np.array([0.4, -0.2, 0.3]), FrequencyGrid.default(16).freqs)[-1], 1.0)


# ---------------------------------------------------------------- surface


def test_white_noise_surface_peaks_at_unit_variance():
    # surfaces are 2-d, so the flat model is AR(1) sliced along phi1
    est = est_of(np.ones(32))
    model = ArModel(1)
    theta_fixed = [0.0, 0.0]
    ax_phi = Axis.linspace(0, -0.5, 0.5, 11, "phi1")
    surf = likelihood_surface(est, model, ax_phi, Axis.linspace(1, -1, 1, 201, "log_sigma2"), theta_fixed)
    phi, ls = surf.argmax()
    assert phi == pytest.approx(0.0, abs=1e-12)
    assert abs(math.exp(ls) - 1.0) <= math.exp(0.01) - 1


def test_surface_shape_and_invalid_cells_flagged():
    est = est_of(np.ones(32))
    model = ArModel(2)
    surf = likelihood_surface(est, model, Axis.parse("phi1:-2:2:81", model.param_names), Axis.parse("phi2:-1:1:41", model.param_names), [0, 0, 0])
    assert surf.loglik.shape == (81, 41)
    assert np.isnan(surf.loglik[0, -1]) and not surf.valid[0, -1]  # phi = (-2, 1) is nonstationary
    assert surf.valid[40, 20]


def test_single_cell_surface_equals_loglik():
    rng = np.random.default_rng(2)
    est = est_of(rng.exponential(size=32))
    model = ArModel(2)
    surf = likelihood_surface(est, model, Axis(0, np.array([0.3]), "phi1"), Axis(1, np.array([-0.2]), "phi2"), [0, 0, 0.1])
    assert surf.loglik[0, 0] == pytest.approx(whittle_loglik(est, model, [0.3, -0.2, 0.1]).loglik, rel=1e-14)


def test_surface_csv_layout(tmp_path):
    est = est_of(np.ones(8))
    model = ArModel(2)
    surf = likelihood_surface(est, model, Axis.linspace(0, -1, 1, 3, "phi1"), Axis.linspace(1, -0.5, 0.5, 2, "phi2"), [0, 0, 0])
    surf.to_csv(tmp_path / "s.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert len(rows) == 4 and rows[0].split(",")[1:] == ["-0.5", "0.5"]
    assert rows[1].split(",")[0] == "-1.0"


@pytest.mark.parametrize("text", ["phi1:-2:2", "phi9:-1:1:3", "phi1:1:-1:3", "phi1:0:1:0"])
def test_bad_axes(text):
    with pytest.raises(ParameterError):
        Axis.parse(text, ("phi1", "phi2", "log_sigma2"))


def test_same_axis_twice_rejected():
    ax = Axis.linspace(0, -1, 1, 3)
    with pytest.raises(ParameterError):
        likelihood_surface(est_of(np.ones(8)), ArModel(2), ax, ax, [0, 0, 0])

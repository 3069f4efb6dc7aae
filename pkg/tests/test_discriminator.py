import numpy as np
import pytest

from valbench import (
    DiscriminatorModel,
    TrainConfig,
    density_ratio_weights,
    predict_target_prob,
    train_discriminator,
)

from oracles import logistic_grid_fit


def test_same_distribution_gives_chance_accuracy():
    # train/evaluate split per side; averaged over seeds the held-out domain
    # accuracy should sit at chance level
    accs = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        source = rng.normal(size=(2000, 4))
        target = rng.normal(size=(2000, 4))
        model = train_discriminator(source[:1000], target[:1000], TrainConfig(seed=seed))
        p_s = predict_target_prob(model, source[1000:])
        p_t = predict_target_prob(model, target[1000:])
        acc = 0.5 * ((p_s < 0.5).mean() + (p_t >= 0.5).mean())
        accs.append(acc)
    assert abs(np.mean(accs) - 0.5) < 0.05


def test_separable_domains_trained_accuracy():
    rng = np.random.default_rng(0)
    source = rng.normal(size=(200, 2)) + np.array([-5.0, 0.0])
    target = rng.normal(size=(200, 2)) + np.array([5.0, 0.0])
    model = train_discriminator(source, target)
    p_s = predict_target_prob(model, source)
    p_t = predict_target_prob(model, target)
    acc = 0.5 * ((p_s < 0.5).mean() + (p_t >= 0.5).mean())
    assert acc > 0.99


def test_matches_grid_search_on_four_points():
    # overlapping (non-separable) domains so the optimum has real curvature
    source = np.array([[-2.0], [1.0]])
    target = np.array([[-1.0], [3.0]])
    config = TrainConfig(learning_rate=0.1, epochs=5000, l2_penalty=1e-4)
    model = train_discriminator(source, target, config)
    x = np.vstack([source, target]).ravel()
    y = np.array([0.0, 0.0, 1.0, 1.0])
    w_star, b_star = logistic_grid_fit(x, y, l2=1e-4)
    assert model.weights[0] == pytest.approx(w_star, abs=1e-4)
    assert model.bias == pytest.approx(b_star, abs=1e-4)


def test_loss_history_non_increasing():
    rng = np.random.default_rng(1)
    source = rng.normal(size=(100, 3))
    target = rng.normal(size=(100, 3)) + 0.5
    model = train_discriminator(source, target)
    losses = np.asarray(model.loss_history)
    assert losses.size == 500
    assert (np.diff(losses) <= 1e-12).all()


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        train_discriminator(np.zeros((3, 2)), np.zeros((3, 3)))


def _manual_model(weights, bias, d):
    return DiscriminatorModel(
        weights=np.asarray(weights, dtype=np.float64),
        bias=bias,
        feature_mean=np.zeros(d),
        feature_std=np.ones(d),
        n_source=1,
        n_target=1,
        loss_history=(0.0,),
    )


def test_predict_zero_weights_gives_half():
    model = _manual_model([0.0, 0.0], 0.0, 2)
    probs = predict_target_prob(model, np.array([[3.0, -1.0], [0.0, 0.0]]))
    np.testing.assert_allclose(probs, 0.5, atol=1e-15)


def test_predict_clamps_extremes():
    model = _manual_model([100.0], 0.0, 1)
    hi = predict_target_prob(model, np.array([[50.0]]))
    lo = predict_target_prob(model, np.array([[-50.0]]))
    assert hi[0] == pytest.approx(1.0 - 1e-6, abs=1e-12)
    assert lo[0] == pytest.approx(1e-6, abs=1e-12)


def test_predict_matches_direct_sigmoid():
    import mpmath

    mpmath.mp.dps = 50
    rng = np.random.default_rng(2)
    w = rng.normal(size=3)
    b = float(rng.normal())
    model = _manual_model(w, b, 3)
    x = rng.normal(size=(5, 3))
    got = predict_target_prob(model, x)
    for i in range(5):
        z = mpmath.mpf(float(x[i] @ w + b))
        want = float(1 / (1 + mpmath.exp(-z)))
        assert got[i] == pytest.approx(min(max(want, 1e-6), 1 - 1e-6), abs=1e-12)


def test_density_ratio_balanced_case():
    probs = np.full(5, 0.5)
    np.testing.assert_allclose(density_ratio_weights(probs, 10, 10), 1.0, atol=1e-15)


def test_density_ratio_formula_fixture():
    w = density_ratio_weights(np.array([0.8]), 100, 50)
    assert w[0] == pytest.approx(8.0, abs=1e-12)


def test_density_ratio_matches_one_line_oracle():
    rng = np.random.default_rng(3)
    probs = np.clip(rng.uniform(size=20), 1e-6, 1 - 1e-6)
    got = density_ratio_weights(probs, 7, 3)
    want = [(7 / 3) * p / (1 - p) for p in probs]
    np.testing.assert_allclose(got, want, rtol=1e-12)
    assert (got > 0).all() and np.isfinite(got).all()


def test_density_ratio_monotone_in_probs():
    probs = np.linspace(0.01, 0.99, 50)
    w = density_ratio_weights(probs, 4, 4)
    assert (np.diff(w) > 0).all()

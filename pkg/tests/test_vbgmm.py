"""Variational mixture fitting: recovery, monotonicity, densities, pruning."""

import numpy as np
import pytest
from scipy import integrate

from summertime.errors import FitError
from summertime.vbgmm import (
    FitSettings,
    MixturePrior,
    Standardizer,
    assign,
    fit_mixture,
    load_model,
    log_density,
    model_from_dict,
    model_to_dict,
    responsibilities,
    save_model,
)


def three_blob_data(rng, separation=20.0, std=1.0, per_cluster=300):
    centers = np.array([[0.0, 0.0], [separation, 0.0], [0.0, separation]])
    parts = [rng.normal(c, std, size=(per_cluster, 2)) for c in centers]
    return np.vstack(parts)


def test_recovers_three_components_and_monotone_elbo():
    hits = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        data = three_blob_data(rng)
        model = fit_mixture(data, FitSettings(k_max=10), seed=seed)
        diffs = np.diff(model.elbo_trace)
        assert np.all(diffs >= -1e-8), f"seed {seed}: ELBO decreased"
        if model.component_count == 3:
            hits += 1
    assert hits >= 19


def test_weights_form_a_distribution_and_match_cluster_sizes():
    rng = np.random.default_rng(7)
    data = three_blob_data(rng)
    model = fit_mixture(data, FitSettings(k_max=10), seed=0)
    assert model.weights.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(model.weights > 0)
    np.testing.assert_allclose(model.weights, [1 / 3] * 3, atol=0.05)


def test_responsibilities_normalize_and_assign_is_argmax():
    rng = np.random.default_rng(21)
    data = three_blob_data(rng)
    model = fit_mixture(data, FitSettings(k_max=6), seed=1)
    points = rng.normal(10.0, 8.0, size=(1000, 2))
    gamma = responsibilities(model, points)
    np.testing.assert_allclose(gamma.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_array_equal(assign(model, points), gamma.argmax(axis=1))


def test_assignments_recover_true_clusters():
    rng = np.random.default_rng(3)
    data = three_blob_data(rng, per_cluster=200)
    model = fit_mixture(data, FitSettings(k_max=8), seed=3)
    assert model.component_count == 3
    labels = assign(model, data)
    # each true blob maps to one component, purely
    for i in range(3):
        block = labels[i * 200:(i + 1) * 200]
        counts = np.bincount(block, minlength=3)
        assert counts.max() == 200


def test_log_density_integrates_to_one_in_1d():
    rng = np.random.default_rng(5)
    data = np.concatenate([
        rng.normal(-4.0, 1.0, size=400),
        rng.normal(4.0, 0.7, size=400),
    ]).reshape(-1, 1)
    model = fit_mixture(data, FitSettings(k_max=5), seed=2)

    def dens(x):
        return float(np.exp(log_density(model, np.array([[x]]))[0]))

    total, err = integrate.quad(dens, -30.0, 30.0, limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_density_is_higher_on_cluster_centers_than_off():
    rng = np.random.default_rng(9)
    data = three_blob_data(rng)
    model = fit_mixture(data, FitSettings(k_max=6), seed=4)
    on = log_density(model, np.array([[0.0, 0.0], [20.0, 0.0]]))
    off = log_density(model, np.array([[10.0, 10.0]]))
    assert on.min() > off.max() + 5.0


def test_single_component_cap():
    rng = np.random.default_rng(17)
    data = rng.normal(5.0, 2.0, size=(300, 3))
    model = fit_mixture(data, FitSettings(k_max=1), seed=0)
    assert model.component_count == 1
    np.testing.assert_allclose(model.means[0], data.mean(axis=0), atol=0.3)


def test_small_components_are_pruned():
    rng = np.random.default_rng(2)
    data = three_blob_data(rng, per_cluster=250)
    model = fit_mixture(data, FitSettings(k_max=20), seed=5)
    # floor is 1/(10 N); no kept weight may sit below it
    assert np.all(model.weights >= 1.0 / (10 * len(data)))
    assert model.component_count <= 6


def test_fit_rejects_bad_inputs():
    with pytest.raises(FitError, match="non-finite"):
        fit_mixture(np.array([[np.inf, 0.0], [0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(FitError, match="at least 2"):
        fit_mixture(np.array([[1.0, 2.0]]))


def test_prior_degrees_of_freedom_floor():
    prior = MixturePrior(nu0=1.0)
    with pytest.raises(FitError, match="degrees of freedom"):
        prior.resolved(dim=3)


def test_standardizer_guards_constant_columns():
    data = np.array([[1.0, 5.0], [1.0, 7.0], [1.0, 9.0]])
    st = Standardizer.fit(data)
    z = st.transform(data)
    np.testing.assert_allclose(z[:, 0], 0.0)
    np.testing.assert_allclose(st.inverse(z), data, atol=1e-12)


def test_covariances_are_symmetric_positive_definite():
    rng = np.random.default_rng(13)
    data = three_blob_data(rng)
    model = fit_mixture(data, FitSettings(k_max=8), seed=6)
    for cov in model.covariances:
        np.testing.assert_allclose(cov, cov.T, atol=1e-12)
        assert np.linalg.eigvalsh(cov).min() > 0


def test_serialization_round_trip(tmp_path):
    rng = np.random.default_rng(31)
    data = three_blob_data(rng)
    model = fit_mixture(data, FitSettings(k_max=6), seed=7)
    path = tmp_path / "mix.json"
    save_model(model, path)
    loaded = load_model(path)
    probe = rng.normal(5.0, 10.0, size=(50, 2))
    np.testing.assert_allclose(
        log_density(loaded, probe), log_density(model, probe), rtol=1e-12
    )
    np.testing.assert_array_equal(assign(loaded, probe), assign(model, probe))
    assert loaded.component_count == model.component_count


def test_serialization_rejects_foreign_payloads():
    with pytest.raises(ValueError, match="format"):
        model_from_dict({"format": "something_else", "version": 1})


def test_model_dict_is_json_clean():
    import json

    rng = np.random.default_rng(41)
    model = fit_mixture(three_blob_data(rng), FitSettings(k_max=5), seed=8)
    payload = model_to_dict(model)
    again = model_from_dict(json.loads(json.dumps(payload)))
    np.testing.assert_allclose(again.means, model.means, rtol=1e-15)


def test_dimension_mismatch_is_reported():
    rng = np.random.default_rng(51)
    model = fit_mixture(three_blob_data(rng), FitSettings(k_max=5), seed=9)
    with pytest.raises(ValueError, match="expects 2"):
        log_density(model, np.zeros((4, 3)))

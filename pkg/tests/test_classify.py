"""Network training: gradients vs finite differences, voting, determinism."""

import numpy as np
import pytest

from summertime.classify import (
    ClassPrediction,
    MlpModel,
    MlpSettings,
    classify_bout_voting,
    load_model,
    loss_and_gradients,
    model_from_dict,
    model_to_dict,
    predict_class,
    predict_probabilities,
    predict_values,
    save_model,
    train_mlp,
)
from summertime.errors import FitError


def random_params(rng, input_dim, hidden, output_dim):
    return {
        "w1": rng.normal(0, 0.5, size=(input_dim, hidden)),
        "b1": rng.normal(0, 0.1, size=hidden),
        "w2": rng.normal(0, 0.5, size=(hidden, output_dim)),
        "b2": rng.normal(0, 0.1, size=output_dim),
    }


def finite_difference(params, x, y, head, l2, key, idx, eps=1e-5):
    bumped = {k: v.copy() for k, v in params.items()}
    bumped[key][idx] += eps
    up, _ = loss_and_gradients(bumped, x, y, head, l2)
    bumped[key][idx] -= 2 * eps
    down, _ = loss_and_gradients(bumped, x, y, head, l2)
    return (up - down) / (2 * eps)


@pytest.mark.parametrize("head", ["softmax", "linear"])
def test_gradients_match_central_differences(head):
    rng = np.random.default_rng(5)
    output_dim = 3 if head == "softmax" else 1
    for trial in range(5):
        params = random_params(rng, 4, 6, output_dim)
        x = rng.normal(size=(5, 4))
        if head == "softmax":
            y = np.zeros((5, 3))
            y[np.arange(5), rng.integers(0, 3, size=5)] = 1.0
        else:
            y = rng.normal(size=(5, 1))
        _, grads = loss_and_gradients(params, x, y, head, l2_penalty=1e-4)
        for key in ("w1", "b1", "w2", "b2"):
            flat = grads[key].ravel()
            for flat_idx in range(flat.size):
                idx = np.unravel_index(flat_idx, grads[key].shape)
                fd = finite_difference(params, x, y, head, 1e-4, key, idx)
                denom = max(abs(fd), abs(flat[flat_idx]), 1e-8)
                assert abs(fd - flat[flat_idx]) / denom < 1e-4, (
                    f"{head} {key}{idx}: analytic {flat[flat_idx]}, fd {fd}"
                )


def test_l2_penalty_touches_weights_not_biases():
    rng = np.random.default_rng(8)
    params = random_params(rng, 3, 4, 2)
    x = rng.normal(size=(6, 3))
    y = np.zeros((6, 2))
    y[:, 0] = 1.0
    _, lean = loss_and_gradients(params, x, y, "softmax", 0.0)
    _, fat = loss_and_gradients(params, x, y, "softmax", 0.5)
    np.testing.assert_allclose(fat["b1"], lean["b1"], atol=1e-12)
    np.testing.assert_allclose(fat["b2"], lean["b2"], atol=1e-12)
    np.testing.assert_allclose(fat["w1"] - lean["w1"], 0.5 * params["w1"], atol=1e-12)


def separable_data(rng, n_per=40):
    a = rng.normal([0, 0], 0.3, size=(n_per, 2))
    b = rng.normal([3, 3], 0.3, size=(n_per, 2))
    c = rng.normal([0, 3], 0.3, size=(n_per, 2))
    x = np.vstack([a, b, c])
    labels = ["lo"] * n_per + ["hi"] * n_per + ["mid"] * n_per
    return x, labels


def test_classifier_separates_clean_clusters():
    rng = np.random.default_rng(11)
    x, labels = separable_data(rng)
    model = train_mlp(x, labels, class_labels=("lo", "hi", "mid"),
                      settings=MlpSettings(epochs=200), seed=0)
    pred = [predict_class(model, row).label for row in x]
    accuracy = np.mean([p == t for p, t in zip(pred, labels)])
    assert accuracy > 0.99


def test_training_is_deterministic_given_seed():
    rng = np.random.default_rng(13)
    x, labels = separable_data(rng, n_per=15)
    kwargs = dict(class_labels=("lo", "hi", "mid"),
                  settings=MlpSettings(epochs=30), seed=9)
    a = train_mlp(x, labels, **kwargs)
    b = train_mlp(x, labels, **kwargs)
    np.testing.assert_array_equal(a.w1, b.w1)
    np.testing.assert_array_equal(a.w2, b.w2)
    assert a.training_log == b.training_log
    c = train_mlp(x, labels, class_labels=("lo", "hi", "mid"),
                  settings=MlpSettings(epochs=30), seed=10)
    assert not np.array_equal(a.w1, c.w1)


def test_probabilities_normalize():
    rng = np.random.default_rng(17)
    x, labels = separable_data(rng, n_per=10)
    model = train_mlp(x, labels, class_labels=("lo", "hi", "mid"),
                      settings=MlpSettings(epochs=20), seed=1)
    probs = predict_probabilities(model, rng.normal(size=(50, 2)))
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(probs >= 0)


def test_softmax_is_shift_invariant_in_logits():
    model = MlpModel(
        w1=np.zeros((2, 3)), b1=np.zeros(3),
        w2=np.zeros((3, 2)), b2=np.array([4.0, 4.0]),
        head="softmax", class_labels=("a", "b"),
    )
    shifted = MlpModel(
        w1=np.zeros((2, 3)), b1=np.zeros(3),
        w2=np.zeros((3, 2)), b2=np.array([904.0, 904.0]),
        head="softmax", class_labels=("a", "b"),
    )
    x = np.array([[1.0, -1.0]])
    np.testing.assert_allclose(
        predict_probabilities(model, x), predict_probabilities(shifted, x), atol=1e-12
    )


def test_regression_head_fits_a_smooth_map():
    rng = np.random.default_rng(19)
    x = rng.uniform(-1, 1, size=(200, 2))
    y = 2.0 * x[:, 0] - 0.5 * x[:, 1] + 1.0
    model = train_mlp(x, y, settings=MlpSettings(epochs=400, learning_rate=0.05),
                      seed=2)
    pred = predict_values(model, x)
    assert np.sqrt(np.mean((pred - y) ** 2)) < 0.1


def test_capacity_on_a_tiny_task():
    # 10 points, 5000 epochs: the data loss must essentially vanish
    rng = np.random.default_rng(23)
    x = rng.normal(size=(10, 3))
    labels = ["a", "b"] * 5
    model = train_mlp(
        x, labels, class_labels=("a", "b"),
        settings=MlpSettings(epochs=5000, batch_size=10, l2_penalty=0.0,
                             learning_rate=0.1),
        seed=3,
    )
    assert model.training_log[-1] < 0.01


def test_missing_class_is_an_error():
    x = np.zeros((4, 2))
    with pytest.raises(FitError, match="no training examples"):
        train_mlp(x, ["a", "a", "a", "a"], class_labels=("a", "b"))


def test_unknown_label_is_an_error():
    x = np.zeros((4, 2))
    with pytest.raises(FitError, match="unknown class"):
        train_mlp(x, ["a", "a", "b", "z"], class_labels=("a", "b"))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported():
    rng = np.random.default_rng(29)
    x = rng.normal(0, 1e4, size=(20, 2))
    y = rng.normal(0, 1e4, size=20)
    with pytest.raises(FitError, match="diverged"):
        train_mlp(x, y, settings=MlpSettings(epochs=400, learning_rate=10.0), seed=0)


def test_input_standardizer_is_applied_at_predict_time():
    rng = np.random.default_rng(31)
    x = np.vstack([rng.normal(0, 1, size=(30, 2)), rng.normal(500, 1, size=(30, 2))])
    labels = ["near"] * 30 + ["far"] * 30
    model = train_mlp(x, labels, class_labels=("near", "far"),
                      settings=MlpSettings(epochs=100), seed=4,
                      standardize_inputs=True)
    assert model.input_standardizer is not None
    assert predict_class(model, np.array([0.0, 0.0])).label == "near"
    assert predict_class(model, np.array([500.0, 500.0])).label == "far"


def test_voting_takes_the_modal_class():
    model = MlpModel(
        w1=np.zeros((1, 2)), b1=np.zeros(2),
        w2=np.array([[0.0, 0.0], [0.0, 0.0]]), b2=np.zeros(2),
        head="softmax", class_labels=("a", "b"),
    )
    # identity-ish network is useless; vote directly through a hand model
    hand = MlpModel(
        w1=np.eye(1, 1), b1=np.zeros(1),
        w2=np.array([[4.0, -4.0]]), b2=np.zeros(2),
        head="softmax", class_labels=("a", "b"),
    )
    windows = np.array([[2.0], [2.0], [-2.0]])  # two votes a, one vote b
    result = classify_bout_voting(hand, windows)
    assert result.label == "a"
    np.testing.assert_allclose(result.probabilities, [2 / 3, 1 / 3])
    assert isinstance(result, ClassPrediction)
    del model


def test_voting_tie_breaks_on_probability_mass():
    hand = MlpModel(
        w1=np.eye(1, 1), b1=np.zeros(1),
        w2=np.array([[4.0, -4.0]]), b2=np.zeros(2),
        head="softmax", class_labels=("a", "b"),
    )
    # one confident a vote, one weak b vote: tie on counts, a wins on mass
    windows = np.array([[3.0], [-0.1]])
    assert classify_bout_voting(hand, windows).label == "a"
    # mirrored strengths flip the winner
    windows = np.array([[0.1], [-3.0]])
    assert classify_bout_voting(hand, windows).label == "b"


def test_serialization_round_trip(tmp_path):
    rng = np.random.default_rng(37)
    x, labels = separable_data(rng, n_per=10)
    model = train_mlp(x, labels, class_labels=("lo", "hi", "mid"),
                      settings=MlpSettings(epochs=25), seed=5,
                      standardize_inputs=True)
    path = tmp_path / "mlp.json"
    save_model(model, path)
    loaded = load_model(path)
    probe = rng.normal(size=(20, 2))
    np.testing.assert_allclose(
        predict_probabilities(loaded, probe), predict_probabilities(model, probe),
        rtol=1e-12,
    )
    assert loaded.class_labels == model.class_labels
    assert loaded.head == model.head


def test_serialization_rejects_foreign_payloads():
    with pytest.raises(ValueError, match="format"):
        model_from_dict({"format": "not_mlp", "version": 1})


def test_model_dict_survives_json():
    import json

    rng = np.random.default_rng(41)
    x, labels = separable_data(rng, n_per=8)
    model = train_mlp(x, labels, class_labels=("lo", "hi", "mid"),
                      settings=MlpSettings(epochs=10), seed=6)
    payload = json.loads(json.dumps(model_to_dict(model)))
    again = model_from_dict(payload)
    np.testing.assert_allclose(again.w1, model.w1, rtol=1e-15)

"""Single-hidden-layer perceptron, trained by plain mini-batch gradient descent.

The same network core serves two jobs:

* a softmax head with cross-entropy loss for activity classification, fed
  either bout summaries or per-window features (the latter classified per
  window and combined by majority vote);
* a linear head with squared-error loss for direct energy-expenditure
  regression from window features.

Everything is explicit numpy: forward pass, backprop, L2 penalty on the two
weight matrices (biases are not decayed).  ``loss_and_gradients`` is exposed
so gradients can be checked against finite differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FitError
from .vbgmm import Standardizer


@dataclass(frozen=True)
class MlpSettings:
    hidden_units: int = 25
    learning_rate: float = 0.01
    epochs: int = 500
    batch_size: int = 32
    l2_penalty: float = 1e-4

    def validate(self) -> None:
        if self.hidden_units < 1:
            raise FitError("hidden_units must be positive")
        if self.learning_rate <= 0:
            raise FitError("learning_rate must be positive")
        if self.epochs < 1:
            raise FitError("epochs must be positive")
        if self.batch_size < 1:
            raise FitError("batch_size must be positive")
        if self.l2_penalty < 0:
            raise FitError("l2_penalty must be nonnegative")


@dataclass(frozen=True)
class MlpModel:
    """Fitted network.  ``head`` is 'softmax' (class_labels set) or 'linear'.

    ``training_log`` records the mean per-example data loss after each epoch.
    ``input_standardizer`` is applied before the forward pass when present;
    summary inputs already live on the simplex and are trained raw.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    head: str
    class_labels: tuple[str, ...] = ()
    input_standardizer: Standardizer | None = None
    training_log: tuple[float, ...] = ()
    seed: int | None = None

    def __post_init__(self):
        if self.head not in ("softmax", "linear"):
            raise ValueError(f"unknown head {self.head!r}")
        if self.head == "softmax" and len(self.class_labels) < 2:
            raise ValueError("softmax head needs >= 2 class labels")
        if self.w1.shape[1] != self.w2.shape[0]:
            raise ValueError("hidden layer shapes disagree")
        if self.head == "softmax" and self.w2.shape[1] != len(self.class_labels):
            raise ValueError("output width must match the class count")

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]


@dataclass(frozen=True)
class ClassPrediction:
    label: str
    probabilities: np.ndarray


def _forward(params: dict[str, np.ndarray], x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    hidden = np.tanh(x @ params["w1"] + params["b1"])
    return hidden, hidden @ params["w2"] + params["b2"]


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def loss_and_gradients(params: dict[str, np.ndarray], x: np.ndarray, y: np.ndarray,
                       head: str, l2_penalty: float) -> tuple[float, dict[str, np.ndarray]]:
    """Objective and its gradients for one batch.

    For the softmax head ``y`` is (N, C) one-hot and the data term is mean
    cross-entropy; for the linear head ``y`` is (N, 1) and the data term is
    0.5 * mean squared error.  The penalty 0.5 * l2 * (|w1|^2 + |w2|^2) is
    added in both cases.
    """
    n = x.shape[0]
    hidden, output = _forward(params, x)
    if head == "softmax":
        probs = _softmax(output)
        data_loss = float(-np.sum(y * np.log(np.maximum(probs, 1e-300))) / n)
        delta_out = (probs - y) / n
    else:
        diff = output - y
        data_loss = float(0.5 * np.mean(diff ** 2))
        delta_out = diff / n
    loss = data_loss + 0.5 * l2_penalty * (
        float(np.sum(params["w1"] ** 2)) + float(np.sum(params["w2"] ** 2))
    )
    grad_w2 = hidden.T @ delta_out + l2_penalty * params["w2"]
    grad_b2 = delta_out.sum(axis=0)
    delta_hidden = (delta_out @ params["w2"].T) * (1.0 - hidden ** 2)
    grad_w1 = x.T @ delta_hidden + l2_penalty * params["w1"]
    grad_b1 = delta_hidden.sum(axis=0)
    return loss, {"w1": grad_w1, "b1": grad_b1, "w2": grad_w2, "b2": grad_b2}


def _init_params(input_dim: int, hidden: int, output_dim: int,
                 rng: np.random.Generator) -> dict[str, np.ndarray]:
    # Xavier-style uniform limits keep tanh activations away from saturation.
    limit1 = math.sqrt(6.0 / (input_dim + hidden))
    limit2 = math.sqrt(6.0 / (hidden + output_dim))
    return {
        "w1": rng.uniform(-limit1, limit1, size=(input_dim, hidden)),
        "b1": np.zeros(hidden),
        "w2": rng.uniform(-limit2, limit2, size=(hidden, output_dim)),
        "b2": np.zeros(output_dim),
    }


def train_mlp(inputs: np.ndarray, targets: Sequence[str] | np.ndarray,
              class_labels: Sequence[str] | None = None,
              settings: MlpSettings | None = None, seed: int = 0,
              standardize_inputs: bool = False) -> MlpModel:
    """Train a classifier (``class_labels`` given) or a scalar regressor.

    Classifier targets are label strings; every entry of ``class_labels``
    must occur at least once in them.  Regressor targets are floats.
    """
    settings = settings or MlpSettings()
    settings.validate()
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[0] < 1:
        raise FitError(f"training inputs must be a nonempty 2-d matrix, got {inputs.shape}")
    if not np.all(np.isfinite(inputs)):
        raise FitError("training inputs contain non-finite values")

    standardizer = None
    if standardize_inputs:
        standardizer = Standardizer.fit(inputs)
        inputs = standardizer.transform(inputs)

    if class_labels is not None:
        head = "softmax"
        class_labels = tuple(class_labels)
        index = {label: j for j, label in enumerate(class_labels)}
        present = set(targets)
        for label in class_labels:
            if label not in present:
                raise FitError(
                    f"class {label!r} has no training examples; cannot fit a classifier"
                )
        for label in present:
            if label not in index:
                raise FitError(f"training labels contain unknown class {label!r}")
        y = np.zeros((len(inputs), len(class_labels)))
        for i, label in enumerate(targets):
            y[i, index[label]] = 1.0
        output_dim = len(class_labels)
    else:
        head = "linear"
        class_labels = ()
        y = np.asarray(targets, dtype=float).reshape(-1, 1)
        if not np.all(np.isfinite(y)):
            raise FitError("training targets contain non-finite values")
        output_dim = 1
    if len(y) != len(inputs):
        raise FitError(f"{len(inputs)} inputs but {len(y)} targets")

    rng = np.random.default_rng(seed)
    params = _init_params(inputs.shape[1], settings.hidden_units, output_dim, rng)
    n = len(inputs)
    training_log = []
    for _ in range(settings.epochs):
        order = rng.permutation(n)
        for start in range(0, n, settings.batch_size):
            batch = order[start : start + settings.batch_size]
            _, grads = loss_and_gradients(params, inputs[batch], y[batch],
                                          head, settings.l2_penalty)
            for key in params:
                params[key] = params[key] - settings.learning_rate * grads[key]
        epoch_loss, _ = loss_and_gradients(params, inputs, y, head, 0.0)
        if not math.isfinite(epoch_loss):
            raise FitError(
                "training diverged (non-finite loss); try a smaller learning rate"
            )
        training_log.append(epoch_loss)

    return MlpModel(
        w1=params["w1"], b1=params["b1"], w2=params["w2"], b2=params["b2"],
        head=head, class_labels=class_labels, input_standardizer=standardizer,
        training_log=tuple(training_log), seed=seed,
    )


def _model_params(model: MlpModel) -> dict[str, np.ndarray]:
    return {"w1": model.w1, "b1": model.b1, "w2": model.w2, "b2": model.b2}


def _prepare(model: MlpModel, inputs: np.ndarray) -> np.ndarray:
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if inputs.shape[1] != model.input_dim:
        raise ValueError(
            f"input has {inputs.shape[1]} features, model expects {model.input_dim}"
        )
    if model.input_standardizer is not None:
        inputs = model.input_standardizer.transform(inputs)
    return inputs


def predict_probabilities(model: MlpModel, inputs: np.ndarray) -> np.ndarray:
    """(N, C) class probabilities; softmax head only."""
    if model.head != "softmax":
        raise ValueError("probabilities are only defined for the softmax head")
    _, output = _forward(_model_params(model), _prepare(model, inputs))
    return _softmax(output)


def predict_class(model: MlpModel, inputs: np.ndarray) -> ClassPrediction:
    """Single-input classification; ties break toward the lower class index."""
    probs = predict_probabilities(model, inputs)[0]
    return ClassPrediction(label=model.class_labels[int(np.argmax(probs))],
                           probabilities=probs)


def predict_values(model: MlpModel, inputs: np.ndarray) -> np.ndarray:
    """(N,) scalar outputs; linear head only."""
    if model.head != "linear":
        raise ValueError("scalar outputs are only defined for the linear head")
    _, output = _forward(_model_params(model), _prepare(model, inputs))
    return output[:, 0]


def classify_bout_voting(model: MlpModel, window_matrix: np.ndarray) -> ClassPrediction:
    """Classify each window, then take the modal predicted class for the bout.

    Vote ties are broken by the tied classes' summed probability mass; exact
    ties after that go to the lower class index.  The returned probability
    vector holds vote shares, not averaged network outputs.
    """
    probs = predict_probabilities(model, window_matrix)
    votes = np.argmax(probs, axis=1)
    counts = np.bincount(votes, minlength=len(model.class_labels))
    leaders = np.flatnonzero(counts == counts.max())
    if len(leaders) == 1:
        winner = int(leaders[0])
    else:
        mass = probs[:, leaders].sum(axis=0)
        winner = int(leaders[int(np.argmax(mass))])
    shares = counts.astype(float) / counts.sum()
    return ClassPrediction(label=model.class_labels[winner], probabilities=shares)


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------


def model_to_dict(model: MlpModel) -> dict:
    payload = {
        "format": "mlp",
        "version": 1,
        "head": model.head,
        "class_labels": list(model.class_labels),
        "w1": model.w1.tolist(),
        "b1": model.b1.tolist(),
        "w2": model.w2.tolist(),
        "b2": model.b2.tolist(),
        "training_log": list(model.training_log),
        "seed": model.seed,
        "standardizer": None,
    }
    if model.input_standardizer is not None:
        payload["standardizer"] = {
            "mean": model.input_standardizer.mean.tolist(),
            "std": model.input_standardizer.std.tolist(),
        }
    return payload


def model_from_dict(payload: dict) -> MlpModel:
    if payload.get("format") != "mlp":
        raise ValueError(f"not a network payload: format={payload.get('format')!r}")
    if payload.get("version") != 1:
        raise ValueError(f"unsupported network version {payload.get('version')!r}")
    standardizer = None
    if payload.get("standardizer"):
        standardizer = Standardizer(
            mean=np.array(payload["standardizer"]["mean"], dtype=float),
            std=np.array(payload["standardizer"]["std"], dtype=float),
        )
    return MlpModel(
        w1=np.array(payload["w1"], dtype=float),
        b1=np.array(payload["b1"], dtype=float),
        w2=np.array(payload["w2"], dtype=float),
        b2=np.array(payload["b2"], dtype=float),
        head=payload["head"],
        class_labels=tuple(payload.get("class_labels", ())),
        input_standardizer=standardizer,
        training_log=tuple(payload.get("training_log", ())),
        seed=payload.get("seed"),
    )


def save_model(model: MlpModel, path: str | Path) -> None:
    with open(Path(path), "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def load_model(path: str | Path) -> MlpModel:
    with open(Path(path), encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))

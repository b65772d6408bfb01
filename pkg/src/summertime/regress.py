"""Energy-expenditure regression from window features and bout summaries.

Two estimator families:

* ``LinearModel`` / ``RegressionSuite``: one ordinary-least-squares model per
  activity class, fitted on the training windows of that class (true labels).
  Each design row is the window's feature vector optionally augmented with
  its bout's cluster-ratio summary, plus an intercept.  At prediction time
  the bout's *predicted* class routes every window to that class's model.
* a linear-head network (see classify.train_mlp) regressing MET directly from
  window features, used by the network-regression method.

Per-bout estimates aggregate window predictions by mean (default, a MET-rate
reading) or sum (total accumulated load); class-routed estimates are clamped
at zero after aggregation.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FitError
from .features import WindowFeatures
from .summarize import SummaryVector

log = logging.getLogger(__name__)

AGGREGATIONS = ("mean", "sum")


@dataclass(frozen=True)
class LinearModel:
    """OLS coefficients for one class; ``coefficients[0]`` is the intercept."""

    activity_class: str
    coefficients: np.ndarray
    mode: str  # 'augmented' (features + summary ratios) or 'window_only'

    def __post_init__(self):
        if self.mode not in ("augmented", "window_only"):
            raise ValueError(f"unknown design mode {self.mode!r}")
        if self.coefficients.ndim != 1:
            raise ValueError("coefficients must be 1-d")


@dataclass(frozen=True)
class RegressionSuite:
    """One LinearModel per class, keyed by the shared label order."""

    models: tuple[LinearModel, ...]
    class_labels: tuple[str, ...]
    feature_dim: int
    summary_dim: int

    def __post_init__(self):
        if len(self.models) != len(self.class_labels):
            raise ValueError("need exactly one model per class")
        for model, label in zip(self.models, self.class_labels):
            if model.activity_class != label:
                raise ValueError(
                    f"model order mismatch: {model.activity_class!r} vs {label!r}"
                )

    def model_for(self, label: str) -> LinearModel:
        try:
            return self.models[self.class_labels.index(label)]
        except ValueError:
            raise KeyError(f"no regression model for class {label!r}") from None


def fit_ols(design: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Least-squares coefficients via SVD; minimum-norm on rank deficiency."""
    design = np.asarray(design, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if design.ndim != 2 or design.shape[0] != len(targets):
        raise FitError(
            f"design shape {design.shape} does not match {len(targets)} targets"
        )
    if not (np.all(np.isfinite(design)) and np.all(np.isfinite(targets))):
        raise FitError("regression inputs contain non-finite values")
    coefficients, _, _, _ = np.linalg.lstsq(design, targets, rcond=None)
    return coefficients


def build_design_rows(features: np.ndarray, ratios: np.ndarray | None) -> np.ndarray:
    """Design matrix rows: [1, feature..., ratio...] or [1, feature...].

    The same ratio vector (the bout's summary) repeats across all of that
    bout's windows.
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    columns = [np.ones((len(features), 1)), features]
    if ratios is not None:
        ratios = np.asarray(ratios, dtype=float)
        columns.append(np.broadcast_to(ratios, (len(features), len(ratios))))
    return np.hstack(columns)


def _collect_rows(features: Sequence[WindowFeatures],
                  summaries: Sequence[SummaryVector] | None,
                  ) -> tuple[dict[str, list[np.ndarray]], dict[str, list[np.ndarray]],
                             dict[str, list[np.ndarray]]]:
    by_class_aug: dict[str, list[np.ndarray]] = {}
    by_class_win: dict[str, list[np.ndarray]] = {}
    by_class_y: dict[str, list[np.ndarray]] = {}
    ratio_by_bout = {}
    if summaries is not None:
        ratio_by_bout = {s.bout_id: s.ratios for s in summaries}
    for feat in features:
        if feat.targets is None:
            continue
        label = feat.activity_class
        by_class_win.setdefault(label, []).append(
            build_design_rows(feat.matrix, None)
        )
        if summaries is not None:
            if feat.bout_id not in ratio_by_bout:
                raise FitError(f"bout {feat.bout_id!r} has no summary vector")
            by_class_aug.setdefault(label, []).append(
                build_design_rows(feat.matrix, ratio_by_bout[feat.bout_id])
            )
        by_class_y.setdefault(label, []).append(np.asarray(feat.targets, dtype=float))
    return by_class_aug, by_class_win, by_class_y


def fit_regression_suite(features: Sequence[WindowFeatures],
                         summaries: Sequence[SummaryVector] | None,
                         class_labels: Sequence[str]) -> RegressionSuite:
    """Fit one per-class OLS model, grouping training windows by true label.

    With ``summaries`` given, each class model uses the augmented design
    unless that class has fewer target windows than design columns, in which
    case it falls back to the window-only design (logged).  A class with no
    target windows at all is an error.
    """
    class_labels = tuple(class_labels)
    by_class_aug, by_class_win, by_class_y = _collect_rows(features, summaries)
    if not by_class_y:
        raise FitError("no training windows carry energy-expenditure targets")
    sample_feat = next(f for f in features if f.targets is not None)
    feature_dim = sample_feat.matrix.shape[1]
    summary_dim = 0
    if summaries is not None and summaries:
        summary_dim = len(summaries[0].ratios)

    models = []
    for label in class_labels:
        if label not in by_class_y:
            raise FitError(
                f"class {label!r} has no training windows with targets; "
                "cannot fit its regression model"
            )
        targets = np.concatenate(by_class_y[label])
        if summaries is not None:
            design = np.vstack(by_class_aug[label])
            if len(targets) >= design.shape[1]:
                models.append(LinearModel(label, fit_ols(design, targets), "augmented"))
                continue
            log.warning(
                "class %r has %d target windows for %d augmented coefficients; "
                "falling back to the window-only design",
                label, len(targets), design.shape[1],
            )
        design = np.vstack(by_class_win[label])
        models.append(LinearModel(label, fit_ols(design, targets), "window_only"))
    return RegressionSuite(
        models=tuple(models),
        class_labels=class_labels,
        feature_dim=feature_dim,
        summary_dim=summary_dim,
    )


def predict_windows(suite: RegressionSuite, label: str, features: np.ndarray,
                    ratios: np.ndarray | None) -> np.ndarray:
    """Per-window MET estimates from the model routed to ``label``."""
    model = suite.model_for(label)
    design = build_design_rows(
        features, ratios if model.mode == "augmented" else None
    )
    if design.shape[1] != len(model.coefficients):
        raise FitError(
            f"class {label!r}: design has {design.shape[1]} columns, "
            f"model has {len(model.coefficients)}"
        )
    return design @ model.coefficients


def aggregate(per_window: np.ndarray, how: str) -> float:
    if how not in AGGREGATIONS:
        raise ValueError(f"unknown aggregation {how!r}; expected one of {AGGREGATIONS}")
    return float(per_window.sum() if how == "sum" else per_window.mean())


def predict_bout_met(suite: RegressionSuite, predicted_class: str,
                     features: WindowFeatures, ratios: np.ndarray | None,
                     how: str = "mean") -> float:
    """Bout-level estimate: route to the predicted class, aggregate, clamp at 0."""
    per_window = predict_windows(suite, predicted_class, features.matrix, ratios)
    return max(aggregate(per_window, how), 0.0)


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------


def suite_to_dict(suite: RegressionSuite) -> dict:
    return {
        "format": "regression_suite",
        "version": 1,
        "class_labels": list(suite.class_labels),
        "feature_dim": suite.feature_dim,
        "summary_dim": suite.summary_dim,
        "models": [
            {
                "activity_class": m.activity_class,
                "mode": m.mode,
                "coefficients": m.coefficients.tolist(),
            }
            for m in suite.models
        ],
    }


def suite_from_dict(payload: dict) -> RegressionSuite:
    if payload.get("format") != "regression_suite":
        raise ValueError(
            f"not a regression suite payload: format={payload.get('format')!r}"
        )
    if payload.get("version") != 1:
        raise ValueError(f"unsupported regression suite version {payload.get('version')!r}")
    models = tuple(
        LinearModel(
            activity_class=m["activity_class"],
            coefficients=np.array(m["coefficients"], dtype=float),
            mode=m["mode"],
        )
        for m in payload["models"]
    )
    return RegressionSuite(
        models=models,
        class_labels=tuple(payload["class_labels"]),
        feature_dim=int(payload["feature_dim"]),
        summary_dim=int(payload["summary_dim"]),
    )


def save_suite(suite: RegressionSuite, path: str | Path) -> None:
    with open(Path(path), "w", encoding="utf-8") as fh:
        json.dump(suite_to_dict(suite), fh)
        fh.write("\n")


def load_suite(path: str | Path) -> RegressionSuite:
    with open(Path(path), encoding="utf-8") as fh:
        return suite_from_dict(json.load(fh))

"""Leave-one-subject-out evaluation of the full pipeline and its baselines.

Each fold withholds every bout of one subject.  All trainable stages (the
feature standardizers, the mixture model, the classifiers, the regression
models) are refit from the remaining subjects only, then applied to the
held-out bouts.  Classification is scored per bout; a window-weighted view
(each bout's prediction counted once per window) is reported alongside.

Five method pipelines share this harness:

* ``summertime``     -- cluster-ratio summaries -> summary classifier ->
                        per-class regression on summary-augmented designs.
* ``ann_voting``     -- per-window classifier with majority voting ->
                        per-class regression on window-only designs.
* ``fivereg_ann``    -- same pipeline as ann_voting (the two names expose its
                        classification and regression faces, matching how the
                        baselines are usually cited).
* ``linreg_local``   -- voting classifier; one global regression over all
                        windows, no class routing.
* ``ann_regression`` -- voting classifier; a linear-head network regressing
                        MET directly from window features.

Reports are deterministic functions of (corpus, config): per-fold seeds are
derived from the config seeds, and parallel fold execution merges results in
fold order.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import classify, regress
from .config import PipelineConfig
from .dataset import Bout, Corpus, loso_folds
from .errors import EvaluationError, SummertimeError
from .features import WindowFeatures, featurize_corpus, stack_features
from .reference import reference_panel
from .summarize import SummaryVector, summarize_corpus, summary_matrix
from .vbgmm import fit_mixture


def rmse(predicted: np.ndarray, actual: np.ndarray) -> float:
    """Root mean squared difference of two equal-length nonempty vectors."""
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if predicted.ndim != 1 or actual.ndim != 1:
        raise ValueError("rmse expects 1-d vectors")
    if len(predicted) != len(actual):
        raise ValueError(
            f"rmse length mismatch: {len(predicted)} vs {len(actual)}"
        )
    if len(predicted) == 0:
        raise ValueError("rmse of empty vectors is undefined")
    return float(np.sqrt(np.mean((predicted - actual) ** 2)))


def corpus_fingerprint(corpus: Corpus) -> str:
    """Content hash over bout identities, labels, signals and targets."""
    digest = hashlib.sha256()
    digest.update(f"{corpus.axis_count}|{','.join(corpus.label_set)}".encode())
    for bout in corpus.bouts:
        digest.update(
            f"|{bout.bout_id}|{bout.subject_id}|{bout.activity_class}".encode()
        )
        digest.update(np.ascontiguousarray(bout.signal).tobytes())
        if bout.targets is not None:
            digest.update(np.ascontiguousarray(bout.targets).tobytes())
    return digest.hexdigest()


def _train_fingerprint(bouts: Sequence[Bout]) -> str:
    joined = "|".join(sorted(b.bout_id for b in bouts))
    return hashlib.sha256(joined.encode()).hexdigest()


@dataclass(frozen=True)
class StageSeeds:
    """Per-fold seeds for each trainable stage, derived from the config."""

    mixture: int
    classifier: int
    regressor: int


def derive_stage_seeds(config: PipelineConfig, fold_count: int) -> list[StageSeeds]:
    streams = {
        name: np.random.SeedSequence([base, tag]).generate_state(fold_count)
        for name, (base, tag) in {
            "mixture": (config.gmm.seed, 101),
            "classifier": (config.mlp.seed, 202),
            "regressor": (config.mlp.seed, 303),
        }.items()
    }
    return [
        StageSeeds(
            mixture=int(streams["mixture"][i]),
            classifier=int(streams["classifier"][i]),
            regressor=int(streams["regressor"][i]),
        )
        for i in range(fold_count)
    ]


@dataclass(frozen=True)
class BoutOutcome:
    fold_index: int
    bout_id: str
    subject_id: str
    actual_class: str
    predicted_class: str
    window_count: int
    actual_met: float | None
    predicted_met: float | None


@dataclass(frozen=True)
class FoldSummary:
    fold_index: int
    test_subject: str
    train_fingerprint: str
    test_bout_ids: tuple[str, ...]


@dataclass(frozen=True)
class EvaluationReport:
    method: str
    labels: tuple[str, ...]
    confusion: np.ndarray  # bout counts; rows actual, columns predicted
    recall_per_class: np.ndarray
    confusion_windows: np.ndarray  # same layout, weighted by window count
    recall_windows: np.ndarray
    rmse_per_class: np.ndarray  # NaN where a class has no scored bouts
    rmse_overall: float | None
    fold_count: int
    config_fingerprint: str
    folds: tuple[FoldSummary, ...]
    outcomes: tuple[BoutOutcome, ...]

    @property
    def overall_recall(self) -> float:
        """Fraction of all bouts classified correctly."""
        total = self.confusion.sum()
        return float(np.trace(self.confusion) / total) if total else 0.0


# --------------------------------------------------------------------------
# Per-method fold runners
# --------------------------------------------------------------------------

FoldRunner = Callable[
    [Corpus, Corpus, PipelineConfig, StageSeeds, tuple[str, ...]],
    list[tuple[str, float | None]],
]
# A runner maps one fold to [(predicted_class, predicted_met or None)] in
# test-bout order.  Registered under METHOD_RUNNERS; tests may inject stubs.


def _window_labels(features: Sequence[WindowFeatures]) -> list[str]:
    labels: list[str] = []
    for feat in features:
        labels.extend([feat.activity_class] * feat.window_count)
    return labels


def _target_rows(features: Sequence[WindowFeatures]) -> tuple[np.ndarray, np.ndarray]:
    xs = [f.matrix for f in features if f.targets is not None]
    ys = [np.asarray(f.targets, dtype=float) for f in features if f.targets is not None]
    if not xs:
        raise EvaluationError("no training windows carry energy-expenditure targets")
    return np.vstack(xs), np.concatenate(ys)


def _actual_met(feat: WindowFeatures, aggregation: str) -> float | None:
    if feat.targets is None:
        return None
    return regress.aggregate(np.asarray(feat.targets, dtype=float), aggregation)


def _run_summertime(train: Corpus, test: Corpus, config: PipelineConfig,
                    seeds: StageSeeds, labels: tuple[str, ...]
                    ) -> list[tuple[str, float | None]]:
    train_feats = featurize_corpus(train, config.window_length)
    test_feats = featurize_corpus(test, config.window_length)
    mixture = fit_mixture(stack_features(train_feats), config.gmm.fit_settings(),
                          seed=seeds.mixture)
    train_sums = summarize_corpus(mixture, train_feats)
    test_sums = summarize_corpus(mixture, test_feats)
    model = classify.train_mlp(
        summary_matrix(train_sums),
        [s.activity_class for s in train_sums],
        class_labels=labels,
        settings=config.mlp.settings(),
        seed=seeds.classifier,
    )
    augmented = config.regression.mode == "augmented"
    suite = regress.fit_regression_suite(
        train_feats, train_sums if augmented else None, labels
    )
    results = []
    for feat, summary in zip(test_feats, test_sums):
        prediction = classify.predict_class(model, summary.ratios)
        met = regress.predict_bout_met(
            suite, prediction.label, feat,
            summary.ratios if augmented else None,
            config.regression.aggregation,
        )
        results.append((prediction.label, met))
    return results


def _fit_voting_classifier(train_feats, config, seeds, labels):
    return classify.train_mlp(
        stack_features(train_feats),
        _window_labels(train_feats),
        class_labels=labels,
        settings=config.mlp.settings(),
        seed=seeds.classifier,
        standardize_inputs=True,
    )


def _run_voting_fivereg(train: Corpus, test: Corpus, config: PipelineConfig,
                        seeds: StageSeeds, labels: tuple[str, ...]
                        ) -> list[tuple[str, float | None]]:
    train_feats = featurize_corpus(train, config.window_length)
    test_feats = featurize_corpus(test, config.window_length)
    model = _fit_voting_classifier(train_feats, config, seeds, labels)
    suite = regress.fit_regression_suite(train_feats, None, labels)
    results = []
    for feat in test_feats:
        prediction = classify.classify_bout_voting(model, feat.matrix)
        met = regress.predict_bout_met(
            suite, prediction.label, feat, None, config.regression.aggregation
        )
        results.append((prediction.label, met))
    return results


def _run_linreg_local(train: Corpus, test: Corpus, config: PipelineConfig,
                      seeds: StageSeeds, labels: tuple[str, ...]
                      ) -> list[tuple[str, float | None]]:
    train_feats = featurize_corpus(train, config.window_length)
    test_feats = featurize_corpus(test, config.window_length)
    model = _fit_voting_classifier(train_feats, config, seeds, labels)
    x, y = _target_rows(train_feats)
    beta = regress.fit_ols(regress.build_design_rows(x, None), y)
    results = []
    for feat in test_feats:
        prediction = classify.classify_bout_voting(model, feat.matrix)
        per_window = regress.build_design_rows(feat.matrix, None) @ beta
        met = max(regress.aggregate(per_window, config.regression.aggregation), 0.0)
        results.append((prediction.label, met))
    return results


def _run_ann_regression(train: Corpus, test: Corpus, config: PipelineConfig,
                        seeds: StageSeeds, labels: tuple[str, ...]
                        ) -> list[tuple[str, float | None]]:
    train_feats = featurize_corpus(train, config.window_length)
    test_feats = featurize_corpus(test, config.window_length)
    model = _fit_voting_classifier(train_feats, config, seeds, labels)
    x, y = _target_rows(train_feats)
    regressor = classify.train_mlp(
        x, y, class_labels=None,
        settings=config.mlp.settings(),
        seed=seeds.regressor,
        standardize_inputs=True,
    )
    results = []
    for feat in test_feats:
        prediction = classify.classify_bout_voting(model, feat.matrix)
        per_window = classify.predict_values(regressor, feat.matrix)
        met = regress.aggregate(per_window, config.regression.aggregation)
        results.append((prediction.label, met))
    return results


METHOD_RUNNERS: dict[str, FoldRunner] = {
    "summertime": _run_summertime,
    "ann_voting": _run_voting_fivereg,
    "fivereg_ann": _run_voting_fivereg,
    "linreg_local": _run_linreg_local,
    "ann_regression": _run_ann_regression,
}


# --------------------------------------------------------------------------
# The harness
# --------------------------------------------------------------------------


def _run_fold(runner: FoldRunner, fold_index: int, train: Corpus, test: Corpus,
              config: PipelineConfig, seeds: StageSeeds,
              labels: tuple[str, ...]) -> tuple[FoldSummary, list[BoutOutcome]]:
    test_subject = test.bouts[0].subject_id
    try:
        predictions = runner(train, test, config, seeds, labels)
    except SummertimeError as exc:
        raise EvaluationError(
            f"fold {fold_index} (test subject {test_subject}): {exc}"
        ) from exc
    if len(predictions) != len(test.bouts):
        raise EvaluationError(
            f"fold {fold_index}: runner returned {len(predictions)} predictions "
            f"for {len(test.bouts)} test bouts"
        )
    aggregation = config.regression.aggregation
    outcomes = []
    for bout, (predicted_class, predicted_met) in zip(test.bouts, predictions):
        window_count = bout.sample_count // config.window_length
        actual_met = None
        if bout.targets is not None:
            actual = np.asarray(bout.targets, dtype=float)[:window_count]
            actual_met = regress.aggregate(actual, aggregation)
        outcomes.append(
            BoutOutcome(
                fold_index=fold_index,
                bout_id=bout.bout_id,
                subject_id=bout.subject_id,
                actual_class=bout.activity_class,
                predicted_class=predicted_class,
                window_count=window_count,
                actual_met=actual_met,
                predicted_met=predicted_met,
            )
        )
    summary = FoldSummary(
        fold_index=fold_index,
        test_subject=test_subject,
        train_fingerprint=_train_fingerprint(train.bouts),
        test_bout_ids=tuple(b.bout_id for b in test.bouts),
    )
    return summary, outcomes


def run_loso(corpus: Corpus, method: str, config: PipelineConfig,
             runner: FoldRunner | None = None) -> EvaluationReport:
    """Evaluate one method across all LOSO folds of the corpus.

    ``runner`` overrides the registry entry for ``method``; tests use this to
    inject oracle stubs.
    """
    if runner is None:
        if method not in METHOD_RUNNERS:
            raise EvaluationError(
                f"unknown method {method!r}; expected one of "
                f"{', '.join(sorted(METHOD_RUNNERS))}"
            )
        runner = METHOD_RUNNERS[method]
    try:
        folds = loso_folds(corpus)
    except ValueError as exc:
        raise EvaluationError(str(exc)) from None
    seeds = derive_stage_seeds(config, len(folds))
    labels = corpus.label_set
    fingerprint = config.fingerprint({"corpus": corpus_fingerprint(corpus)})

    def job(i: int) -> tuple[FoldSummary, list[BoutOutcome]]:
        train, test = folds[i]
        return _run_fold(runner, i, train, test, config, seeds[i], labels)

    if config.evaluation.parallel_folds > 1:
        with ThreadPoolExecutor(max_workers=config.evaluation.parallel_folds) as pool:
            fold_results = list(pool.map(job, range(len(folds))))
    else:
        fold_results = [job(i) for i in range(len(folds))]

    fold_results.sort(key=lambda item: item[0].fold_index)
    summaries = tuple(summary for summary, _ in fold_results)
    outcomes = tuple(o for _, fold_outcomes in fold_results for o in fold_outcomes)
    return _build_report(method, labels, summaries, outcomes, fingerprint)


def _build_report(method: str, labels: tuple[str, ...],
                  summaries: tuple[FoldSummary, ...],
                  outcomes: tuple[BoutOutcome, ...],
                  fingerprint: str) -> EvaluationReport:
    index = {label: i for i, label in enumerate(labels)}
    size = len(labels)
    confusion = np.zeros((size, size), dtype=int)
    confusion_windows = np.zeros((size, size), dtype=int)
    for outcome in outcomes:
        row = index[outcome.actual_class]
        col = index[outcome.predicted_class]
        confusion[row, col] += 1
        confusion_windows[row, col] += outcome.window_count

    def recall_of(matrix: np.ndarray) -> np.ndarray:
        row_sums = matrix.sum(axis=1)
        out = np.zeros(size)
        present = row_sums > 0
        out[present] = np.diag(matrix)[present] / row_sums[present]
        return out

    rmse_per_class = np.full(size, np.nan)
    pooled_pred: list[float] = []
    pooled_actual: list[float] = []
    for label, i in index.items():
        pairs = [
            (o.predicted_met, o.actual_met)
            for o in outcomes
            if o.actual_class == label
            and o.actual_met is not None
            and o.predicted_met is not None
        ]
        if pairs:
            predicted, actual = map(np.array, zip(*pairs))
            rmse_per_class[i] = rmse(predicted, actual)
            pooled_pred.extend(predicted)
            pooled_actual.extend(actual)
    rmse_overall = (
        rmse(np.array(pooled_pred), np.array(pooled_actual)) if pooled_pred else None
    )
    return EvaluationReport(
        method=method,
        labels=labels,
        confusion=confusion,
        recall_per_class=recall_of(confusion),
        confusion_windows=confusion_windows,
        recall_windows=recall_of(confusion_windows),
        rmse_per_class=rmse_per_class,
        rmse_overall=rmse_overall,
        fold_count=len(summaries),
        config_fingerprint=fingerprint,
        folds=summaries,
        outcomes=outcomes,
    )


def compare_methods(corpus: Corpus, methods: Sequence[str],
                    config: PipelineConfig) -> dict:
    """Run every method on identical folds and seeds; side-by-side payload."""
    reports = {method: run_loso(corpus, method, config) for method in methods}
    return {
        "config": config.semantic_dict(),
        "config_fingerprint": config.fingerprint(
            {"corpus": corpus_fingerprint(corpus)}
        ),
        "corpus_fingerprint": corpus_fingerprint(corpus),
        "labels": list(corpus.label_set),
        "methods": {m: report_to_dict(r) for m, r in reports.items()},
        "reference_panel": reference_panel(),
    }


def compare_regression_modes(corpus: Corpus, config: PipelineConfig) -> dict:
    """Window-level RMSE of augmented vs window-only per-class regression.

    Uses true-class routing and raw (unclamped) per-window predictions so the
    train-side comparison is exactly the least-squares residual contest: the
    augmented design contains the window-only design's columns, so its
    training RMSE cannot be larger.
    """
    try:
        folds = loso_folds(corpus)
    except ValueError as exc:
        raise EvaluationError(str(exc)) from None
    seeds = derive_stage_seeds(config, len(folds))
    labels = corpus.label_set
    pooled: dict[str, list[np.ndarray]] = {
        "train_augmented": [], "train_window_only": [],
        "test_augmented": [], "test_window_only": [],
        "train_actual": [], "test_actual": [],
    }
    for i, (train, test) in enumerate(folds):
        train_feats = featurize_corpus(train, config.window_length)
        test_feats = featurize_corpus(test, config.window_length)
        mixture = fit_mixture(stack_features(train_feats),
                              config.gmm.fit_settings(), seed=seeds[i].mixture)
        train_sums = summarize_corpus(mixture, train_feats)
        test_sums = summarize_corpus(mixture, test_feats)
        suites = {
            "augmented": regress.fit_regression_suite(train_feats, train_sums, labels),
            "window_only": regress.fit_regression_suite(train_feats, None, labels),
        }
        for split, feats, sums in (
            ("train", train_feats, train_sums),
            ("test", test_feats, test_sums),
        ):
            ratio_by_bout = {s.bout_id: s.ratios for s in sums}
            for feat in feats:
                if feat.targets is None:
                    continue
                pooled[f"{split}_actual"].append(np.asarray(feat.targets, dtype=float))
                for mode, suite in suites.items():
                    pooled[f"{split}_{mode}"].append(
                        regress.predict_windows(
                            suite, feat.activity_class, feat.matrix,
                            ratio_by_bout[feat.bout_id],
                        )
                    )
    result = {}
    for split in ("train", "test"):
        actual = np.concatenate(pooled[f"{split}_actual"])
        for mode in ("augmented", "window_only"):
            predicted = np.concatenate(pooled[f"{split}_{mode}"])
            result[f"{split}_rmse_{mode}"] = rmse(predicted, actual)
    return result


# --------------------------------------------------------------------------
# Report serialization
# --------------------------------------------------------------------------


def _jsonify(value):
    if isinstance(value, np.ndarray):
        return [_jsonify(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return None if np.isnan(value) else value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, dict):
        return {k: _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    return value


def report_to_dict(report: EvaluationReport) -> dict:
    return _jsonify(
        {
            "method": report.method,
            "labels": list(report.labels),
            "confusion": report.confusion,
            "recall_per_class": report.recall_per_class,
            "overall_recall": report.overall_recall,
            "confusion_windows": report.confusion_windows,
            "recall_windows": report.recall_windows,
            "rmse_per_class": report.rmse_per_class,
            "rmse_overall": report.rmse_overall,
            "fold_count": report.fold_count,
            "config_fingerprint": report.config_fingerprint,
            "folds": [
                {
                    "fold_index": f.fold_index,
                    "test_subject": f.test_subject,
                    "train_fingerprint": f.train_fingerprint,
                    "test_bout_ids": list(f.test_bout_ids),
                }
                for f in report.folds
            ],
            "outcomes": [
                {
                    "fold_index": o.fold_index,
                    "bout_id": o.bout_id,
                    "subject_id": o.subject_id,
                    "actual_class": o.actual_class,
                    "predicted_class": o.predicted_class,
                    "window_count": o.window_count,
                    "actual_met": o.actual_met,
                    "predicted_met": o.predicted_met,
                }
                for o in report.outcomes
            ],
        }
    )


def write_report_files(comparison: dict, out_dir: str | Path) -> list[Path]:
    """Write report.json plus per-method confusion and RMSE CSV tables."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    report_path = out / "report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(_jsonify(comparison), fh, indent=2, sort_keys=True,
                  allow_nan=False)
        fh.write("\n")
    written.append(report_path)
    labels = comparison["labels"]
    for method, payload in comparison["methods"].items():
        confusion_path = out / f"confusion_{method}.csv"
        with open(confusion_path, "w", encoding="utf-8") as fh:
            fh.write("actual," + ",".join(labels) + ",recall\n")
            for i, label in enumerate(labels):
                row = payload["confusion"][i]
                recall = payload["recall_per_class"][i]
                fh.write(
                    f"{label},"
                    + ",".join(str(int(v)) for v in row)
                    + f",{recall!r}\n"
                )
        written.append(confusion_path)
        rmse_path = out / f"rmse_{method}.csv"
        with open(rmse_path, "w", encoding="utf-8") as fh:
            fh.write("class,rmse_met\n")
            for i, label in enumerate(labels):
                value = payload["rmse_per_class"][i]
                fh.write(f"{label},{'' if value is None else repr(value)}\n")
            overall = payload["rmse_overall"]
            fh.write(f"overall,{'' if overall is None else repr(overall)}\n")
        written.append(rmse_path)
    return written

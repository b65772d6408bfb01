"""Window segmentation and per-window feature extraction.

Each bout is cut into disjoint windows of ``window_length`` consecutive
samples (default 12, i.e. 12 seconds at 1 Hz); a trailing partial window is
dropped.  Every window yields six statistics per axis:

* five order statistics approximating the 10th, 25th, 50th, 75th and 90th
  percentiles, taken as sorted-sample ranks so no interpolation is involved;
* the lag-1 autocorrelation of the window's samples.

Features are laid out axis-major: all six statistics for axis 1, then axis 2,
and so on, giving ``6 * A`` columns (18 for a triaxial device).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Bout, Corpus, DEFAULT_WINDOW_LENGTH

PERCENTILE_FRACTIONS = (0.10, 0.25, 0.50, 0.75, 0.90)
STAT_NAMES = ("p10", "p25", "p50", "p75", "p90", "ac1")
FEATURES_PER_AXIS = len(STAT_NAMES)


@dataclass(frozen=True)
class WindowFeatures:
    """Per-window feature matrix for one bout, with provenance columns.

    ``matrix`` has shape (n_windows, 6 * A).  ``targets`` is aligned with the
    rows when the bout carries MET values, else None.
    """

    bout_id: str
    subject_id: str
    activity_class: str
    matrix: np.ndarray
    targets: np.ndarray | None = None

    def __post_init__(self):
        if self.matrix.ndim != 2:
            raise ValueError("feature matrix must be 2-d")
        if self.targets is not None and len(self.targets) != len(self.matrix):
            raise ValueError(
                f"bout {self.bout_id!r}: {len(self.matrix)} windows but "
                f"{len(self.targets)} targets"
            )

    @property
    def window_count(self) -> int:
        return self.matrix.shape[0]


def segment(signal: np.ndarray, window_length: int) -> np.ndarray:
    """Split (T, A) into (n, window_length, A) disjoint windows, dropping the tail."""
    if window_length < 2:
        raise ValueError(f"window length must be >= 2, got {window_length}")
    signal = np.asarray(signal, dtype=float)
    n = signal.shape[0] // window_length
    if n == 0:
        raise ValueError(
            f"bout shorter than one window ({signal.shape[0]} < {window_length} samples)"
        )
    return signal[: n * window_length].reshape(n, window_length, signal.shape[1])


def percentile_rank(fraction: float, n: int) -> int:
    """0-based sorted index of the nearest-rank percentile: ceil(q*n), clamped.

    For n=12 this selects 1-based ranks 2, 3, 6, 9 and 11 for the five
    fractions used here.
    """
    if not 0 < fraction < 1:
        raise ValueError(f"percentile fraction must be in (0, 1), got {fraction}")
    rank = math.ceil(fraction * n)
    return min(max(rank, 1), n) - 1


def percentile_points(values: np.ndarray,
                      fractions: Sequence[float] = PERCENTILE_FRACTIONS) -> np.ndarray:
    """Nearest-rank order statistics of a 1-d sample, one per fraction."""
    values = np.sort(np.asarray(values, dtype=float))
    ranks = [percentile_rank(q, len(values)) for q in fractions]
    return values[ranks]


def lag1_autocorrelation(values: np.ndarray) -> float:
    """Lag-1 autocorrelation with the full-sample variance in the denominator.

    Returns 0.0 for constant windows, where the ratio is undefined.
    """
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n < 2:
        return 0.0
    centered = values - values.mean()
    denom = float(centered @ centered)
    if denom == 0.0:
        return 0.0
    return float(centered[1:] @ centered[:-1]) / denom


def window_features(window: np.ndarray) -> np.ndarray:
    """Feature vector of one (window_length, A) block, axis-major layout."""
    parts = []
    for a in range(window.shape[1]):
        axis = window[:, a]
        parts.append(percentile_points(axis))
        parts.append([lag1_autocorrelation(axis)])
    return np.concatenate(parts)


def featurize_bout(bout: Bout,
                   window_length: int = DEFAULT_WINDOW_LENGTH) -> WindowFeatures:
    windows = segment(bout.signal, window_length)
    matrix = np.array([window_features(w) for w in windows])
    targets = bout.targets
    if targets is not None:
        if len(targets) < len(matrix):
            raise ValueError(
                f"bout {bout.bout_id!r}: {len(matrix)} windows but only "
                f"{len(targets)} targets"
            )
        targets = np.asarray(targets, dtype=float)[: len(matrix)]
    return WindowFeatures(
        bout_id=bout.bout_id,
        subject_id=bout.subject_id,
        activity_class=bout.activity_class,
        matrix=matrix,
        targets=targets,
    )


def featurize_corpus(corpus: Corpus,
                     window_length: int = DEFAULT_WINDOW_LENGTH) -> list[WindowFeatures]:
    return [featurize_bout(b, window_length) for b in corpus.bouts]


def feature_names(axis_count: int) -> list[str]:
    return [f"axis{a + 1}_{stat}" for a in range(axis_count) for stat in STAT_NAMES]


def stack_features(features: Sequence[WindowFeatures]) -> np.ndarray:
    """All windows of all bouts as one (N, 6*A) matrix, bout order preserved."""
    if not features:
        raise ValueError("no window features to stack")
    return np.vstack([f.matrix for f in features])


def write_features_csv(features: Sequence[WindowFeatures], path: str | Path,
                       axis_count: int) -> None:
    """Tabular export: one row per window with bout provenance and target."""
    names = feature_names(axis_count)
    with open(Path(path), "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bout_id", "subject_id", "label", "window"] + names + ["met"])
        for feat in features:
            for w in range(feat.window_count):
                met = "" if feat.targets is None else repr(float(feat.targets[w]))
                writer.writerow(
                    [feat.bout_id, feat.subject_id, feat.activity_class, str(w)]
                    + [repr(float(v)) for v in feat.matrix[w]]
                    + [met]
                )

"""Fixed-length bout summaries from per-window cluster assignments.

A fitted mixture turns each window's feature vector into a component index;
a bout's summary is the histogram of those indices normalized to fractions.
Bouts of any duration therefore map to vectors of one shared length K (the
mixture's component count), suitable as classifier input.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import WindowFeatures
from .vbgmm import MixtureModel, assign


@dataclass(frozen=True)
class SummaryVector:
    """Cluster-membership fractions for one bout.

    ``ratios`` has length K, entries in [0, 1] summing to 1; entry k is the
    fraction of the bout's windows assigned to mixture component k.
    """

    bout_id: str
    subject_id: str
    activity_class: str
    ratios: np.ndarray
    window_count: int

    def __post_init__(self):
        ratios = np.asarray(self.ratios, dtype=float)
        if ratios.ndim != 1:
            raise ValueError("summary ratios must be 1-d")
        if np.any(ratios < 0) or abs(ratios.sum() - 1.0) > 1e-9:
            raise ValueError(
                f"bout {self.bout_id!r}: ratios must be nonnegative and sum to 1"
            )
        if self.window_count < 1:
            raise ValueError(f"bout {self.bout_id!r}: summary needs >= 1 window")
        object.__setattr__(self, "ratios", ratios)


def summarize_bout(model: MixtureModel, features: WindowFeatures) -> SummaryVector:
    labels = assign(model, features.matrix)
    counts = np.bincount(labels, minlength=model.component_count).astype(float)
    return SummaryVector(
        bout_id=features.bout_id,
        subject_id=features.subject_id,
        activity_class=features.activity_class,
        ratios=counts / counts.sum(),
        window_count=features.window_count,
    )


def summarize_corpus(model: MixtureModel,
                     features: Sequence[WindowFeatures]) -> list[SummaryVector]:
    return [summarize_bout(model, f) for f in features]


def summary_matrix(summaries: Sequence[SummaryVector]) -> np.ndarray:
    """(B, K) matrix of ratio vectors in bout order."""
    if not summaries:
        raise ValueError("no summaries to stack")
    return np.vstack([s.ratios for s in summaries])


def write_summaries_csv(summaries: Sequence[SummaryVector], path: str | Path) -> None:
    if not summaries:
        raise ValueError("no summaries to write")
    k = len(summaries[0].ratios)
    with open(Path(path), "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bout_id", "subject_id", "label", "windows"]
                        + [f"cluster{j}" for j in range(k)])
        for s in summaries:
            writer.writerow([s.bout_id, s.subject_id, s.activity_class,
                             str(s.window_count)]
                            + [repr(float(v)) for v in s.ratios])

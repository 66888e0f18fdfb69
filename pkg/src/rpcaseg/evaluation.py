"""Segmentation scoring: confusion counts, f-measure, dataset reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatchError, NoGroundTruthError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class FrameScore:
    frame_id: str
    precision: float
    recall: float
    f_measure: float


@dataclass
class EvalReport:
    """Per-frame scores plus their unweighted mean.

    ``frames_without_gt`` lists frames that were skipped for lack of ground
    truth; ``config_echo`` carries the full pipeline configuration so every
    number in the report can be reproduced.
    """

    per_frame: list[FrameScore]
    average_f_measure: float
    config_echo: dict = field(default_factory=dict)
    frames_without_gt: list[str] = field(default_factory=list)


def confusion(pred: np.ndarray, gt: np.ndarray) -> ConfusionMatrix:
    """Pixel counts comparing a predicted mask against ground truth."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise DimensionMismatchError(
            f"mask shapes differ: {pred.shape} vs {gt.shape}"
        )
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    tn = pred.size - tp - fp - fn
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def precision_recall(cm: ConfusionMatrix) -> tuple[float, float]:
    """Precision and recall; an all-negative frame predicted empty scores 1.

    Other zero-denominator cases score 0.
    """
    if cm.tp == 0 and cm.fp == 0 and cm.fn == 0:
        return 1.0, 1.0
    p = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0
    r = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0
    return p, r


def f_measure(cm: ConfusionMatrix) -> float:
    """Harmonic mean of precision and recall.

    Zero when tp is 0, except the perfect-negative frame (no foreground in
    either mask) which scores 1.
    """
    if cm.tp == 0:
        return 1.0 if cm.fp == 0 and cm.fn == 0 else 0.0
    p, r = precision_recall(cm)
    return 2.0 * p * r / (p + r)


def score_frame(pred: np.ndarray, gt: np.ndarray, frame_id: str) -> FrameScore:
    cm = confusion(pred, gt)
    p, r = precision_recall(cm)
    return FrameScore(frame_id=frame_id, precision=p, recall=r, f_measure=f_measure(cm))


def report(
    frames: Sequence[tuple[np.ndarray, Optional[np.ndarray], str]],
    config: Optional[dict] = None,
) -> EvalReport:
    """Score every (pred, gt, id) triple and average the f-measures.

    Frames whose ground truth is None are excluded from the average and
    listed. Raises :class:`NoGroundTruthError` when nothing can be scored.
    """
    scored = []
    skipped = []
    for pred, gt, frame_id in frames:
        if gt is None:
            skipped.append(frame_id)
        else:
            scored.append(score_frame(pred, gt, frame_id))
    if not scored:
        raise NoGroundTruthError("no frame has a ground-truth mask")
    avg = sum(s.f_measure for s in scored) / len(scored)
    return EvalReport(
        per_frame=scored,
        average_f_measure=avg,
        config_echo=dict(config or {}),
        frames_without_gt=skipped,
    )


# Stated in every report so the degenerate-frame handling is reproducible.
SCORING_CONVENTION = (
    "f=1 when both masks are empty; f=0 for any other frame with no true"
    " positives; average is the unweighted mean over frames with ground truth"
)


def report_as_dict(rep: EvalReport) -> dict:
    """JSON-ready view of a report."""
    return {
        "config": rep.config_echo,
        "scoring_convention": SCORING_CONVENTION,
        "frames": [
            {
                "id": s.frame_id,
                "precision": s.precision,
                "recall": s.recall,
                "f_measure": s.f_measure,
            }
            for s in rep.per_frame
        ],
        "frames_without_gt": list(rep.frames_without_gt),
        "average_f_measure": rep.average_f_measure,
    }


def report_csv_rows(rep: EvalReport) -> list[list]:
    """CSV rows (with header) mirroring :func:`report_as_dict`."""
    rows: list[list] = [["frame_id", "precision", "recall", "f_measure"]]
    for s in rep.per_frame:
        rows.append([s.frame_id, s.precision, s.recall, s.f_measure])
    rows.append(["average", "", "", rep.average_f_measure])
    return rows

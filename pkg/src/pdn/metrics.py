"""Pixel accuracy and mean IoU from a confusion matrix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .network import IGNORE_LABEL, check_labels


@dataclass
class EvalReport:
    pixel_accuracy: float
    per_class_iou: np.ndarray  # NaN for classes with zero union
    mean_iou: float
    confusion: np.ndarray  # rows: ground truth, cols: prediction

    def format(self, prefix: str = "") -> str:
        ious = ",".join("nan" if np.isnan(v) else f"{v:.6f}" for v in self.per_class_iou)
        return (f"{prefix}pixel_accuracy={self.pixel_accuracy:.6f} "
                f"mean_iou={self.mean_iou:.6f} per_class_iou={ious}")


def confusion_matrix(pred, gt, K: int) -> np.ndarray:
    pred = np.asarray(pred)
    gt = check_labels(gt, K)
    if pred.shape != gt.shape:
        raise DataError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
    valid = gt != IGNORE_LABEL
    check_labels(np.where(valid, pred, IGNORE_LABEL), K)
    idx = gt[valid].astype(np.int64) * K + pred[valid].astype(np.int64)
    return np.bincount(idx, minlength=K * K).reshape(K, K)


def report_from_confusion(conf: np.ndarray) -> EvalReport:
    total = conf.sum()
    if total == 0:
        raise DataError("every pixel is ignored; metrics are undefined")
    tp = np.diag(conf).astype(float)
    union = conf.sum(axis=0) + conf.sum(axis=1) - tp
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0, tp / union, np.nan)
    return EvalReport(float(tp.sum() / total), iou, float(np.nanmean(iou)), conf)


def evaluate(pred_labels, gt_labels, K: int) -> EvalReport:
    """Metrics over non-ignored pixels; zero-union classes are left out of the mean.

    Accepts one label map or a list of them (confusion counts are pooled).
    """
    if isinstance(pred_labels, (list, tuple)):
        conf = sum(confusion_matrix(p, g, K) for p, g in zip(pred_labels, gt_labels))
        if not isinstance(conf, np.ndarray):
            raise DataError("no label maps to evaluate")
    else:
        conf = confusion_matrix(pred_labels, gt_labels, K)
    return report_from_confusion(conf)

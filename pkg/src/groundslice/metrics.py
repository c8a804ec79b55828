"""Segmentation evaluation: confusion counts, IoU/F1, sequence aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EvalStats:
    """Binary confusion counts with ground as the positive class."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def empty_ground(self) -> bool:
        """True when neither prediction nor truth contains any ground."""
        return self.tp + self.fp + self.fn == 0


@dataclass(frozen=True)
class AggregateStats:
    """Per-frame metric values with their mean and sample std deviation."""

    values: tuple[float, ...]
    mean: float
    std: float


def confusion(pred: np.ndarray, truth: np.ndarray) -> EvalStats:
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        raise ValueError(f"mask length mismatch: {pred.shape} vs {truth.shape}")
    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    tn = int(np.count_nonzero(~pred & ~truth))
    return EvalStats(tp=tp, fp=fp, fn=fn, tn=tn)


def iou(stats: EvalStats) -> float:
    """Jaccard index tp/(tp+fp+fn); 1.0 for empty-ground frames."""
    denom = stats.tp + stats.fp + stats.fn
    if denom == 0:
        return 1.0
    return stats.tp / denom


def f1(stats: EvalStats) -> float:
    """2tp/(2tp+fp+fn); 1.0 for empty-ground frames."""
    denom = 2 * stats.tp + stats.fp + stats.fn
    if denom == 0:
        return 1.0
    return 2 * stats.tp / denom


def aggregate(values) -> AggregateStats:
    """Arithmetic mean and sample (n-1) standard deviation; std 0 for n=1."""
    values = tuple(float(v) for v in values)
    if not values:
        raise ValueError("cannot aggregate an empty list")
    if min(values) == max(values):  # constant list: exactly zero spread
        return AggregateStats(values=values, mean=values[0], std=0.0)
    mean = math.fsum(values) / len(values)
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1))
    return AggregateStats(values=values, mean=mean, std=std)


def write_frame_csv(rows, path) -> None:
    """Per-frame results: method,slices,frame,iou,f1."""
    with open(path, "w") as fh:
        fh.write("method,slices,frame,iou,f1\n")
        for method, slices, frame, iou_v, f1_v in rows:
            fh.write(f"{method},{slices},{frame},{iou_v:.6f},{f1_v:.6f}\n")


def write_summary_csv(rows, path) -> None:
    """Per-configuration summary: method,slices,mean_iou,std_iou,mean_f1,std_f1."""
    with open(path, "w") as fh:
        fh.write("method,slices,mean_iou,std_iou,mean_f1,std_f1\n")
        for method, slices, agg_iou, agg_f1 in rows:
            fh.write(
                f"{method},{slices},{agg_iou.mean:.6f},{agg_iou.std:.6f},"
                f"{agg_f1.mean:.6f},{agg_f1.std:.6f}\n"
            )

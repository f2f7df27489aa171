"""Axis-aligned boxes, IoU, and RoI labeling against ground truth."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BACKGROUND = -1  # label for RoIs that match no ground-truth box

# minimum overlap for an RoI to inherit a ground-truth category
ROI_LABEL_IOU = 0.7


@dataclass(frozen=True)
class BBox:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate box {(self.x0, self.y0, self.x1, self.y1)}")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def as_array(self) -> np.ndarray:
        return np.array([self.x0, self.y0, self.x1, self.y1], dtype=np.float64)

    @staticmethod
    def from_array(a) -> "BBox":
        return BBox(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass(frozen=True)
class Annotation:
    box: BBox
    category: int


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between (N,4) and (M,4) corner-format boxes."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def label_rois(rois, annotations) -> list[int]:
    """Category of the best-overlapping ground truth if IoU >= 0.7, else BACKGROUND.

    Ties on the maximal IoU go to the lowest ground-truth index.
    """
    if not rois:
        return []
    if not annotations:
        return [BACKGROUND] * len(rois)
    roi_arr = np.stack([r.as_array() for r in rois])
    gt_arr = np.stack([a.box.as_array() for a in annotations])
    m = iou_matrix(roi_arr, gt_arr)
    best = m.argmax(axis=1)  # first occurrence wins ties
    labels = []
    for i, j in enumerate(best):
        labels.append(annotations[j].category if m[i, j] >= ROI_LABEL_IOU else BACKGROUND)
    return labels

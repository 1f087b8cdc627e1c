"""Region and boundary segmentation metrics: DSC and NSD.

Masks are 2D boolean arrays.  Boundary extraction uses 4-connectivity
with the image border counting as outside; all distances are Euclidean
distances between pixel centers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptySource


@dataclass(frozen=True)
class MetricReport:
    dsc: float
    nsd: float
    tau: float


def _check_same_shape(g: np.ndarray, s: np.ndarray):
    if g.shape != s.shape:
        raise DimensionMismatch(f"mask shapes differ: {g.shape} vs {s.shape}")


def dsc(g: np.ndarray, s: np.ndarray) -> float:
    """Dice similarity 2|G∩S| / (|G|+|S|); 1.0 when both masks are empty."""
    g = np.asarray(g, dtype=bool)
    s = np.asarray(s, dtype=bool)
    _check_same_shape(g, s)
    total = int(g.sum()) + int(s.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((g & s).sum()) / total


def boundary(mask: np.ndarray) -> np.ndarray:
    """True pixels with at least one false 4-neighbor (off-grid counts as false)."""
    mask = np.asarray(mask, dtype=bool)
    padded = np.zeros((mask.shape[0] + 2, mask.shape[1] + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask
    interior = (padded[:-2, 1:-1] & padded[2:, 1:-1]
                & padded[1:-1, :-2] & padded[1:-1, 2:])
    return mask & ~interior


def distance_transform(source: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance from every pixel center to the nearest source pixel.

    Two-pass algorithm over squared distances: a per-row scan to the
    nearest in-row source column, then a per-column minimization over
    row offsets.  All intermediate squared distances are exact integers
    in float64, so the result matches brute force bit for bit.
    """
    source = np.asarray(source, dtype=bool)
    if not source.any():
        raise EmptySource("distance transform needs at least one source pixel")
    h, w = source.shape
    big = float(2 * (h * h + w * w) + 1)

    cols = np.arange(w, dtype=np.float64)
    # Nearest source column to the left / right within each row.
    left = np.where(source, cols, -np.inf)
    left = np.maximum.accumulate(left, axis=1)
    right = np.where(source, cols, np.inf)
    right = np.minimum.accumulate(right[:, ::-1], axis=1)[:, ::-1]
    d_left = np.where(np.isfinite(left), (cols - left) ** 2, big)
    d_right = np.where(np.isfinite(right), (right - cols) ** 2, big)
    row_sq = np.minimum(d_left, d_right)  # (h, w); big where the row has no source

    row_offsets = np.arange(h, dtype=np.float64)
    dr2 = (row_offsets[:, None] - row_offsets[None, :]) ** 2  # (h, h)
    sq = (dr2[:, :, None] + row_sq[None, :, :]).min(axis=1)   # (h, w)
    return np.sqrt(sq)


def nsd(g: np.ndarray, s: np.ndarray, tau: float) -> float:
    """Normalized surface distance at tolerance tau.

    Fraction of each mask's boundary lying within Euclidean distance tau
    of the other mask's boundary.  Both boundaries empty -> 1.0; exactly
    one empty -> 0.0.
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    g = np.asarray(g, dtype=bool)
    s = np.asarray(s, dtype=bool)
    _check_same_shape(g, s)
    bg = boundary(g)
    bs = boundary(s)
    n_bg = int(bg.sum())
    n_bs = int(bs.sum())
    if n_bg == 0 and n_bs == 0:
        return 1.0
    if n_bg == 0 or n_bs == 0:
        return 0.0
    dist_to_s = distance_transform(bs)
    dist_to_g = distance_transform(bg)
    hits = int((bg & (dist_to_s <= tau)).sum()) + int((bs & (dist_to_g <= tau)).sum())
    return hits / (n_bg + n_bs)


def metric_report(g: np.ndarray, s: np.ndarray, tau: float = 2.0) -> MetricReport:
    """DSC and NSD of a prediction against ground truth."""
    return MetricReport(dsc=dsc(g, s), nsd=nsd(g, s, tau), tau=tau)

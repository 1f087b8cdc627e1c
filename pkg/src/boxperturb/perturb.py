"""Bounding-box adaptive perturbation engine.

The shrink/expand magnitudes are fixed per run; the randomness lives in
four independent uniform coordinate draws.  Subscript-1 offsets apply to
the x axis and subscript-2 offsets to the y axis (divided by the aspect
ratio xi), so perturbation is proportional to each side length and the
box geometry is preserved in expectation.  Each edge's uniform interval
runs from "moved outward by the expand magnitude" to "moved inward by
the shrink magnitude".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BoundingBox, Coefficients


@dataclass(frozen=True)
class PerturbationConfig:
    """Per-run perturbation magnitudes and their clamps, in pixels.

    eps_shrink is negative by convention (inward), delta_expand positive
    (outward).  Values outside [eps_shrink_min, 0] / [0, delta_expand_max]
    are silently clamped when offsets are computed.
    """

    eps_shrink: float = -20.0
    delta_expand: float = 20.0
    eps_shrink_min: float = -20.0
    delta_expand_max: float = 20.0
    theta_floor: float = 0.01
    min_box_size: float = 1.0
    max_resample: int = 10

    def __post_init__(self):
        if self.eps_shrink > 0 or self.delta_expand < 0:
            raise ValueError("eps_shrink must be <= 0 and delta_expand >= 0")
        if self.eps_shrink_min > 0 or self.delta_expand_max < 0:
            raise ValueError("clamps must satisfy eps_shrink_min <= 0 <= delta_expand_max")
        if self.min_box_size <= 0:
            raise ValueError("min_box_size must be positive")
        if self.max_resample < 0:
            raise ValueError("max_resample must be >= 0")


@dataclass(frozen=True)
class OffsetQuad:
    """The four perturbation offsets: eps along x/y (<= 0), delta along x/y (>= 0)."""

    eps1: float
    eps2: float
    delta1: float
    delta2: float


@dataclass(frozen=True)
class PerturbedBox:
    """A sampled box plus the draws and offsets that produced it."""

    box: BoundingBox
    offsets: OffsetQuad
    draws: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    resample_count: int = 0


def compute_offsets(config: PerturbationConfig, coeffs: Coefficients) -> OffsetQuad:
    """Scale the clamped shrink/expand magnitudes by theta_omega and xi."""
    eps = max(config.eps_shrink, config.eps_shrink_min)
    delta = min(config.delta_expand, config.delta_expand_max)
    eps1 = eps * coeffs.theta_omega
    delta1 = delta * coeffs.theta_omega
    return OffsetQuad(eps1=eps1, eps2=eps1 / coeffs.xi,
                      delta1=delta1, delta2=delta1 / coeffs.xi)


def _draw_edge(rng: np.random.Generator, lo: float, hi: float) -> float:
    if hi <= lo:
        return lo
    return float(rng.uniform(lo, hi))


def sample_perturbed_box(box: BoundingBox, offsets: OffsetQuad,
                         image_w: int, image_h: int,
                         config: PerturbationConfig,
                         rng: np.random.Generator) -> PerturbedBox:
    """Draw one perturbed box.

    Each edge moves within [outward by delta-magnitude, inward by
    eps-magnitude]; the result is clamped to the image.  Draws whose
    width or height falls below min_box_size are resampled up to
    max_resample times, then repaired to a centered box around the
    original center.
    """
    e_x, d_x = abs(offsets.eps1), offsets.delta1
    e_y, d_y = abs(offsets.eps2), offsets.delta2

    draws = (0.0, 0.0, 0.0, 0.0)
    for attempt in range(config.max_resample + 1):
        x_min = _draw_edge(rng, box.x_min - d_x, box.x_min + e_x)
        x_max = _draw_edge(rng, box.x_max - e_x, box.x_max + d_x)
        y_min = _draw_edge(rng, box.y_min - d_y, box.y_min + e_y)
        y_max = _draw_edge(rng, box.y_max - e_y, box.y_max + d_y)
        draws = (x_min, x_max, y_min, y_max)
        x_min_c = min(max(x_min, 0.0), float(image_w))
        x_max_c = min(max(x_max, 0.0), float(image_w))
        y_min_c = min(max(y_min, 0.0), float(image_h))
        y_max_c = min(max(y_max, 0.0), float(image_h))
        if (x_max_c - x_min_c >= config.min_box_size
                and y_max_c - y_min_c >= config.min_box_size):
            return PerturbedBox(box=BoundingBox(x_min_c, y_min_c, x_max_c, y_max_c),
                                offsets=offsets, draws=draws, resample_count=attempt)

    # All draws degenerate: fall back to a centered box around the original center.
    cx, cy = box.center
    w = min(max(config.min_box_size, box.width - 2.0 * e_x), float(image_w))
    h = min(max(config.min_box_size, box.height - 2.0 * e_y), float(image_h))
    x_min = min(max(cx - 0.5 * w, 0.0), image_w - w)
    y_min = min(max(cy - 0.5 * h, 0.0), image_h - h)
    repaired = BoundingBox(x_min, y_min, x_min + w, y_min + h)
    return PerturbedBox(box=repaired, offsets=offsets, draws=draws,
                        resample_count=config.max_resample + 1)


def sample_baseline_box(box: BoundingBox, max_shift: float,
                        image_w: int, image_h: int,
                        rng: np.random.Generator) -> PerturbedBox:
    """Fixed-range expand-only perturbation: each edge moves outward by U(0, max_shift)."""
    if max_shift < 0:
        raise ValueError("max_shift must be >= 0")
    x_min = box.x_min - _draw_edge(rng, 0.0, max_shift)
    x_max = box.x_max + _draw_edge(rng, 0.0, max_shift)
    y_min = box.y_min - _draw_edge(rng, 0.0, max_shift)
    y_max = box.y_max + _draw_edge(rng, 0.0, max_shift)
    draws = (x_min, x_max, y_min, y_max)
    out = BoundingBox(max(x_min, 0.0), max(y_min, 0.0),
                      min(x_max, float(image_w)), min(y_max, float(image_h)))
    return PerturbedBox(box=out, offsets=OffsetQuad(0.0, 0.0, 0.0, 0.0),
                        draws=draws, resample_count=0)


@dataclass(frozen=True)
class PerturbationStats:
    """Empirical summary over n perturbation draws."""

    n: int
    mean_width: float
    mean_height: float
    mean_center: tuple[float, float]
    expand_dominant_fraction: float
    resample_rate: float


def perturbation_stats(box: BoundingBox, config: PerturbationConfig,
                       coeffs: Coefficients, n: int,
                       rng: np.random.Generator,
                       image_w: int | None = None,
                       image_h: int | None = None) -> PerturbationStats:
    """Monte-Carlo summary of the perturbation distribution for one box.

    Without an explicit image extent, a generous extent is used so that
    clamping never binds and the expectation algebra is visible.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if image_w is None:
        image_w = int(box.x_max + abs(config.eps_shrink_min) + config.delta_expand_max + 1)
    if image_h is None:
        image_h = int(box.y_max + abs(config.eps_shrink_min) + config.delta_expand_max + 1)
    offsets = compute_offsets(config, coeffs)
    widths = np.empty(n)
    heights = np.empty(n)
    centers = np.empty((n, 2))
    expand_dominant = 0
    resampled = 0
    for i in range(n):
        p = sample_perturbed_box(box, offsets, image_w, image_h, config, rng)
        widths[i] = p.box.width
        heights[i] = p.box.height
        centers[i] = p.box.center
        if p.box.area > box.area:
            expand_dominant += 1
        if p.resample_count > 0:
            resampled += 1
    return PerturbationStats(
        n=n,
        mean_width=float(widths.mean()),
        mean_height=float(heights.mean()),
        mean_center=(float(centers[:, 0].mean()), float(centers[:, 1].mean())),
        expand_dominant_fraction=expand_dominant / n,
        resample_rate=resampled / n)

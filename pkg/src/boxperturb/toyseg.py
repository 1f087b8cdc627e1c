"""Toy prompt-conditioned segmenter.

A per-pixel logistic model over six hand-built features of the image
and the prompt box.  It stands in for a full promptable segmentation
network so that perturbation strategies can be compared end to end at
desk scale: the model is trained with the BCE+Dice objective, an
AdamW-style update and a reduce-on-plateau schedule, one image per step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import loss as loss_mod
from .errors import BoxOutOfBounds, EmptyDataset, NonFiniteGradient
from .geometry import BoundingBox, box_from_mask, coefficients_for
from .perturb import (PerturbationConfig, compute_offsets, sample_baseline_box,
                      sample_perturbed_box)
from .rng import make_rng

FEATURE_NAMES = ("bias", "intensity", "inside_box", "edge_distance",
                 "center_offset_x", "center_offset_y")
N_FEATURES = len(FEATURE_NAMES)

PERTURBERS = ("none", "baseline", "adaptive", "adaptive-scaled-only",
              "bidirectional-only")

MODEL_SCHEMA_VERSION = 1


@dataclass
class ToyModel:
    """Logistic weights plus AdamW moment state."""

    weights: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    m: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    v: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    step: int = 0


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    lr: float = 0.01
    lam: float = 1e-4
    scheduler_factor: float = 0.5
    scheduler_patience: int = 3
    min_lr: float = 1e-6
    perturber: str = "adaptive"
    baseline_max_shift: float = 20.0
    seed: int = 0
    perturb: PerturbationConfig = field(default_factory=PerturbationConfig)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not (0.0 < self.scheduler_factor < 1.0):
            raise ValueError("scheduler_factor must be in (0, 1)")
        if self.scheduler_patience < 1:
            raise ValueError("scheduler_patience must be >= 1")
        if self.perturber not in PERTURBERS:
            raise ValueError(f"unknown perturber {self.perturber!r}")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def featurize(image: np.ndarray, box: BoundingBox) -> np.ndarray:
    """Per-pixel feature grid of shape (H, W, 6).

    Features: constant bias, normalized intensity, inside-box indicator,
    signed distance to the nearest box edge (normalized by half the
    shorter side, clamped to [-1, 1], positive inside), and the absolute
    offsets from the box center normalized by box width/height.
    """
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape
    if not box.within_image(w, h):
        raise BoxOutOfBounds(f"box exceeds image extent {w}x{h}")

    cx = np.arange(w, dtype=np.float64) + 0.5
    cy = np.arange(h, dtype=np.float64) + 0.5
    px, py = np.meshgrid(cx, cy)

    inside = ((px >= box.x_min) & (px <= box.x_max)
              & (py >= box.y_min) & (py <= box.y_max))

    # Signed distance to the box boundary: interior edge distance when
    # inside, minus the Euclidean distance to the box when outside.
    dx_out = np.maximum(np.maximum(box.x_min - px, px - box.x_max), 0.0)
    dy_out = np.maximum(np.maximum(box.y_min - py, py - box.y_max), 0.0)
    edge_in = np.minimum(np.minimum(px - box.x_min, box.x_max - px),
                         np.minimum(py - box.y_min, box.y_max - py))
    signed = np.where(inside, np.maximum(edge_in, 0.0), -np.hypot(dx_out, dy_out))
    half_short = 0.5 * min(box.width, box.height)
    signed = np.clip(signed / half_short, -1.0, 1.0)

    bcx, bcy = box.center
    feats = np.empty((h, w, N_FEATURES))
    feats[:, :, 0] = 1.0
    feats[:, :, 1] = image
    feats[:, :, 2] = inside.astype(np.float64)
    feats[:, :, 3] = signed
    feats[:, :, 4] = np.abs(px - bcx) / box.width
    feats[:, :, 5] = np.abs(py - bcy) / box.height
    return feats


def predict(model: ToyModel, image: np.ndarray, box: BoundingBox) -> np.ndarray:
    """Clipped per-pixel foreground probabilities."""
    feats = featurize(image, box)
    return loss_mod.clip_probabilities(_sigmoid(feats @ model.weights))


def weight_gradient(model: ToyModel, image: np.ndarray, mask: np.ndarray,
                    box: BoundingBox) -> tuple[np.ndarray, loss_mod.LossReport]:
    """Gradient of the combined loss w.r.t. the weights, plus the loss report."""
    feats = featurize(image, box)
    raw = _sigmoid(feats @ model.weights)
    p = loss_mod.clip_probabilities(raw)
    report = loss_mod.combined_loss(p, mask)
    grad_p = loss_mod.loss_gradient(p, np.asarray(mask, dtype=np.float64))
    # Chain rule through the logistic; clipped pixels contribute nothing.
    dp_dz = np.where((raw > loss_mod.CLIP_EPS) & (raw < 1.0 - loss_mod.CLIP_EPS),
                     raw * (1.0 - raw), 0.0)
    grad_w = np.einsum("hw,hwk->k", grad_p * dp_dz, feats)
    return grad_w, report


def train_step(model: ToyModel, image: np.ndarray, mask: np.ndarray,
               box: BoundingBox, lam: float, lr: float) -> loss_mod.LossReport:
    """One AdamW-style update (decoupled weight decay); returns the pre-update loss."""
    grad, report = weight_gradient(model, image, mask, box)
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradient("non-finite weight gradient; step aborted")
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    model.step += 1
    model.m = beta1 * model.m + (1.0 - beta1) * grad
    model.v = beta2 * model.v + (1.0 - beta2) * grad * grad
    m_hat = model.m / (1.0 - beta1 ** model.step)
    v_hat = model.v / (1.0 - beta2 ** model.step)
    model.weights = (model.weights
                     - lr * m_hat / (np.sqrt(v_hat) + eps)
                     - lr * lam * model.weights)
    return report


def perturb_prompt(box: BoundingBox, image_w: int, image_h: int,
                   cfg: TrainConfig, rng: np.random.Generator) -> BoundingBox:
    """Apply the configured train-time perturber to a ground-truth box."""
    if cfg.perturber == "none":
        return box
    if cfg.perturber == "baseline":
        return sample_baseline_box(box, cfg.baseline_max_shift,
                                   image_w, image_h, rng).box
    pcfg = cfg.perturb
    coeffs = coefficients_for(box, image_w, image_h, pcfg.theta_floor)
    if cfg.perturber == "adaptive-scaled-only":
        pcfg = replace(pcfg, eps_shrink=0.0)
    elif cfg.perturber == "bidirectional-only":
        coeffs = replace(coeffs, theta_omega=1.0, xi=1.0)
    offsets = compute_offsets(pcfg, coeffs)
    return sample_perturbed_box(box, offsets, image_w, image_h, pcfg, rng).box


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


def _mean_val_loss(model: ToyModel, samples) -> float:
    losses = []
    for sample in samples:
        box = box_from_mask(sample.mask)
        p = predict(model, sample.image, box)
        losses.append(loss_mod.combined_loss(p, sample.mask).combined)
    return float(np.mean(losses))


def train(split, cfg: TrainConfig) -> tuple[ToyModel, list[EpochRecord]]:
    """Train on split.train with per-epoch validation on split.val.

    One image per optimizer step, fresh perturbation draw per image per
    epoch, reduce-on-plateau schedule on the validation loss.  Fully
    deterministic for a fixed config.
    """
    if not split.train or not split.val:
        raise EmptyDataset("train and val splits must be nonempty")
    model = ToyModel()
    history: list[EpochRecord] = []
    lr = cfg.lr
    best_val = np.inf
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        train_losses = []
        for idx, sample in enumerate(split.train):
            h, w = sample.image.shape
            gt_box = box_from_mask(sample.mask)
            rng = make_rng(cfg.seed, epoch, idx)
            box = perturb_prompt(gt_box, w, h, cfg, rng)
            report = train_step(model, sample.image, sample.mask, box,
                                cfg.lam, lr)
            train_losses.append(report.combined)
        val_loss = _mean_val_loss(model, split.val)
        history.append(EpochRecord(epoch=epoch, train_loss=float(np.mean(train_losses)),
                                   val_loss=val_loss, lr=lr))
        if val_loss < best_val:
            best_val = val_loss
            stale = 0
        else:
            stale += 1
            if stale >= cfg.scheduler_patience:
                lr = max(lr * cfg.scheduler_factor, cfg.min_lr)
                stale = 0
    return model, history


@dataclass(frozen=True)
class EvalResult:
    dsc_mean: float
    nsd_mean: float
    tau: float
    per_image_dsc: tuple[float, ...]
    per_image_nsd: tuple[float, ...]


def prompt_box_for_mode(gt_box: BoundingBox, mode: str, frac: float,
                        image_w: int, image_h: int) -> BoundingBox:
    """Derive the evaluation prompt box: standard, expanded or shrunk edges."""
    if mode not in ("standard", "expand", "shrink"):
        raise ValueError(f"unknown prompt mode {mode!r}")
    if not (0.0 <= frac <= 0.4):
        raise ValueError(f"frac must be in [0, 0.4], got {frac}")
    if mode == "standard" or frac == 0.0:
        return gt_box
    sign = 1.0 if mode == "expand" else -1.0
    dx = sign * frac * gt_box.width
    dy = sign * frac * gt_box.height
    return BoundingBox(max(gt_box.x_min - dx, 0.0), max(gt_box.y_min - dy, 0.0),
                       min(gt_box.x_max + dx, float(image_w)),
                       min(gt_box.y_max + dy, float(image_h)))


def evaluate(model: ToyModel, samples, mode: str = "standard", frac: float = 0.0,
             tau: float = 2.0, predict_fn=None) -> EvalResult:
    """Macro-averaged DSC/NSD over samples under one prompt regime.

    Predictions are thresholded at p > 0.5 (strict; ties go to
    background).  predict_fn may override the model's predictor, e.g.
    for oracle baselines in tests.
    """
    from .metrics import dsc as dsc_fn, nsd as nsd_fn

    if predict_fn is None:
        predict_fn = lambda image, box: predict(model, image, box)
    dscs, nsds = [], []
    for sample in samples:
        h, w = sample.image.shape
        gt_box = box_from_mask(sample.mask)
        box = prompt_box_for_mode(gt_box, mode, frac, w, h)
        pred = predict_fn(sample.image, box) > 0.5
        dscs.append(dsc_fn(sample.mask, pred))
        nsds.append(nsd_fn(sample.mask, pred, tau))
    return EvalResult(dsc_mean=float(np.mean(dscs)), nsd_mean=float(np.mean(nsds)),
                      tau=tau, per_image_dsc=tuple(dscs), per_image_nsd=tuple(nsds))


def save_model(model: ToyModel, path, train_config_echo: dict | None = None):
    """Write the model as JSON; weights round-trip bit-exactly."""
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "feature_names": list(FEATURE_NAMES),
        "weights": [float(x) for x in model.weights],
        "optimizer_state": {
            "m": [float(x) for x in model.m],
            "v": [float(x) for x in model.v],
            "step": model.step,
        },
        "train_config_echo": train_config_echo or {},
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def load_model(path) -> ToyModel:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema: {doc.get('schema_version')}")
    state = doc["optimizer_state"]
    return ToyModel(weights=np.array(doc["weights"], dtype=np.float64),
                    m=np.array(state["m"], dtype=np.float64),
                    v=np.array(state["v"], dtype=np.float64),
                    step=int(state["step"]))

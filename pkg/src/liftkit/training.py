"""Dataset splitting, mixed-task batching, Adam, and the training loop.

Splits happen at video granularity so a video's QA samples never straddle
train/val/test. Batches interleave the two tasks proportionally so every
full batch sees both. Training keeps the best-validation parameters and
stops early once validation loss has not improved for `patience` epochs.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import TrainingError, ValidationError
from .labels import ManifestEntry, QASample
from .model import Model, ModelConfig, extract_patches, loss_batch, tokenize

log = logging.getLogger(__name__)

SPLIT_NAMES = ("train", "val", "test")
MIN_SPLIT_VIDEOS = 10


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-5
    batch_size: int = 32
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    patience: int = 5
    max_epochs: int = 200
    split_fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs < 1:
            raise ValidationError("batch_size, patience, max_epochs must be >= 1")
        fr = self.split_fractions
        if len(fr) != 3 or any(f < 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise ValidationError(f"split fractions {fr} must be >= 0 and sum to 1")


@dataclass
class TrainState:
    """Parameters plus Adam moments and early-stopping bookkeeping."""

    params: dict[str, np.ndarray]
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    epoch: int = 0
    best_val_loss: float = float("inf")
    epochs_since_improvement: int = 0

    @classmethod
    def init(cls, params: dict[str, np.ndarray]) -> "TrainState":
        # Moments stay float64 regardless of parameter dtype.
        return cls(params=params,
                   m={k: np.zeros(p.shape) for k, p in params.items()},
                   v={k: np.zeros(p.shape) for k, p in params.items()})


def split_dataset(entries: Sequence[ManifestEntry],
                  fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
                  seed: int = 0):
    """Partition videos into (train, val, test) with largest-remainder
    rounding, deterministic under seed. Entries get their split field set."""
    n = len(entries)
    if n < MIN_SPLIT_VIDEOS:
        raise ValidationError(f"need at least {MIN_SPLIT_VIDEOS} videos, got {n}")
    if len(fractions) != 3 or any(f < 0 for f in fractions) \
            or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValidationError(f"bad split fractions {fractions}")

    quotas = [f * n for f in fractions]
    counts = [int(q) for q in quotas]
    leftovers = sorted(range(3), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in range(n - sum(counts)):
        counts[leftovers[i]] += 1

    order = np.random.default_rng(seed).permutation(n)
    splits: tuple[list[ManifestEntry], ...] = ([], [], [])
    bounds = np.cumsum(counts)
    for pos, idx in enumerate(order):
        which = int(np.searchsorted(bounds, pos, side="right"))
        entry = entries[int(idx)]
        entry.split = SPLIT_NAMES[which]
        splits[which].append(entry)
    return splits


def make_batches(samples: Sequence, batch_size: int, seed: int,
                 epoch: int) -> list[list]:
    """Shuffle per task and interleave proportionally, then chunk.

    Works on anything with a `task` attribute. With one task present or
    batch_size 1, the mixed-batch constraint is waived with a warning.
    """
    if not samples:
        return []
    rng = np.random.default_rng([seed, epoch])
    by_task: dict[str, list] = {}
    for s in samples:
        by_task.setdefault(s.task, []).append(s)

    shuffled: list[list] = []
    for task in sorted(by_task):
        group = by_task[task]
        shuffled.append([group[i] for i in rng.permutation(len(group))])

    if len(shuffled) == 1:
        warnings.warn("single-task dataset: mixed-batch constraint waived",
                      UserWarning, stacklevel=2)
        merged = shuffled[0]
    else:
        if batch_size == 1:
            warnings.warn("batch_size 1: mixed-batch constraint waived",
                          UserWarning, stacklevel=2)
        merged = _interleave(shuffled[0], shuffled[1])
        for extra in shuffled[2:]:
            merged = _interleave(merged, extra)

    return [merged[i:i + batch_size] for i in range(0, len(merged), batch_size)]


def _interleave(a: list, b: list) -> list:
    # Proportional merge: stream indices advance at matched pace, so any
    # contiguous window holds both streams roughly pro rata.
    out: list = []
    ia = ib = 0
    na, nb = len(a), len(b)
    while ia < na or ib < nb:
        if ib >= nb or (ia < na and ia * nb <= ib * na):
            out.append(a[ia])
            ia += 1
        else:
            out.append(b[ib])
            ib += 1
    return out


def adam_step(state: TrainState, grads: dict[str, np.ndarray],
              cfg: TrainConfig) -> TrainState:
    """Standard bias-corrected Adam update, in place on state.params."""
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient in {name!r} at step {state.step + 1}")
    state.step += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, p in state.params.items():
        g = grads[name].astype(np.float64, copy=False)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.adam_eps)
        p -= update.astype(p.dtype, copy=False)
    return state


@dataclass(frozen=True)
class TrainSample:
    """One QA sample prepared for the model: patches, token ids, target."""

    image_ref: str
    patches: np.ndarray
    tokens: tuple[int, ...]
    target: np.ndarray
    task: str
    ground_truth: object = None


def prepare_samples(qa_samples: Sequence[QASample], images: dict,
                    lexicon: dict[str, int], cfg: ModelConfig) -> list[TrainSample]:
    """Tokenize questions and patch-extract each referenced image once.

    `images` maps image_ref to a MotionImage, an (H, W, 3) array, or an
    already-extracted patch matrix.
    """
    patch_cache: dict[str, np.ndarray] = {}
    out: list[TrainSample] = []
    for qa in qa_samples:
        ref = qa.image_ref
        if ref not in patch_cache:
            if ref not in images:
                raise ValidationError(f"no image provided for ref {ref!r}")
            pix = getattr(images[ref], "pixels", images[ref])
            pix = np.asarray(pix)
            if pix.ndim == 2:
                patch_cache[ref] = pix.astype(cfg.np_dtype, copy=False)
            else:
                patch_cache[ref] = extract_patches(pix, cfg.patch_size).astype(cfg.np_dtype)
        out.append(TrainSample(
            image_ref=ref,
            patches=patch_cache[ref],
            tokens=tuple(tokenize(qa.question, lexicon, cfg.max_text_len)),
            target=qa.target.astype(np.float64, copy=False),
            task=qa.task,
            ground_truth=qa.ground_truth,
        ))
    return out


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainResult:
    model: Model
    history: list[EpochStats]
    stop_reason: str  # "early_stop", "max_epochs", or "diverged"

    @property
    def diverged(self) -> bool:
        return self.stop_reason == "diverged"


def _mean_loss(model: Model, samples: Sequence[TrainSample], batch_size: int) -> float:
    if not samples:
        return float("nan")
    total = 0.0
    for i in range(0, len(samples), batch_size):
        chunk = samples[i:i + batch_size]
        logits, _ = model.forward_batch([s.patches for s in chunk],
                                        [s.tokens for s in chunk])
        losses, _ = loss_batch(logits, np.stack([s.target for s in chunk]))
        total += float(losses.sum())
    return total / len(samples)


def train(train_samples: Sequence[TrainSample], val_samples: Sequence[TrainSample],
          model_cfg: ModelConfig, cfg: TrainConfig) -> TrainResult:
    """Adam training loop with best-checkpoint tracking and early stopping.

    Returns the best-validation model (last-good on divergence, final when
    there is no validation set) and the per-epoch loss history.
    """
    if not train_samples:
        raise ValidationError("no training samples")
    model = Model(model_cfg)
    state = TrainState.init(model.params)
    best_params = {k: p.copy() for k, p in model.params.items()}
    history: list[EpochStats] = []
    stop_reason = "max_epochs"
    monitor_val = bool(val_samples)

    for epoch in range(1, cfg.max_epochs + 1):
        state.epoch = epoch
        batches = make_batches(train_samples, cfg.batch_size, cfg.seed, epoch)
        epoch_loss = 0.0
        diverged = False
        for batch in batches:
            losses, _, grads = model.loss_and_grads(
                [s.patches for s in batch], [s.tokens for s in batch],
                np.stack([s.target for s in batch]))
            if not np.isfinite(losses).all():
                log.error("non-finite training loss at epoch %d; aborting", epoch)
                diverged = True
                break
            epoch_loss += float(losses.sum())
            try:
                adam_step(state, grads, cfg)
            except TrainingError:
                log.error("non-finite gradient at epoch %d; aborting", epoch)
                diverged = True
                break
        if diverged:
            stop_reason = "diverged"
            break

        train_loss = epoch_loss / len(train_samples)
        val_loss = _mean_loss(model, val_samples, cfg.batch_size)
        history.append(EpochStats(epoch=epoch, train_loss=train_loss, val_loss=val_loss))
        log.info("epoch %d: train loss %.6f, val loss %.6f", epoch, train_loss, val_loss)

        if monitor_val:
            if not np.isfinite(val_loss):
                log.error("non-finite validation loss at epoch %d; aborting", epoch)
                stop_reason = "diverged"
                break
            if val_loss < state.best_val_loss:
                state.best_val_loss = val_loss
                state.epochs_since_improvement = 0
                best_params = {k: p.copy() for k, p in model.params.items()}
            else:
                state.epochs_since_improvement += 1
            if state.epochs_since_improvement >= cfg.patience:
                stop_reason = "early_stop"
                log.info("early stop at epoch %d (no improvement for %d epochs)",
                         epoch, cfg.patience)
                break
        else:
            best_params = {k: p.copy() for k, p in model.params.items()}

    best_model = Model(model_cfg, best_params)
    return TrainResult(model=best_model, history=history, stop_reason=stop_reason)


def save_history(history: Sequence[EpochStats], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,val_loss\n")
        for h in history:
            fh.write(f"{h.epoch},{h.train_loss!r},{h.val_loss!r}\n")


def load_history(path: str | Path) -> list[EpochStats]:
    out: list[EpochStats] = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "epoch,train_loss,val_loss":
            raise ValidationError(f"{path}: unexpected history header {header!r}")
        for line in fh:
            if not line.strip():
                continue
            e, tr, vl = line.strip().split(",")
            out.append(EpochStats(epoch=int(e), train_loss=float(tr), val_loss=float(vl)))
    return out

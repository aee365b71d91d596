"""Training procedures: the quality classifier and the six GAN sessions.

Everything is seeded explicitly: parameter init, epoch shuffles, and flip
augmentation all derive from the config seed, so a config fully determines
the loss trace. Non-finite losses abort immediately with a diagnostic
rather than continuing silently.
"""

import copy
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import (
    SamplePair,
    UnpairedSample,
    augment_flips,
    augment_flips_paired,
    load_images,
    to_torch,
    GOOD,
)
from .errors import DataError, NumericError
from .losses import LossVariant, adversarial_discriminator_loss, composite_loss
from .metrics import MetricRow, build_report
from .nets import ClassifierSpec, Generator, GeneratorSpec, SmallCnnClassifier, init_params

CLASSIFIER_EPOCHS = 40
VARIANT_EPOCHS = {"adv": 34, "l1": 55, "l2": 55, "l2a": 55, "l2ag": 55, "l2agr": 20}


@dataclass
class TrainConfig:
    """Optimization settings shared by both training procedures.

    ``epochs = None`` picks the per-variant default (classifier 40, ADV 34,
    L1/L2/L2A/L2AG 55, L2AGR 20). ``deterministic`` forces single-threaded
    torch so loss traces are bitwise repeatable.
    """

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 8
    epochs: int = None
    patience: int = 5
    seed: int = 0
    input_size: int = 256
    deterministic: bool = False
    augment: bool = True

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")


@dataclass(frozen=True)
class LogRow:
    epoch: int
    step: int
    total: float
    gan: float = None
    sim: float = None
    ang: float = None
    gdl: float = None
    mean_score: float = None


@dataclass
class TrainLog:
    rows: list = field(default_factory=list)
    val_rows: list = field(default_factory=list)  # (epoch, summary dict)


LOG_COLUMNS = ("epoch", "step", "total", "gan", "sim", "ang", "gdl", "mean_score")


def write_log_csv(log: TrainLog, path) -> None:
    """Per-step rows as CSV; absent loss terms become empty cells."""
    lines = [",".join(LOG_COLUMNS)]
    for r in log.rows:
        cells = [str(r.epoch), str(r.step)]
        for name in ("total", "gan", "sim", "ang", "gdl", "mean_score"):
            v = getattr(r, name)
            cells.append("" if v is None else f"{v:.12g}")
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_config_text(values: dict, path) -> None:
    """Persist run settings as sorted `key = value` lines."""
    lines = [f"{k} = {values[k]}" for k in sorted(values)]
    Path(path).write_text("\n".join(lines) + "\n")


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)


def _apply_determinism(config: TrainConfig):
    if config.deterministic:
        torch.set_num_threads(1)


def _check_finite(value: float, what: str, epoch: int, step: int):
    if not math.isfinite(value):
        raise NumericError(f"{what} became non-finite ({value}) at epoch {epoch} step {step}")


def _epoch_order(n: int, seed: int, epoch: int) -> list:
    rng = np.random.default_rng((seed, epoch, 0xE90C))
    return rng.permutation(n).tolist()


def _adam(params, config: TrainConfig):
    return torch.optim.Adam(
        params, lr=config.lr, betas=(config.beta1, config.beta2), eps=config.eps
    )


# ---------------------------------------------------------------------------
# classifier


def _classifier_batches(samples, config, epoch, train: bool):
    order = _epoch_order(len(samples), config.seed, epoch) if train else range(len(samples))
    for start in range(0, len(samples), config.batch_size):
        idx = [order[i] for i in range(start, min(start + config.batch_size, len(samples)))]
        batch = [samples[i] for i in idx]
        images = load_images([s.path for s in batch], config.input_size)
        if train and config.augment:
            images = augment_flips(images, config.seed, epoch=epoch, indices=idx)
        labels = torch.tensor([0.0 if s.label == GOOD else 1.0 for s in batch])
        yield to_torch(images), labels


def _classifier_val_stats(model, samples, config):
    model.eval()
    total, correct, n = 0.0, 0, 0
    with torch.no_grad():
        for x, labels in _classifier_batches(samples, config, epoch=0, train=False):
            logits = model.logits(x)
            loss = nn.functional.binary_cross_entropy_with_logits(
                logits, labels, reduction="sum"
            )
            total += float(loss)
            scores = torch.sigmoid(logits)
            correct += int(((scores >= 0.5) == (labels >= 0.5)).sum())
            n += len(labels)
    model.train()
    return total / n, correct / n


def train_classifier(train_samples, val_samples, config: TrainConfig):
    """Train the quality classifier with BCE (good -> 0, bad -> 1).

    Stops early when validation loss fails to improve for ``patience``
    epochs and returns the best-validation parameters. ``val_samples``
    may be None to train for the full epoch budget instead.

    Returns (model, TrainLog).
    """
    _apply_determinism(config)
    labels_present = {s.label for s in train_samples}
    if len(labels_present) < 2:
        raise DataError(f"classifier training needs both classes, got only {labels_present}")
    model = init_params(SmallCnnClassifier(ClassifierSpec(input_size=config.input_size)), config.seed)
    model.train()
    opt = _adam(model.parameters(), config)
    log = TrainLog()
    epochs = config.epochs if config.epochs is not None else CLASSIFIER_EPOCHS

    best_loss = math.inf
    best_state = None
    best_epoch = -1
    stale = 0
    step = 0
    for epoch in range(epochs):
        for x, labels in _classifier_batches(train_samples, config, epoch, train=True):
            logits = model.logits(x)
            loss = nn.functional.binary_cross_entropy_with_logits(logits, labels)
            value = loss.detach().item()
            _check_finite(value, "classifier loss", epoch, step)
            opt.zero_grad()
            loss.backward()
            opt.step()
            log.rows.append(LogRow(epoch=epoch, step=step, total=value))
            step += 1
        if val_samples:
            val_loss, val_acc = _classifier_val_stats(model, val_samples, config)
            _check_finite(val_loss, "validation loss", epoch, step)
            log.val_rows.append((epoch, {"val_loss": val_loss, "val_acc": val_acc}))
            if val_loss < best_loss:
                best_loss = val_loss
                best_state = copy.deepcopy(model.state_dict())
                best_epoch = epoch
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    if best_state is not None:
        model.load_state_dict(best_state)
        log.val_rows.append((best_epoch, {"selected": 1.0}))
    model.eval()
    return model, log


# ---------------------------------------------------------------------------
# GAN sessions


def _check_variant_data(variant: LossVariant, samples):
    if not samples:
        raise DataError("no training samples")
    if variant.paired:
        if not all(isinstance(s, SamplePair) for s in samples):
            raise DataError(f"variant {variant.tag} needs paired samples (trainA/trainB)")
    else:
        if not all(isinstance(s, UnpairedSample) for s in samples):
            raise DataError(f"variant {variant.tag} needs unpaired samples (good/bad)")


def _gan_batches(variant, samples, config, epoch):
    order = _epoch_order(len(samples), config.seed, epoch)
    for start in range(0, len(samples), config.batch_size):
        idx = [order[i] for i in range(start, min(start + config.batch_size, len(samples)))]
        batch = [samples[i] for i in idx]
        if variant.paired:
            xs = load_images([s.input_path for s in batch], config.input_size)
            ys = load_images([s.target_path for s in batch], config.input_size)
            if config.augment:
                pairs = augment_flips_paired(list(zip(xs, ys)), config.seed, epoch=epoch, indices=idx)
                xs = [p[0] for p in pairs]
                ys = [p[1] for p in pairs]
            yield to_torch(xs), to_torch(ys)
        else:
            xs = load_images([s.path for s in batch], config.input_size)
            if config.augment:
                xs = augment_flips(xs, config.seed, epoch=epoch, indices=idx)
            yield to_torch(xs), None


def evaluate_epoch(generator: Generator, val_pairs, input_size: int):
    """Mean PSNR/SSIM of generator outputs against targets, as a MetricReport."""
    from .metrics import psnr, ssim

    if not val_pairs:
        raise DataError("evaluate_epoch needs a nonempty validation set")
    was_training = generator.training
    generator.eval()
    rows = []
    with torch.no_grad():
        for pair in val_pairs:
            x = to_torch(load_images([pair.input_path], input_size))
            y_img = load_images([pair.target_path], input_size)[0]
            out = generator(x)[0].numpy().transpose(1, 2, 0).astype(np.float64)
            out = np.clip(out, 0.0, 1.0)
            rows.append(
                MetricRow(
                    image=pair.stem,
                    psnr_db=psnr(out, y_img),
                    ssim=ssim(out, y_img),
                    uiqm=0.0,
                )
            )
    if was_training:
        generator.train()
    report = build_report(rows)
    return report


def _selection_value(report) -> float:
    # all-infinite PSNR means perfect reconstruction; rank it above any finite mean
    return math.inf if report.mean_psnr_db is None else report.mean_psnr_db


def train_gan(
    train_samples,
    variant: LossVariant,
    discriminator: nn.Module,
    config: TrainConfig,
    val_pairs=None,
):
    """Run one GAN training session under the given loss variant.

    The discriminator must come pre-trained (a quality-classifier
    checkpoint); all variants except L2AGR keep it frozen, and gradients
    still flow through it into the generator. L2AGR takes one
    discriminator step per generator step, scoring the target batch as
    good (0) and the detached generated batch as bad (1).

    Model selection: with ``val_pairs`` given, the epoch with the best
    validation PSNR wins; otherwise the final parameters are returned.

    Returns (generator, discriminator, TrainLog).
    """
    _apply_determinism(config)
    _check_variant_data(variant, train_samples)
    generator = init_params(Generator(GeneratorSpec(input_size=config.input_size)), config.seed)
    generator.train()
    g_opt = _adam(generator.parameters(), config)
    if variant.trains_discriminator:
        discriminator.train()
        discriminator.requires_grad_(True)
        d_opt = _adam(discriminator.parameters(), config)
    else:
        # frozen: eval mode also pins batch-norm running statistics, so the
        # whole discriminator state is unchanged by training
        discriminator.eval()
        discriminator.requires_grad_(False)
        d_opt = None

    log = TrainLog()
    epochs = config.epochs if config.epochs is not None else VARIANT_EPOCHS[variant.tag.lower()]
    best_state = None
    best_value = -math.inf
    best_epoch = -1
    step = 0
    for epoch in range(epochs):
        for x, y in _gan_batches(variant, train_samples, config, epoch):
            gen_out = generator(x)
            scores = discriminator(gen_out)
            total, breakdown = composite_loss(variant, x, y, gen_out, scores)
            value = total.detach().item()
            _check_finite(value, f"{variant.tag} generator loss", epoch, step)
            g_opt.zero_grad()
            total.backward()
            g_opt.step()

            if d_opt is not None:
                real_scores = discriminator(y)
                fake_scores = discriminator(gen_out.detach())
                d_loss = adversarial_discriminator_loss(real_scores, fake_scores)
                _check_finite(d_loss.detach().item(), "discriminator loss", epoch, step)
                d_opt.zero_grad()
                d_loss.backward()
                d_opt.step()

            # log the total as the exact double-precision sum of its parts
            parts = {k: v.detach().item() for k, v in breakdown.items()}
            log.rows.append(
                LogRow(
                    epoch=epoch,
                    step=step,
                    total=sum(parts.values()),
                    gan=parts.get("gan"),
                    sim=parts.get("sim"),
                    ang=parts.get("ang"),
                    gdl=parts.get("gdl"),
                    mean_score=scores.detach().mean().item(),
                )
            )
            step += 1
        if val_pairs:
            report = evaluate_epoch(generator, val_pairs, config.input_size)
            summary = {
                "val_psnr_db": _selection_value(report),
                "val_ssim": report.mean_ssim,
            }
            log.val_rows.append((epoch, summary))
            if summary["val_psnr_db"] > best_value:
                best_value = summary["val_psnr_db"]
                best_state = copy.deepcopy(generator.state_dict())
                best_epoch = epoch
    if best_state is not None:
        generator.load_state_dict(best_state)
        log.val_rows.append((best_epoch, {"selected": 1.0}))
    generator.eval()
    return generator, discriminator, log

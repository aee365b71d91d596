"""Differentiable training objectives and the six composite-loss variants.

All losses take float tensors with channels-first layout (..., C, H, W) and
reduce by mean over every element (or every pixel / valid position), never
by sum, so the weighting constants are resolution independent. Scores are
post-sigmoid quality scores in (0, 1) with the inverted label convention:
0 means good quality, 1 means bad.
"""

from dataclasses import dataclass

import torch

from .errors import DataError, ShapeError

SCORE_EPS = 1e-7
_NORM_EPS_SQ = 1e-12  # squared pixel-norm floor; norm < 1e-6 counts as zero


def _check_same_shape(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op} needs matching shapes, got {tuple(a.shape)} vs {tuple(b.shape)}")


def l1_loss(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean absolute deviation over all elements."""
    _check_same_shape(a, b, "l1_loss")
    return (a - b).abs().mean()


def l2_loss(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean squared deviation over all elements."""
    _check_same_shape(a, b, "l2_loss")
    return ((a - b) ** 2).mean()


def angular_loss(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean angle (radians) between per-pixel RGB vectors.

    The cosine is clamped to [-1 + 1e-7, 1 - 1e-7] before arccos, so
    identical images give a small positive value (about 4.5e-4) rather
    than exactly 0. Pixels where either vector norm is below 1e-6
    contribute 0; the norm floor also keeps gradients finite there.
    """
    _check_same_shape(a, b, "angular_loss")
    sa = (a * a).sum(dim=-3)
    sb = (b * b).sum(dim=-3)
    valid = (sa >= _NORM_EPS_SQ) & (sb >= _NORM_EPS_SQ)
    na = torch.sqrt(torch.clamp(sa, min=_NORM_EPS_SQ))
    nb = torch.sqrt(torch.clamp(sb, min=_NORM_EPS_SQ))
    cos = torch.clamp((a * b).sum(dim=-3) / (na * nb), -1.0 + SCORE_EPS, 1.0 - SCORE_EPS)
    ang = torch.where(valid, torch.arccos(cos), torch.zeros_like(cos))
    return ang.mean()


def gdl_loss(gen: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Gradient-difference loss with forward differences.

    Each valid position contributes the absolute difference between the
    gradient magnitudes of the two images; the outer absolute value keeps
    the loss non-negative (and, as a consequence, symmetric in its
    arguments). Vertical and horizontal terms are pooled into one mean, so
    images with a single 1-pixel dimension still evaluate over the
    remaining axis; only a 1x1 image has no valid positions and errors.
    """
    _check_same_shape(gen, target, "gdl_loss")
    h, w = gen.shape[-2], gen.shape[-1]
    if h < 2 and w < 2:
        raise ShapeError("gdl_loss needs at least one spatial dimension of length >= 2")
    gv = (gen[..., 1:, :] - gen[..., :-1, :]).abs()
    tv = (target[..., 1:, :] - target[..., :-1, :]).abs()
    gh = (gen[..., :, 1:] - gen[..., :, :-1]).abs()
    th = (target[..., :, 1:] - target[..., :, :-1]).abs()
    total = (gv - tv).abs().sum() + (gh - th).abs().sum()
    count = gv.numel() + gh.numel()
    return total / count


def _clamped(scores: torch.Tensor) -> torch.Tensor:
    return torch.clamp(scores, SCORE_EPS, 1.0 - SCORE_EPS)


def adversarial_generator_loss(scores: torch.Tensor) -> torch.Tensor:
    """Generator objective: mean -log(1 - s), pushing scores toward good (0)."""
    if scores.numel() == 0:
        raise DataError("adversarial_generator_loss needs a nonempty score batch")
    return (-torch.log1p(-_clamped(scores))).mean()


def adversarial_discriminator_loss(
    real_scores: torch.Tensor, fake_scores: torch.Tensor
) -> torch.Tensor:
    """Discriminator objective: push real toward 0 (good) and fake toward 1."""
    if real_scores.numel() == 0 or fake_scores.numel() == 0:
        raise DataError("adversarial_discriminator_loss needs nonempty score batches")
    real_term = (-torch.log1p(-_clamped(real_scores))).mean()
    fake_term = (-torch.log(_clamped(fake_scores))).mean()
    return real_term + fake_term


@dataclass(frozen=True)
class LossWeights:
    """Coefficients of the composite objective."""

    w_gan: float = 1.0
    w_sim: float = 1.0
    lambda_ang: float = 0.0
    lambda_gdl: float = 0.0

    def __post_init__(self):
        for name in ("w_gan", "w_sim", "lambda_ang", "lambda_gdl"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class LossVariant:
    """One training configuration: which terms, with which weights.

    ``sim_kind`` picks the similarity distance (l1 or l2); unpaired
    variants measure it against the network input (self-similarity),
    paired variants against the reference target. Only L2AGR retrains the
    discriminator.
    """

    tag: str
    terms: tuple
    weights: LossWeights
    paired: bool
    sim_kind: str
    trains_discriminator: bool = False


VARIANTS = {
    "adv": LossVariant("ADV", ("gan", "sim"), LossWeights(), paired=False, sim_kind="l1"),
    "l1": LossVariant("L1", ("gan", "sim"), LossWeights(), paired=True, sim_kind="l1"),
    "l2": LossVariant("L2", ("gan", "sim"), LossWeights(), paired=True, sim_kind="l2"),
    "l2a": LossVariant(
        "L2A",
        ("gan", "sim", "ang"),
        LossWeights(lambda_ang=0.8),
        paired=True,
        sim_kind="l2",
    ),
    "l2ag": LossVariant(
        "L2AG",
        ("gan", "sim", "ang", "gdl"),
        LossWeights(lambda_ang=0.8, lambda_gdl=0.4),
        paired=True,
        sim_kind="l2",
    ),
    "l2agr": LossVariant(
        "L2AGR",
        ("gan", "sim", "ang", "gdl"),
        LossWeights(lambda_ang=0.8, lambda_gdl=0.4),
        paired=True,
        sim_kind="l2",
        trains_discriminator=True,
    ),
}


def get_variant(name: str) -> LossVariant:
    try:
        return VARIANTS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown loss variant {name!r}; choose from {sorted(VARIANTS)}") from None


def combine_terms(variant: LossVariant, terms: dict):
    """Weight raw term values and sum them.

    Returns (total, breakdown) where breakdown maps term name to its
    weighted contribution; the total is the exact sum of the breakdown.
    """
    w = variant.weights
    factors = {"gan": w.w_gan, "sim": w.w_sim, "ang": w.lambda_ang, "gdl": w.lambda_gdl}
    breakdown = {name: factors[name] * terms[name] for name in variant.terms}
    total = sum(breakdown.values())
    return total, breakdown


def composite_loss(variant: LossVariant, x, y, gen_out, scores):
    """Full generator objective for one variant.

    Parameters
    ----------
    variant : LossVariant
    x : tensor
      Network input batch.
    y : tensor or None
      Reference target batch; None is only legal for unpaired variants.
    gen_out : tensor
      Generator output batch.
    scores : tensor
      Discriminator scores of gen_out.

    Returns
    -------
    (total, breakdown)
      Scalar tensor plus the weighted per-term contributions.
    """
    if variant.paired and y is None:
        raise DataError(f"variant {variant.tag} requires paired targets")
    sim_ref = y if variant.paired else x
    sim_fn = l1_loss if variant.sim_kind == "l1" else l2_loss
    terms = {"gan": adversarial_generator_loss(scores), "sim": sim_fn(gen_out, sim_ref)}
    if "ang" in variant.terms:
        terms["ang"] = angular_loss(gen_out, y)
    if "gdl" in variant.terms:
        terms["gdl"] = gdl_loss(gen_out, y)
    return combine_terms(variant, terms)

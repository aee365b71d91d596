"""Quality metrics for enhancement results and the classifier scoreboard.

All image metrics take ImageF arrays (float RGB in [0, 1]) and convert to the
255 scale internally, so the usual published constants apply unchanged.
PSNR and SSIM are full-reference; UIQM is no-reference. Confusion-count
ratios treat the good-quality class as positive.
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DataError, ShapeError
from .imagecore import as_image_f


# ---------------------------------------------------------------------------
# full-reference metrics


def psnr(x: np.ndarray, y: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB between two ImageF arrays.

    Parameters
    ----------
    x, y : ndarray
      Images of identical shape.

    Returns
    -------
    float
      10*log10(255^2 / MSE) with one MSE pooled over all pixels and
      channels. Identical inputs give ``math.inf``; the infinity is never
      capped, report writers print it as the literal "inf".
    """
    x = as_image_f(x)
    y = as_image_f(y)
    if x.shape != y.shape:
        raise ShapeError(f"psnr needs matching shapes, got {x.shape} vs {y.shape}")
    diff = (x - y) * 255.0
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


SSIM_C1 = (255.0 * 0.01) ** 2
SSIM_C2 = (255.0 * 0.03) ** 2
_SSIM_RADIUS = 5
_SSIM_SIGMA = 1.5


def _gaussian_kernel1d(radius: int, sigma: float) -> np.ndarray:
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return k / k.sum()


def _window_mean(a: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Separable correlation cropped to the valid region, so the boundary
    # mode never influences the result.
    pad = kernel.size // 2
    out = ndimage.correlate1d(a, kernel, axis=0, mode="constant")
    out = ndimage.correlate1d(out, kernel, axis=1, mode="constant")
    return out[pad : a.shape[0] - pad, pad : a.shape[1] - pad]


def _ssim_channel(x: np.ndarray, y: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    mx = _window_mean(x, kernel)
    my = _window_mean(y, kernel)
    sxx = _window_mean(x * x, kernel) - mx * mx
    syy = _window_mean(y * y, kernel) - my * my
    sxy = _window_mean(x * y, kernel) - mx * my
    num = (2.0 * mx * my + SSIM_C1) * (2.0 * sxy + SSIM_C2)
    den = (mx * mx + my * my + SSIM_C1) * (sxx + syy + SSIM_C2)
    # Clip guards the |SSIM| <= 1 bound against rounding on near-identical
    # inputs; for x == y numerator and denominator are bitwise equal, so the
    # map is exactly 1 and the clip is a no-op.
    return np.clip(num / den, -1.0, 1.0)


def ssim(x: np.ndarray, y: np.ndarray) -> float:
    """Mean structural similarity between two ImageF arrays.

    Parameters
    ----------
    x, y : ndarray
      Images of identical shape, both dimensions at least 11.

    Returns
    -------
    float
      Local SSIM under an 11x11 Gaussian window (sigma 1.5) on the 255
      scale with c1 = (255*0.01)^2 and c2 = (255*0.03)^2, computed per
      channel over the valid (fully overlapped) region, then averaged over
      windows and channels. ssim(x, x) is exactly 1.0.
    """
    x = as_image_f(x)
    y = as_image_f(y)
    if x.shape != y.shape:
        raise ShapeError(f"ssim needs matching shapes, got {x.shape} vs {y.shape}")
    if min(x.shape[0], x.shape[1]) < 2 * _SSIM_RADIUS + 1:
        raise ShapeError(f"ssim needs at least 11x11 images, got {x.shape[0]}x{x.shape[1]}")
    kernel = _gaussian_kernel1d(_SSIM_RADIUS, _SSIM_SIGMA)
    xs = x * 255.0
    ys = y * 255.0
    per_channel = [
        float(np.mean(_ssim_channel(xs[:, :, c], ys[:, :, c], kernel))) for c in range(3)
    ]
    return float(sum(per_channel) / 3.0)


# ---------------------------------------------------------------------------
# UIQM (no-reference)


@dataclass(frozen=True)
class UiqmConfig:
    """Every UIQM constant in one place.

    The composite weights and the colorfulness coefficients are the
    published ones; block size 8 and the 0.1 trim fraction follow the
    original measure. ``eme_shift`` adds 1 to block extrema on the 255
    scale before taking log ratios, which keeps every block finite
    (including min = 0) without dropping blocks.
    """

    w_uicm: float = 0.0282
    w_uism: float = 0.2953
    w_uiconm: float = 3.5753
    uicm_mu_coeff: float = -0.0268
    uicm_sigma_coeff: float = 0.1586
    trim_fraction: float = 0.1
    luma_weights: tuple = (0.299, 0.587, 0.114)
    block: int = 8
    eme_shift: float = 1.0


DEFAULT_UIQM = UiqmConfig()


def _trimmed_mean(v: np.ndarray, frac: float) -> float:
    s = np.sort(v.ravel())
    t = int(frac * s.size)
    return float(s[t : s.size - t].mean())


def _block_extrema(a: np.ndarray, block: int):
    h = a.shape[0] - a.shape[0] % block
    w = a.shape[1] - a.shape[1] % block
    tiles = a[:h, :w].reshape(h // block, block, w // block, block)
    return tiles.max(axis=(1, 3)), tiles.min(axis=(1, 3))


def _eme(a: np.ndarray, block: int, shift: float) -> float:
    hi, lo = _block_extrema(a, block)
    return float(2.0 * np.mean(np.log((hi + shift) / (lo + shift))))


def _logamee(a: np.ndarray, block: int) -> float:
    hi, lo = _block_extrema(a, block)
    top = hi - lo
    bot = hi + lo
    terms = np.zeros_like(top)
    mask = top > 0  # bot > 0 whenever top > 0; constant blocks contribute the 0 limit
    ratio = top[mask] / bot[mask]
    terms[mask] = ratio * np.log(ratio)
    return float(-np.mean(terms))


def uicm(x: np.ndarray, config: UiqmConfig = DEFAULT_UIQM) -> float:
    """Colorfulness from RG / YB opponent channels on the 255 scale.

    The location term uses an alpha-trimmed mean (trim fraction at each
    end); the spread term is the second moment of all pixels about that
    trimmed mean. A constant gray image scores exactly 0.
    """
    x = as_image_f(x) * 255.0
    r, g, b = x[:, :, 0], x[:, :, 1], x[:, :, 2]
    rg = r - g
    yb = (r + g) / 2.0 - b
    mu_rg = _trimmed_mean(rg, config.trim_fraction)
    mu_yb = _trimmed_mean(yb, config.trim_fraction)
    var_rg = float(np.mean((rg - mu_rg) ** 2))
    var_yb = float(np.mean((yb - mu_yb) ** 2))
    return config.uicm_mu_coeff * math.sqrt(
        mu_rg**2 + mu_yb**2
    ) + config.uicm_sigma_coeff * math.sqrt(var_rg + var_yb)


def uism(x: np.ndarray, config: UiqmConfig = DEFAULT_UIQM) -> float:
    """Sharpness: per-channel Sobel-weighted EME, combined with luma weights."""
    x = as_image_f(x) * 255.0
    total = 0.0
    for c, weight in enumerate(config.luma_weights):
        chan = x[:, :, c]
        gx = ndimage.sobel(chan, axis=0)
        gy = ndimage.sobel(chan, axis=1)
        edge = chan * np.hypot(gx, gy)
        total += weight * _eme(edge, config.block, config.eme_shift)
    return total


def uiconm(x: np.ndarray, config: UiqmConfig = DEFAULT_UIQM) -> float:
    """Contrast: block log-AMEE of the RGB intensities (entropy form)."""
    x = as_image_f(x) * 255.0
    return _logamee(x.mean(axis=2), config.block)


def uiqm(x: np.ndarray, config: UiqmConfig = DEFAULT_UIQM) -> float:
    """Underwater image quality measure (no reference needed).

    Parameters
    ----------
    x : ndarray
      ImageF with both dimensions at least 16.

    Returns
    -------
    float
      Weighted sum of colorfulness (UICM), sharpness (UISM), and contrast
      (UIConM); weights live in :class:`UiqmConfig`.
    """
    x = as_image_f(x)
    if min(x.shape[0], x.shape[1]) < 2 * config.block:
        raise ShapeError(f"uiqm needs at least 16x16 images, got {x.shape[0]}x{x.shape[1]}")
    return (
        config.w_uicm * uicm(x, config)
        + config.w_uism * uism(x, config)
        + config.w_uiconm * uiconm(x, config)
    )


# ---------------------------------------------------------------------------
# classifier confusion statistics


@dataclass(frozen=True)
class ConfusionCounts:
    """Binary confusion counts with good-quality as the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def swapped(self) -> "ConfusionCounts":
        """The same counts with the bad-quality class treated as positive."""
        return ConfusionCounts(tp=self.tn, fp=self.fn, tn=self.tp, fn=self.fp)


def count_confusion(actual_good, predicted_good) -> ConfusionCounts:
    """Tally counts from parallel boolean sequences (True = good)."""
    if len(actual_good) != len(predicted_good):
        raise ValueError("label sequences differ in length")
    tp = fp = tn = fn = 0
    for a, p in zip(actual_good, predicted_good):
        if a and p:
            tp += 1
        elif a and not p:
            fn += 1
        elif not a and p:
            fp += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def _ratio(num: int, den: int):
    return None if den == 0 else num / den


def confusion_metrics(c: ConfusionCounts) -> dict:
    """Precision, recall, specificity, accuracy from confusion counts.

    A zero denominator yields ``None`` for that metric (undefined, not 0,
    not an exception).
    """
    if c.total < 1:
        raise DataError("confusion counts are empty")
    return {
        "precision": _ratio(c.tp, c.tp + c.fp),
        "recall": _ratio(c.tp, c.tp + c.fn),
        "specificity": _ratio(c.tn, c.tn + c.fp),
        "accuracy": _ratio(c.tp + c.tn, c.total),
    }


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class MetricRow:
    image: str
    psnr_db: float
    ssim: float
    uiqm: float


@dataclass(frozen=True)
class MetricReport:
    """Per-image metric rows plus aggregates.

    ``mean_psnr_db`` averages finite rows only and is ``None`` when every
    row is infinite; ``count_inf_psnr`` reports how many were excluded.
    """

    rows: tuple
    mean_psnr_db: float
    count_inf_psnr: int
    mean_ssim: float
    mean_uiqm: float
    confusion: ConfusionCounts = None


def build_report(rows, confusion: ConfusionCounts = None) -> MetricReport:
    rows = tuple(rows)
    if not rows:
        raise DataError("cannot build a report from zero rows")
    finite = [r.psnr_db for r in rows if math.isfinite(r.psnr_db)]
    return MetricReport(
        rows=rows,
        mean_psnr_db=sum(finite) / len(finite) if finite else None,
        count_inf_psnr=len(rows) - len(finite),
        mean_ssim=sum(r.ssim for r in rows) / len(rows),
        mean_uiqm=sum(r.uiqm for r in rows) / len(rows),
        confusion=confusion,
    )


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isinf(v)):
        return "inf"
    return f"{v:.12g}"


def write_report_csv(report: MetricReport, path) -> None:
    """Write `image,psnr_db,ssim,uiqm` rows plus aggregate footer rows.

    Footers: a `mean` row (PSNR mean over finite rows, "inf" when none
    are finite) and a `count_inf_psnr` row.
    """
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["image", "psnr_db", "ssim", "uiqm"])
        for row in report.rows:
            w.writerow([row.image, _fmt(row.psnr_db), _fmt(row.ssim), _fmt(row.uiqm)])
        w.writerow(["mean", _fmt(report.mean_psnr_db), _fmt(report.mean_ssim), _fmt(report.mean_uiqm)])
        w.writerow(["count_inf_psnr", report.count_inf_psnr, "", ""])


def _fmt_table(v, digits=4) -> str:
    if v is None or (isinstance(v, float) and math.isinf(v)):
        return "inf"
    return f"{v:.{digits}f}"


def markdown_metric_tables(quality_rows, uiqm_rows) -> str:
    """Render the two comparison tables (PSNR/SSIM and UIQM) as markdown.

    ``quality_rows`` and ``uiqm_rows`` are ordered (label, MetricReport)
    pairs; typical labels are Input, the method name, and Goal.
    """
    lines = ["| Method | PSNR (dB) | SSIM |", "| --- | --- | --- |"]
    for label, rep in quality_rows:
        lines.append(
            f"| {label} | {_fmt_table(rep.mean_psnr_db, 2)} | {_fmt_table(rep.mean_ssim)} |"
        )
    lines.append("")
    lines.append("| Method | UIQM |")
    lines.append("| --- | --- |")
    for label, rep in uiqm_rows:
        lines.append(f"| {label} | {_fmt_table(rep.mean_uiqm)} |")
    return "\n".join(lines) + "\n"


def markdown_confusion_table(counts: ConfusionCounts) -> str:
    """Per-class precision/recall/specificity/accuracy table as markdown."""
    lines = [
        "| Class | Precision | Recall | Specificity | Accuracy |",
        "| --- | --- | --- | --- | --- |",
    ]
    for label, c in (("good", counts), ("bad", counts.swapped())):
        m = confusion_metrics(c)
        lines.append(
            "| {} | {} | {} | {} | {} |".format(
                label,
                *(_fmt_table(m[k]) if m[k] is not None else "undef"
                  for k in ("precision", "recall", "specificity", "accuracy")),
            )
        )
    return "\n".join(lines) + "\n"

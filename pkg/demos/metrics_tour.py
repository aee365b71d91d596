"""A quick tour of the image quality metrics.

Builds one synthetic scene, degrades it a few different ways, and prints
how PSNR, SSIM, and UIQM react to each degradation. Run from the repo
root:

    python3 demos/metrics_tour.py
"""

import numpy as np
from scipy import ndimage

from aquagan import psnr, ssim, uicm, uiconm, uiqm, uism


def scene(size=128, seed=4):
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.linspace(0, 1, size), np.linspace(0, 1, size), indexing="ij")
    img = np.stack([0.7 * xx + 0.2, 0.5 * yy + 0.3, 0.6 - 0.4 * xx], axis=2)
    for _ in range(8):
        i, j = rng.integers(0, size - 24, size=2)
        img[i : i + 20, j : j + 20] = rng.random(3)
    return np.clip(img, 0, 1)


def blue_cast(img):
    return np.clip(img * [0.35, 0.65, 0.95] + [0.0, 0.02, 0.2], 0, 1)


def blur(img, k=7):
    return np.clip(ndimage.uniform_filter(img, size=(k, k, 1), mode="nearest"), 0, 1)


def noisy(img, sigma=0.06, seed=5):
    rng = np.random.default_rng(seed)
    return np.clip(img + rng.normal(0, sigma, img.shape), 0, 1)


def main():
    clean = scene()
    versions = {
        "clean": clean,
        "blue cast": blue_cast(clean),
        "blurred": blur(clean),
        "noisy": noisy(clean),
        "cast+blur": blur(blue_cast(clean)),
    }

    print("Full-reference metrics compare against the clean image;")
    print("UIQM needs no reference and its parts are shown separately.\n")
    header = f"{'version':<12} {'PSNR(dB)':>9} {'SSIM':>7} {'UIQM':>7} {'UICM':>8} {'UISM':>7} {'UIConM':>7}"
    print(header)
    print("-" * len(header))
    for name, img in versions.items():
        p = psnr(img, clean)
        p_txt = "inf" if p == float("inf") else f"{p:.2f}"
        print(
            f"{name:<12} {p_txt:>9} {ssim(img, clean):>7.4f} {uiqm(img):>7.3f} "
            f"{uicm(img):>8.3f} {uism(img):>7.3f} {uiconm(img):>7.3f}"
        )

    print()
    print("Things to notice: the identity row pins PSNR at inf and SSIM at 1;")
    print("a color cast hurts UICM (colorfulness) while blur mostly hurts")
    print("UISM (sharpness) and UIConM (contrast), and noise actually raises")
    print("the sharpness term, which is why UIQM alone cannot rank methods.")


if __name__ == "__main__":
    main()

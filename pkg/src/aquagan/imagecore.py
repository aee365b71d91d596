"""Canonical image representation and file I/O boundaries.

Every operation in this package exchanges images as numpy arrays of shape
(H, W, 3), RGB order, float values in [0, 1] (called "ImageF" throughout).
The 8-bit integer form (uint8, [0, 255], "ImageU8") exists only at the file
boundary. Inputs are never color-normalized on decode; metrics that are
defined on the 255 scale rescale internally.
"""

import hashlib
import os
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, ShapeError

CACHE_ENV_VAR = "AQUAGAN_CACHE"


def as_image_f(data) -> np.ndarray:
    """Validate an array as ImageF: (H, W, 3), H and W >= 2, finite values.

    Values are clamped into [0, 1]; non-finite values are rejected since
    clamping them would hide upstream bugs.
    """
    img = np.asarray(data, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError(f"expected (H, W, 3) RGB array, got shape {img.shape}")
    if img.shape[0] < 2 or img.shape[1] < 2:
        raise ShapeError(f"image must be at least 2x2, got {img.shape[0]}x{img.shape[1]}")
    if not np.all(np.isfinite(img)):
        raise ShapeError("image contains non-finite values")
    return np.clip(img, 0.0, 1.0)


def to_float(img_u8: np.ndarray) -> np.ndarray:
    """ImageU8 -> ImageF, dividing by 255."""
    return as_image_f(np.asarray(img_u8, dtype=np.float64) / 255.0)


def quantize(img: np.ndarray) -> np.ndarray:
    """ImageF -> ImageU8: round(v * 255) clamped to [0, 255].

    Round-trips losslessly with :func:`to_float` for any uint8 input.
    """
    img = as_image_f(img)
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


def decode_image(path) -> np.ndarray:
    """Decode a PNG or JPEG file into ImageF (raw 8-bit values / 255).

    Grayscale content is replicated to three channels; palette and alpha
    modes are converted to RGB. Unreadable files raise DecodeError naming
    the path.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.mode != "RGB":
                im = im.convert("RGB")
            raw = np.asarray(im, dtype=np.uint8)
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise DecodeError(f"cannot decode image {path}: {exc}") from exc
    if raw.ndim != 3 or raw.shape[2] != 3:
        raise DecodeError(f"cannot decode image {path}: unsupported channel layout")
    return to_float(raw)


def encode_image(img: np.ndarray, path) -> None:
    """Write ImageF (or an already-quantized uint8 array) as PNG or JPEG."""
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        arr = quantize(arr)
    Image.fromarray(arr, mode="RGB").save(Path(path))


def _resample_axis(arr: np.ndarray, new_len: int, axis: int) -> np.ndarray:
    old_len = arr.shape[axis]
    # Half-pixel-center sampling (align_corners = False), edges clamped.
    src = (np.arange(new_len) + 0.5) * (old_len / new_len) - 0.5
    i0 = np.floor(src).astype(np.int64)
    t = src - i0
    lo = np.clip(i0, 0, old_len - 1)
    hi = np.clip(i0 + 1, 0, old_len - 1)
    a = np.take(arr, lo, axis=axis)
    b = np.take(arr, hi, axis=axis)
    shape = [1] * arr.ndim
    shape[axis] = new_len
    t = t.reshape(shape)
    return a * (1.0 - t) + b * t


def resize_to(img: np.ndarray, h: int, w: int) -> np.ndarray:
    """Bilinear resize to (h, w); values stay in [0, 1].

    Uses the half-pixel-center convention, so resizing to the source size
    reproduces the input exactly.
    """
    img = as_image_f(img)
    if h < 2 or w < 2:
        raise ShapeError(f"target size must be at least 2x2, got {h}x{w}")
    out = _resample_axis(img, h, axis=0)
    out = _resample_axis(out, w, axis=1)
    return np.clip(out, 0.0, 1.0)


def _cache_key(path: Path, h: int, w: int) -> str:
    stat = path.stat()
    tag = f"{path.resolve()}:{stat.st_mtime_ns}:{stat.st_size}:{h}x{w}"
    return hashlib.sha1(tag.encode()).hexdigest()


def load_image_resized(path, h: int, w: int, cache_dir=None) -> np.ndarray:
    """Decode + resize, with an optional .npy cache keyed on path and mtime.

    The cache directory comes from the argument or the AQUAGAN_CACHE
    environment variable; without either, this is just decode + resize.
    """
    path = Path(path)
    if cache_dir is None:
        cache_dir = os.environ.get(CACHE_ENV_VAR)
    if cache_dir:
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
        entry = cache_dir / f"{_cache_key(path, h, w)}.npy"
        if entry.exists():
            return np.load(entry)
        img = resize_to(decode_image(path), h, w)
        np.save(entry, img)
        return img
    return resize_to(decode_image(path), h, w)

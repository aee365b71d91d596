"""Dataset ingestion: directory scanning, deterministic splits, flips.

Two fixed on-disk layouts are understood, mirroring common underwater
datasets: unpaired trees with `good/` and `bad/` class subdirectories, and
paired trees with `trainA/` (inputs) and `trainB/` (targets) matched by
filename stem. Labels always come from directory membership, never from
filename parsing.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import DataError
from .imagecore import load_image_resized

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")

GOOD = "good"
BAD = "bad"


@dataclass(frozen=True)
class UnpairedSample:
    path: Path
    label: str

    @property
    def sample_id(self) -> str:
        return f"{self.label}/{self.path.name}"


@dataclass(frozen=True)
class SamplePair:
    input_path: Path
    target_path: Path
    stem: str

    @property
    def sample_id(self) -> str:
        return self.stem


@dataclass(frozen=True)
class SplitSpec:
    """Validation split request: a fraction, or an absolute per-class count."""

    seed: int
    val_fraction: float = 0.15
    val_count: int = None


def _listdir_images(directory: Path):
    return sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )


def scan_unpaired(root) -> list:
    """List an unpaired tree (`good/`, `bad/`), sorted and labeled."""
    root = Path(root)
    samples = []
    for label in (GOOD, BAD):
        sub = root / label
        if not sub.is_dir():
            raise DataError(f"missing class directory {sub}")
        files = _listdir_images(sub)
        if not files:
            raise DataError(f"class directory {sub} has no images")
        samples.extend(UnpairedSample(path=p, label=label) for p in files)
    return samples


def scan_paired(root) -> list:
    """Match `trainA/` inputs with `trainB/` targets by filename stem.

    Unmatched files on either side are logged as warnings and skipped;
    zero matches is an error.
    """
    root = Path(root)
    sides = {}
    for name in ("trainA", "trainB"):
        sub = root / name
        if not sub.is_dir():
            raise DataError(f"missing paired directory {sub}")
        by_stem = {}
        for p in _listdir_images(sub):
            if p.stem in by_stem:
                log.warning("duplicate stem %r in %s; keeping %s", p.stem, sub, by_stem[p.stem].name)
                continue
            by_stem[p.stem] = p
        sides[name] = by_stem
    stems_a, stems_b = set(sides["trainA"]), set(sides["trainB"])
    for stem in sorted(stems_a ^ stems_b):
        side = "trainA" if stem in stems_a else "trainB"
        log.warning("unmatched stem %r (only in %s)", stem, side)
    matched = sorted(stems_a & stems_b)
    if not matched:
        raise DataError(f"no matched trainA/trainB stems under {root}")
    return [
        SamplePair(input_path=sides["trainA"][s], target_path=sides["trainB"][s], stem=s)
        for s in matched
    ]


def _split_group(group, n_val, rng):
    if n_val < 1 or n_val >= len(group):
        raise DataError(
            f"cannot reserve {n_val} validation samples from a group of {len(group)}"
        )
    order = rng.permutation(len(group))
    val_idx = set(order[:n_val].tolist())
    train = [s for i, s in enumerate(group) if i not in val_idx]
    val = [s for i, s in enumerate(group) if i in val_idx]
    return train, val


def split(samples, spec: SplitSpec):
    """Seed-deterministic, class-stratified (train, validation) split."""
    samples = sorted(samples, key=lambda s: s.sample_id)
    groups = {}
    for s in samples:
        key = getattr(s, "label", "paired")
        groups.setdefault(key, []).append(s)
    rng = np.random.default_rng(spec.seed)
    train, val = [], []
    for key in sorted(groups):
        group = groups[key]
        n_val = spec.val_count if spec.val_count is not None else int(
            round(spec.val_fraction * len(group))
        )
        t, v = _split_group(group, n_val, rng)
        train.extend(t)
        val.extend(v)
    return train, val


def save_split(path, train, val) -> None:
    """Persist a split as ids only, for exact experiment reproduction."""
    payload = {
        "train": [s.sample_id for s in train],
        "val": [s.sample_id for s in val],
    }
    Path(path).write_text(json.dumps(payload, indent=1))


def load_split(path, samples):
    """Rebuild (train, val) lists from a saved id listing."""
    payload = json.loads(Path(path).read_text())
    by_id = {s.sample_id: s for s in samples}
    out = []
    for key in ("train", "val"):
        try:
            out.append([by_id[i] for i in payload[key]])
        except KeyError as exc:
            raise DataError(f"split file {path} references unknown sample {exc}") from None
    return tuple(out)


# ---------------------------------------------------------------------------
# augmentation


def _flip_decisions(seed: int, epoch: int, index: int):
    rng = np.random.default_rng((seed, epoch, index))
    return bool(rng.random() < 0.5), bool(rng.random() < 0.5)


def _apply_flips(img: np.ndarray, flip_h: bool, flip_v: bool) -> np.ndarray:
    if flip_h:
        img = img[:, ::-1]
    if flip_v:
        img = img[::-1, :]
    return np.ascontiguousarray(img)


def augment_flips(images, seed: int, epoch: int = 0, indices=None):
    """Independently flip each image horizontally/vertically with p = 0.5.

    The flip pattern is a pure function of (seed, epoch, per-sample index),
    so concurrent or re-ordered loading cannot change results.
    """
    if indices is None:
        indices = range(len(images))
    out = []
    for idx, img in zip(indices, images):
        fh, fv = _flip_decisions(seed, epoch, idx)
        out.append(_apply_flips(img, fh, fv))
    return out


def augment_flips_paired(pairs, seed: int, epoch: int = 0, indices=None):
    """Like augment_flips, but each (input, target) pair flips identically."""
    if indices is None:
        indices = range(len(pairs))
    out = []
    for idx, (a, b) in zip(indices, pairs):
        fh, fv = _flip_decisions(seed, epoch, idx)
        out.append((_apply_flips(a, fh, fv), _apply_flips(b, fh, fv)))
    return out


# ---------------------------------------------------------------------------
# batch assembly


def load_images(paths, size: int, cache_dir=None) -> list:
    return [load_image_resized(p, size, size, cache_dir=cache_dir) for p in paths]


def to_torch(images) -> torch.Tensor:
    """Stack HWC float images into an NCHW float32 tensor."""
    batch = np.stack([np.asarray(img, dtype=np.float32) for img in images])
    return torch.from_numpy(batch).permute(0, 3, 1, 2).contiguous()


def from_torch(batch: torch.Tensor) -> list:
    """NCHW tensor back to a list of HWC float64 arrays clipped to [0, 1]."""
    arr = batch.detach().cpu().numpy().transpose(0, 2, 3, 1).astype(np.float64)
    return [np.clip(a, 0.0, 1.0) for a in arr]

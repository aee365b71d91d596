"""Networks: the U-Net style enhancement generator and the quality classifier.

Both are ordinary torch modules taking NCHW float batches in [0, 1]. The
classifier doubles as the GAN discriminator; its score convention is
0 = good quality, 1 = bad. Parameter initialization is explicitly seeded
so runs are reproducible without touching torch global RNG state.
"""

import io
import hashlib
import json
import math
import zipfile
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from .errors import CheckpointError, ShapeError, SpecMismatchError


@dataclass(frozen=True)
class GeneratorSpec:
    """Architecture knobs for the generator.

    Five stride-2 encoder stages reduce spatial size by 32x, so the
    bottleneck is (input_size/32)^2 x channels[-1]; 256 input gives the
    8x8x256 compact representation. input_size records the configured
    working resolution; forward accepts any size divisible by 32.
    """

    input_size: int = 256
    channels: tuple = (32, 64, 128, 256, 256)
    leaky_slope: float = 0.2

    def __post_init__(self):
        if len(self.channels) != 5:
            raise ValueError("generator needs exactly 5 encoder stages")
        if self.input_size % 32 != 0 or self.input_size < 32:
            raise ValueError("input_size must be a positive multiple of 32")


@dataclass(frozen=True)
class ClassifierSpec:
    """Backbone id plus the fixed input resolution the classifier expects."""

    backbone: str = "reference-small-cnn"
    input_size: int = 256


def _down_block(c_in, c_out, slope):
    # bias is omitted wherever batch norm immediately follows: the norm's
    # shift makes the conv bias a dead parameter (zero gradient forever).
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, 4, stride=2, padding=1, bias=False),
        nn.BatchNorm2d(c_out),
        nn.LeakyReLU(slope),
    )


class _UpBlock(nn.Module):
    def __init__(self, c_in, c_skip, c_out):
        super().__init__()
        self.up = nn.ConvTranspose2d(c_in, c_out, 4, stride=2, padding=1)
        self.refine = nn.Sequential(
            nn.Conv2d(c_out + c_skip, c_out, 3, padding=1, bias=False),
            nn.BatchNorm2d(c_out),
            nn.ReLU(),
        )

    def forward(self, x, skip=None):
        x = torch.relu(self.up(x))
        if skip is not None:
            x = torch.cat([x, skip], dim=1)
        return self.refine(x)


class Generator(nn.Module):
    """Encoder-decoder with skip connections (e1,d4), (e2,d3), (e3,d2), (e4,d1).

    Encoder stages: 4x4 stride-2 conv, batch norm, leaky ReLU. Decoder
    stages d1-d5: 4x4 stride-2 transposed conv, ReLU, skip concat, 3x3
    refine conv, batch norm, ReLU. The final stage d6 is a 3x3 projection
    to RGB through a sigmoid, so outputs always land in [0, 1].
    """

    def __init__(self, spec: GeneratorSpec = GeneratorSpec()):
        super().__init__()
        self.spec = spec
        c = spec.channels
        slope = spec.leaky_slope
        self.enc = nn.ModuleList(
            [_down_block(3 if i == 0 else c[i - 1], c[i], slope) for i in range(5)]
        )
        # decoder output widths mirror the encoder back down the ladder
        dec_out = (c[3], c[2], c[1], c[0], c[0])
        dec_in = (c[4], c[3], c[2], c[1], c[0])
        skips = (c[3], c[2], c[1], c[0], 0)
        self.dec = nn.ModuleList(
            [_UpBlock(dec_in[i], skips[i], dec_out[i]) for i in range(5)]
        )
        self.out = nn.Conv2d(dec_out[-1], 3, 3, padding=1)

    def _check_input(self, x):
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"generator expects (N, 3, H, W) batches, got {tuple(x.shape)}")
        h, w = x.shape[2], x.shape[3]
        if h % 32 or w % 32 or h < 32 or w < 32:
            raise ShapeError(f"spatial dims must be positive multiples of 32, got {h}x{w}")

    def forward(self, x):
        return self.trace(x)[0]

    def trace(self, x):
        """Forward pass returning (output, stage activation shapes)."""
        self._check_input(x)
        shapes = {}
        feats = []
        h = x
        for i, stage in enumerate(self.enc):
            h = stage(h)
            feats.append(h)
            shapes[f"e{i + 1}"] = tuple(h.shape[1:])
        skips = [feats[3], feats[2], feats[1], feats[0], None]
        for i, stage in enumerate(self.dec):
            h = stage(h, skips[i])
            shapes[f"d{i + 1}"] = tuple(h.shape[1:])
        y = torch.sigmoid(self.out(h))
        shapes["out"] = tuple(y.shape[1:])
        return y, shapes


class SmallCnnClassifier(nn.Module):
    """Reference quality classifier: 4 stride-2 conv blocks, GAP, one unit.

    About 100k parameters; small enough to train on CPU in minutes while
    exposing the same score contract as heavier backbones.
    """

    def __init__(self, spec: ClassifierSpec):
        super().__init__()
        self.spec = spec
        widths = (16, 32, 64, 128)
        blocks = []
        c_in = 3
        for c_out in widths:
            blocks.append(_down_block(c_in, c_out, 0.2))
            c_in = c_out
        self.features = nn.Sequential(*blocks)
        self.head = nn.Linear(widths[-1], 1)

    def _check_input(self, x):
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"classifier expects (N, 3, H, W) batches, got {tuple(x.shape)}")
        size = self.spec.input_size
        if x.shape[2] != size or x.shape[3] != size:
            raise ShapeError(
                f"classifier is configured for {size}x{size} inputs, got "
                f"{x.shape[2]}x{x.shape[3]}"
            )

    def logits(self, x):
        self._check_input(x)
        h = self.features(x)
        return self.head(h.mean(dim=(2, 3))).squeeze(1)

    def forward(self, x):
        return torch.sigmoid(self.logits(x))


class _InceptionAdapter(nn.Module):
    """torchvision InceptionV3 with the output layer swapped for one unit."""

    def __init__(self, spec: ClassifierSpec):
        super().__init__()
        try:
            from torchvision import models
        except ImportError as exc:
            raise ImportError(
                "the inception-v3-adapted backbone needs torchvision "
                "(install the 'inception' extra)"
            ) from exc
        self.spec = spec
        self.net = models.inception_v3(
            weights=None, aux_logits=False, init_weights=True, num_classes=1
        )

    def logits(self, x):
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"classifier expects (N, 3, H, W) batches, got {tuple(x.shape)}")
        size = self.spec.input_size
        if x.shape[2] != size or x.shape[3] != size:
            raise ShapeError(
                f"classifier is configured for {size}x{size} inputs, got "
                f"{x.shape[2]}x{x.shape[3]}"
            )
        return self.net(x).squeeze(1)

    def forward(self, x):
        return torch.sigmoid(self.logits(x))


BACKBONES = {
    "reference-small-cnn": SmallCnnClassifier,
    "inception-v3-adapted": _InceptionAdapter,
}


def register_backbone(name: str, builder) -> None:
    """Add a classifier backbone; builder takes a ClassifierSpec."""
    BACKBONES[name] = builder


def build_classifier(spec: ClassifierSpec) -> nn.Module:
    try:
        builder = BACKBONES[spec.backbone]
    except KeyError:
        raise ValueError(
            f"unknown backbone {spec.backbone!r}; available: {sorted(BACKBONES)}"
        ) from None
    return builder(spec)


def init_params(module: nn.Module, seed: int) -> nn.Module:
    """Deterministically (re)initialize all parameters from one seed.

    Conv / transposed-conv / linear weights get Kaiming-style fan-in
    normal values (fan = input channels x kernel area), biases zero,
    batch-norm scale 1 and shift 0 with reset running statistics. Module
    iteration order is fixed by construction, so a seed fully determines
    the parameters.
    """
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, nn.Conv2d):
                fan_in = m.weight.shape[1] * m.weight.shape[2] * m.weight.shape[3]
            elif isinstance(m, nn.ConvTranspose2d):
                fan_in = m.weight.shape[0] * m.weight.shape[2] * m.weight.shape[3]
            elif isinstance(m, nn.Linear):
                fan_in = m.weight.shape[1]
            elif isinstance(m, (nn.BatchNorm1d, nn.BatchNorm2d)):
                m.weight.fill_(1.0)
                m.bias.zero_()
                m.running_mean.zero_()
                m.running_var.fill_(1.0)
                m.num_batches_tracked.zero_()
                continue
            else:
                continue
            std = math.sqrt(2.0 / fan_in)
            noise = torch.randn(m.weight.shape, generator=g, dtype=torch.float32)
            m.weight.copy_(noise * std)
            if m.bias is not None:
                m.bias.zero_()
    return module


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_VERSION = 1
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)  # fixed timestamps keep reruns byte-identical


@dataclass
class Checkpoint:
    kind: str
    spec: dict
    meta: dict
    state: dict


def _spec_dict(spec) -> dict:
    return json.loads(json.dumps(asdict(spec)))


def save_checkpoint(path, module: nn.Module, kind: str, spec, meta: dict) -> None:
    """Write a versioned, checksummed parameter container.

    ``kind`` names what the parameters belong to ("generator" or
    "classifier"); ``meta`` is free-form JSON (variant tag, epoch, loss
    weights, training config). Identical parameters and meta always
    produce identical bytes.
    """
    state = {k: v.detach().cpu().numpy() for k, v in module.state_dict().items()}
    blob = io.BytesIO()
    np.savez(blob, **state)
    blob_bytes = blob.getvalue()
    manifest = {
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "spec": _spec_dict(spec),
        "meta": meta,
        "params": [
            {"name": k, "shape": list(v.shape), "dtype": str(v.dtype)}
            for k, v in state.items()
        ],
        "sha256": hashlib.sha256(blob_bytes).hexdigest(),
    }
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        info = zipfile.ZipInfo("manifest.json", date_time=_ZIP_DATE)
        zf.writestr(info, json.dumps(manifest, sort_keys=True, indent=1))
        info = zipfile.ZipInfo("params.npz", date_time=_ZIP_DATE)
        zf.writestr(info, blob_bytes)


def load_checkpoint(path) -> Checkpoint:
    """Read a checkpoint, verifying version and content checksum."""
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            blob_bytes = zf.read("params.npz")
    except (OSError, zipfile.BadZipFile, KeyError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if manifest.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint {path} has version {manifest.get('version')}, "
            f"expected {CHECKPOINT_VERSION}"
        )
    if hashlib.sha256(blob_bytes).hexdigest() != manifest.get("sha256"):
        raise CheckpointError(f"checkpoint {path} is corrupted (checksum mismatch)")
    with np.load(io.BytesIO(blob_bytes)) as npz:
        state = {k: torch.from_numpy(npz[k].copy()) for k in npz.files}
    return Checkpoint(
        kind=manifest["kind"], spec=manifest["spec"], meta=manifest["meta"], state=state
    )


def restore(module: nn.Module, ckpt: Checkpoint, kind: str, spec) -> nn.Module:
    """Load checkpoint parameters into module, validating kind and spec."""
    if ckpt.kind != kind:
        raise SpecMismatchError(f"checkpoint holds {ckpt.kind!r} parameters, expected {kind!r}")
    if ckpt.spec != _spec_dict(spec):
        raise SpecMismatchError(
            f"checkpoint spec {ckpt.spec} does not match requested {_spec_dict(spec)}"
        )
    try:
        module.load_state_dict(ckpt.state)
    except RuntimeError as exc:
        raise SpecMismatchError(f"checkpoint parameters do not fit the module: {exc}") from exc
    return module


def state_checksum(module: nn.Module) -> str:
    """SHA-256 over all parameters and buffers, for change detection."""
    h = hashlib.sha256()
    for name, tensor in module.state_dict().items():
        h.update(name.encode())
        h.update(tensor.detach().cpu().numpy().tobytes())
    return h.hexdigest()

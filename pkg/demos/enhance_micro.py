"""End-to-end enhancement walkthrough on a tiny paired set, via the CLI.

Builds four (degraded, reference) pairs, trains the L2 variant just long
enough to beat the inputs, then runs enhance, evaluate, and grid exactly
as you would from the shell. Expect roughly a minute on CPU. Outputs stay
in demos/out/ so you can open the report and the comparison strips:

    python3 demos/enhance_micro.py
    ls demos/out/
"""

import shutil
from pathlib import Path

import numpy as np

from aquagan.cli import main as cli
from aquagan.imagecore import encode_image
from aquagan.nets import ClassifierSpec, SmallCnnClassifier, init_params, save_checkpoint

OUT = Path(__file__).parent / "out"
SIZE = 64
STEPS = 150


def write_pairs(root: Path, n=4, seed=20):
    (root / "trainA").mkdir(parents=True)
    (root / "trainB").mkdir(parents=True)
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:SIZE, 0:SIZE].astype(np.float64) / (SIZE - 1)
    for i in range(n):
        ca, cb, cc, cd = rng.random((4, 3))
        ref = 0.5 * (np.multiply.outer(1 - yy, ca) + np.multiply.outer(yy, cb))
        ref += 0.5 * (np.multiply.outer(1 - xx, cc) + np.multiply.outer(xx, cd))
        for _ in range(3):
            h, w = rng.integers(8, 25, size=2)
            r, c = rng.integers(0, SIZE - h), rng.integers(0, SIZE - w)
            ref[r : r + h, c : c + w] = rng.random(3)
        ref = np.clip(ref, 0, 1)
        encode_image(ref, root / "trainB" / f"scene{i}.png")
        # strong blue-green cast stands in for water absorption
        encode_image(np.clip(ref * [0.3, 0.6, 0.9] + [0, 0.04, 0.28], 0, 1),
                     root / "trainA" / f"scene{i}.png")


def run(argv):
    print("$ aquagan " + " ".join(argv))
    code = cli(argv)
    if code != 0:
        raise SystemExit(f"command failed with exit code {code}")


def main():
    if OUT.exists():
        shutil.rmtree(OUT)
    data = OUT / "data"
    write_pairs(data)

    # the generator trains against a quality score, so it needs a
    # discriminator checkpoint; a freshly initialized one is enough here
    disc_spec = ClassifierSpec(input_size=SIZE)
    disc = init_params(SmallCnnClassifier(disc_spec), 0)
    disc_path = OUT / "discriminator.ckpt"
    save_checkpoint(disc_path, disc, kind="classifier", spec=disc_spec, meta={})

    run(["gan-train", "--data", str(data), "--out", str(OUT / "session"),
         "--variant", "l2", "--checkpoint", str(disc_path),
         "--epochs", str(STEPS), "--batch-size", "4", "--input-size", str(SIZE),
         "--seed", "1", "--deterministic"])

    run(["enhance", "--checkpoint", str(OUT / "session" / "generator.ckpt"),
         "--data", str(data / "trainA"), "--out", str(OUT / "enhanced")])

    run(["evaluate", "--enhanced", str(OUT / "enhanced"),
         "--reference", str(data / "trainB"), "--input", str(data / "trainA"),
         "--out", str(OUT / "report")])

    run(["grid", "--input", str(data / "trainA"),
         "--enhanced", str(OUT / "enhanced"),
         "--reference", str(data / "trainB"), "--out", str(OUT / "grids")])

    print()
    print((OUT / "report" / "report.md").read_text())
    print(f"per-image numbers: {OUT / 'report' / 'report.csv'}")
    print(f"comparison strips: {OUT / 'grids'}")


if __name__ == "__main__":
    main()

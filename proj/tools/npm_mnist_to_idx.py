#!/usr/bin/env python3
"""Convert the digit JSON files shipped in the `mnist` npm package to IDX.

The package bundles 10 000 grayscale MNIST digits (one JSON file per class,
flattened 28x28 images with values in [0, 1]). The output directory receives
t10k-images-idx3-ubyte / t10k-labels-idx1-ubyte, which the sleepnet loader
reads from <dataset-root>/mnist/.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/npm_mnist_to_idx.py package/src/digits $DATA/mnist
"""
import json
import struct
import sys
from pathlib import Path


def main(src: Path, dst: Path) -> None:
    images, labels = [], []
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        if len(data) % 784:
            raise SystemExit(f"{digit}.json: length {len(data)} is not a multiple of 784")
        for i in range(0, len(data), 784):
            images.append(bytes(round(v * 255) for v in data[i:i + 784]))
            labels.append(digit)
    dst.mkdir(parents=True, exist_ok=True)
    with open(dst / "t10k-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        for img in images:
            f.write(img)
    with open(dst / "t10k-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))
    print(f"wrote {len(images)} images to {dst}")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        raise SystemExit(__doc__)
    main(Path(sys.argv[1]), Path(sys.argv[2]))

#!/usr/bin/env python3
# Copyright 2026 The qrc-rydberg Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Builds the data/ fixtures from redistributable package archives.

MNIST digits come from the npm `mnist` package (1.1.0, MIT), which ships
~1000 original MNIST digits per class as JSON arrays of intensity/255.
The Santa Fe laser series (data set A and its continuation) comes from the
`reservoirpy` wheel (MIT), which ships it as a .npy file.

    npm pack mnist@1.1.0
    pip download --no-deps reservoirpy==0.4.2
    scripts/prepare_datasets.py --mnist-tgz mnist-1.1.0.tgz \
        --reservoirpy-whl reservoirpy-0.4.2-py3-none-any.whl --out data
"""
import argparse
import io
import json
import pathlib
import struct
import tarfile
import zipfile

import numpy as np


def write_idx_images(path, images):
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())


def mnist_from_npm(tgz, digits):
    images, labels = [], []
    with tarfile.open(tgz) as tar:
        for d in digits:
            member = tar.extractfile(f"package/src/digits/{d}.json")
            flat = np.asarray(json.load(member)["data"], dtype=np.float64)
            imgs = np.rint(flat.reshape(-1, 28, 28) * 255.0).clip(0, 255)
            images.append(imgs)
            labels.extend([d] * len(imgs))
    images = np.concatenate(images)
    labels = np.asarray(labels)
    # Interleave classes (rank within class, then class) so prefixes stay balanced.
    rank = np.concatenate([np.arange(np.sum(labels == d)) for d in digits])
    order = np.lexsort((labels, rank))
    return images[order], labels[order]


def santafe_from_wheel(whl):
    with zipfile.ZipFile(whl) as z:
        return np.load(io.BytesIO(z.read("reservoirpy/datasets/santafe_laser.npy"))).ravel()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--mnist-tgz", required=True)
    ap.add_argument("--reservoirpy-whl", required=True)
    ap.add_argument("--digits", default="3,8")
    ap.add_argument("--out", default="data")
    args = ap.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    digits = [int(d) for d in args.digits.split(",")]
    tag = "".join(str(d) for d in digits)

    images, labels = mnist_from_npm(args.mnist_tgz, digits)
    write_idx_images(out / f"mnist{tag}-images-idx3-ubyte", images)
    write_idx_labels(out / f"mnist{tag}-labels-idx1-ubyte", labels)
    print(f"mnist {digits}: {len(labels)} images")

    series = santafe_from_wheel(args.reservoirpy_whl)
    np.savetxt(out / "santafe_laser.csv", series, fmt="%d")
    print(f"santa fe laser: {len(series)} points")


if __name__ == "__main__":
    main()

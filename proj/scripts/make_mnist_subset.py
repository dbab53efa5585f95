#!/usr/bin/env python3
# Copyright 2026 The KLMS Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# =============================================================================
"""Writes a 2,000/1,000 MNIST train/test subset in IDX format.

Input is the 5,000-sample MNIST CSV shipped inside the mlxtend wheel
(mlxtend/data/data/mnist_5k.csv.gz: 784 pixel columns, label last).
"""
import argparse
import gzip
import struct
from pathlib import Path

import numpy as np


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        f.write(images.astype(np.uint8).tobytes())


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("csv_gz")
    parser.add_argument("out_dir")
    parser.add_argument("--train", type=int, default=2000)
    parser.add_argument("--test", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=2024)
    args = parser.parse_args()

    with gzip.open(args.csv_gz, "rt") as f:
        rows = np.loadtxt(f, delimiter=",", dtype=np.int64)
    pixels, labels = rows[:, :784], rows[:, 784]
    order = np.random.default_rng(args.seed).permutation(len(rows))
    train = order[: args.train]
    test = order[args.train : args.train + args.test]

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_images(out / "train-images-idx3-ubyte", pixels[train])
    write_labels(out / "train-labels-idx1-ubyte", labels[train])
    write_images(out / "t10k-images-idx3-ubyte", pixels[test])
    write_labels(out / "t10k-labels-idx1-ubyte", labels[test])


if __name__ == "__main__":
    main()

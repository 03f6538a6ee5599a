#!/usr/bin/env python3
# Copyright 2026 The priormix Authors. All Rights Reserved.
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
"""Regenerates the bundled CSV datasets under data/.

digits_{train,test}.csv: the scikit-learn 8x8 handwritten digits set
(1797 samples, 64 features, 10 classes), split 1347/450 with a fixed
permutation. Used as the offline stand-in for Pendigits.

synthetic_200.csv: 200 samples of three 2-D Gaussian classes for smoke tests.
"""
import os
import numpy as np
from sklearn.datasets import load_digits

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data")


def write(path, labels, features, fmt):
    d = features.shape[1]
    with open(path, "w") as f:
        f.write("label," + ",".join(f"f{j + 1}" for j in range(d)) + "\n")
        for y, row in zip(labels, features):
            f.write(str(int(y)) + "," + ",".join(fmt(v) for v in row) + "\n")


def main():
    digits = load_digits()
    perm = np.random.RandomState(0).permutation(len(digits.target))
    x = digits.data[perm]
    y = digits.target[perm] + 1
    as_int = lambda v: str(int(v))
    write(os.path.join(OUT, "digits_train.csv"), y[:1347], x[:1347], as_int)
    write(os.path.join(OUT, "digits_test.csv"), y[1347:], x[1347:], as_int)

    rng = np.random.RandomState(1)
    means = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
    labels = np.repeat([1, 2, 3], [67, 67, 66])
    feats = means[labels - 1] + rng.randn(len(labels), 2)
    write(os.path.join(OUT, "synthetic_200.csv"), labels, feats,
          lambda v: f"{v:.6f}")


if __name__ == "__main__":
    main()

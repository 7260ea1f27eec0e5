#!/usr/bin/env python3
"""Export the bundled natural-image corpus as 8-bit PGM crops.

The photographs come from scikit-image's sample data (public domain / CC0)
and matplotlib's sample data. Color images are converted by luminance
average. Crops are non-overlapping 256x256 tiles.
"""
import argparse
import os

import numpy as np
import matplotlib
import skimage.data
import skimage.io

SOURCES = [
    # name, number of tiles kept, split
    ("astronaut", 4, "train"),
    ("camera", 4, "train"),
    ("coffee", 2, "train"),
    ("chelsea", 1, "test"),
    ("grass", 4, "train"),
    ("gravel", 4, "test"),
    ("brick", 4, "train"),
    ("moon", 4, "test"),
    ("rocket", 2, "train"),
    ("motorcycle_left", 2, "test"),
    ("grace_hopper", 2, "train"),
    ("coins", 1, "test"),
]

# Interleave sources so that any prefix of the manifest mixes content.
ORDER = ["astronaut", "camera", "coffee", "grass", "moon", "rocket",
         "motorcycle_left", "grace_hopper", "gravel", "brick", "chelsea", "coins"]


def load(name):
    if name == "grace_hopper":
        path = os.path.join(matplotlib.get_data_path(), "sample_data", "grace_hopper.jpg")
        img = skimage.io.imread(path)
    elif name == "motorcycle_left":
        path = os.path.join(os.path.dirname(skimage.data.__file__), "motorcycle_left.png")
        img = skimage.io.imread(path)
    else:
        img = getattr(skimage.data, name)()
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        img = img[..., :3].mean(axis=2)
    return img


def tiles(img, count, size):
    h, w = img.shape
    out = []
    for r in range(h // size):
        for c in range(w // size):
            out.append(img[r * size:(r + 1) * size, c * size:(c + 1) * size])
    return out[:count]


def write_pgm(path, arr):
    arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (arr.shape[1], arr.shape[0]))
        f.write(arr.tobytes())


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "corpus"))
    ap.add_argument("--size", type=int, default=256)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    per_source = {name: [] for name, _, _ in SOURCES}
    split = {name: s for name, _, s in SOURCES}
    for name, count, _ in SOURCES:
        for k, tile in enumerate(tiles(load(name), count, args.size)):
            fname = "%s_%d.pgm" % (name, k)
            write_pgm(os.path.join(args.out, fname), tile)
            per_source[name].append(fname)
    lines = ["# natural-image corpus: path [split]"]
    depth = max(len(v) for v in per_source.values())
    for k in range(depth):
        for name in ORDER:
            if k < len(per_source[name]):
                lines.append("%s %s" % (per_source[name][k], split[name]))
    with open(os.path.join(args.out, "manifest.txt"), "w") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()

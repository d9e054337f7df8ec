#!/usr/bin/env python3
"""Fetch MNIST into IDX files under $IDINIT_DATA_DIR (default ./data).

Tries the canonical gzipped IDX mirrors first (full 60k/10k split). When no
mirror is reachable, falls back to the 10,000-sample MNIST subset bundled in
the npm `mnist` package and writes an 8k/2k split in the same IDX format.
"""

import gzip
import json
import os
import random
import shutil
import struct
import subprocess
import sys
import tarfile
import tempfile
import urllib.request

MIRRORS = [
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
]
FILES = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
]


def data_dir() -> str:
    return os.environ.get("IDINIT_DATA_DIR", "./data")


def have_all(dest: str) -> bool:
    return all(os.path.exists(os.path.join(dest, f)) for f in FILES)


def fetch_canonical(dest: str) -> bool:
    for mirror in MIRRORS:
        try:
            for name in FILES:
                url = mirror + name + ".gz"
                print(f"fetching {url}")
                with urllib.request.urlopen(url, timeout=30) as resp:
                    payload = gzip.decompress(resp.read())
                with open(os.path.join(dest, name), "wb") as out:
                    out.write(payload)
            return True
        except Exception as err:  # try the next mirror
            print(f"  mirror failed: {err}")
    return False


def write_idx_images(path: str, images: list) -> None:
    with open(path, "wb") as out:
        out.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        for img in images:
            out.write(bytes(img))


def write_idx_labels(path: str, labels: list) -> None:
    with open(path, "wb") as out:
        out.write(struct.pack(">II", 0x801, len(labels)))
        out.write(bytes(labels))


def fetch_npm_subset(dest: str) -> bool:
    """Build IDX files from the npm `mnist` package (10k genuine samples)."""
    tmp = tempfile.mkdtemp(prefix="mnist-npm-")
    try:
        print("falling back to the npm 'mnist' package (10k-sample subset)")
        subprocess.run(
            ["npm", "pack", "mnist@1.1.0"],
            cwd=tmp, check=True,
            stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
        )
        tarball = next(f for f in os.listdir(tmp) if f.endswith(".tgz"))
        with tarfile.open(os.path.join(tmp, tarball)) as tf:
            tf.extractall(tmp)

        samples = []  # (label, pixel bytes)
        for digit in range(10):
            with open(os.path.join(tmp, "package", "src", "digits", f"{digit}.json")) as f:
                flat = json.load(f)["data"]
            for off in range(0, len(flat), 784):
                pixels = [min(255, max(0, round(v * 255))) for v in flat[off:off + 784]]
                samples.append((digit, pixels))

        rng = random.Random(20240101)  # fixed split, reproducible files
        rng.shuffle(samples)
        n_test = len(samples) // 5
        test, train = samples[:n_test], samples[n_test:]

        write_idx_images(os.path.join(dest, FILES[0]), [p for _, p in train])
        write_idx_labels(os.path.join(dest, FILES[1]), [l for l, _ in train])
        write_idx_images(os.path.join(dest, FILES[2]), [p for _, p in test])
        write_idx_labels(os.path.join(dest, FILES[3]), [l for l, _ in test])
        print(f"wrote {len(train)} train / {len(test)} test samples to {dest}")
        print("note: this is the redistributable 10k subset, not the full 60k/10k split")
        return True
    except Exception as err:
        print(f"  npm fallback failed: {err}")
        return False
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def main() -> int:
    dest = data_dir()
    os.makedirs(dest, exist_ok=True)
    if have_all(dest):
        print(f"MNIST already present under {dest}")
        return 0
    if fetch_canonical(dest):
        print(f"wrote the full MNIST split to {dest}")
        return 0
    if fetch_npm_subset(dest):
        return 0
    print("error: no MNIST source reachable", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())

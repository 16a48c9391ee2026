"""Sweep error bounds for both codecs on a synthetic volume and print the
rate-distortion table that `mrcompress eval` would compute one point at a time.
"""

import numpy as np

from mrcompress.grid import Volume
from mrcompress.metrics import rd_sweep, write_jsonl


def synthetic_volume(n=48, seed=0):
    rng = np.random.default_rng(seed)
    z, y, x = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    data = np.zeros((n, n, n))
    for _ in range(5):
        cx, cy, cz = rng.uniform(0, n, 3)
        w = rng.uniform(n / 10, n / 5)
        data += rng.uniform(0.5, 1.5) * np.exp(
            -((x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2) / (2 * w * w)
        )
    return Volume(data)


def main():
    v = synthetic_volume()
    ebs = [1e-4, 1e-3, 1e-2, 1e-1]
    for codec in ("interp", "block"):
        points = rd_sweep(v, ebs, codec=codec, lossless="zlib")
        print(f"codec={codec}")
        print(f"  {'eb':>8}  {'cr':>8}  {'psnr_db':>8}  {'ssim':>7}")
        for p in points:
            print(f"  {p.eb:8.1e}  {p.cr:8.2f}  {p.psnr_db:8.2f}  {p.ssim:7.4f}")
        write_jsonl(points, f"rd_{codec}.jsonl")
        print(f"  wrote rd_{codec}.jsonl")


if __name__ == "__main__":
    main()

"""Synthetic fields and small utilities shared across the test suite."""

import numpy as np

from mrcompress.grid import Volume


def coords(dims):
    nx, ny, nz = dims
    return np.meshgrid(
        np.arange(nz, dtype=np.float64),
        np.arange(ny, dtype=np.float64),
        np.arange(nx, dtype=np.float64),
        indexing="ij",
    )


def smooth_field(dims, seed=0, noise=0.0) -> Volume:
    zz, yy, xx = coords(dims)
    nx, ny, nz = dims
    data = (
        np.sin(2.6 * np.pi * xx / max(nx, 2))
        * np.cos(1.7 * np.pi * yy / max(ny, 2))
        + 0.5 * np.sin(2.1 * np.pi * zz / max(nz, 2))
    )
    if noise:
        rng = np.random.default_rng(seed)
        data = data + noise * rng.standard_normal(data.shape)
    return Volume(data)


def noisy_field(dims, seed=0, scale=1.0) -> Volume:
    rng = np.random.default_rng(seed)
    nz, ny, nx = dims[2], dims[1], dims[0]
    return Volume(scale * rng.standard_normal((nz, ny, nx)))


def gaussian_bumps(dims, centers, widths, amps, background=0.0) -> Volume:
    """Sum of Gaussians; centers in (x, y, z) order."""
    zz, yy, xx = coords(dims)
    data = np.full(zz.shape, background, dtype=np.float64)
    for (cx, cy, cz), w, a in zip(centers, widths, amps):
        data += a * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2 + (zz - cz) ** 2) / (2.0 * w**2))
    return Volume(data)


def sum_of_gaussians(dims, n=6, seed=0) -> Volume:
    rng = np.random.default_rng(seed)
    nx, ny, nz = dims
    centers = np.column_stack(
        [rng.uniform(0, nx, n), rng.uniform(0, ny, n), rng.uniform(0, nz, n)]
    )
    widths = rng.uniform(min(dims) / 12, min(dims) / 5, n)
    amps = rng.uniform(0.5, 1.5, n)
    return gaussian_bumps(dims, centers, widths, amps)


def max_abs_err(a: Volume, b: Volume) -> float:
    return float(np.abs(a.data - b.data).max())

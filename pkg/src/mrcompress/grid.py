"""Dense scalar volumes and the block partition used by the ROI selector.

Conventions used throughout the package:

* A volume with dims (nx, ny, nz) is stored as a C-contiguous float64 array
  of shape (nz, ny, nx), so the flattened order is x-fastest:
  flat index = x + nx * (y + ny * z).
* Raw volume files are headerless little-endian arrays in that same order;
  dims and scalar width travel out of band.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ShapeError

Dims = tuple[int, int, int]


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True, order=True)
class BlockCoord:
    """Position of one cubic block on the block grid of a volume.

    ``b`` is the block edge length in cells. ROI selection additionally
    requires b >= 8; that stricter check lives in :mod:`mrcompress.roi`
    because unit blocks produced by downsampling may legitimately be
    smaller.
    """

    bx: int
    by: int
    bz: int
    b: int

    def __post_init__(self):
        if min(self.bx, self.by, self.bz) < 0:
            raise ShapeError(f"negative block coordinate: {self}")
        if not _is_pow2(self.b):
            raise ShapeError(f"block edge must be a power of two, got {self.b}")


class Volume:
    """An immutable dense 3D scalar field."""

    __slots__ = ("data", "_range")

    def __init__(self, data: np.ndarray):
        arr = np.array(data, dtype=np.float64, order="C", copy=True)
        if arr.ndim != 3:
            raise ShapeError(f"expected a 3D array, got ndim={arr.ndim}")
        if min(arr.shape) < 1:
            raise ShapeError(f"all dims must be positive, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise DataError("volume contains non-finite values")
        arr.flags.writeable = False
        self.data = arr
        self._range = None

    @classmethod
    def from_flat(cls, values, dims: Dims) -> "Volume":
        nx, ny, nz = dims
        flat = np.asarray(values, dtype=np.float64)
        if flat.ndim != 1 or flat.size != nx * ny * nz:
            raise ShapeError(
                f"flat payload of length {flat.size} does not match dims {dims}"
            )
        return cls(flat.reshape(nz, ny, nx))

    @property
    def nx(self) -> int:
        return self.data.shape[2]

    @property
    def ny(self) -> int:
        return self.data.shape[1]

    @property
    def nz(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> Dims:
        return (self.nx, self.ny, self.nz)

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def values(self) -> np.ndarray:
        """Flat x-fastest view of the payload."""
        return self.data.reshape(-1)

    @property
    def value_range(self) -> tuple[float, float]:
        if self._range is None:
            self._range = (float(self.data.min()), float(self.data.max()))
        return self._range

    @property
    def spread(self) -> float:
        lo, hi = self.value_range
        return hi - lo

    def __eq__(self, other) -> bool:
        if not isinstance(other, Volume):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.data, other.data)

    def __repr__(self) -> str:
        return f"Volume(dims={self.dims})"


def linear_index(x: int, y: int, z: int, dims: Dims) -> int:
    """Flat index of cell (x, y, z) under x-fastest ordering."""
    nx, ny, nz = dims
    if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
        raise ShapeError(f"cell ({x}, {y}, {z}) outside dims {dims}")
    return x + nx * (y + ny * z)


def index_coords(i: int, dims: Dims) -> tuple[int, int, int]:
    """Inverse of :func:`linear_index`."""
    nx, ny, nz = dims
    if not (0 <= i < nx * ny * nz):
        raise ShapeError(f"flat index {i} outside dims {dims}")
    x = i % nx
    y = (i // nx) % ny
    z = i // (nx * ny)
    return (x, y, z)


def block_grid(dims: Dims, b: int) -> Dims:
    """Block-grid dims (gx, gy, gz) of a volume partitioned into b-cubes."""
    nx, ny, nz = dims
    if b < 1:
        raise ShapeError(f"block edge must be positive, got {b}")
    if nx % b or ny % b or nz % b:
        raise ShapeError(f"dims {dims} not divisible by block edge {b}")
    return (nx // b, ny // b, nz // b)


def block_linear_index(c: BlockCoord, grid: Dims) -> int:
    gx, gy, gz = grid
    if not (c.bx < gx and c.by < gy and c.bz < gz):
        raise ShapeError(f"block {c} outside grid {grid}")
    return c.bx + gx * (c.by + gy * c.bz)


def block_slices(c: BlockCoord) -> tuple[slice, slice, slice]:
    """(z, y, x) slices of the block's footprint in a volume array."""
    return (
        slice(c.bz * c.b, (c.bz + 1) * c.b),
        slice(c.by * c.b, (c.by + 1) * c.b),
        slice(c.bx * c.b, (c.bx + 1) * c.b),
    )


def block_value_range(v: Volume, c: BlockCoord) -> tuple[float, float]:
    """Min and max over one block; the block must lie fully inside ``v``."""
    grid = block_grid(v.dims, c.b)
    block_linear_index(c, grid)
    sub = v.data[block_slices(c)]
    return (float(sub.min()), float(sub.max()))


def block_ranges(v: Volume, b: int) -> np.ndarray:
    """Value range of every b-block, flat in block-index order."""
    gx, gy, gz = block_grid(v.dims, b)
    cells = v.data.reshape(gz, b, gy, b, gx, b)
    hi = cells.max(axis=(1, 3, 5))
    lo = cells.min(axis=(1, 3, 5))
    # (gz, gy, gx) C-order ravel puts bx fastest, matching block_linear_index
    return (hi - lo).reshape(-1)


def downsample2x(v: Volume) -> Volume:
    """Halve every axis by averaging disjoint 2x2x2 cells."""
    nx, ny, nz = v.dims
    if nx % 2 or ny % 2 or nz % 2:
        raise ShapeError(f"dims {v.dims} not divisible by 2")
    pooled = v.data.reshape(nz // 2, 2, ny // 2, 2, nx // 2, 2).mean(axis=(1, 3, 5))
    return Volume(pooled)


def upsample2x(v: Volume) -> Volume:
    """Double every axis by nearest-neighbor replication."""
    rep = v.data.repeat(2, axis=0).repeat(2, axis=1).repeat(2, axis=2)
    return Volume(rep)


def _np_dtype(dtype: str) -> np.dtype:
    table = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
    if dtype not in table:
        raise ShapeError(f"unsupported scalar type {dtype!r}, expected f32 or f64")
    return table[dtype]


def read_raw_volume(path, dims: Dims, dtype: str = "f32") -> Volume:
    """Read a headerless little-endian raw volume file."""
    nx, ny, nz = dims
    dt = _np_dtype(dtype)
    flat = np.fromfile(path, dtype=dt)
    if flat.size != nx * ny * nz:
        raise ShapeError(
            f"file holds {flat.size} scalars, dims {dims} require {nx * ny * nz}"
        )
    return Volume.from_flat(flat.astype(np.float64), dims)


def write_raw_volume(v: Volume, path, dtype: str = "f32") -> None:
    """Write the volume as a headerless little-endian raw file."""
    dt = _np_dtype(dtype)
    v.values.astype(dt).tofile(path)

"""Per-level compression pipeline: tile, merge, pad, compress, and back.

A resolution level travels as a list of unit blocks. Compression merges the
blocks into one array, optionally pads it, and hands it to a codec. The
archive produced here also carries everything needed to undo that and to
re-run post-processing on the decompressed side: the chosen intensity
configuration and, when sampling ran, the original sample regions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .codec import (
    ARRANGE_NONE,
    LOSSLESS_NONE,
    CompressedBlob,
    ErrorBoundPolicy,
    compress,
    decompress,
)
from .codec.lorenzo import BLOCK_EDGE
from .errors import ShapeError
from .grid import BlockCoord, Dims, Volume
from .layout import LINEAR, MergedArray, UnitBlock, linear_merge, pad_linear, stack_merge, unmerge, unpad
from .postprocess import (
    IntensityConfig,
    SamplingPlan,
    apply_postprocess,
    extract_regions,
    plan_sampling,
    select_intensity,
)

PAD_AUTO = "auto"
PAD_OFF = "off"
PAD_MIN_U = 4  # padding pays off only above this unit-block edge


@dataclass(frozen=True)
class SampleSet:
    """Original values over the regions of a sampling plan, kept so the
    decompressed side can refit intensity or an error model offline."""

    plan: SamplingPlan
    regions: tuple

    def __post_init__(self):
        if len(self.regions) != len(self.plan.origins):
            raise ShapeError("sample regions must match plan origins one to one")
        frozen = []
        for r, _ in zip(self.regions, self.plan.origins):
            arr = np.ascontiguousarray(r, dtype=np.float64)
            arr.flags.writeable = False
            frozen.append(arr)
        object.__setattr__(self, "regions", tuple(frozen))


@dataclass(frozen=True)
class LevelArchive:
    """One compressed resolution level plus its reconstruction metadata."""

    dims: Dims  # full grid dims of the level, not of the merged array
    u: int  # unit-block edge; 0 when the level is a whole unsplit volume
    blob: CompressedBlob
    post: Optional[IntensityConfig] = None
    samples: Optional[SampleSet] = None

    @property
    def coords(self):
        return self.blob.order

    @property
    def post_blocksize(self) -> int:
        """Boundary pitch the smoothing pass targets."""
        if self.blob.codec_name == "interp" and self.u > 0:
            return self.u
        return BLOCK_EDGE

    def size_bytes(self) -> int:
        return self.blob.size_bytes()


def tile_volume(vol: Volume, u: int) -> list:
    """Split a volume into unit blocks covering it exactly."""
    if u < 1:
        raise ShapeError(f"unit-block edge must be >= 1, got {u}")
    nx, ny, nz = vol.dims
    if nx % u or ny % u or nz % u:
        raise ShapeError(f"dims {vol.dims} not divisible by unit-block edge {u}")
    blocks = []
    for bz in range(nz // u):
        for by in range(ny // u):
            for bx in range(nx // u):
                sub = vol.data[
                    bz * u : (bz + 1) * u,
                    by * u : (by + 1) * u,
                    bx * u : (bx + 1) * u,
                ]
                blocks.append(UnitBlock(coord=BlockCoord(bx, by, bz, u), u=u, data=sub))
    return blocks


def _should_pad(pad: str, codec: str, arrangement: str, u: int) -> bool:
    if pad == PAD_OFF:
        return False
    if pad != PAD_AUTO:
        raise ShapeError(f"unknown pad mode {pad!r}")
    return codec == "interp" and arrangement == LINEAR and u > PAD_MIN_U


def _fit_intensity(merged_orig, blob: CompressedBlob, blocksize: int, family: str, seed: int, sample_rate: float):
    """Plan a sample, decompress once, and pick per-axis intensities."""
    dec = decompress(blob)
    if isinstance(dec, MergedArray) and dec.padded:
        dec = unpad(dec)
    dec_values = dec.values if isinstance(dec, MergedArray) else dec.data
    dims = (dec_values.shape[2], dec_values.shape[1], dec_values.shape[0])
    plan = plan_sampling(dims, blocksize, max_rate=sample_rate, seed=seed)
    orig_regions = extract_regions(merged_orig, plan)
    dec_regions = extract_regions(dec_values, plan)
    cfg = select_intensity(orig_regions, dec_regions, blob.policy.eb, blocksize, family)
    return cfg, SampleSet(plan=plan, regions=tuple(orig_regions))


def compress_level(
    blocks,
    dims: Dims,
    u: int,
    policy: ErrorBoundPolicy,
    codec: str = "interp",
    arrangement: str = LINEAR,
    pad: str = PAD_AUTO,
    lossless: str = LOSSLESS_NONE,
    post_family=None,
    sample_rate: float = 0.05,
    seed: int = 0,
) -> LevelArchive:
    """Merge one level's unit blocks and compress them into an archive."""
    if not blocks:
        raise ShapeError("a level needs at least one unit block")
    merged = linear_merge(blocks) if arrangement == LINEAR else stack_merge(blocks)
    payload = merged
    if _should_pad(pad, codec, arrangement, u):
        payload = pad_linear(merged)
    blob = compress(payload, policy, codec=codec, lossless=lossless)
    post = None
    samples = None
    if post_family is not None:
        blocksize = u if (codec == "interp" and u > 0) else BLOCK_EDGE
        post, samples = _fit_intensity(merged.values, blob, blocksize, post_family, seed, sample_rate)
    return LevelArchive(dims=tuple(int(d) for d in dims), u=int(u), blob=blob, post=post, samples=samples)


def compress_volume(
    vol: Volume,
    policy: ErrorBoundPolicy,
    codec: str = "interp",
    lossless: str = LOSSLESS_NONE,
    post_family=None,
    sample_rate: float = 0.05,
    seed: int = 0,
) -> LevelArchive:
    """Compress a whole volume as a single-level archive with no tiling."""
    blob = compress(vol, policy, codec=codec, lossless=lossless)
    post = None
    samples = None
    if post_family is not None:
        post, samples = _fit_intensity(vol.data, blob, BLOCK_EDGE, post_family, seed, sample_rate)
    return LevelArchive(dims=vol.dims, u=0, blob=blob, post=post, samples=samples)


def decompress_level(archive: LevelArchive):
    """Invert compress_level: returns the list of unit blocks.

    Post-processing, when configured, is applied to the unpadded merged
    array before it is split back into blocks.
    """
    dec = decompress(archive.blob)
    if isinstance(dec, Volume):
        raise ShapeError("archive holds a whole volume; use decompress_volume")
    if dec.padded:
        dec = unpad(dec)
    if archive.post is not None:
        dec = apply_postprocess(dec, archive.blob.policy.eb, archive.post_blocksize, archive.post)
    return unmerge(dec)


def decompress_volume(archive: LevelArchive) -> Volume:
    """Invert compress_volume."""
    dec = decompress(archive.blob)
    if not isinstance(dec, Volume):
        raise ShapeError("archive holds merged blocks; use decompress_level")
    if archive.post is not None:
        out = apply_postprocess(dec, archive.blob.policy.eb, archive.post_blocksize, archive.post)
        return out
    return dec


def level_sample_pairs(archive: LevelArchive):
    """Stored original sample regions paired with the matching regions of
    the decompressed (and post-processed) level."""
    if archive.samples is None:
        raise ShapeError("archive stores no sample regions")
    dec = decompress(archive.blob)
    if isinstance(dec, MergedArray) and dec.padded:
        dec = unpad(dec)
    if archive.post is not None:
        dec = apply_postprocess(dec, archive.blob.policy.eb, archive.post_blocksize, archive.post)
    values = dec.values if isinstance(dec, MergedArray) else dec.data
    dec_regions = tuple(extract_regions(values, archive.samples.plan))
    return archive.samples.regions, dec_regions


def assemble_volume(blocks, dims: Dims) -> Volume:
    """Place unit blocks back onto a full grid of the given dims."""
    if not blocks:
        raise ShapeError("no blocks to assemble")
    nx, ny, nz = dims
    out = np.zeros((nz, ny, nx), dtype=np.float64)
    seen = np.zeros((nz, ny, nx), dtype=bool)
    for b in blocks:
        u = b.u
        c = b.coord
        if (c.bx + 1) * u > nx or (c.by + 1) * u > ny or (c.bz + 1) * u > nz:
            raise ShapeError(f"block {c} outside dims {dims}")
        sl = (
            slice(c.bz * u, (c.bz + 1) * u),
            slice(c.by * u, (c.by + 1) * u),
            slice(c.bx * u, (c.bx + 1) * u),
        )
        if seen[sl].any():
            raise ShapeError(f"block {c} overlaps previously placed data")
        out[sl] = b.data
        seen[sl] = True
    if not seen.all():
        raise ShapeError("blocks do not cover the requested dims")
    return Volume(out)

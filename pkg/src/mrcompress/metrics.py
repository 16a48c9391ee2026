"""Reconstruction quality metrics and a rate-distortion sweep harness."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .codec import ErrorBoundPolicy
from .errors import ShapeError
from .grid import Volume
from .pipeline import compress_volume, decompress_volume
from .roi import MultiResDataset, reconstruct_uniform

SSIM_WINDOW = 8
SSIM_STRIDE = 4
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _paired(orig, recon):
    o = orig.data if isinstance(orig, Volume) else np.asarray(orig, dtype=np.float64)
    r = recon.data if isinstance(recon, Volume) else np.asarray(recon, dtype=np.float64)
    if o.shape != r.shape:
        raise ShapeError(f"shape mismatch: {o.shape} vs {r.shape}")
    return o, r


def psnr(orig, recon) -> float:
    """Peak signal-to-noise ratio in dB with the original's value range as
    the peak. Identical inputs give +inf; a constant original that was
    reconstructed imperfectly gives -inf."""
    o, r = _paired(orig, recon)
    mse = float(np.mean((o - r) ** 2))
    if mse == 0.0:
        return math.inf
    vrange = float(o.max() - o.min())
    if vrange == 0.0:
        return -math.inf
    return float(20.0 * np.log10(vrange / np.sqrt(mse)))


def ssim(orig, recon) -> float:
    """Mean local structural similarity over 8^3 windows at stride 4.

    Dynamic range is the original's value range (1.0 for a constant
    original so the constants stay meaningful)."""
    o, r = _paired(orig, recon)
    if min(o.shape) < SSIM_WINDOW:
        raise ShapeError(f"volume {o.shape} smaller than the {SSIM_WINDOW}^3 ssim window")
    L = float(o.max() - o.min())
    if L == 0.0:
        L = 1.0
    c1 = (SSIM_K1 * L) ** 2
    c2 = (SSIM_K2 * L) ** 2
    w = (SSIM_WINDOW,) * 3
    ow = sliding_window_view(o, w)[::SSIM_STRIDE, ::SSIM_STRIDE, ::SSIM_STRIDE]
    rw = sliding_window_view(r, w)[::SSIM_STRIDE, ::SSIM_STRIDE, ::SSIM_STRIDE]
    ax = (-3, -2, -1)
    mu_o = ow.mean(axis=ax)
    mu_r = rw.mean(axis=ax)
    # centered moments keep identical inputs at exactly 1.0
    do = ow - mu_o[..., None, None, None]
    dr = rw - mu_r[..., None, None, None]
    var_o = (do * do).mean(axis=ax)
    var_r = (dr * dr).mean(axis=ax)
    cov = (do * dr).mean(axis=ax)
    num = (2.0 * mu_o * mu_r + c1) * (2.0 * cov + c2)
    den = (mu_o**2 + mu_r**2 + c1) * (var_o + var_r + c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class RateDistortionPoint:
    eb: float
    compressed_bytes: int
    original_bytes: int
    cr: float
    psnr_db: float
    ssim: float


def _point(eb, compressed_bytes, original_bytes, orig, recon) -> RateDistortionPoint:
    return RateDistortionPoint(
        eb=float(eb),
        compressed_bytes=int(compressed_bytes),
        original_bytes=int(original_bytes),
        cr=original_bytes / compressed_bytes,
        psnr_db=psnr(orig, recon),
        ssim=ssim(orig, recon),
    )


def rd_sweep(
    source,
    ebs,
    codec: str = "interp",
    adaptive: bool = False,
    lossless="none",
    post_family=None,
    seed: int = 0,
    reference: Volume = None,
) -> list:
    """Compress at each error bound and record size and quality.

    ``source`` is a Volume, or a MultiResDataset (then ``reference`` must
    give the uniform original the reconstruction is scored against)."""
    points = []
    if isinstance(source, Volume):
        for eb in ebs:
            policy = ErrorBoundPolicy(eb=float(eb), adaptive=adaptive)
            arch = compress_volume(source, policy, codec=codec, lossless=lossless, post_family=post_family, seed=seed)
            recon = decompress_volume(arch)
            points.append(_point(eb, arch.size_bytes(), arch.blob.original_bytes, source, recon))
        return points
    if isinstance(source, MultiResDataset):
        if reference is None:
            raise ShapeError("dataset sweeps need the uniform reference volume")
        from .pipeline import compress_level, decompress_level
        from .roi import Level

        for eb in ebs:
            policy = ErrorBoundPolicy(eb=float(eb), adaptive=adaptive)
            total = 0
            out_levels = []
            for lv in source.levels:
                arch = compress_level(
                    list(lv.blocks), lv.dims, lv.u, policy,
                    codec=codec, lossless=lossless, post_family=post_family, seed=seed,
                )
                total += arch.size_bytes()
                out_levels.append(Level(dims=lv.dims, u=lv.u, blocks=tuple(decompress_level(arch))))
            ds = MultiResDataset(levels=tuple(out_levels), roi_mask=source.roi_mask, ratio=source.ratio)
            recon = reconstruct_uniform(ds)
            points.append(_point(eb, total, reference.size * 8, reference, recon))
        return points
    raise ShapeError(f"cannot sweep a {type(source).__name__}")


def write_jsonl(points, path) -> None:
    with open(path, "w") as fh:
        for p in points:
            row = asdict(p)
            if math.isinf(row["psnr_db"]):
                row["psnr_db"] = "inf" if row["psnr_db"] > 0 else "-inf"
            fh.write(json.dumps(row) + "\n")


def write_csv(points, path) -> None:
    fields = ["eb", "compressed_bytes", "original_bytes", "cr", "psnr_db", "ssim"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for p in points:
            w.writerow(asdict(p))

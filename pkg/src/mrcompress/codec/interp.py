"""Interpolation-predicted compression of whole arrays.

The 3D traversal refines a product lattice level by level. Within one global
level the x, y, z axis passes run in that order; an axis pass predicts its
new positions against every combination of already-active positions on the
other two axes. Compressor and decompressor walk the identical pass sequence
and predictors read only previously reconstructed values, so the two working
states never diverge.

Code-stream order within a pass: two-sided targets first, then one-sided,
each batch raveled in (z, y, x ascending) order.
"""

from __future__ import annotations

import numpy as np

from ..errors import FormatError, ShapeError
from ..grid import Volume
from ..layout import MergedArray
from .blob import ARRANGE_NONE, CODEC_INTERP, CompressedBlob, arrangement_code
from .entropy import LOSSLESS_NONE, entropy_decode, entropy_encode
from .policy import ErrorBoundPolicy, level_error_bound
from .quantize import LITERAL_MARK, dequantize_array, quantize_array
from .schedule import ENDPOINT, ONE_SIDED, TWO_SIDED, build_grid_schedule


def _walk(dims):
    """Yield the deterministic pass sequence for an array of ``dims``.

    Each item is (global level, axis, step, two_sided, one_sided, selectors)
    where selectors are the active position arrays (x, y, z) to combine with
    the target positions. Axis levels are consumed end-aligned: every axis
    finishes its stride-1 pass at the global maxlevel.
    """
    gs = build_grid_schedule(dims)
    maxlevel = gs.maxlevel
    active = [np.zeros(1, dtype=np.intp) for _ in range(3)]
    for g in range(1, maxlevel + 1):
        for ax in range(3):
            j = gs.axis_level(ax, g)
            if j is None:
                continue
            lvl = gs.axes[ax].levels[j]
            two = lvl.positions(TWO_SIDED)
            one = np.concatenate([lvl.positions(ONE_SIDED), lvl.positions(ENDPOINT)])
            one.sort()
            yield g, ax, lvl.step, two, one, (active[0], active[1], active[2])
            fresh = np.concatenate([active[ax], two, one])
            fresh.sort()
            active[ax] = fresh
    return


def _selector(ax, positions, act):
    act_x, act_y, act_z = act
    if ax == 0:
        return np.ix_(act_z, act_y, positions)
    if ax == 1:
        return np.ix_(act_z, positions, act_x)
    return np.ix_(positions, act_y, act_x)


def _maxlevel(dims) -> int:
    return build_grid_schedule(dims).maxlevel


def _encode_array(arr: np.ndarray, policy: ErrorBoundPolicy):
    nz, ny, nx = arr.shape
    dims = (nx, ny, nz)
    maxlevel = _maxlevel(dims)
    work = np.zeros_like(arr)
    code_parts = []
    lit_parts = []

    def emit(pred, actual, sel, eb):
        codes, recon, lits = quantize_array(pred, actual, eb)
        work[sel] = recon
        code_parts.append(codes.reshape(-1))
        lit_parts.append(lits)

    seed_sel = (slice(0, 1),) * 3
    eb0 = level_error_bound(policy, 0, maxlevel)
    emit(np.zeros((1, 1, 1)), arr[seed_sel], seed_sel, eb0)

    for g, ax, step, two, one, act in _walk(dims):
        eb = level_error_bound(policy, g, maxlevel)
        if two.size:
            sel = _selector(ax, two, act)
            lo = _selector(ax, two - step, act)
            hi = _selector(ax, two + step, act)
            pred = 0.5 * (work[lo] + work[hi])
            emit(pred, arr[sel], sel, eb)
        if one.size:
            sel = _selector(ax, one, act)
            pred = work[_selector(ax, one - step, act)]
            emit(pred, arr[sel], sel, eb)
    codes = np.concatenate(code_parts) if code_parts else np.zeros(0, np.int32)
    lits = np.concatenate(lit_parts) if lit_parts else np.zeros(0, np.float64)
    return codes, lits


def _decode_array(dims, policy: ErrorBoundPolicy, codes: np.ndarray, lits: np.ndarray):
    nx, ny, nz = dims
    maxlevel = _maxlevel(dims)
    work = np.zeros((nz, ny, nx), dtype=np.float64)
    cpos = 0
    lpos = 0

    def absorb(pred, sel, eb):
        nonlocal cpos, lpos
        n = pred.size
        if cpos + n > codes.size:
            raise FormatError("code stream shorter than the array demands")
        batch = codes[cpos : cpos + n]
        cpos += n
        k = int((batch == LITERAL_MARK).sum())
        if lpos + k > lits.size:
            raise FormatError("literal block shorter than the code stream demands")
        vals = lits[lpos : lpos + k]
        lpos += k
        recon = dequantize_array(pred.reshape(-1), batch, eb, vals)
        work[sel] = recon.reshape(pred.shape)

    eb0 = level_error_bound(policy, 0, maxlevel)
    absorb(np.zeros((1, 1, 1)), (slice(0, 1),) * 3, eb0)

    for g, ax, step, two, one, act in _walk(dims):
        eb = level_error_bound(policy, g, maxlevel)
        if two.size:
            sel = _selector(ax, two, act)
            lo = _selector(ax, two - step, act)
            hi = _selector(ax, two + step, act)
            pred = 0.5 * (work[lo] + work[hi])
            absorb(pred, sel, eb)
        if one.size:
            sel = _selector(ax, one, act)
            pred = work[_selector(ax, one - step, act)]
            absorb(pred, sel, eb)
    if cpos != codes.size or lpos != lits.size:
        raise FormatError("compressed stream longer than the array demands")
    return work


def interp_compress(
    m: MergedArray | Volume,
    policy: ErrorBoundPolicy,
    lossless: str = LOSSLESS_NONE,
) -> CompressedBlob:
    if isinstance(m, Volume):
        arr = m.data
        arrangement = ARRANGE_NONE
        u, order, padded = 0, (), False
    elif isinstance(m, MergedArray):
        arr = m.values
        arrangement = arrangement_code(m.arrangement)
        u, order, padded = m.u, m.order, m.padded
    else:
        raise ShapeError(f"cannot compress {type(m).__name__}")
    codes, lits = _encode_array(arr, policy)
    nz, ny, nx = arr.shape
    return CompressedBlob(
        codec=CODEC_INTERP,
        dims=(nx, ny, nz),
        policy=policy,
        arrangement=arrangement,
        padded=padded,
        u=u,
        order=order,
        stream=entropy_encode(codes, lits, lossless),
        lossless=lossless,
    )


def interp_decompress(blob: CompressedBlob) -> MergedArray | Volume:
    if blob.codec != CODEC_INTERP:
        raise ShapeError(f"blob holds codec {blob.codec}, not interpolation")
    codes, lits, _ = entropy_decode(blob.stream, blob.n_values, 0, blob.lossless)
    arr = _decode_array(blob.dims, blob.policy, codes, lits)
    if blob.arrangement == ARRANGE_NONE:
        return Volume(arr)
    return MergedArray(
        values=arr,
        order=blob.order,
        u=blob.u,
        arrangement=blob.arrangement_name,
        padded=blob.padded,
    )

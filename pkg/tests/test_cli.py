import json
import subprocess
import sys

import numpy as np
import pytest

from mrcompress.cli import main
from mrcompress.container import read_container
from mrcompress.grid import Volume, read_raw_volume, write_raw_volume
from mrcompress.roi import RoiConfig, build_adaptive, reconstruct_uniform, select_roi

from helpers import max_abs_err, sum_of_gaussians


def _write_raw(tmp_path, v, name="vol.raw", dtype="f64"):
    path = tmp_path / name
    write_raw_volume(v, path, dtype)
    return str(path)


def _dims_arg(v):
    return ",".join(str(d) for d in v.dims)


# --------------------------------------------------------------- happy path


def test_compress_decompress_raw_volume(tmp_path):
    v = sum_of_gaussians((24, 20, 16), seed=0)
    raw = _write_raw(tmp_path, v)
    cont = str(tmp_path / "vol.mrc")
    out = str(tmp_path / "back.raw")

    rc = main(["compress", "--input", raw, "--dims", _dims_arg(v), "--dtype", "f64",
               "--eb", "1e-3", "--out", cont])
    assert rc == 0
    rc = main(["decompress", "--input", cont, "--out", out, "--dtype", "f64"])
    assert rc == 0

    back = read_raw_volume(out, v.dims, "f64")
    assert max_abs_err(v, back) <= 1e-3
    assert not list(tmp_path.glob("*.tmp.*"))


def test_roi_then_compress_then_uniform(tmp_path):
    v = sum_of_gaussians((32, 32, 32), seed=1)
    raw = _write_raw(tmp_path, v)
    roi_out = str(tmp_path / "roi.mrc")
    cmp_out = str(tmp_path / "cmp.mrc")
    rec_out = str(tmp_path / "rec.raw")

    rc = main(["roi", "--input", raw, "--dims", _dims_arg(v), "--dtype", "f64",
               "--block", "8", "--percent", "25", "--out", roi_out])
    assert rc == 0
    c = read_container(roi_out)
    assert c.roi_b == 8 and c.roi_x_percent == 25.0
    assert c.n_levels == 2

    rc = main(["compress", "--input", roi_out, "--eb", "1e-3", "--out", cmp_out])
    assert rc == 0
    rc = main(["decompress", "--input", cmp_out, "--uniform", "--out", rec_out,
               "--dtype", "f64"])
    assert rc == 0

    # the coarse half of the domain was downsampled, so compare against the
    # adaptively represented volume rather than the original
    cfg = RoiConfig(b=8, x_percent=25.0)
    ds = build_adaptive(v, select_roi(v, cfg), cfg)
    want = reconstruct_uniform(ds)
    back = read_raw_volume(rec_out, v.dims, "f64")
    assert max_abs_err(want, back) <= 1e-3


def test_stored_roi_container_reconstructs_exactly(tmp_path):
    v = sum_of_gaussians((32, 32, 32), seed=2)
    raw = _write_raw(tmp_path, v)
    roi_out = str(tmp_path / "roi.mrc")
    rec_out = str(tmp_path / "rec.raw")
    main(["roi", "--input", raw, "--dims", _dims_arg(v), "--dtype", "f64",
          "--block", "8", "--percent", "50", "--out", roi_out])
    rc = main(["decompress", "--input", roi_out, "--uniform", "--out", rec_out,
               "--dtype", "f64"])
    assert rc == 0
    cfg = RoiConfig(b=8, x_percent=50.0)
    want = reconstruct_uniform(build_adaptive(v, select_roi(v, cfg), cfg))
    assert read_raw_volume(rec_out, v.dims, "f64") == want


def test_full_percent_roi_keeps_everything_bit_exact(tmp_path):
    v = sum_of_gaussians((16, 16, 16), seed=3)
    raw = _write_raw(tmp_path, v)
    roi_out = str(tmp_path / "roi.mrc")
    rec_out = str(tmp_path / "rec.raw")
    main(["roi", "--input", raw, "--dims", _dims_arg(v), "--dtype", "f64",
          "--block", "8", "--percent", "100", "--out", roi_out])
    assert read_container(roi_out).n_levels == 1
    rc = main(["decompress", "--input", roi_out, "--uniform", "--out", rec_out,
               "--dtype", "f64"])
    assert rc == 0
    assert read_raw_volume(rec_out, v.dims, "f64") == v


def test_multi_level_decompress_requires_uniform_flag(tmp_path):
    v = sum_of_gaussians((32, 32, 32), seed=4)
    raw = _write_raw(tmp_path, v)
    roi_out = str(tmp_path / "roi.mrc")
    main(["roi", "--input", raw, "--dims", _dims_arg(v), "--dtype", "f64",
          "--block", "8", "--percent", "25", "--out", roi_out])
    rc = main(["decompress", "--input", roi_out, "--out", str(tmp_path / "x.raw")])
    assert rc == 2


def test_compress_f32_input(tmp_path):
    v = sum_of_gaussians((16, 16, 16), seed=5)
    raw = _write_raw(tmp_path, v, dtype="f32")
    cont = str(tmp_path / "v.mrc")
    out = str(tmp_path / "b.raw")
    rc = main(["compress", "--input", raw, "--dims", _dims_arg(v),
               "--eb", "1e-2", "--out", cont])
    assert rc == 0
    rc = main(["decompress", "--input", cont, "--out", out])
    assert rc == 0
    orig32 = read_raw_volume(raw, v.dims, "f32")
    back32 = read_raw_volume(out, v.dims, "f32")
    assert max_abs_err(orig32, back32) <= 1e-2 + 1e-5


# --------------------------------------------------------------------- eval


def test_eval_identical_raw_files(tmp_path, capsys):
    v = sum_of_gaussians((16, 16, 16), seed=6)
    raw = _write_raw(tmp_path, v)
    out = str(tmp_path / "metrics.json")
    rc = main(["eval", "--orig", raw, "--recon", raw, "--dims", _dims_arg(v),
               "--dtype", "f64", "--out", out])
    assert rc == 0
    result = json.loads(open(out).read())
    assert result["psnr_db"] == "inf"
    assert result["ssim"] == 1.0
    assert result["cr"] is None


def test_eval_against_container_reports_cr(tmp_path, capsys):
    v = sum_of_gaussians((16, 16, 16), seed=7)
    raw = _write_raw(tmp_path, v)
    cont = str(tmp_path / "v.mrc")
    main(["compress", "--input", raw, "--dims", _dims_arg(v), "--dtype", "f64",
          "--eb", "1e-3", "--out", cont])
    capsys.readouterr()
    rc = main(["eval", "--orig", raw, "--recon", cont, "--dims", _dims_arg(v),
               "--dtype", "f64"])
    assert rc == 0
    stdout = capsys.readouterr().out
    result = json.loads(stdout[: stdout.rindex("}") + 1])
    assert result["cr"] > 1.0
    assert result["psnr_db"] > 40.0
    assert 0.9 < result["ssim"] <= 1.0


# -------------------------------------------------------------- uncertainty


def test_uncertainty_with_reference_volume(tmp_path):
    v = sum_of_gaussians((16, 16, 16), seed=8)
    raw = _write_raw(tmp_path, v)
    cont = str(tmp_path / "v.mrc")
    prob = str(tmp_path / "prob.raw")
    main(["compress", "--input", raw, "--dims", _dims_arg(v), "--dtype", "f64",
          "--eb", "1e-2", "--out", cont])
    rc = main(["uncertainty", "--input", cont, "--orig", raw, "--dtype", "f64",
               "--isovalue", "0.5", "--out", prob])
    assert rc == 0
    field = np.fromfile(prob, dtype="<f4")
    assert field.size == 15 * 15 * 15
    assert ((field >= 0) & (field <= 1)).all()
    side = json.loads(open(prob + ".json").read())
    assert side["dims"] == [15, 15, 15]
    assert side["isovalue"] == 0.5
    assert "mu" in side and "sigma2" in side


def test_uncertainty_from_stored_samples(tmp_path):
    v = sum_of_gaussians((64, 64, 64), seed=9)
    raw = _write_raw(tmp_path, v)
    cont = str(tmp_path / "v.mrc")
    prob = str(tmp_path / "prob.raw")
    main(["compress", "--input", raw, "--dims", _dims_arg(v), "--dtype", "f64",
          "--eb", "1e-2", "--post", "sz", "--out", cont])
    assert read_container(cont).levels[0].archive.samples is not None
    rc = main(["uncertainty", "--input", cont, "--isovalue", "0.5", "--out", prob])
    assert rc == 0
    assert np.fromfile(prob, dtype="<f4").size == 63**3


def test_uncertainty_without_samples_needs_orig(tmp_path):
    v = sum_of_gaussians((16, 16, 16), seed=10)
    raw = _write_raw(tmp_path, v)
    cont = str(tmp_path / "v.mrc")
    main(["compress", "--input", raw, "--dims", _dims_arg(v), "--dtype", "f64",
          "--eb", "1e-2", "--out", cont])
    rc = main(["uncertainty", "--input", cont, "--isovalue", "0.5",
               "--out", str(tmp_path / "p.raw")])
    assert rc == 2


# --------------------------------------------------------------- exit codes


def test_raw_compress_requires_dims(tmp_path):
    v = sum_of_gaussians((8, 8, 8), seed=11)
    raw = _write_raw(tmp_path, v)
    rc = main(["compress", "--input", raw, "--eb", "1e-3",
               "--out", str(tmp_path / "x.mrc")])
    assert rc == 2


def test_bad_usage_exit_codes(tmp_path):
    v = sum_of_gaussians((16, 16, 16), seed=12)
    raw = _write_raw(tmp_path, v)
    out = str(tmp_path / "x.mrc")
    dims = _dims_arg(v)

    # shape problems from the library surface as exit 2
    assert main(["compress", "--input", raw, "--dims", dims, "--dtype", "f64",
                 "--eb", "-1", "--out", out]) == 2
    assert main(["compress", "--input", raw, "--dims", dims, "--dtype", "f64",
                 "--eb", "1e-3", "--sample-rate", "0.2", "--out", out]) == 2
    assert main(["roi", "--input", raw, "--dims", dims, "--dtype", "f64",
                 "--block", "12", "--percent", "10", "--out", out]) == 2
    # wrong payload size for the declared dims
    assert main(["compress", "--input", raw, "--dims", "16,16,8", "--dtype", "f64",
                 "--eb", "1e-3", "--out", out]) == 2
    # missing file
    assert main(["compress", "--input", str(tmp_path / "absent.raw"),
                 "--dims", dims, "--eb", "1e-3", "--out", out]) == 2


def test_argparse_failures_exit_two(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["compress", "--input", "x", "--eb", "1e-3", "--dims", "4,4",
              "--out", "y"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["compress", "--no-such-flag"])
    assert exc.value.code == 2
    assert main([]) == 2


def test_malformed_container_exits_three(tmp_path):
    bad = tmp_path / "bad.mrc"
    bad.write_bytes(b"MRC1" + b"\x00" * 3)  # magic but truncated header
    assert main(["decompress", "--input", str(bad), "--out", str(tmp_path / "o.raw")]) == 3

    v = sum_of_gaussians((16, 16, 16), seed=13)
    raw = _write_raw(tmp_path, v)
    cont = tmp_path / "v.mrc"
    main(["compress", "--input", raw, "--dims", _dims_arg(v), "--dtype", "f64",
          "--eb", "1e-3", "--out", str(cont)])
    blob = bytearray(cont.read_bytes())
    cont.write_bytes(bytes(blob[: len(blob) - 40]))
    assert main(["decompress", "--input", str(cont), "--out", str(tmp_path / "o.raw")]) == 3


def test_unexpected_failure_exits_four(tmp_path, monkeypatch):
    import mrcompress.cli as cli

    def boom(path):
        raise RuntimeError("wires crossed")

    monkeypatch.setattr(cli, "read_container", boom)
    bad = tmp_path / "c.mrc"
    bad.write_bytes(b"MRC1")
    assert main(["decompress", "--input", str(bad), "--out", str(tmp_path / "o.raw")]) == 4


# ---------------------------------------------------------------- threading


def test_thread_count_does_not_change_bytes(tmp_path, monkeypatch):
    v = sum_of_gaussians((32, 32, 32), seed=14)
    raw = _write_raw(tmp_path, v)
    roi_out = str(tmp_path / "roi.mrc")
    main(["roi", "--input", raw, "--dims", _dims_arg(v), "--dtype", "f64",
          "--block", "8", "--percent", "25", "--out", roi_out])

    outs = {}
    for n in ("1", "4"):
        monkeypatch.setenv("MRC_THREADS", n)
        cmp_out = tmp_path / f"cmp{n}.mrc"
        rec_out = tmp_path / f"rec{n}.raw"
        assert main(["compress", "--input", roi_out, "--eb", "1e-3",
                     "--out", str(cmp_out)]) == 0
        assert main(["decompress", "--input", str(cmp_out), "--uniform",
                     "--out", str(rec_out), "--dtype", "f64"]) == 0
        outs[n] = (cmp_out.read_bytes(), rec_out.read_bytes())
    assert outs["1"] == outs["4"]


def test_invalid_thread_env_exits_two(tmp_path, monkeypatch):
    v = sum_of_gaussians((32, 32, 32), seed=15)
    raw = _write_raw(tmp_path, v)
    roi_out = str(tmp_path / "roi.mrc")
    main(["roi", "--input", raw, "--dims", _dims_arg(v), "--dtype", "f64",
          "--block", "8", "--percent", "25", "--out", roi_out])
    for bad in ("zero", "0", "-3"):
        monkeypatch.setenv("MRC_THREADS", bad)
        assert main(["compress", "--input", roi_out, "--eb", "1e-3",
                     "--out", str(tmp_path / "x.mrc")]) == 2


# ------------------------------------------------------------- entry point


def test_module_entry_point_exit_code():
    proc = subprocess.run(
        [sys.executable, "-m", "mrcompress.cli", "compress", "--no-such-flag"],
        capture_output=True,
    )
    assert proc.returncode == 2
    proc = subprocess.run([sys.executable, "-m", "mrcompress.cli"], capture_output=True)
    assert proc.returncode == 2

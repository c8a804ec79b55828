import numpy as np
import pytest

from groundslice.cli import main
from groundslice.ssl_frame import RECORDS_PER_FRAME, save_sslraw
from groundslice.synthetic import make_ssl_capture


@pytest.fixture(scope="module")
def ssl_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("ssl") / "cap.sslraw"
    save_sslraw(make_ssl_capture(seed=4, dropout=0.05), path)
    return path


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_segment_kitti_writes_masks_and_manifest(small_dataset, tmp_path):
    out = tmp_path / "out"
    code = run_cli("segment", "--root", small_dataset, "--sequence", "00",
                   "--method", "depth", "--slices", "2", "--out", out)
    assert code == 0
    masks = sorted(out.glob("*.mask"))
    assert len(masks) == 3
    data = np.frombuffer(masks[0].read_bytes(), dtype=np.uint8)
    assert set(np.unique(data)) <= {0, 1}
    manifest = (out / "manifest.txt").read_text()
    assert "[depth]" in manifest and "method=depth" in manifest


def test_segment_mask_aligns_with_scan_records(small_dataset, tmp_path):
    out = tmp_path / "out"
    run_cli("segment", "--root", small_dataset, "--method", "smrf",
            "--slices", "1", "--out", out, "--config", "configs/default.cfg")
    scan = small_dataset / "sequences" / "00" / "velodyne" / "000000.bin"
    n_records = scan.stat().st_size // 16
    mask = (out / "000000.mask").read_bytes()
    assert len(mask) == n_records


def test_segment_ssl_full_record_mask(ssl_file, tmp_path):
    out = tmp_path / "sslout"
    code = run_cli("segment", "--ssl-file", ssl_file, "--method", "depth",
                   "--slices", "5", "--units", "1", "--out", out)
    assert code == 0
    mask = np.frombuffer((out / "cap.mask").read_bytes(), dtype=np.uint8)
    assert mask.size == RECORDS_PER_FRAME
    assert mask.sum() > 0


def test_segment_reproducible(small_dataset, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        run_cli("segment", "--root", small_dataset, "--method", "ransac",
                "--slices", "3", "--seed", "9", "--out", out)
    for name in ("000000.mask", "000001.mask", "000002.mask"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_segment_missing_root_exit_2(tmp_path):
    out = tmp_path / "never"
    code = run_cli("segment", "--root", tmp_path / "nope", "--method",
                   "depth", "--out", out)
    assert code == 2
    assert not out.exists()  # no partial outputs


def test_eval_csv_layout_and_reproducibility(small_dataset, tmp_path):
    outs = []
    for name in ("eval_a", "eval_b"):
        out = tmp_path / name
        code = run_cli("eval", "--root", small_dataset, "--method",
                       "depth,ransac", "--slices", "1,2", "--out", out)
        assert code == 0
        outs.append(out)
    summary = (outs[0] / "eval_summary.csv").read_text().splitlines()
    assert summary[0] == "method,slices,mean_iou,std_iou,mean_f1,std_f1"
    assert len(summary) == 1 + 2 * 2  # header + methods x slice counts
    frames = (outs[0] / "eval_frames.csv").read_text().splitlines()
    assert frames[0] == "method,slices,frame,iou,f1"
    assert len(frames) == 1 + 2 * 2 * 3  # header + methods x Ks x frames
    for csv in ("eval_summary.csv", "eval_frames.csv"):
        assert (outs[0] / csv).read_bytes() == (outs[1] / csv).read_bytes()


def test_bench_csv_speedup_near_one_for_p1(ssl_file, tmp_path):
    out = tmp_path / "bench"
    code = run_cli("bench", "--ssl-file", ssl_file, "--method", "depth",
                   "--slices", "5", "--units-set", "1",
                   "--config", "tests/data/bench_fast.cfg", "--out", out)
    assert code == 0
    lines = (out / "bench.csv").read_text().splitlines()
    assert lines[0] == "method,slices,units,frame,wall_ms,speedup"
    method, slices, units, frame, wall_ms, speedup = lines[1].split(",")
    assert (method, slices, units) == ("depth", "5", "1")
    assert float(wall_ms) > 0
    assert 0.5 < float(speedup) < 2.0  # self-baseline up to timing noise


def test_render_ssl_dimensions(ssl_file, tmp_path):
    out = tmp_path / "img.ppm"
    code = run_cli("render", "--ssl-file", ssl_file, "--out", out)
    assert code == 0
    header = out.read_bytes()[:20].split(b"\n")
    assert header[0] == b"P6"
    assert header[1] == b"625 126"


def test_render_all_invalid_is_black(tmp_path):
    zero = tmp_path / "zero.sslraw"
    zero.write_bytes(b"\x00" * (RECORDS_PER_FRAME * 12))
    out = tmp_path / "img.ppm"
    assert run_cli("render", "--ssl-file", zero, "--out", out) == 0
    payload = out.read_bytes()
    body = payload.split(b"\n", 3)[3]
    assert set(body) == {0}


def test_render_mask_overlay_and_length_check(ssl_file, tmp_path):
    seg_out = tmp_path / "m"
    run_cli("segment", "--ssl-file", ssl_file, "--method", "depth",
            "--slices", "1", "--out", seg_out)
    out = tmp_path / "img.ppm"
    code = run_cli("render", "--ssl-file", ssl_file, "--mask",
                   seg_out / "cap.mask", "--out", out)
    assert code == 0
    body = out.read_bytes().split(b"\n", 3)[3]
    rgb = np.frombuffer(body, dtype=np.uint8).reshape(126, 625, 3)
    red = (rgb[:, :, 0] == 255) & (rgb[:, :, 1] == 40)
    assert red.any()

    bad = tmp_path / "bad.mask"
    bad.write_bytes(b"\x01" * 100)
    out2 = tmp_path / "img2.ppm"
    code = run_cli("render", "--ssl-file", ssl_file, "--mask", bad, "--out", out2)
    assert code == 2
    assert not out2.exists()


def test_decode_ssl_stats_and_dump(ssl_file, tmp_path, capsys):
    out = tmp_path / "dec"
    code = run_cli("decode-ssl", "--ssl-file", ssl_file, "--out", out)
    assert code == 0
    text = capsys.readouterr().out
    assert "5 subframes of 15750 points" in text
    assert text.count("subframe ") == 5
    dump = out / "cap.sslframe"
    want = 8 + 126 * 625 * 3 * 4 + 126 * 625
    assert dump.stat().st_size == want
    rows_cols = np.frombuffer(dump.read_bytes()[:8], dtype="<u4")
    assert rows_cols.tolist() == [126, 625]


def test_decode_ssl_truncated_error(tmp_path):
    bad = tmp_path / "short.sslraw"
    bad.write_bytes(b"\x00" * 120)
    code = run_cli("decode-ssl", "--ssl-file", bad, "--out", tmp_path / "o")
    assert code in (1, 2)


def test_bad_config_key_exit_2(small_dataset, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[smrf]\nnot_a_key = 3\n")
    code = run_cli("segment", "--root", small_dataset, "--method", "depth",
                   "--config", cfg, "--out", tmp_path / "o")
    assert code == 2


def test_parity_flag_validated(ssl_file, tmp_path):
    code = run_cli("decode-ssl", "--ssl-file", ssl_file, "--parity", "even",
                   "--out", tmp_path / "o")
    assert code == 0


def test_flat_plane_slices_byte_identical(tmp_path):
    """Depth masks for K=1 and K=5 match exactly on flat-ground frames."""
    from groundslice.synthetic import Scene, Terrain, write_sequence

    root = tmp_path / "flat"
    scene = Scene(terrain=Terrain(amp_x=0.0, amp_y=0.0, crown=0.0))
    write_sequence(root, "00", n_frames=1, seed=3, scene=scene, traffic=False,
                   rows=24, cols=180, max_range=30.0)
    outs = []
    for k in (1, 5):
        out = tmp_path / f"k{k}"
        assert run_cli("segment", "--root", root, "--method", "depth",
                       "--slices", str(k), "--out", out) == 0
        outs.append((out / "000000.mask").read_bytes())
    assert outs[0] == outs[1]
    assert sum(outs[0]) > 0


def test_extended_ground_preset_via_config(small_dataset, tmp_path):
    cfg = tmp_path / "ext.cfg"
    cfg.write_text("[dataset]\nground_classes = extended\n")
    out = tmp_path / "eval_ext"
    code = run_cli("eval", "--root", small_dataset, "--method", "depth",
                   "--slices", "1", "--config", cfg, "--out", out)
    assert code == 0
    assert (out / "eval_summary.csv").exists()


def test_render_kitti_frame(small_dataset, tmp_path):
    seg_out = tmp_path / "m"
    run_cli("segment", "--root", small_dataset, "--method", "depth",
            "--slices", "1", "--frames", "0..0", "--out", seg_out)
    out = tmp_path / "kitti.ppm"
    code = run_cli("render", "--root", small_dataset, "--frames", "0..0",
                   "--mask", seg_out / "000000.mask", "--out", out)
    assert code == 0
    header = out.read_bytes().split(b"\n")[1].split()
    assert [int(v) for v in header] == [1024, 64]


def test_segment_units_exceeding_slices_exit_2(small_dataset, tmp_path):
    code = run_cli("segment", "--root", small_dataset, "--method", "depth",
                   "--slices", "2", "--units", "3", "--out", tmp_path / "o")
    assert code == 2


def test_eval_with_units_matches_serial(small_dataset, tmp_path):
    a, b = tmp_path / "u1", tmp_path / "u2"
    run_cli("eval", "--root", small_dataset, "--method", "depth",
            "--slices", "2", "--out", a)
    run_cli("eval", "--root", small_dataset, "--method", "depth",
            "--slices", "2", "--units", "2", "--out", b)
    assert (a / "eval_frames.csv").read_bytes() == (b / "eval_frames.csv").read_bytes()

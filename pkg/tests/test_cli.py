import json
import os

import numpy as np
import pytest

from rototrack.cli import main
from rototrack.geometry import RotoCurve, save_curve_file, save_mask_png, RegionMask
from rototrack.synth import make_sequence, write_sequence


@pytest.fixture(scope="module")
def scene(tmp_path_factory):
    base = tmp_path_factory.mktemp("scene")
    seq = make_sequence("drift", 77, n_frames=5, size=(160, 120))
    frames = base / "frames"
    gt = base / "gt"
    curve = base / "init.json"
    write_sequence(seq, frames, gt, curve)
    return {"frames": str(frames), "gt": str(gt), "curve": str(curve),
            "n": 5, "seq": seq}


def test_track_writes_outputs(scene, tmp_path):
    out = tmp_path / "run"
    code = main(["track", scene["frames"], scene["curve"], "--out", str(out),
                 "--preset", "lean", "--seed", "3", "--quiet"])
    assert code == 0
    masks = sorted(os.listdir(out / "masks"))
    curves = sorted(os.listdir(out / "curves"))
    assert len(masks) == scene["n"] - 1
    assert len(curves) == scene["n"] - 1
    assert masks[0] == "00001.png"
    lines = (out / "metrics.csv").read_text().splitlines()
    assert lines[0] == "frame,iou,accuracy,e_total,e_curve,e_land,e_joint,iters,ms"
    assert len(lines) == scene["n"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["frames"] == scene["n"] - 1


def test_track_out_of_bounds_curve_fails(scene, tmp_path):
    bad = tmp_path / "bad.json"
    save_curve_file(bad, 0, RotoCurve(np.array([[0, 0], [500, 0], [500, 500]])))
    code = main(["track", scene["frames"], str(bad), "--out",
                 str(tmp_path / "o"), "--quiet"])
    assert code == 1


def test_track_with_gt_fills_iou_column(scene, tmp_path):
    out = tmp_path / "run_gt"
    code = main(["track", scene["frames"], scene["curve"], "--out", str(out),
                 "--preset", "lean", "--seed", "3", "--gt", scene["gt"],
                 "--quiet"])
    assert code == 0
    rows = (out / "metrics.csv").read_text().splitlines()[1:]
    for row in rows:
        iou = row.split(",")[1]
        assert iou != ""
        assert 0.0 <= float(iou) <= 1.0


def test_track_determinism_byte_identical(scene, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = main(["track", scene["frames"], scene["curve"], "--out",
                     str(out), "--preset", "medium", "--seed", "11",
                     "--quiet"])
        assert code == 0
        curves = {}
        for f in sorted(os.listdir(out / "curves")):
            curves[f] = (out / "curves" / f).read_bytes()
        csv_rows = [",".join(line.split(",")[:-1])  # ms column is wall clock
                    for line in (out / "metrics.csv").read_text().splitlines()]
        outs.append((curves, csv_rows))
    assert outs[0] == outs[1]


def test_eval_identity(scene, tmp_path, capsys):
    code = main(["eval", scene["gt"], scene["gt"],
                 "--csv", str(tmp_path / "eval.csv")])
    assert code == 0
    out = capsys.readouterr().out
    assert "mean: accuracy 1.0000 iou 1.0000" in out


def test_eval_missing_prediction(scene, tmp_path, capsys):
    pred = tmp_path / "partial"
    pred.mkdir()
    names = sorted(os.listdir(scene["gt"]))
    for name in names[:-1]:
        data = (np.asarray(scene["seq"].gt_masks[0].inside) * 255).astype(np.uint8)
        from PIL import Image
        Image.fromarray(data, mode="L").save(pred / name)
    code = main(["eval", str(pred), scene["gt"]])
    assert code == 1
    assert names[-1] in capsys.readouterr().err


def test_eval_half_overlap(tmp_path, capsys):
    pred_dir = tmp_path / "pred"
    gt_dir = tmp_path / "gt"
    pred_dir.mkdir()
    gt_dir.mkdir()
    a = np.zeros((20, 20), dtype=bool)
    a[:10, :] = True
    c = np.zeros((20, 20), dtype=bool)
    c[:10, :10] = True
    c[10:, :10] = True
    save_mask_png(gt_dir / "m.png", RegionMask(a))
    save_mask_png(pred_dir / "m.png", RegionMask(c))
    code = main(["eval", str(pred_dir), str(gt_dir)])
    assert code == 0
    assert "iou 0.3333" in capsys.readouterr().out


def test_config_file_flow(scene, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("preset = lean\nseed = 4\nmove_radius = 1\n")
    out = tmp_path / "cfgrun"
    code = main(["track", scene["frames"], scene["curve"], "--out", str(out),
                 "--config", str(cfg), "--quiet"])
    assert code == 0


def test_unknown_config_key_fails(scene, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nonsense = 1\n")
    code = main(["track", scene["frames"], scene["curve"], "--out",
                 str(tmp_path / "x"), "--config", str(cfg), "--quiet"])
    assert code == 1

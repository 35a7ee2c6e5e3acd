"""Command-line entry points, exercised in-process through main()."""
import csv
import io
import json

import numpy as np
import pytest

from clickseg.cli import main
from clickseg.core import (
    BinaryMask,
    iou,
    read_pgm_mask,
    rle_encode,
    rle_to_json,
    save_bytes,
    save_json,
    write_pgm_gray,
    write_pgm_mask,
    write_ppm,
)
from clickseg.crf import CrfParams
from clickseg.evaluation import pole_of_inaccessibility
from clickseg.synth import (
    blob_mask,
    crf_instance,
    translating_sequence,
    two_tone_scene,
    write_sequence_dir,
)

ZERO_CRF = CrfParams(w_app=0.0, w_smooth=0.0)


@pytest.fixture()
def scene(tmp_path):
    """A two-tone instance on disk plus the paths segment-like commands use."""
    img, gt = two_tone_scene(seed=0, noise=4.0)
    paths = {
        "image": str(tmp_path / "image.ppm"),
        "gt": str(tmp_path / "gt.pgm"),
        "clicks": str(tmp_path / "clicks.json"),
        "backend": str(tmp_path / "backend.json"),
        "crf": str(tmp_path / "crf.json"),
        "out": str(tmp_path / "out.pgm"),
    }
    save_bytes(paths["image"], write_ppm(img))
    save_bytes(paths["gt"], write_pgm_mask(gt))
    x, y = pole_of_inaccessibility(gt.labels)
    save_json(paths["clicks"], [{"x": x, "y": y, "polarity": "pos"}])
    save_json(paths["backend"], {"kind": "oracle",
                                 "params": {"gt": rle_to_json(rle_encode(gt))}})
    save_json(paths["crf"], ZERO_CRF.to_json())
    return img, gt, paths


# --- segment -----------------------------------------------------------------

def test_segment_command(scene):
    img, gt, p = scene
    rc = main(["segment", "--image", p["image"], "--clicks", p["clicks"],
               "--backend", p["backend"], "--crf", p["crf"],
               "--out", p["out"]])
    assert rc == 0
    out = read_pgm_mask(open(p["out"], "rb").read())
    assert np.array_equal(out.labels, gt.labels)


def test_segment_is_deterministic(scene, tmp_path):
    img, gt, p = scene
    save_json(p["backend"], {"kind": "color_model", "params": {}})
    outs = []
    for name in ("a.pgm", "b.pgm"):
        out = str(tmp_path / name)
        rc = main(["segment", "--image", p["image"], "--clicks", p["clicks"],
                   "--backend", p["backend"], "--out", out, "--seed", "3"])
        assert rc == 0
        outs.append(open(out, "rb").read())
    assert outs[0] == outs[1]


def test_segment_with_prior_mask(scene, tmp_path):
    img, gt, p = scene
    save_json(p["backend"], {"kind": "color_model", "params": {}})
    rc = main(["segment", "--image", p["image"], "--clicks", p["clicks"],
               "--backend", p["backend"], "--crf", p["crf"],
               "--prior", p["gt"], "--out", p["out"]])
    assert rc == 0
    out = read_pgm_mask(open(p["out"], "rb").read())
    assert iou(out, gt) >= 0.9


def test_segment_missing_file_exits_one(scene, capsys):
    _, _, p = scene
    rc = main(["segment", "--image", "/no/such/file.ppm",
               "--clicks", p["clicks"], "--backend", p["backend"],
               "--out", p["out"]])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")


# --- simulate ----------------------------------------------------------------

def test_simulate_strategies(scene, tmp_path):
    img, gt, p = scene
    pred_path = str(tmp_path / "pred.pgm")
    save_bytes(pred_path, write_pgm_mask(BinaryMask.empty(gt.width,
                                                          gt.height)))
    for strategy, expect_polarity in (("correction", "pos"),
                                      ("positive", "pos"),
                                      ("1", "neg"), ("3", "neg")):
        out = str(tmp_path / ("clicks_%s.json" % strategy))
        argv = ["simulate", "--gt", p["gt"], "--strategy", strategy,
                "--n", "3", "--out", out]
        if strategy == "correction":
            argv += ["--pred", pred_path]
        assert main(argv) == 0
        clicks = json.load(open(out))["clicks"]
        assert 0 < len(clicks) <= 3
        assert all(c["polarity"] == expect_polarity for c in clicks)


def test_simulate_seed_changes_draws(scene, tmp_path):
    _, _, p = scene
    outs = []
    for seed in ("0", "0", "1"):
        out = str(tmp_path / ("s%s_%d.json" % (seed, len(outs))))
        assert main(["simulate", "--gt", p["gt"], "--strategy", "positive",
                     "--n", "4", "--seed", seed, "--out", out]) == 0
        outs.append(json.load(open(out)))
    assert outs[0] == outs[1]
    assert outs[0] != outs[2]


def test_simulate_correction_needs_pred(scene, capsys):
    _, _, p = scene
    rc = main(["simulate", "--gt", p["gt"], "--strategy", "correction",
               "--n", "2", "--out", "/tmp/unused.json"])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


# --- crf ---------------------------------------------------------------------

def test_crf_command_thresholds_with_zero_weights(tmp_path):
    img, prob = crf_instance(seed=4)
    img_path, prob_path = str(tmp_path / "i.ppm"), str(tmp_path / "p.pgm")
    params_path, out_path = str(tmp_path / "c.json"), str(tmp_path / "o.pgm")
    save_bytes(img_path, write_ppm(img))
    save_bytes(prob_path, write_pgm_gray(prob.values))
    save_json(params_path, ZERO_CRF.to_json())
    rc = main(["crf", "--image", img_path, "--prob", prob_path,
               "--params", params_path, "--out", out_path])
    assert rc == 0
    out = read_pgm_mask(open(out_path, "rb").read())
    assert np.array_equal(out.labels, blob_mask(seed=4).labels)


# --- grabcut -----------------------------------------------------------------

def test_grabcut_command(scene, tmp_path):
    img, gt, p = scene
    rows = np.flatnonzero(gt.labels.any(axis=1))
    cols = np.flatnonzero(gt.labels.any(axis=0))
    box = "%d,%d,%d,%d" % (cols[0], rows[0], cols[-1], rows[-1])
    rc = main(["grabcut", "--image", p["image"], "--box", box,
               "--out", p["out"]])
    assert rc == 0
    out = read_pgm_mask(open(p["out"], "rb").read())
    assert iou(out, gt) >= 0.9


def test_grabcut_rejects_malformed_box(scene, capsys):
    _, _, p = scene
    rc = main(["grabcut", "--image", p["image"], "--box", "1,2,3",
               "--out", p["out"]])
    assert rc == 1
    assert "x0,y0,x1,y1" in capsys.readouterr().err


# --- propagate ---------------------------------------------------------------

def test_propagate_command(tmp_path):
    frames, gts = translating_sequence(seed=6, n_frames=6)
    write_sequence_dir(str(tmp_path), "seq", frames, gts)
    first_path = str(tmp_path / "first.pgm")
    save_bytes(first_path, write_pgm_mask(gts[0]))
    out_dir = str(tmp_path / "masks")
    rc = main(["propagate", "--frames", str(tmp_path / "seq" / "frames"),
               "--first-mask", first_path, "--out", out_dir])
    assert rc == 0
    for t, gt in enumerate(gts):
        m = read_pgm_mask(open("%s/%04d.pgm" % (out_dir, t), "rb").read())
        assert iou(m, gt) >= 0.8
    m0 = read_pgm_mask(open("%s/0000.pgm" % out_dir, "rb").read())
    assert np.array_equal(m0.labels, gts[0].labels)


def test_propagate_needs_frames(tmp_path, capsys):
    rc = main(["propagate", "--frames", str(tmp_path),
               "--first-mask", "x.pgm", "--out", str(tmp_path / "o")])
    assert rc == 1
    assert "no frames found" in capsys.readouterr().err


# --- eval --------------------------------------------------------------------

def test_eval_clicks_over_synth_dataset(tmp_path, capsys):
    root = str(tmp_path / "data")
    for seed, name in ((0, "a"), (1, "b")):
        assert main(["synth", "--kind", "instance", "--out", root,
                     "--id", name, "--seed", str(seed)]) == 0
    backend_path = str(tmp_path / "backend.json")
    save_json(backend_path, {"kind": "oracle", "params": {}})
    csv_path = str(tmp_path / "report.csv")
    rc = main(["eval", "clicks", "--data", root, "--backend", backend_path,
               "--threshold", "0.9", "--out", csv_path])
    assert rc == 0
    rows = list(csv.DictReader(open(csv_path)))
    assert len(rows) == 1
    assert rows[0]["method"] == "oracle"
    assert rows[0]["dataset"] == "data"
    assert float(rows[0]["mean_clicks"]) <= 2.0
    assert float(rows[0]["mean_iou"]) >= 0.9

    # without --out the CSV goes to stdout
    rc = main(["eval", "clicks", "--data", root, "--backend", backend_path])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("method,")


def test_eval_refine_tabulates_all_methods(tmp_path, capsys, monkeypatch):
    import clickseg.cli as cli
    from clickseg.synth import degrade_mask, textured_scene

    def tiny_suite():
        out = []
        for seed in (0, 1):
            img, gt = textured_scene(seed=seed, overlap=0.9)
            out.append(("translate", img, gt,
                        degrade_mask(gt, seed=seed, target_iou=0.5,
                                     op="translate")))
        return out

    monkeypatch.setattr(cli, "synthetic_correction_suite", tiny_suite)
    rc = main(["eval", "refine", "--k", "1"])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "method,delta_at_1"
    methods = [line.split(",")[0] for line in lines[1:]]
    assert methods == ["prior", "no_prior", "grabcut_box"]
    for line in lines[1:]:
        float(line.split(",")[1])  # parses as a number


# --- synth -------------------------------------------------------------------

def test_synth_kinds_lay_out_datasets(tmp_path):
    root = str(tmp_path)
    assert main(["synth", "--kind", "instance", "--out", root,
                 "--id", "i0"]) == 0
    assert (tmp_path / "i0" / "image.ppm").is_file()
    assert (tmp_path / "i0" / "gt.pgm").is_file()
    assert main(["synth", "--kind", "textured", "--out", root,
                 "--id", "t0", "--seed", "2"]) == 0
    assert (tmp_path / "t0" / "image.ppm").is_file()
    assert main(["synth", "--kind", "sequence", "--out", root,
                 "--id", "s0"]) == 0
    assert (tmp_path / "s0" / "frames" / "0000.ppm").is_file()
    assert (tmp_path / "s0" / "gts" / "0019.pgm").is_file()


# --- argument handling -------------------------------------------------------

def test_unknown_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["transmogrify"])
    assert exc.value.code == 2


def test_missing_required_argument_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["segment", "--image", "x.ppm"])
    assert exc.value.code == 2

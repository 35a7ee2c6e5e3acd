"""Command-line interface.

Subcommands: segment, simulate, crf, grabcut, propagate, eval, serve,
synth. Every command exits 0 on success and 1 with a one-line error on
runtime failure; usage errors exit 2 (argparse's convention). `--seed` is
accepted wherever randomness exists, making outputs reproducible.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .core import (
    BinaryMask,
    iou,
    read_pgm_prob,
    read_pgm_mask,
    read_ppm,
    read_bytes,
    save_bytes,
    save_json,
    write_pgm_mask,
)
from .crf import CrfParams, crf_refine
from .engine import new_session, refine_step
from .evaluation import (
    CORRECTION_METHODS,
    EVAL_CRF_PARAMS,
    ProtocolConfig,
    correction_trial,
    load_dataset,
    report_csv,
    run_clicks_protocol,
    synthetic_correction_suite,
)
from .graphcut import BoxPrior, grabcut_segment
from .guidance import Click, EncodingConfig
from .predict import BackendSpec, fit_first_frame_model, propagate_sequence
from .simulate import (
    SamplingConfig,
    sample_correction_clicks,
    sample_negative_clicks,
    sample_positive_clicks,
)
from . import synth


def _load_clicks(path: str) -> list[Click]:
    data = json.loads(read_bytes(path).decode("utf-8"))
    if isinstance(data, dict):
        data = data.get("clicks", [])
    return [Click.from_json(obj) for obj in data]


def _load_backend(path: str, seed: int | None) -> BackendSpec:
    spec = BackendSpec.from_json(json.loads(read_bytes(path).decode("utf-8")))
    if seed is not None:
        params = dict(spec.params)
        params["seed"] = seed
        spec = BackendSpec(spec.kind, params)
    return spec


def _load_crf(path: str | None) -> CrfParams | None:
    if path is None:
        return None
    return CrfParams.from_json(json.loads(read_bytes(path).decode("utf-8")))


def _cmd_segment(args) -> int:
    image = read_ppm(read_bytes(args.image))
    clicks = _load_clicks(args.clicks)
    backend = _load_backend(args.backend, args.seed)
    prior = (read_pgm_mask(read_bytes(args.prior))
             if args.prior else None)
    s = new_session(image, backend, crf=_load_crf(args.crf),
                    initial_mask=prior,
                    use_prior_mask=prior is not None)
    s, mask = refine_step(s, clicks)
    save_bytes(args.out, write_pgm_mask(mask))
    return 0


def _cmd_simulate(args) -> int:
    cfg = SamplingConfig(rng_seed=args.seed)
    gt = read_pgm_mask(read_bytes(args.gt))
    if args.strategy == "correction":
        if not args.pred:
            raise ValueError("correction sampling needs --pred")
        pred = read_pgm_mask(read_bytes(args.pred))
        clicks = sample_correction_clicks(pred, gt, args.n, cfg)
    elif args.strategy == "positive":
        clicks = sample_positive_clicks(gt, args.n, cfg)
    else:
        clicks = sample_negative_clicks(gt, [], args.n,
                                        int(args.strategy), cfg)
    save_json(args.out, {"clicks": [c.to_json() for c in clicks]})
    return 0


def _cmd_crf(args) -> int:
    image = read_ppm(read_bytes(args.image))
    prob = read_pgm_prob(read_bytes(args.prob))
    params = _load_crf(args.params) or CrfParams()
    mask = crf_refine(prob, image, params)
    save_bytes(args.out, write_pgm_mask(mask))
    return 0


def _cmd_grabcut(args) -> int:
    image = read_ppm(read_bytes(args.image))
    try:
        x0, y0, x1, y1 = (int(v) for v in args.box.split(","))
    except ValueError:
        raise ValueError("--box expects x0,y0,x1,y1")
    clicks = _load_clicks(args.clicks) if args.clicks else []
    mask = grabcut_segment(image, BoxPrior(x0, y0, x1, y1), clicks,
                           seed=args.seed)
    save_bytes(args.out, write_pgm_mask(mask))
    return 0


def _cmd_propagate(args) -> int:
    frames = []
    t = 0
    while True:
        path = os.path.join(args.frames, "%04d.ppm" % t)
        if not os.path.exists(path):
            break
        frames.append(read_ppm(read_bytes(path)))
        t += 1
    if not frames:
        raise ValueError("no frames found under %r (expected 0000.ppm…)"
                         % args.frames)
    first = read_pgm_mask(read_bytes(args.first_mask))
    model = fit_first_frame_model(frames[0], first)
    crf = _load_crf(args.crf) or CrfParams()
    masks = propagate_sequence(frames, first, model, crf,
                               args.temporal_weight)
    os.makedirs(args.out, exist_ok=True)
    for t, m in enumerate(masks):
        save_bytes(os.path.join(args.out, "%04d.pgm" % t),
                   write_pgm_mask(m))
    return 0


def _cmd_eval_clicks(args) -> int:
    backend = _load_backend(args.backend, args.seed)
    cfg = ProtocolConfig(iou_threshold=args.threshold, backend=backend,
                         max_clicks=args.max_clicks,
                         placement=args.placement,
                         use_prior_mask=not args.no_prior,
                         seed=args.seed or 0)
    dataset = load_dataset(args.data)
    report = run_clicks_protocol(dataset, cfg)
    rows = [{
        "method": backend.kind,
        "dataset": os.path.basename(os.path.normpath(args.data)),
        "threshold": args.threshold,
        "mean_clicks": report.mean_clicks,
        "mean_iou": report.mean_iou,
    }]
    if args.out:
        save_bytes(args.out, report_csv(rows).encode("utf-8"))
    else:
        sys.stdout.write(report_csv(rows))
    return 0


def _cmd_eval_refine(args) -> int:
    suite = synthetic_correction_suite()
    ks = sorted(set(args.k))
    table = {m: {k: [] for k in ks} for m in CORRECTION_METHODS}
    for i, (op, img, gt, bad) in enumerate(suite):
        base = iou(bad, gt)
        for m in CORRECTION_METHODS:
            r = correction_trial(img, gt, bad, m, k_clicks=ks,
                                 backend=BackendSpec("color_model"),
                                 seed=i)
            for k in ks:
                table[m][k].append(r["iou_at"][k] - base)
    lines = ["method," + ",".join("delta_at_%d" % k for k in ks)]
    for m in CORRECTION_METHODS:
        lines.append(m + "," + ",".join(
            "%.4f" % float(np.mean(table[m][k])) for k in ks))
    text = "\n".join(lines) + "\n"
    if args.out:
        save_bytes(args.out, text.encode("utf-8"))
    else:
        sys.stdout.write(text)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app, resolve_data_dir

    app = create_app(args.data_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_synth(args) -> int:
    if args.kind == "instance":
        img, gt = synth.two_tone_scene(seed=args.seed, noise=4.0)
        synth.write_instance_dir(args.out, args.id, img, gt)
    elif args.kind == "textured":
        img, gt = synth.textured_scene(seed=args.seed)
        synth.write_instance_dir(args.out, args.id, img, gt)
    else:
        frames, gts = synth.translating_sequence(seed=args.seed)
        synth.write_sequence_dir(args.out, args.id, frames, gts)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clickseg",
                                description="interactive segmentation "
                                            "engine and harnesses")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("segment", help="segment one image from clicks")
    sp.add_argument("--image", required=True)
    sp.add_argument("--clicks", required=True)
    sp.add_argument("--backend", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--prior", default=None,
                    help="optional prior mask (pgm)")
    sp.add_argument("--crf", default=None, help="CRF params JSON file")
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(fn=_cmd_segment)

    sp = sub.add_parser("simulate", help="sample simulated-user clicks")
    sp.add_argument("--gt", required=True)
    sp.add_argument("--pred", default=None)
    sp.add_argument("--strategy", default="correction",
                    choices=["correction", "positive", "1", "2", "3"])
    sp.add_argument("--n", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_simulate)

    sp = sub.add_parser("crf", help="refine a probability map")
    sp.add_argument("--image", required=True)
    sp.add_argument("--prob", required=True, help="probability map (pgm)")
    sp.add_argument("--params", default=None, help="CRF params JSON file")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_crf)

    sp = sub.add_parser("grabcut", help="box-driven GrabCut segmentation")
    sp.add_argument("--image", required=True)
    sp.add_argument("--box", required=True, help="x0,y0,x1,y1")
    sp.add_argument("--clicks", default=None)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=_cmd_grabcut)

    sp = sub.add_parser("propagate", help="propagate a first-frame mask")
    sp.add_argument("--frames", required=True,
                    help="directory of 0000.ppm, 0001.ppm, …")
    sp.add_argument("--first-mask", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--temporal-weight", type=float, default=2.0)
    sp.add_argument("--crf", default=None, help="CRF params JSON file")
    sp.set_defaults(fn=_cmd_propagate)

    sp = sub.add_parser("eval", help="evaluation protocols")
    esub = sp.add_subparsers(dest="protocol", required=True)

    ep = esub.add_parser("clicks", help="clicks-to-threshold over a dataset")
    ep.add_argument("--data", required=True,
                    help="dataset root: <id>/image.ppm + gt.pgm")
    ep.add_argument("--backend", required=True)
    ep.add_argument("--threshold", type=float, default=0.9)
    ep.add_argument("--max-clicks", type=int, default=20)
    ep.add_argument("--placement", default="center",
                    choices=["center", "sampler"])
    ep.add_argument("--no-prior", action="store_true")
    ep.add_argument("--seed", type=int, default=None)
    ep.add_argument("--out", default=None, help="CSV path (default stdout)")
    ep.set_defaults(fn=_cmd_eval_clicks)

    ep = esub.add_parser("refine",
                         help="correction-method comparison on the "
                              "synthetic corrupted-mask suite")
    ep.add_argument("--k", type=int, nargs="+", default=[1, 4, 10])
    ep.add_argument("--out", default=None, help="CSV path (default stdout)")
    ep.set_defaults(fn=_cmd_eval_refine)

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("--port", type=int, default=8790)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--data-dir", default=None)
    sp.set_defaults(fn=_cmd_serve)

    sp = sub.add_parser("synth", help="generate synthetic demo data")
    sp.add_argument("--kind", default="instance",
                    choices=["instance", "textured", "sequence"])
    sp.add_argument("--out", required=True, help="dataset root directory")
    sp.add_argument("--id", default="demo")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=_cmd_synth)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as e:  # one-line runtime error, exit 1
        sys.stderr.write("error: %s\n" % e)
        return 1


if __name__ == "__main__":
    sys.exit(main())

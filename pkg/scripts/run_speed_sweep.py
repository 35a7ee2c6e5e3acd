#!/usr/bin/env python3
"""Sweep object speed and relate temporal consistency to mask quality.

Propagates a first-frame mask across synthetic translating-object
sequences of increasing speed, then prints per-sequence frame-to-frame
consistency next to mean IOU against ground truth, and their Pearson
correlation. A positive correlation is what justifies using consistency
as a ground-truth-free worst-frame signal.
"""
import argparse
import sys

import numpy as np

from clickseg.core import iou, rle_encode, rle_to_json
from clickseg.engine import new_sequence, new_session, refine_step, segment_sequence
from clickseg.evaluation import (
    EVAL_CRF_PARAMS,
    correlation,
    pole_of_inaccessibility,
    temporal_consistency,
)
from clickseg.guidance import POSITIVE, Click
from clickseg.predict import BackendSpec
from clickseg.synth import translating_sequence


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sequences", type=int, default=20)
    ap.add_argument("--max-speed", type=float, default=2.5)
    ap.add_argument("--frames", type=int, default=16)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--seed0", type=int, default=300)
    args = ap.parse_args(argv)

    consistencies, qualities = [], []
    print("speed   consistency   mean_iou")
    for i, speed in enumerate(np.linspace(0.0, args.max_speed, args.sequences)):
        frames, gts = translating_sequence(
            args.seed0 + i, n_frames=args.frames, height=args.size,
            width=args.size, speed=float(speed), noise=10.0,
            palette_gap=50.0, radius_frac=0.13)
        spec = BackendSpec("oracle", {"gt": rle_to_json(rle_encode(gts[0]))})
        s = new_session(frames[0], spec, crf=EVAL_CRF_PARAMS)
        x, y = pole_of_inaccessibility(gts[0].labels)
        s, _ = refine_step(s, [Click(x=x, y=y, polarity=POSITIVE)])
        seq = segment_sequence(new_sequence(frames, s, crf=EVAL_CRF_PARAMS))

        c = temporal_consistency(seq.masks)
        q = float(np.mean([iou(m, g) for m, g in zip(seq.masks, gts)]))
        consistencies.append(c)
        qualities.append(q)
        print(f"{speed:5.2f}   {c:11.4f}   {q:8.4f}")

    print(f"\nPearson r = {correlation(consistencies, qualities):.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

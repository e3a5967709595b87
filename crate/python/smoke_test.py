#!/usr/bin/env python3
"""Smoke test of the Python bindings.

Builds nothing itself: expects `cargo build -p hdspeech-py` (debug or
release) to have produced the extension library, which this script copies
next to itself under the importable module name.
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def locate_extension() -> Path:
    candidates = [
        ROOT / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libhdspeech_py.so", "hdspeech_py.so", "libhdspeech_py.dylib")
    ]
    for c in candidates:
        if c.exists():
            return c
    sys.exit("extension not found; run `cargo build -p hdspeech-py` first")


def main() -> None:
    staging = Path(tempfile.mkdtemp(prefix="hdspeech_py_"))
    shutil.copy(locate_extension(), staging / "hdspeech_py.so")
    sys.path.insert(0, str(staging))
    import hdspeech_py as hd

    # MFCC: 1 s at 16 kHz -> 98 frames x 52 coefficients
    samples = [math.sin(2 * math.pi * 440 * i / 16000) for i in range(16000)]
    frames = hd.extract_mfcc(samples, 16000)
    assert len(frames) == 98, len(frames)
    assert len(frames[0]) == 52

    # deltas of a constant sequence vanish
    deltas = hd.append_deltas([[1.0, 2.0]] * 5, 2)
    assert all(abs(v) < 1e-12 for row in deltas for v in row[2:])

    # DTW: zero self-distance, known single-cell value
    assert hd.dtw_distance([[0.0]], [[3.0]]) == 3.0
    seq = [[0.0], [1.0], [2.0]]
    assert hd.dtw_distance(seq, seq) == 0.0

    # WER: one deletion out of three reference tokens
    w = hd.compute_wer(["the", "old", "man"], ["the", "man"])
    assert w["deletions"] == 1 and w["insertions"] == 0 and w["substitutions"] == 0
    assert abs(w["wer_percent"] - 100.0 / 3.0) < 1e-9

    # k-NN with an obvious nearest neighbour
    assert hd.knn_predict([[0.0], [10.0]], [False, True], [9.0], 1) is True

    # Cochran's Q frozen case
    q, df, p = hd.cochrans_q(
        [[True, True, False], [True, False, False], [True, True, True], [False, False, False]]
    )
    assert abs(q - 3.0) < 1e-9 and df == 2 and abs(p - 0.22313016014842982) < 1e-6

    # t-test frozen case
    t, df, p = hd.t_test([2.1, 2.5, 1.9, 2.3, 2.7], [3.0, 3.4, 2.9, 3.6])
    assert abs(t - -4.2772831120845884) < 1e-9
    assert abs(p - 0.0036676251544393106) < 1e-6

    # synthetic corpus directory
    with tempfile.TemporaryDirectory() as d:
        n = hd.generate_corpus_dir("noiseless", 3, d)
        assert n == 10
        assert (Path(d) / "corpus.json").exists()

    # tiny end-to-end pipeline
    with tempfile.TemporaryDirectory() as d:
        spec = {
            "dim": 6,
            "num_phones": 8,
            "vocab_size": 10,
            "sentences": 4,
            "sentence_len": [4, 6],
            "state_duration_mean": 3.5,
            "mean_separation": 1.0,
            "noise_scale": 0.08,
            "frame_shift": 0.01,
            "counts": {"control": 3, "premanifest": 1, "early": 1, "late": 1},
            "control": {"rate_factor": 1.0, "pause_rate": 0.2, "pause_frames": [16, 24],
                        "filler_rate": 0.1, "error_rate": 0.0, "gop_shift": 0.0},
            "premanifest": {"rate_factor": 1.5, "pause_rate": 2.0, "pause_frames": [16, 26],
                            "filler_rate": 1.5, "error_rate": 0.2, "gop_shift": 0.4},
            "early": {"rate_factor": 1.5, "pause_rate": 2.0, "pause_frames": [16, 26],
                      "filler_rate": 1.5, "error_rate": 0.2, "gop_shift": 0.4},
            "late": {"rate_factor": 1.5, "pause_rate": 2.0, "pause_frames": [16, 26],
                     "filler_rate": 1.5, "error_rate": 0.2, "gop_shift": 0.4},
        }
        report = json.loads(
            hd.run_synthetic_pipeline(json.dumps(spec), 11, d, ["fa-orat"], ["knn"], 40, 2)
        )
        assert report["runs"][0]["mode"] == "fa-orat"
        assert 0.0 <= report["runs"][0]["accuracy"] <= 1.0
        assert (Path(d) / "report.json").exists()

    print("smoke test passed")


if __name__ == "__main__":
    main()

"""Sequence file round trips, validation, and the landmark conversion."""
import json

import numpy as np
import pytest

from liftkit.errors import ParseError, SchemaError, ValidationError
from liftkit.skeleton import (
    JOINT_INDEX,
    MEDIAPIPE_TO_H36M_COPY,
    MIRROR_PAIRS,
    NUM_JOINTS,
    NUM_MEDIAPIPE_LANDMARKS,
    MediapipeSequence,
    SkeletonSequence,
    load_sequence,
    mediapipe_to_h36m,
    mirror_frames,
    save_mediapipe_sequence,
    save_sequence,
    validate,
    validate_mediapipe,
)
from liftkit.synthgen import make_mediapipe_sequence

from conftest import random_sequence


def test_h36m_round_trip_is_byte_identical(tmp_path, rng):
    seq = random_sequence(rng, num_frames=37)
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_sequence(seq, p1)
    loaded = load_sequence(p1)
    assert loaded.fps == seq.fps
    np.testing.assert_array_equal(loaded.frames, seq.frames)
    save_sequence(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_mediapipe_round_trip(tmp_path, squat_sequence):
    mp = make_mediapipe_sequence(squat_sequence)
    path = tmp_path / "mp.jsonl"
    save_mediapipe_sequence(mp, path)
    loaded = load_sequence(path, format="mediapipe-jsonl")
    np.testing.assert_array_equal(loaded.frames, mp.frames)
    np.testing.assert_array_equal(loaded.visibility, mp.visibility)


def test_save_rejects_wrong_joint_count(tmp_path, squat_sequence):
    mp = make_mediapipe_sequence(squat_sequence)
    with pytest.raises(ValidationError, match="17"):
        save_sequence(mp, tmp_path / "x.jsonl")
    with pytest.raises(ValidationError, match="33"):
        save_mediapipe_sequence(squat_sequence, tmp_path / "x.jsonl")


def test_validate_reports_problems(rng):
    seq = random_sequence(rng, num_frames=12)
    assert validate(seq) == []
    broken = seq.frames.copy()
    broken[3, 5, 1] = np.nan
    bad = SkeletonSequence(frames=broken, fps=0.0)
    problems = validate(bad)
    assert any("fps" in p for p in problems)
    assert any("non-finite" in p and "frame 3" in p for p in problems)
    short = SkeletonSequence(frames=seq.frames[:1], fps=25.0)
    assert any("at least 2" in p for p in validate(short))


def test_frames_are_immutable(rng):
    seq = random_sequence(rng, num_frames=4)
    with pytest.raises(ValueError):
        seq.frames[0, 0, 0] = 1.0


def test_load_rejects_malformed_files(tmp_path, rng):
    seq = random_sequence(rng, num_frames=5)
    good = tmp_path / "good.jsonl"
    save_sequence(seq, good)
    lines = good.read_text().splitlines()

    bad_header = tmp_path / "h.jsonl"
    bad_header.write_text("not json\n" + "\n".join(lines[1:]) + "\n")
    with pytest.raises(ParseError, match="line 1"):
        load_sequence(bad_header)

    header = json.loads(lines[0])
    header["format"] = "something-else"
    wrong_fmt = tmp_path / "f.jsonl"
    wrong_fmt.write_text(json.dumps(header) + "\n" + "\n".join(lines[1:]) + "\n")
    with pytest.raises(SchemaError, match="format"):
        load_sequence(wrong_fmt)

    bad_row = tmp_path / "r.jsonl"
    rec = json.loads(lines[2])
    rec["joints"] = rec["joints"][:-1]
    bad_row.write_text("\n".join([lines[0], lines[1], json.dumps(rec)]) + "\n")
    with pytest.raises(SchemaError, match="line 3"):
        load_sequence(bad_row)

    empty = tmp_path / "e.jsonl"
    empty.write_text("")
    with pytest.raises(ParseError):
        load_sequence(empty)


def test_mediapipe_conversion_copies_and_midpoints(squat_sequence):
    mp = make_mediapipe_sequence(squat_sequence)
    h36m = mediapipe_to_h36m(mp)
    for joint_idx, mp_idx in MEDIAPIPE_TO_H36M_COPY.items():
        np.testing.assert_array_equal(h36m.frames[:, joint_idx], mp.frames[:, mp_idx])
    root = h36m.frames[:, JOINT_INDEX["root"]]
    hips_mid = 0.5 * (mp.frames[:, 23] + mp.frames[:, 24])
    thorax = h36m.frames[:, JOINT_INDEX["thorax"]]
    shoulders_mid = 0.5 * (mp.frames[:, 11] + mp.frames[:, 12])
    spine = h36m.frames[:, JOINT_INDEX["spine"]]
    assert np.abs(root - hips_mid).max() <= 1e-12
    assert np.abs(thorax - shoulders_mid).max() <= 1e-12
    assert np.abs(spine - 0.5 * (root + thorax)).max() <= 1e-12


def test_mirror_frames_is_involution(rng):
    frames = random_sequence(rng, num_frames=8).frames
    twice = mirror_frames(mirror_frames(frames))
    np.testing.assert_array_equal(twice, frames)
    once = mirror_frames(frames)
    for li, ri in MIRROR_PAIRS:
        np.testing.assert_array_equal(once[:, li, 1:], frames[:, ri, 1:])
        np.testing.assert_array_equal(once[:, li, 0], -frames[:, ri, 0])


def test_visibility_range_is_validated(squat_sequence):
    mp = make_mediapipe_sequence(squat_sequence)
    bad = MediapipeSequence(frames=mp.frames, fps=mp.fps,
                            visibility=mp.visibility + 2.0)
    assert any("visibility" in p for p in validate_mediapipe(bad))


def test_constants_are_consistent():
    assert NUM_JOINTS == 17
    assert NUM_MEDIAPIPE_LANDMARKS == 33
    assert len(JOINT_INDEX) == NUM_JOINTS
    assert len(MEDIAPIPE_TO_H36M_COPY) == 14  # 17 minus the 3 interpolated

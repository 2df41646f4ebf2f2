"""Encoder stage oracles: smoothing, downsampling, interpolation, geometry."""
import numpy as np
import pytest

from liftkit.errors import DurationError, FormatError
from liftkit.motion_image import (
    CHAIN_JOINT_INDICES,
    KINEMATIC_CHAINS,
    EncoderConfig,
    MotionImage,
    downsample,
    encode,
    interpolate_chain,
    load_image,
    normalize_coordinates,
    save_image,
    smooth,
    with_norm_scale,
)
from liftkit.skeleton import JOINT_INDEX, SkeletonSequence

from conftest import random_sequence


def brute_force_smooth(frames: np.ndarray, window: int) -> np.ndarray:
    """Moving average with the window shrunk near both ends."""
    half = window // 2
    out = np.empty_like(frames)
    n = frames.shape[0]
    for t in range(n):
        lo, hi = max(0, t - half), min(n, t + half + 1)
        out[t] = frames[lo:hi].mean(axis=0)
    return out


def dense_linear_oracle(points: np.ndarray, num_points: int) -> np.ndarray:
    """Piecewise-linear resampling via np.interp per coordinate."""
    n = points.shape[0]
    src = np.linspace(0.0, 1.0, n)
    dst = np.linspace(0.0, 1.0, num_points)
    return np.stack([np.interp(dst, src, points[:, d])
                     for d in range(points.shape[1])], axis=1)


def test_smooth_matches_brute_force(rng):
    for window in (1, 3, 5, 7):
        seq = random_sequence(rng, num_frames=int(rng.integers(8, 60)))
        got = smooth(seq, window).frames
        want = brute_force_smooth(seq.frames, window)
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_smooth_window_one_is_identity(rng):
    seq = random_sequence(rng, num_frames=20)
    np.testing.assert_array_equal(smooth(seq, 1).frames, seq.frames)


def test_downsample_picks_every_kth_frame(rng):
    seq = random_sequence(rng, num_frames=21, fps=25.0)
    for factor in (1, 2, 3):
        ds = downsample(seq, factor)
        np.testing.assert_array_equal(ds.frames, seq.frames[::factor])
        assert ds.fps == pytest.approx(25.0 / factor)


def test_interpolate_chain_matches_dense_oracle(rng):
    for _ in range(50):
        n = int(rng.integers(2, 9))
        m = int(rng.integers(2, 128))
        pts = rng.normal(size=(n, 3))
        got = interpolate_chain(pts, m)
        want = dense_linear_oracle(pts, m)
        assert got.shape == (m, 3)
        assert np.abs(got - want).max() < 1e-9


def test_interpolate_preserves_endpoints(rng):
    pts = rng.normal(size=(5, 3))
    out = interpolate_chain(pts, 64)
    np.testing.assert_allclose(out[0], pts[0], atol=1e-12)
    np.testing.assert_allclose(out[-1], pts[-1], atol=1e-12)


def test_normalize_centers_frame_zero_root(rng):
    seq = random_sequence(rng, num_frames=10)
    cfg = EncoderConfig()
    out = normalize_coordinates(seq, cfg).frames
    root0 = out[0, JOINT_INDEX["root"]]
    np.testing.assert_allclose(root0, 0.5, atol=1e-12)
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_normalize_scale_and_clamp():
    # One joint 0.25 m right of the frame-0 root -> 0.5 + 0.25/2 = 0.625.
    frames = np.zeros((2, 17, 3))
    frames[:, JOINT_INDEX["left_wrist"], 0] = 0.25
    frames[:, JOINT_INDEX["head"], 1] = 9.0  # far out of range, must clamp
    seq = SkeletonSequence(frames=frames, fps=25.0)
    out = normalize_coordinates(seq, EncoderConfig()).frames
    assert out[0, JOINT_INDEX["left_wrist"], 0] == pytest.approx(0.625)
    assert out[0, JOINT_INDEX["head"], 1] == 1.0
    half = normalize_coordinates(seq, with_norm_scale(EncoderConfig(), 0.5)).frames
    assert half[0, JOINT_INDEX["left_wrist"], 0] == pytest.approx(0.75)


def test_encode_geometry(squat_sequence):
    cfg = EncoderConfig()
    img = encode(squat_sequence, cfg)
    assert img.pixels.shape == (384, 640, 3)
    assert img.valid_rows == 320
    expected_cols = -(-squat_sequence.num_frames // cfg.downsample_factor)
    assert img.valid_cols == expected_cols
    assert np.all(img.pixels[img.valid_rows:] == 0.0)
    assert np.all(img.pixels[:, img.valid_cols:] == 0.0)
    assert img.pixels[:img.valid_rows, :img.valid_cols].min() >= 0.0
    assert img.pixels.max() <= 1.0


def test_encode_rows_follow_chain_order(squat_sequence):
    """Row band k holds chain k; its first row equals the chain's first joint."""
    cfg = EncoderConfig()
    img = encode(squat_sequence, cfg)
    seq = smooth(squat_sequence, cfg.smooth_window)
    seq = downsample(seq, cfg.downsample_factor)
    seq = normalize_coordinates(seq, cfg)
    m = cfg.points_per_chain
    for k, joints in enumerate(CHAIN_JOINT_INDICES):
        first_joint = seq.frames[:, joints[0], :]  # (T', 3)
        band_first_row = img.pixels[k * m, :img.valid_cols, :]
        np.testing.assert_allclose(band_first_row, first_joint, atol=1e-9)
        last_joint = seq.frames[:, joints[-1], :]
        band_last_row = img.pixels[(k + 1) * m - 1, :img.valid_cols, :]
        np.testing.assert_allclose(band_last_row, last_joint, atol=1e-9)


def test_encode_rejects_overlength_unless_truncating(rng):
    cfg = EncoderConfig()
    max_frames = cfg.image_width * cfg.downsample_factor
    seq = random_sequence(rng, num_frames=max_frames + 10)
    with pytest.raises(DurationError):
        encode(seq, cfg)
    clipped = encode(seq, EncoderConfig(truncate=True))
    assert clipped.valid_cols == cfg.image_width


def test_smooth_first_flag_changes_order(rng):
    seq = random_sequence(rng, num_frames=40)
    a = encode(seq, EncoderConfig(smooth_first=True))
    b = encode(seq, EncoderConfig(smooth_first=False))
    assert not np.array_equal(a.pixels, b.pixels)
    manual = downsample(smooth(seq, 3), 2)
    manual = normalize_coordinates(manual, EncoderConfig())
    other = normalize_coordinates(smooth(downsample(seq, 2), 3), EncoderConfig())
    row0_a = a.pixels[0, :a.valid_cols]
    row0_b = b.pixels[0, :b.valid_cols]
    np.testing.assert_allclose(row0_a, manual.frames[:, CHAIN_JOINT_INDICES[0][0]], atol=1e-12)
    np.testing.assert_allclose(row0_b, other.frames[:, CHAIN_JOINT_INDICES[0][0]], atol=1e-12)


def test_image_round_trip_is_exact(tmp_path, squat_sequence):
    img = encode(squat_sequence, EncoderConfig())
    path = tmp_path / "a.img"
    save_image(img, path)
    loaded = load_image(path)
    # Stored as float32; compare in that precision.
    np.testing.assert_array_equal(loaded.pixels,
                                  img.pixels.astype(np.float32))
    assert (loaded.valid_rows, loaded.valid_cols) == (img.valid_rows, img.valid_cols)

    save_image(loaded, tmp_path / "b.img")
    assert (tmp_path / "a.img").read_bytes() == (tmp_path / "b.img").read_bytes()


def test_load_image_rejects_corrupt_files(tmp_path, squat_sequence):
    img = encode(squat_sequence, EncoderConfig())
    path = tmp_path / "a.img"
    save_image(img, path)
    raw = path.read_bytes()

    bad_magic = tmp_path / "m.img"
    bad_magic.write_bytes(b"NOTMAGIC" + raw[8:])
    with pytest.raises(FormatError):
        load_image(bad_magic)

    truncated = tmp_path / "t.img"
    truncated.write_bytes(raw[:-17])
    with pytest.raises(FormatError):
        load_image(truncated)

    trailing = tmp_path / "x.img"
    trailing.write_bytes(raw + b"\x00\x00")
    with pytest.raises(FormatError):
        load_image(trailing)


def test_config_validation():
    with pytest.raises(ValueError):
        EncoderConfig(smooth_window=2)
    with pytest.raises(ValueError):
        EncoderConfig(points_per_chain=100)  # 5 x 100 > 384 rows
    with pytest.raises(ValueError):
        EncoderConfig(downsample_factor=0)
    with pytest.raises(ValueError):
        EncoderConfig(norm_scale=0.0)
    assert len(KINEMATIC_CHAINS) == 5


def test_motion_image_shape_guard():
    with pytest.raises(ValueError):
        MotionImage(pixels=np.zeros((4, 4)), valid_rows=4, valid_cols=4)

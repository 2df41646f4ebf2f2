"""Convert a skeleton sequence into the padded motion image the model consumes.

The pipeline is: temporal smoothing (shrinking-window moving average),
downsampling to half rate, coordinate normalization, per-frame interpolation
of five kinematic chains to 64 points each, and assembly into a 384 x 640 x 3
image where rows are interpolated chain positions, columns are time steps,
and channels carry (x, y, z). Rows 0..319 are the valid band (5 chains x 64
points); everything outside the valid region is exactly zero.

Serialized images ("LIFTIMG1") are binary: an 8-byte magic, five little-endian
uint32 header fields (height, width, channels, valid_rows, valid_cols), then
row-major little-endian float32 pixels.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DurationError, FormatError
from .skeleton import JOINT_INDEX, SkeletonSequence

IMAGE_MAGIC = b"LIFTIMG1"

# The five chains, in fixed row order (64 rows each -> rows 0..319).
KINEMATIC_CHAINS = (
    ("trunk", ("root", "spine", "thorax", "neck", "head")),
    ("left_leg", ("root", "left_hip", "left_knee", "left_ankle")),
    ("right_leg", ("root", "right_hip", "right_knee", "right_ankle")),
    ("left_arm", ("thorax", "left_shoulder", "left_elbow", "left_wrist")),
    ("right_arm", ("thorax", "right_shoulder", "right_elbow", "right_wrist")),
)

CHAIN_JOINT_INDICES = tuple(
    tuple(JOINT_INDEX[name] for name in joints) for _, joints in KINEMATIC_CHAINS
)


@dataclass(frozen=True)
class EncoderConfig:
    """Knobs for the skeleton -> motion image pipeline.

    ``norm_scale`` is the coordinate half-range in meters that maps onto the
    [0, 1] pixel interval after root centering; values beyond it clamp.
    ``smooth_first`` selects whether smoothing runs before downsampling
    (the default) or after, for ablation.
    """

    smooth_window: int = 3
    points_per_chain: int = 64
    downsample_factor: int = 2
    image_height: int = 384
    image_width: int = 640
    norm_scale: float = 1.0
    truncate: bool = False
    smooth_first: bool = True

    def __post_init__(self):
        if self.smooth_window < 1 or self.smooth_window % 2 == 0:
            raise ValueError(f"smooth_window must be odd and >= 1, got {self.smooth_window}")
        if self.points_per_chain * len(KINEMATIC_CHAINS) > self.image_height:
            raise ValueError(
                f"{len(KINEMATIC_CHAINS)} chains x {self.points_per_chain} points "
                f"exceed image height {self.image_height}"
            )
        if self.downsample_factor < 1:
            raise ValueError(f"downsample_factor must be >= 1, got {self.downsample_factor}")
        if self.norm_scale <= 0:
            raise ValueError(f"norm_scale must be positive, got {self.norm_scale}")

    @property
    def valid_rows(self) -> int:
        return self.points_per_chain * len(KINEMATIC_CHAINS)


@dataclass
class MotionImage:
    """image_height x image_width x 3 pixels in [0, 1] with a valid top-left band."""

    pixels: np.ndarray
    valid_rows: int
    valid_cols: int
    source_id: str = ""

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"pixels must have shape (H, W, 3), got {self.pixels.shape}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def smooth(seq: SkeletonSequence, window: int) -> SkeletonSequence:
    """Moving average over time with the window shrunk near the ends.

    Interior frame t averages frames [t-h, t+h] with h = (window-1)/2; the
    first and last h frames average whatever neighbors exist.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    T = seq.num_frames
    if window > T:
        raise ValueError(f"window {window} exceeds sequence length {T}")
    if window == 1:
        return seq
    h = (window - 1) // 2
    flat = seq.frames.reshape(T, -1)
    csum = np.zeros((T + 1, flat.shape[1]), dtype=np.float64)
    np.cumsum(flat, axis=0, out=csum[1:])
    t = np.arange(T)
    lo = np.maximum(t - h, 0)
    hi = np.minimum(t + h, T - 1)
    sums = csum[hi + 1] - csum[lo]
    counts = (hi - lo + 1).astype(np.float64)[:, None]
    out = (sums / counts).reshape(seq.frames.shape)
    return SkeletonSequence(out, fps=seq.fps, source_id=seq.source_id)


def downsample(seq: SkeletonSequence, factor: int) -> SkeletonSequence:
    """Keep frames 0, factor, 2*factor, ... and divide fps by factor."""
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return seq
    return SkeletonSequence(
        seq.frames[::factor], fps=seq.fps / factor, source_id=seq.source_id
    )


def _interpolate_stack(points: np.ndarray, num_points: int) -> np.ndarray:
    """Piecewise-linear resampling along the joint axis.

    ``points`` has shape (..., P, 3); joint index 0..P-1 is the abscissa and
    the output samples ``num_points`` evenly spaced abscissae spanning
    [0, P-1], per spatial dimension independently.
    """
    P = points.shape[-2]
    if P < 2:
        raise ValueError(f"need at least 2 points to interpolate, got {P}")
    if num_points < 2:
        raise ValueError(f"num_points must be >= 2, got {num_points}")
    xs = np.linspace(0.0, P - 1, num_points)
    idx = np.minimum(np.floor(xs).astype(np.intp), P - 2)
    frac = xs - idx
    lo = points[..., idx, :]
    hi = points[..., idx + 1, :]
    return lo + (hi - lo) * frac.reshape((1,) * (points.ndim - 2) + (num_points, 1))


def interpolate_chain(points: np.ndarray, num_points: int) -> np.ndarray:
    """Resample one chain of P joint positions to ``num_points`` positions.

    The first and last outputs equal the chain's first and last joints
    exactly.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError(f"points must have shape (P, 3), got {points.shape}")
    return _interpolate_stack(points, num_points)


def normalize_coordinates(seq: SkeletonSequence, cfg: EncoderConfig) -> SkeletonSequence:
    """Center on the frame-0 root and map [-scale, +scale] affinely onto [0, 1].

    The frame-0 root itself lands at pixel value 0.5 in every channel;
    coordinates beyond +-norm_scale clamp to the range ends.
    """
    origin = seq.frames[0, JOINT_INDEX["root"]]
    values = 0.5 + (seq.frames - origin) / (2.0 * cfg.norm_scale)
    np.clip(values, 0.0, 1.0, out=values)
    return SkeletonSequence(values, fps=seq.fps, source_id=seq.source_id)


def encode(seq: SkeletonSequence, cfg: EncoderConfig | None = None) -> MotionImage:
    """Run the full pipeline and return the zero-padded motion image.

    Raises :class:`DurationError` when the downsampled frame count exceeds
    the image width, unless ``cfg.truncate`` keeps the head of the motion.
    """
    cfg = cfg or EncoderConfig()
    if cfg.smooth_first:
        seq = downsample(smooth(seq, cfg.smooth_window), cfg.downsample_factor)
    else:
        seq = smooth(downsample(seq, cfg.downsample_factor), cfg.smooth_window)
    if seq.num_frames > cfg.image_width:
        if not cfg.truncate:
            max_seconds = cfg.image_width / seq.fps
            raise DurationError(
                f"{seq.source_id or 'sequence'}: {seq.num_frames} downsampled frames "
                f"exceed image width {cfg.image_width} "
                f"(motion longer than {max_seconds:.1f} s); pass truncate to keep the head"
            )
        seq = SkeletonSequence(
            seq.frames[: cfg.image_width], fps=seq.fps, source_id=seq.source_id
        )
    seq = normalize_coordinates(seq, cfg)

    T = seq.num_frames
    M = cfg.points_per_chain
    pixels = np.zeros((cfg.image_height, cfg.image_width, 3), dtype=np.float64)
    for k, joints in enumerate(CHAIN_JOINT_INDICES):
        chain = seq.frames[:, joints, :]               # (T, P, 3)
        interp = _interpolate_stack(chain, M)          # (T, M, 3)
        pixels[k * M : (k + 1) * M, :T] = interp.transpose(1, 0, 2)
    return MotionImage(
        pixels, valid_rows=cfg.valid_rows, valid_cols=T, source_id=seq.source_id
    )


def save_image(image: MotionImage, path) -> None:
    """Serialize to the LIFTIMG1 binary layout (row-major float32)."""
    path = Path(path)
    header = struct.pack(
        "<5I",
        image.height,
        image.width,
        image.pixels.shape[2],
        image.valid_rows,
        image.valid_cols,
    )
    data = np.ascontiguousarray(image.pixels, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(IMAGE_MAGIC)
        fh.write(header)
        fh.write(data.tobytes())


def load_image(path) -> MotionImage:
    """Read a LIFTIMG1 file back into a float32 :class:`MotionImage`."""
    path = Path(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(IMAGE_MAGIC)] != IMAGE_MAGIC:
        raise FormatError(f"{path}: magic mismatch, not a LIFTIMG1 file")
    offset = len(IMAGE_MAGIC)
    if len(blob) < offset + 20:
        raise FormatError(f"{path}: truncated header")
    height, width, channels, valid_rows, valid_cols = struct.unpack_from("<5I", blob, offset)
    offset += 20
    expected = height * width * channels * 4
    if len(blob) != offset + expected:
        raise FormatError(
            f"{path}: payload is {len(blob) - offset} bytes, expected {expected}"
        )
    pixels = (
        np.frombuffer(blob, dtype="<f4", offset=offset)
        .reshape(height, width, channels)
        .copy()
    )
    return MotionImage(
        pixels, valid_rows=valid_rows, valid_cols=valid_cols, source_id=path.stem
    )


def with_norm_scale(cfg: EncoderConfig, norm_scale: float) -> EncoderConfig:
    """Return a copy of ``cfg`` with a different normalization scale."""
    return replace(cfg, norm_scale=norm_scale)

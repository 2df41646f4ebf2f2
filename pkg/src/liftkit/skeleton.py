"""Load, validate, convert, and persist 3D skeletal keypoint sequences.

Two on-disk layouts are supported, both JSON-lines with a one-line header:

h36m-jsonl (17 joints)::

    {"fps": 25.0, "units": "m", "format": "h36m17"}
    {"t": 0, "joints": [[x, y, z], ... 17 entries ...]}
    {"t": 1, "joints": [...]}

mediapipe-jsonl (33 landmarks)::

    {"fps": 25.0, "units": "m", "format": "mediapipe33"}
    {"t": 0, "joints": [[x, y, z], ... 33 entries ...], "vis": [v0, ... v32]}

Coordinates are meters; files declaring any other unit are rejected.

The canonical 17-joint ordering is fixed here (index: name):
0 root, 1 right_hip, 2 right_knee, 3 right_ankle, 4 left_hip, 5 left_knee,
6 left_ankle, 7 spine, 8 thorax, 9 neck, 10 head, 11 left_shoulder,
12 left_elbow, 13 left_wrist, 14 right_shoulder, 15 right_elbow,
16 right_wrist.

The 33-landmark layout lacks root, spine, and thorax; ``mediapipe_to_h36m``
derives them as midpoints (root = mid-hips, thorax = mid-shoulders,
spine = mid root/thorax) and copies the remaining 14 joints through the
fixed table ``MEDIAPIPE_TO_H36M_COPY``. The neck has no direct landmark and
is proxied by the nose; the head point is proxied by the left ear.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConversionError, ParseError, SchemaError, ValidationError

H36M_JOINT_NAMES = (
    "root",
    "right_hip",
    "right_knee",
    "right_ankle",
    "left_hip",
    "left_knee",
    "left_ankle",
    "spine",
    "thorax",
    "neck",
    "head",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
)

JOINT_INDEX = {name: i for i, name in enumerate(H36M_JOINT_NAMES)}

NUM_JOINTS = 17
NUM_MEDIAPIPE_LANDMARKS = 33

# Left/right partner indices, used for sagittal mirroring.
MIRROR_PAIRS = (
    (JOINT_INDEX["left_hip"], JOINT_INDEX["right_hip"]),
    (JOINT_INDEX["left_knee"], JOINT_INDEX["right_knee"]),
    (JOINT_INDEX["left_ankle"], JOINT_INDEX["right_ankle"]),
    (JOINT_INDEX["left_shoulder"], JOINT_INDEX["right_shoulder"]),
    (JOINT_INDEX["left_elbow"], JOINT_INDEX["right_elbow"]),
    (JOINT_INDEX["left_wrist"], JOINT_INDEX["right_wrist"]),
)

# Direct-copy part of the 33 -> 17 mapping: h36m joint index -> landmark index.
# root (0), spine (7), and thorax (8) are interpolated, not copied.
MEDIAPIPE_TO_H36M_COPY = {
    JOINT_INDEX["right_hip"]: 24,
    JOINT_INDEX["right_knee"]: 26,
    JOINT_INDEX["right_ankle"]: 28,
    JOINT_INDEX["left_hip"]: 23,
    JOINT_INDEX["left_knee"]: 25,
    JOINT_INDEX["left_ankle"]: 27,
    JOINT_INDEX["neck"]: 0,   # nose stands in for the neck
    JOINT_INDEX["head"]: 7,   # left ear stands in for the head point
    JOINT_INDEX["left_shoulder"]: 11,
    JOINT_INDEX["left_elbow"]: 13,
    JOINT_INDEX["left_wrist"]: 15,
    JOINT_INDEX["right_shoulder"]: 12,
    JOINT_INDEX["right_elbow"]: 14,
    JOINT_INDEX["right_wrist"]: 16,
}

MP_LEFT_HIP, MP_RIGHT_HIP = 23, 24
MP_LEFT_SHOULDER, MP_RIGHT_SHOULDER = 11, 12

H36M_HEADER_FORMAT = "h36m17"
MEDIAPIPE_HEADER_FORMAT = "mediapipe33"


@dataclass
class SkeletonSequence:
    """T x 17 x 3 joint positions (meters) at a known frame rate.

    Construction only enforces the array shape; use :func:`validate` for the
    full invariant report (T >= 2, finite coordinates, fps > 0). Frames are
    frozen after construction so sequences can be shared across threads.
    """

    frames: np.ndarray
    fps: float
    source_id: str = ""

    def __post_init__(self):
        frames = np.ascontiguousarray(self.frames, dtype=np.float64)
        if frames.ndim != 3 or frames.shape[1:] != (NUM_JOINTS, 3):
            raise ValueError(
                f"frames must have shape (T, {NUM_JOINTS}, 3), got {frames.shape}"
            )
        frames.flags.writeable = False
        self.frames = frames
        self.fps = float(self.fps)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def duration(self) -> float:
        return self.num_frames / self.fps if self.fps > 0 else float("nan")


@dataclass
class MediapipeSequence:
    """T x 33 x 3 landmark positions with per-landmark visibility in [0, 1]."""

    frames: np.ndarray
    visibility: np.ndarray
    fps: float
    source_id: str = ""

    def __post_init__(self):
        frames = np.ascontiguousarray(self.frames, dtype=np.float64)
        if frames.ndim != 3 or frames.shape[1:] != (NUM_MEDIAPIPE_LANDMARKS, 3):
            raise ValueError(
                f"frames must have shape (T, {NUM_MEDIAPIPE_LANDMARKS}, 3), "
                f"got {frames.shape}"
            )
        vis = np.ascontiguousarray(self.visibility, dtype=np.float64)
        if vis.shape != frames.shape[:2]:
            raise ValueError(
                f"visibility must have shape {frames.shape[:2]}, got {vis.shape}"
            )
        frames.flags.writeable = False
        vis.flags.writeable = False
        self.frames = frames
        self.visibility = vis
        self.fps = float(self.fps)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


def validate(seq: SkeletonSequence) -> list[str]:
    """Report every invariant violation; an empty list means the sequence is valid."""
    problems: list[str] = []
    if seq.frames.ndim != 3 or seq.frames.shape[1:] != (NUM_JOINTS, 3):
        problems.append(
            f"frames must be (T, {NUM_JOINTS}, 3), got {seq.frames.shape}")
        return problems
    if seq.num_frames < 2:
        problems.append(f"sequence has {seq.num_frames} frames, need at least 2")
    if not seq.fps > 0:
        problems.append(f"fps must be positive, got {seq.fps}")
    bad = ~np.isfinite(seq.frames)
    if bad.any():
        for t, j, d in zip(*np.nonzero(bad)):
            problems.append(
                f"non-finite coordinate at frame {t}, joint {j} "
                f"({H36M_JOINT_NAMES[j]}), axis {'xyz'[d]}"
            )
    return problems


def validate_mediapipe(seq: MediapipeSequence) -> list[str]:
    """Invariant report for a 33-landmark sequence."""
    problems: list[str] = []
    if seq.frames.ndim != 3 or seq.frames.shape[1:] != (NUM_MEDIAPIPE_LANDMARKS, 3):
        problems.append(
            f"frames must be (T, {NUM_MEDIAPIPE_LANDMARKS}, 3), "
            f"got {seq.frames.shape}")
        return problems
    if seq.num_frames < 2:
        problems.append(f"sequence has {seq.num_frames} frames, need at least 2")
    if not seq.fps > 0:
        problems.append(f"fps must be positive, got {seq.fps}")
    bad = ~np.isfinite(seq.frames)
    if bad.any():
        for t, j, d in zip(*np.nonzero(bad)):
            problems.append(
                f"non-finite coordinate at frame {t}, landmark {j}, axis {'xyz'[d]}"
            )
    out_of_range = (seq.visibility < 0) | (seq.visibility > 1)
    if out_of_range.any():
        t, j = np.nonzero(out_of_range)
        problems.append(
            f"{out_of_range.sum()} visibility values outside [0, 1], "
            f"first at frame {t[0]}, landmark {j[0]}"
        )
    return problems


def _parse_header(line: str, path: Path) -> dict:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line 1: malformed header: {exc}") from None
    if not isinstance(header, dict):
        raise SchemaError(f"{path}: line 1: header must be a JSON object")
    for key in ("fps", "units", "format"):
        if key not in header:
            raise SchemaError(f"{path}: line 1: header missing field {key!r}")
    if header["units"] != "m":
        raise SchemaError(
            f"{path}: line 1: unknown units {header['units']!r}, expected 'm'"
        )
    return header


def _parse_frames(lines, path: Path, n_joints: int, want_vis: bool):
    frames = []
    vis = []
    for lineno, line in lines:
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: line {lineno}: malformed record: {exc}") from None
        if not isinstance(rec, dict) or "t" not in rec or "joints" not in rec:
            raise SchemaError(
                f"{path}: line {lineno}: record must carry 't' and 'joints'"
            )
        if rec["t"] != len(frames):
            raise SchemaError(
                f"{path}: line {lineno}: frame index {rec['t']} out of order, "
                f"expected {len(frames)}"
            )
        joints = rec["joints"]
        if len(joints) != n_joints or any(len(p) != 3 for p in joints):
            raise SchemaError(
                f"{path}: line {lineno}: expected {n_joints} joints of 3 "
                f"coordinates, got {len(joints)}"
            )
        frames.append(joints)
        if want_vis:
            v = rec.get("vis")
            if v is None or len(v) != n_joints:
                raise SchemaError(
                    f"{path}: line {lineno}: expected 'vis' array of length {n_joints}"
                )
            vis.append(v)
    arr = np.asarray(frames, dtype=np.float64)
    if arr.size and not np.isfinite(arr).all():
        t, j, _ = np.nonzero(~np.isfinite(arr))
        raise ValidationError(
            f"{path}: non-finite coordinate at frame {t[0]}, joint {j[0]}"
        )
    return arr, (np.asarray(vis, dtype=np.float64) if want_vis else None)


def load_sequence(path, format: str = "h36m-jsonl"):
    """Load a skeleton file in the declared format.

    Returns a :class:`SkeletonSequence` for ``h36m-jsonl`` or a
    :class:`MediapipeSequence` for ``mediapipe-jsonl``.
    """
    path = Path(path)
    if format not in ("h36m-jsonl", "mediapipe-jsonl"):
        raise ValueError(f"unknown format {format!r}")
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(f"{path}: line 1: file is empty, expected a header")
    header = _parse_header(lines[0], path)

    if format == "h36m-jsonl":
        if header["format"] != H36M_HEADER_FORMAT:
            raise SchemaError(
                f"{path}: header format {header['format']!r} does not match "
                f"{H36M_HEADER_FORMAT!r}"
            )
        frames, _ = _parse_frames(
            enumerate(lines[1:], start=2), path, NUM_JOINTS, want_vis=False
        )
        if frames.shape[0] < 2:
            raise ValidationError(f"{path}: sequence has {frames.shape[0]} frames, need >= 2")
        seq = SkeletonSequence(frames, fps=header["fps"], source_id=path.stem)
        if not seq.fps > 0:
            raise ValidationError(f"{path}: fps must be positive, got {seq.fps}")
        return seq

    if header["format"] != MEDIAPIPE_HEADER_FORMAT:
        raise SchemaError(
            f"{path}: header format {header['format']!r} does not match "
            f"{MEDIAPIPE_HEADER_FORMAT!r}"
        )
    frames, vis = _parse_frames(
        enumerate(lines[1:], start=2), path, NUM_MEDIAPIPE_LANDMARKS, want_vis=True
    )
    if frames.shape[0] < 2:
        raise ValidationError(f"{path}: sequence has {frames.shape[0]} frames, need >= 2")
    if ((vis < 0) | (vis > 1)).any():
        raise ValidationError(f"{path}: visibility values must lie in [0, 1]")
    seq = MediapipeSequence(frames, vis, fps=header["fps"], source_id=path.stem)
    if not seq.fps > 0:
        raise ValidationError(f"{path}: fps must be positive, got {seq.fps}")
    return seq


def save_sequence(seq: SkeletonSequence, path) -> None:
    """Write an h36m-jsonl file that :func:`load_sequence` inverts exactly.

    Floats are serialized with ``repr`` round-trip fidelity, so a
    save -> load -> save cycle is byte-identical.
    """
    problems = validate(seq)
    if problems:
        raise ValidationError(
            "cannot save invalid sequence: " + "; ".join(problems[:3])
        )
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            json.dumps({"fps": seq.fps, "units": "m", "format": H36M_HEADER_FORMAT})
            + "\n"
        )
        for t in range(seq.num_frames):
            rec = {"t": t, "joints": seq.frames[t].tolist()}
            fh.write(json.dumps(rec) + "\n")


def save_mediapipe_sequence(seq: MediapipeSequence, path) -> None:
    """Write a mediapipe-jsonl file (33 landmarks plus visibility)."""
    problems = validate_mediapipe(seq)
    if problems:
        raise ValidationError(
            "cannot save invalid sequence: " + "; ".join(problems[:3])
        )
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            json.dumps(
                {"fps": seq.fps, "units": "m", "format": MEDIAPIPE_HEADER_FORMAT}
            )
            + "\n"
        )
        for t in range(seq.num_frames):
            rec = {
                "t": t,
                "joints": seq.frames[t].tolist(),
                "vis": seq.visibility[t].tolist(),
            }
            fh.write(json.dumps(rec) + "\n")


def mediapipe_to_h36m(seq: MediapipeSequence) -> SkeletonSequence:
    """Convert a 33-landmark sequence to the canonical 17-joint layout.

    root, thorax, and spine are midpoints (hips, shoulders, root/thorax);
    the other 14 joints are copied through ``MEDIAPIPE_TO_H36M_COPY``.
    Visibility is not propagated; low-visibility landmarks are used as-is.
    """
    T = seq.num_frames
    out = np.empty((T, NUM_JOINTS, 3), dtype=np.float64)
    for joint, landmark in MEDIAPIPE_TO_H36M_COPY.items():
        if landmark >= NUM_MEDIAPIPE_LANDMARKS:
            raise ConversionError(
                f"mapping for joint {H36M_JOINT_NAMES[joint]} names landmark "
                f"{landmark}, outside the 33-landmark layout"
            )
        out[:, joint] = seq.frames[:, landmark]
    root = 0.5 * (seq.frames[:, MP_LEFT_HIP] + seq.frames[:, MP_RIGHT_HIP])
    thorax = 0.5 * (seq.frames[:, MP_LEFT_SHOULDER] + seq.frames[:, MP_RIGHT_SHOULDER])
    out[:, JOINT_INDEX["root"]] = root
    out[:, JOINT_INDEX["thorax"]] = thorax
    out[:, JOINT_INDEX["spine"]] = 0.5 * (root + thorax)
    return SkeletonSequence(out, fps=seq.fps, source_id=seq.source_id)


def mirror_frames(frames: np.ndarray) -> np.ndarray:
    """Reflect poses about the sagittal plane: negate x and swap left/right joints."""
    out = np.array(frames, dtype=np.float64)
    out[..., 0] *= -1.0
    for a, b in MIRROR_PAIRS:
        out[..., [a, b], :] = out[..., [b, a], :]
    return out

"""Synthetic periodic exercise motions with exact repetition counts.

Each primitive drives a few joints of a fixed standing pose with a raised
cosine, (1 - cos(2*pi*t/period)) / 2, so a video with count N holds exactly
N displacement maxima and starts and ends at rest. Ground-truth counts are
therefore provable by peak counting on the generated series, independent of
the generator's own arithmetic. Primitive names reuse category-table words
so the label weighting scheme is exercised end to end.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.signal import find_peaks

from .errors import DurationError, SchemaError, ValidationError
from .labels import Label, ManifestEntry, default_categories, write_manifest
from .motion_image import EncoderConfig
from .skeleton import (
    JOINT_INDEX,
    MEDIAPIPE_TO_H36M_COPY,
    MediapipeSequence,
    SkeletonSequence,
    save_sequence,
)

AXIS_X, AXIS_Y, AXIS_Z = 0, 1, 2
BASE_PERIOD_S = 1.6

# Upright rest pose, meters: x points left, y up, z forward. The root sits
# exactly midway between the hips and the spine midway root-to-thorax, so
# landmark-midpoint conversions reproduce these joints exactly.
_BASE_POSE_BY_NAME: dict[str, tuple[float, float, float]] = {
    "root": (0.0, 0.95, 0.0),
    "right_hip": (-0.11, 0.95, 0.0),
    "right_knee": (-0.11, 0.50, 0.0),
    "right_ankle": (-0.11, 0.08, 0.0),
    "left_hip": (0.11, 0.95, 0.0),
    "left_knee": (0.11, 0.50, 0.0),
    "left_ankle": (0.11, 0.08, 0.0),
    "spine": (0.0, 1.175, 0.0),
    "thorax": (0.0, 1.40, 0.0),
    "neck": (0.0, 1.52, 0.0),
    "head": (0.0, 1.62, 0.0),
    "left_shoulder": (0.18, 1.40, 0.0),
    "left_elbow": (0.22, 1.12, 0.0),
    "left_wrist": (0.24, 0.86, 0.0),
    "right_shoulder": (-0.18, 1.40, 0.0),
    "right_elbow": (-0.22, 1.12, 0.0),
    "right_wrist": (-0.24, 0.86, 0.0),
}

BASE_POSE = np.array([_BASE_POSE_BY_NAME[n] for n in JOINT_INDEX], dtype=np.float64)


@dataclass(frozen=True)
class JointDrive:
    """One joint coordinate oscillated by the raised-cosine drive."""

    joint: str
    axis: int
    amplitude: float  # meters, strictly positive
    sign: int = 1

    def __post_init__(self) -> None:
        if self.joint not in JOINT_INDEX:
            raise ValidationError(f"unknown joint {self.joint!r}")
        if self.axis not in (AXIS_X, AXIS_Y, AXIS_Z):
            raise ValidationError(f"axis must be 0, 1, or 2, got {self.axis}")
        if self.amplitude <= 0:
            raise ValidationError("amplitude must be positive")
        if self.sign not in (-1, 1):
            raise ValidationError("sign must be -1 or 1")


@dataclass(frozen=True)
class MotionPrimitive:
    name: tuple[str, ...]
    period: float  # seconds per repetition
    drives: tuple[JointDrive, ...]
    # Joint coordinate whose signed displacement carries one peak per rep.
    oracle_joint: str
    oracle_axis: int
    oracle_sign: int

    def __post_init__(self) -> None:
        if self.period <= 0:
            raise ValidationError("period must be positive")
        if not self.drives:
            raise ValidationError("primitive needs at least one drive")
        table = default_categories()
        unknown = [w for w in self.name if w not in table.all_words]
        if unknown:
            raise ValidationError(
                f"primitive words {unknown} missing from the category tables")

    @property
    def key(self) -> str:
        return " ".join(self.name)


def _mirrored(primitive: MotionPrimitive, name: tuple[str, ...]) -> MotionPrimitive:
    """Sagittal mirror: swap left/right joints and flip x-axis drives."""

    def flip_joint(j: str) -> str:
        if j.startswith("left_"):
            return "right_" + j[len("left_"):]
        if j.startswith("right_"):
            return "left_" + j[len("right_"):]
        return j

    drives = tuple(
        replace(d, joint=flip_joint(d.joint),
                sign=-d.sign if d.axis == AXIS_X else d.sign)
        for d in primitive.drives)
    return MotionPrimitive(
        name=name, period=primitive.period, drives=drives,
        oracle_joint=flip_joint(primitive.oracle_joint),
        oracle_axis=primitive.oracle_axis,
        oracle_sign=-primitive.oracle_sign if primitive.oracle_axis == AXIS_X
        else primitive.oracle_sign)


def _squat_drives(depth: float) -> tuple[JointDrive, ...]:
    lowered = ("root", "left_hip", "right_hip", "spine", "thorax", "neck", "head",
               "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
               "left_wrist", "right_wrist")
    drives = [JointDrive(j, AXIS_Y, depth, sign=-1) for j in lowered]
    drives += [JointDrive(j, AXIS_Z, 0.12) for j in ("left_knee", "right_knee")]
    return tuple(drives)


_SQUAT = MotionPrimitive(
    name=("squat",), period=BASE_PERIOD_S, drives=_squat_drives(0.25),
    oracle_joint="root", oracle_axis=AXIS_Y, oracle_sign=-1)

_ARM_RAISE = MotionPrimitive(
    name=("arm", "raise"), period=BASE_PERIOD_S,
    drives=(
        JointDrive("left_wrist", AXIS_Y, 0.62),
        JointDrive("right_wrist", AXIS_Y, 0.62),
        JointDrive("left_elbow", AXIS_Y, 0.35),
        JointDrive("right_elbow", AXIS_Y, 0.35),
    ),
    oracle_joint="left_wrist", oracle_axis=AXIS_Y, oracle_sign=1)

_LEFT_LUNGE = MotionPrimitive(
    name=("left", "lunge"), period=BASE_PERIOD_S,
    drives=(
        JointDrive("left_ankle", AXIS_Z, 0.40),
        JointDrive("left_knee", AXIS_Z, 0.35),
    ) + tuple(
        JointDrive(j, AXIS_Y, 0.15, sign=-1)
        for j in ("root", "left_hip", "right_hip", "spine", "thorax", "neck",
                  "head", "left_shoulder", "right_shoulder", "left_elbow",
                  "right_elbow", "left_wrist", "right_wrist")),
    oracle_joint="left_ankle", oracle_axis=AXIS_Z, oracle_sign=1)

_RIGHT_LUNGE = _mirrored(_LEFT_LUNGE, name=("right", "lunge"))

_PUSHUP = MotionPrimitive(
    name=("pushup",), period=BASE_PERIOD_S,
    drives=tuple(
        [JointDrive(j, AXIS_Y, 0.30, sign=-1)
         for j in ("root", "left_hip", "right_hip", "spine", "thorax",
                   "neck", "head", "left_shoulder", "right_shoulder")]
        + [JointDrive("left_elbow", AXIS_X, 0.18),
           JointDrive("right_elbow", AXIS_X, 0.18, sign=-1)]),
    oracle_joint="thorax", oracle_axis=AXIS_Y, oracle_sign=-1)

_SLOW_SQUAT = MotionPrimitive(
    name=("slow", "squat"), period=2.0 * BASE_PERIOD_S, drives=_squat_drives(0.25),
    oracle_joint="root", oracle_axis=AXIS_Y, oracle_sign=-1)

_LUNGE_AND_PRESS = MotionPrimitive(
    name=("lunge", "and", "press"), period=BASE_PERIOD_S,
    drives=_LEFT_LUNGE.drives + (
        JointDrive("left_wrist", AXIS_Y, 0.45),
        JointDrive("right_wrist", AXIS_Y, 0.45),
        JointDrive("left_elbow", AXIS_Y, 0.25),
        JointDrive("right_elbow", AXIS_Y, 0.25),
    ),
    oracle_joint="left_wrist", oracle_axis=AXIS_Y, oracle_sign=1)

_DUMBBELL_CURL = MotionPrimitive(
    name=("dumbbell", "curl"), period=BASE_PERIOD_S,
    drives=(
        JointDrive("left_wrist", AXIS_Y, 0.35),
        JointDrive("right_wrist", AXIS_Y, 0.35),
        JointDrive("left_wrist", AXIS_Z, 0.15),
        JointDrive("right_wrist", AXIS_Z, 0.15),
    ),
    oracle_joint="left_wrist", oracle_axis=AXIS_Y, oracle_sign=1)

PRIMITIVES: dict[str, MotionPrimitive] = {
    p.key: p for p in (
        _SQUAT, _ARM_RAISE, _LEFT_LUNGE, _RIGHT_LUNGE, _PUSHUP,
        _SLOW_SQUAT, _LUNGE_AND_PRESS, _DUMBBELL_CURL)
}


def max_duration_s(encoder: EncoderConfig | None = None, fps: float = 25.0) -> float:
    """Longest raw clip that still fits the image width after downsampling."""
    encoder = encoder or EncoderConfig()
    return encoder.image_width * encoder.downsample_factor / fps


@dataclass(frozen=True)
class SynthSpec:
    primitives: tuple[str, ...] = tuple(PRIMITIVES)
    counts: tuple[int, ...] = (3, 4, 5, 6, 7, 8)
    subjects: int = 4
    fps: float = 25.0
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.primitives or not self.counts:
            raise ValidationError("spec needs at least one primitive and one count")
        unknown = [p for p in self.primitives if p not in PRIMITIVES]
        if unknown:
            raise ValidationError(f"unknown primitives {unknown}")
        if any(not 1 <= c <= 30 for c in self.counts):
            raise ValidationError(f"counts {self.counts} must lie in 1..30")
        if self.subjects < 1:
            raise ValidationError("subjects must be >= 1")
        if self.fps <= 0:
            raise ValidationError("fps must be positive")
        if self.noise_std < 0:
            raise ValidationError("noise_std must be >= 0")
        budget = max_duration_s(fps=self.fps)
        for key in self.primitives:
            worst = PRIMITIVES[key].period * max(self.counts)
            if worst > budget:
                raise DurationError(
                    f"{key!r} x {max(self.counts)} reps lasts {worst:.1f}s, "
                    f"over the {budget:.1f}s image budget")

    @property
    def num_videos(self) -> int:
        return len(self.primitives) * len(self.counts) * self.subjects


def load_synth_spec(path: str | Path) -> SynthSpec:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: spec must be a JSON object")
    known = {"primitives", "counts", "subjects", "fps", "noise_std", "seed"}
    unknown = set(raw) - known
    if unknown:
        raise SchemaError(f"{path}: unknown spec fields {sorted(unknown)}")
    kwargs: dict = {}
    if "primitives" in raw:
        kwargs["primitives"] = tuple(str(p) for p in raw["primitives"])
    if "counts" in raw:
        kwargs["counts"] = tuple(int(c) for c in raw["counts"])
    for key in ("subjects", "seed"):
        if key in raw:
            kwargs[key] = int(raw[key])
    for key in ("fps", "noise_std"):
        if key in raw:
            kwargs[key] = float(raw[key])
    return SynthSpec(**kwargs)


def subject_scales(subjects: int) -> np.ndarray:
    """Uniform pose scalings spanning +-10%; a lone subject is unscaled."""
    if subjects == 1:
        return np.array([1.0])
    return np.linspace(0.9, 1.1, subjects)


def gen_motion(primitive: MotionPrimitive, count: int, spec: SynthSpec,
               subject_scale: float = 1.0,
               rng: np.random.Generator | None = None,
               source_id: str = "synth") -> tuple[SkeletonSequence, Label, int]:
    """One video: count full cycles of the primitive around the base pose."""
    if not 1 <= count <= 30:
        raise ValidationError(f"count {count} outside 1..30")
    duration = count * primitive.period
    if duration > max_duration_s(fps=spec.fps):
        raise DurationError(
            f"{primitive.key!r} x {count} reps lasts {duration:.1f}s, over the "
            f"{max_duration_s(fps=spec.fps):.1f}s image budget")

    num_frames = int(round(duration * spec.fps))
    t = np.arange(num_frames) / spec.fps
    drive = 0.5 * (1.0 - np.cos(2.0 * np.pi * t / primitive.period))

    frames = np.tile(BASE_POSE * subject_scale, (num_frames, 1, 1))
    for d in primitive.drives:
        j = JOINT_INDEX[d.joint]
        frames[:, j, d.axis] += d.sign * d.amplitude * subject_scale * drive
    if spec.noise_std > 0:
        if rng is None:
            rng = np.random.default_rng(spec.seed)
        frames += rng.normal(0.0, spec.noise_std, size=frames.shape)

    seq = SkeletonSequence(frames=frames, fps=spec.fps, source_id=source_id)
    return seq, list(primitive.name), count


def drive_series(seq: SkeletonSequence, primitive: MotionPrimitive) -> np.ndarray:
    """Signed displacement of the oracle joint, one maximum per repetition."""
    coord = seq.frames[:, JOINT_INDEX[primitive.oracle_joint], primitive.oracle_axis]
    return primitive.oracle_sign * (coord - coord[0])


def count_peaks(series: np.ndarray, min_prominence: float | None = None) -> int:
    """Interior local maxima of a 1-D series.

    Zero-noise drives need no threshold; for noisy series pass a prominence
    floor (a fraction of the peak-to-peak range works well) so jitter
    wiggles are not counted as repetitions.
    """
    series = np.asarray(series, dtype=np.float64)
    peaks, _ = find_peaks(series, prominence=min_prominence)
    return int(peaks.size)


def gen_dataset(spec: SynthSpec, out_dir: str | Path) -> list[ManifestEntry]:
    """Write skeleton files plus manifest.jsonl; deterministic under seed.

    Videos enumerate primitives x counts x subjects in fixed order; video i
    draws its noise from an RNG seeded with (seed, i), so regeneration and
    any parallel split produce identical bytes.
    """
    out_dir = Path(out_dir)
    skel_dir = out_dir / "skeletons"
    skel_dir.mkdir(parents=True, exist_ok=True)

    entries: list[ManifestEntry] = []
    scales = subject_scales(spec.subjects)
    video_index = 0
    for key in spec.primitives:
        primitive = PRIMITIVES[key]
        for count in spec.counts:
            for subject, scale in enumerate(scales):
                video_id = f"synth-{video_index:04d}"
                rng = np.random.default_rng([spec.seed, video_index])
                seq, label, _ = gen_motion(
                    primitive, count, spec, subject_scale=float(scale),
                    rng=rng, source_id=video_id)
                rel = f"skeletons/{video_id}.jsonl"
                save_sequence(seq, out_dir / rel)
                entries.append(ManifestEntry(
                    video_id=video_id,
                    skeleton_path=rel,
                    label_raw=" ".join(label),
                    label_norm=label,
                    count=count,
                    split="",
                ))
                video_index += 1
    write_manifest(entries, out_dir / "manifest.jsonl")
    return entries


# Mediapipe landmark indices used when synthesizing 33-point sequences.
_MP_LEFT_HIP, _MP_RIGHT_HIP = 23, 24
_MP_LEFT_SHOULDER, _MP_RIGHT_SHOULDER = 11, 12


def make_mediapipe_sequence(seq: SkeletonSequence) -> MediapipeSequence:
    """Synthesize a 33-landmark sequence whose conversion reproduces `seq`.

    Copied landmarks take the matching joint positions; the remaining
    landmarks get fixed offsets from the nearest joint so validation sees
    finite values everywhere.
    """
    t = seq.frames.shape[0]
    frames = np.zeros((t, 33, 3), dtype=np.float64)
    # Start every landmark near the head so nothing is left at the origin.
    frames[:] = seq.frames[:, JOINT_INDEX["head"], :][:, None, :]
    for joint_idx, mp_idx in MEDIAPIPE_TO_H36M_COPY.items():
        frames[:, mp_idx, :] = seq.frames[:, joint_idx, :]
    # Face and hand landmarks: small deterministic offsets off real joints.
    head = seq.frames[:, JOINT_INDEX["head"], :]
    wrist_l = seq.frames[:, JOINT_INDEX["left_wrist"], :]
    wrist_r = seq.frames[:, JOINT_INDEX["right_wrist"], :]
    ankle_l = seq.frames[:, JOINT_INDEX["left_ankle"], :]
    ankle_r = seq.frames[:, JOINT_INDEX["right_ankle"], :]
    for i, base, off in (
            (1, head, (0.03, 0.0, 0.05)), (2, head, (0.035, 0.0, 0.05)),
            (3, head, (0.04, 0.0, 0.05)), (4, head, (-0.03, 0.0, 0.05)),
            (5, head, (-0.035, 0.0, 0.05)), (6, head, (-0.04, 0.0, 0.05)),
            (8, head, (-0.07, 0.0, 0.0)), (9, head, (0.02, -0.04, 0.06)),
            (10, head, (-0.02, -0.04, 0.06)),
            (17, wrist_l, (0.02, -0.04, 0.0)), (18, wrist_r, (-0.02, -0.04, 0.0)),
            (19, wrist_l, (0.02, -0.05, 0.02)), (20, wrist_r, (-0.02, -0.05, 0.02)),
            (21, wrist_l, (0.01, -0.03, 0.03)), (22, wrist_r, (-0.01, -0.03, 0.03)),
            (29, ankle_l, (0.0, -0.03, -0.05)), (30, ankle_r, (0.0, -0.03, -0.05)),
            (31, ankle_l, (0.0, -0.05, 0.12)), (32, ankle_r, (0.0, -0.05, 0.12))):
        frames[:, i, :] = base + np.asarray(off)
    visibility = np.ones((t, 33), dtype=np.float64)
    return MediapipeSequence(frames=frames, visibility=visibility,
                             fps=seq.fps, source_id=seq.source_id)

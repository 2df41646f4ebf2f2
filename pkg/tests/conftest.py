"""Shared fixtures: tiny model configs and small synthetic datasets."""
from __future__ import annotations

import numpy as np
import pytest

from liftkit.labels import build_vocabulary, normalize_label
from liftkit.model import ModelConfig, build_lexicon
from liftkit.skeleton import NUM_JOINTS, SkeletonSequence
from liftkit.synthgen import PRIMITIVES, SynthSpec, gen_motion


def random_sequence(rng: np.random.Generator, num_frames: int | None = None,
                    fps: float = 25.0) -> SkeletonSequence:
    """A valid random-walk sequence; not physically plausible, just legal."""
    if num_frames is None:
        num_frames = int(rng.integers(10, 200))
    steps = rng.normal(scale=0.02, size=(num_frames, NUM_JOINTS, 3))
    frames = np.cumsum(steps, axis=0) + rng.normal(scale=0.3, size=(1, NUM_JOINTS, 3))
    return SkeletonSequence(frames=frames, fps=fps, source_id="random")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def squat_sequence() -> SkeletonSequence:
    spec = SynthSpec(primitives=("squat",), counts=(5,), subjects=1)
    seq, _, _ = gen_motion(PRIMITIVES["squat"], 5, spec, 1.0,
                           np.random.default_rng(7), "fixture-squat")
    return seq


@pytest.fixture
def tiny_model_cfg() -> ModelConfig:
    """Smallest config that exercises every code path; used for grad checks."""
    return ModelConfig(
        text_vocab_size=8, num_classes=4, embed_dim=16, num_layers=1,
        num_heads=2, patch_size=2, max_text_len=4,
        image_height=8, image_width=8, seed=0)


@pytest.fixture
def tiny_lexicon() -> dict[str, int]:
    return build_lexicon(["how", "many", "reps", "exercise", "name"])


@pytest.fixture
def small_vocab():
    labels = [normalize_label(s) for s in
              ("squat", "slow squat", "pushup", "left lunge and press")]
    return build_vocabulary(labels)

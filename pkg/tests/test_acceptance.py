"""Acceptance gate: one test per shipped guarantee, in a fixed order.

Each test prints a single PASS/FAIL scoreboard line (bypassing capture, so
it is visible without -s) and then asserts.  Criteria 6-8 share one trained
model built by the session fixture below; training the default model on the
full synthetic set takes tens of minutes on a single CPU core.
"""
import math
import time

import numpy as np
import pytest

from liftkit import cli
from liftkit.labels import (
    INTEGER_CLASSES,
    build_vocabulary,
    load_categories,
    load_templates,
    make_qa_samples,
    normalize_label,
)
from liftkit.metrics import mae, obo, partial_credit
from liftkit.model import (
    Model,
    ModelConfig,
    extract_patches,
    loss_batch,
    pad_tokens,
    predict_count,
    softmax,
    top_class,
)
from liftkit.motion_image import (
    KINEMATIC_CHAINS,
    EncoderConfig,
    downsample,
    encode,
    interpolate_chain,
    normalize_coordinates,
    smooth,
)
from liftkit.skeleton import (
    JOINT_INDEX,
    SkeletonSequence,
    load_sequence,
    mediapipe_to_h36m,
)
from liftkit.synthgen import PRIMITIVES, SynthSpec, gen_dataset, gen_motion, make_mediapipe_sequence
from liftkit.training import TrainConfig, prepare_samples, split_dataset, train

# Training setup for the slow criteria.  float32 and a raised learning rate
# trade nothing but precision headroom for wall time; architecture stays at
# ModelConfig defaults.  The overfit run (criteria 6 and 7) trains to its
# epoch budget and keeps the final parameters; the generalization run
# (criterion 8) trains with validation-based early stopping and keeps the
# best-validation parameters, which is the library's intended workflow.
OVERFIT_LR = 1.5e-4
OVERFIT_EPOCHS = 140
OVERFIT_BATCH = 16
OVERFIT_DTYPE = "float32"
MODEL_SEED = 1
GEN_PATIENCE = 8
SPLIT_SEED = 0


def _line(capsys, ok: bool, text: str) -> None:
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {text}")
    assert ok, text


def _random_walk_sequence(rng: np.random.Generator, num_frames: int,
                          fps: float = 25.0) -> SkeletonSequence:
    steps = rng.normal(scale=0.01, size=(num_frames, 17, 3))
    base = rng.normal(scale=0.4, size=(1, 17, 3))
    return SkeletonSequence(base + np.cumsum(steps, axis=0), fps=fps)


# --- 1: encoder geometry ---------------------------------------------------

def test_01_encoder_geometry(capsys):
    rng = np.random.default_rng(11)
    cfg = EncoderConfig()
    t0 = time.perf_counter()
    worst_endpoint = 0.0
    for _ in range(100):
        seq = _random_walk_sequence(rng, int(rng.integers(40, 500)))
        img = encode(seq, cfg)
        assert img.valid_rows == 320
        assert img.valid_cols <= 640
        assert not img.pixels[img.valid_rows:].any()
        assert not img.pixels[:, img.valid_cols:].any()
        pre = normalize_coordinates(
            downsample(smooth(seq, cfg.smooth_window), cfg.downsample_factor), cfg)
        m = cfg.points_per_chain
        for k, (_, joints) in enumerate(KINEMATIC_CHAINS):
            first = pre.frames[:, JOINT_INDEX[joints[0]], :]
            last = pre.frames[:, JOINT_INDEX[joints[-1]], :]
            band = img.pixels[k * m:(k + 1) * m, :img.valid_cols]
            worst_endpoint = max(worst_endpoint,
                                 np.abs(band[0] - first).max(),
                                 np.abs(band[-1] - last).max())
    elapsed = time.perf_counter() - t0
    ok = worst_endpoint <= 1e-9 and elapsed < 5.0
    _line(capsys, ok,
          f"encoder geometry: 100 sequences, 320 valid rows, <=640 cols, "
          f"exact zero padding, endpoint err {worst_endpoint:.2e} <= 1e-9, "
          f"{elapsed:.2f}s < 5s")


# --- 2: interpolation oracle ------------------------------------------------

def test_02_interpolation_oracle(capsys):
    rng = np.random.default_rng(22)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 8))
        m = int(rng.integers(2, 97))
        points = rng.normal(size=(n, 3))
        got = interpolate_chain(points, m)
        x = np.linspace(0.0, n - 1.0, m)
        want = np.stack([np.interp(x, np.arange(n), points[:, d])
                         for d in range(3)], axis=1)
        worst = max(worst, float(np.abs(got - want).max()))
    ok = worst <= 1e-9
    _line(capsys, ok,
          f"interpolation matches dense piecewise-linear oracle on 1000 "
          f"chains: max err {worst:.2e} <= 1e-9")


# --- 3: metric oracles -------------------------------------------------------

def test_03_metric_oracles(capsys, small_vocab):
    rng = np.random.default_rng(33)
    exact = True
    for _ in range(1000):
        n = int(rng.integers(1, 17))
        gt = rng.integers(1, 31, size=n).tolist()
        pred = rng.integers(1, 31, size=n).tolist()
        brute_obo = sum(abs(g - p) <= 1 for g, p in zip(gt, pred)) / n
        brute_mae = sum(abs(g - p) for g, p in zip(gt, pred)) / n
        exact &= obo(gt, pred) == brute_obo and mae(gt, pred) == brute_mae

        probs = rng.random(small_vocab.num_classes)
        probs /= probs.sum()
        words = [w for w in small_vocab.classes if w not in INTEGER_CLASSES]
        k = int(rng.integers(1, 4))
        gt_words = list(rng.choice(words, size=k, replace=False))
        pred_set = {small_vocab.classes[i] for i, p in enumerate(probs)
                    if p >= 0.05}
        brute_pc = len(pred_set & set(gt_words)) / len(gt_words)
        exact &= partial_credit(probs, gt_words, small_vocab) == brute_pc

    worked = (obo([5, 10, 7], [6, 10, 3]), mae([5, 10, 7], [6, 10, 3]))
    exact &= worked == (2 / 3, 5 / 3)
    _line(capsys, exact,
          f"obo/mae/partial_credit equal brute force on 1000 fixtures; "
          f"obo([5,10,7],[6,10,3])={worked[0]:.4f}, mae={worked[1]:.4f}")


# --- 4: gradient check --------------------------------------------------------

def test_04_gradient_check(capsys):
    cfg = ModelConfig(text_vocab_size=8, num_classes=4, embed_dim=16,
                      num_layers=1, num_heads=2, patch_size=2,
                      max_text_len=4, image_height=8, image_width=8,
                      dtype="float64", seed=0)
    rng = np.random.default_rng(44)
    model = Model(cfg)
    imgs = [extract_patches(rng.random((8, 8, 3)), cfg.patch_size)
            for _ in range(2)]
    toks = [pad_tokens([1, 3, 4, 5], cfg.max_text_len),
            pad_tokens([1, 6, 7, 2], cfg.max_text_len)]
    targets = np.abs(rng.normal(size=(2, cfg.num_classes))) + 0.05

    t0 = time.perf_counter()
    _, _, grads = model.loss_and_grads(imgs, toks, targets)

    def total_loss() -> float:
        logits, _ = model.forward_batch(imgs, toks)
        losses, _ = loss_batch(logits, targets)
        return float(np.sum(losses))

    eps = 1e-5
    worst = 0.0
    worst_name = ""
    for name, p in model.params.items():
        g = grads[name]
        for fi in range(p.size):
            idx = np.unravel_index(fi, p.shape)
            orig = p[idx]
            p[idx] = orig + eps
            up = total_loss()
            p[idx] = orig - eps
            down = total_loss()
            p[idx] = orig
            fd = (up - down) / (2 * eps)
            diff = abs(fd - g[idx])
            if diff < 1e-8:
                continue  # both effectively zero; relative error undefined
            rel = diff / max(abs(fd), abs(g[idx]), 1e-8)
            if rel > worst:
                worst, worst_name = rel, name
    elapsed = time.perf_counter() - t0
    n_params = sum(p.size for p in model.params.values())
    ok = worst <= 1e-4 and elapsed < 60.0
    _line(capsys, ok,
          f"analytic vs central-difference gradients on all {n_params} "
          f"parameters: max rel err {worst:.2e} <= 1e-4 "
          f"(worst tensor {worst_name or 'n/a'}), {elapsed:.1f}s < 60s")


# --- 5: loss fixture ----------------------------------------------------------

def test_05_uniform_loss_fixture(capsys):
    num_classes = 42
    logits = np.zeros((1, num_classes))
    target = np.zeros((1, num_classes))
    target[0, 7] = 1.0
    losses, _ = loss_batch(logits, target)
    err = abs(float(losses[0]) - math.log(num_classes))
    ok = err <= 1e-9
    _line(capsys, ok,
          f"uniform logits with one-hot weight-1.0 target: loss within "
          f"{err:.2e} of ln({num_classes})")


# --- 6-8: trained-model criteria -----------------------------------------------

@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """Synthetic corpus at default scale, encoded once and split 80/10/10."""
    root = tmp_path_factory.mktemp("corpus")
    entries = gen_dataset(SynthSpec(), root)
    enc = EncoderConfig()
    images = {
        e.video_id: encode(load_sequence(root / e.skeleton_path), enc)
        .pixels.astype(np.float32)
        for e in entries
    }

    splits = split_dataset(entries, TrainConfig().split_fractions, SPLIT_SEED)
    vocab = build_vocabulary([e.label_norm for e in entries], load_categories())
    templates = load_templates()
    lexicon = cli._build_lexicon(entries, templates)
    model_cfg = ModelConfig(text_vocab_size=len(lexicon),
                            num_classes=vocab.num_classes, dtype=OVERFIT_DTYPE,
                            seed=MODEL_SEED)

    def expand(split_entries):
        qa = []
        for e in split_entries:
            qa.extend(make_qa_samples(e.video_id, e.label_norm, e.count, vocab,
                                      templates=templates, seed=SPLIT_SEED,
                                      per_task=1))
        return prepare_samples(qa, images, lexicon, model_cfg)

    train_s, val_s, test_s = (expand(s) for s in splits)
    return {"vocab": vocab, "model_cfg": model_cfg,
            "train": train_s, "val": val_s, "test": test_s}


@pytest.fixture(scope="session")
def overfit_run(corpus):
    """Train-split memorization run; keeps the final-epoch parameters."""
    tc = TrainConfig(learning_rate=OVERFIT_LR, batch_size=OVERFIT_BATCH,
                     max_epochs=OVERFIT_EPOCHS, patience=OVERFIT_EPOCHS,
                     seed=SPLIT_SEED)
    t0 = time.perf_counter()
    result = train(corpus["train"], [], corpus["model_cfg"], tc)
    minutes = (time.perf_counter() - t0) / 60.0
    return {"result": result, "minutes": minutes}


@pytest.fixture(scope="session")
def generalization_run(corpus):
    """Early-stopped run; keeps the best-validation parameters."""
    tc = TrainConfig(learning_rate=OVERFIT_LR, batch_size=OVERFIT_BATCH,
                     max_epochs=OVERFIT_EPOCHS, patience=GEN_PATIENCE,
                     seed=SPLIT_SEED)
    t0 = time.perf_counter()
    result = train(corpus["train"], corpus["val"], corpus["model_cfg"], tc)
    minutes = (time.perf_counter() - t0) / 60.0
    return {"result": result, "minutes": minutes}


def _split_metrics(model: Model, samples, vocab):
    pcs, gts, preds, task_hits = [], [], [], 0
    for i in range(0, len(samples), 32):
        chunk = samples[i:i + 32]
        logits, _ = model.forward_batch([s.patches for s in chunk],
                                        [s.tokens for s in chunk])
        probs = softmax(np.asarray(logits, dtype=np.float64))
        for s, p in zip(chunk, probs):
            top_is_int = top_class(p, vocab) in INTEGER_CLASSES
            if s.task == "counting":
                task_hits += top_is_int
                gts.append(int(s.ground_truth))
                preds.append(predict_count(p, vocab))
            else:
                task_hits += not top_is_int
                pcs.append(partial_credit(p, list(s.ground_truth), vocab))
    return {"pc": float(np.mean(pcs)), "obo": obo(gts, preds),
            "mae": mae(gts, preds), "task": task_hits / len(samples)}


def test_06_overfit_experiment(capsys, corpus, overfit_run):
    result = overfit_run["result"]
    m = _split_metrics(result.model, corpus["train"], corpus["vocab"])
    hist = result.history
    ep1 = hist[0].train_loss
    by50 = hist[min(49, len(hist) - 1)].train_loss
    ok = (m["pc"] >= 0.95 and m["obo"] >= 0.95 and by50 < ep1
          and len(hist) <= 200)
    _line(capsys, ok,
          f"overfit on full synthetic set: train partial credit {m['pc']:.3f} "
          f">= 0.95, train OBO {m['obo']:.3f} >= 0.95 after {len(hist)} epochs "
          f"({overfit_run['minutes']:.1f} min); loss {ep1:.3f} -> {by50:.3f} "
          f"by epoch 50")


def test_07_task_conditioning(capsys, corpus, overfit_run):
    m = _split_metrics(overfit_run["result"].model, corpus["train"],
                       corpus["vocab"])
    ok = m["task"] >= 0.95
    _line(capsys, ok,
          f"task conditioning: unrestricted top-1 is an integer class iff "
          f"the question is a counting template on {m['task']:.1%} of "
          f"training samples (>= 95%)")


def test_08_generalization_smoke(capsys, corpus, generalization_run):
    result = generalization_run["result"]
    m = _split_metrics(result.model, corpus["test"], corpus["vocab"])
    ok = m["pc"] >= 0.7 and m["obo"] >= 0.7
    _line(capsys, ok,
          f"held-out split: partial credit {m['pc']:.3f} >= 0.7, "
          f"OBO {m['obo']:.3f} >= 0.7 (MAE {m['mae']:.2f}) from the "
          f"early-stopped run ({len(result.history)} epochs, "
          f"{generalization_run['minutes']:.1f} min, {result.stop_reason})")


# --- 9: label fixtures -----------------------------------------------------------

def test_09_label_fixtures(capsys):
    table = load_categories()
    norm_ok = (normalize_label("push-up") == ["pushup"]
               and normalize_label("squats") == ["squat"]
               and normalize_label("rdl") == ["romanian", "deadlift"]
               and normalize_label("1-leg") == ["single", "leg"]
               and normalize_label("L") == ["left"])
    weight_ok = (table.weight("squat") == 1.0 and table.weight("slow") == 0.4
                 and table.weight("dumbbell") == 0.1
                 and table.weight("and") == 0.5)
    ok = norm_ok and weight_ok
    _line(capsys, ok,
          f"label fixtures: normalization examples {'pass' if norm_ok else 'FAIL'}, "
          f"weight lookups squat=1.0 slow=0.4 dumbbell=0.1 and=0.5 "
          f"{'pass' if weight_ok else 'FAIL'}")


# --- 10: determinism ---------------------------------------------------------------

def test_10_train_determinism(capsys, tmp_path):
    data, images = tmp_path / "data", tmp_path / "images"
    assert cli.main(["gen-synth", "--primitives", "squat,pushup",
                     "--counts", "3-5", "--subjects", "2",
                     "--out", str(data), "--quiet"]) == 0
    assert cli.main(["encode", "--manifest", str(data / "manifest.jsonl"),
                     "--out", str(images), "--quiet"]) == 0
    common = ["train", "--manifest", str(data / "manifest.jsonl"),
              "--images", str(images), "--embed-dim", "32",
              "--num-layers", "1", "--num-heads", "2", "--max-epochs", "3",
              "--batch-size", "8", "--learning-rate", "1e-3",
              "--split-fractions", "0.5,0.25,0.25", "--seed", "7", "--quiet"]
    for out in (tmp_path / "runA", tmp_path / "runB"):
        assert cli.main(common + ["--out", str(out)]) == 0
    same_hist = ((tmp_path / "runA/history.csv").read_bytes()
                 == (tmp_path / "runB/history.csv").read_bytes())
    same_ckpt = ((tmp_path / "runA/model.ckpt").read_bytes()
                 == (tmp_path / "runB/model.ckpt").read_bytes())
    ok = same_hist and same_ckpt
    _line(capsys, ok,
          f"two identically-seeded training runs: loss history identical "
          f"{same_hist}, checkpoints bit-identical {same_ckpt}")


# --- 11: mediapipe-path parity ------------------------------------------------------

def test_11_mediapipe_parity(capsys):
    spec = SynthSpec()
    worst = 0.0
    for i, prim in enumerate(PRIMITIVES.values()):
        seq, _, _ = gen_motion(prim, 3, spec, rng=np.random.default_rng(i))
        conv = mediapipe_to_h36m(make_mediapipe_sequence(seq))
        img = encode(conv, EncoderConfig())
        assert img.valid_rows == 320 and img.valid_cols > 0
        f = conv.frames
        mid = {
            "root": 0.5 * (f[:, JOINT_INDEX["left_hip"]] + f[:, JOINT_INDEX["right_hip"]]),
            "thorax": 0.5 * (f[:, JOINT_INDEX["left_shoulder"]] + f[:, JOINT_INDEX["right_shoulder"]]),
            "spine": 0.5 * (f[:, JOINT_INDEX["root"]] + f[:, JOINT_INDEX["thorax"]]),
        }
        for joint, want in mid.items():
            worst = max(worst, float(np.abs(f[:, JOINT_INDEX[joint]] - want).max()))
    ok = worst <= 1e-12
    _line(capsys, ok,
          f"mediapipe conversion + encode on all {len(PRIMITIVES)} primitives: "
          f"interpolated root/thorax/spine midpoint err {worst:.2e} <= 1e-12")

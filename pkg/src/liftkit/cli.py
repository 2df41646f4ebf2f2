"""Command-line entry point: gen-synth, encode, train, eval, predict, score, convert.

Config precedence is CLI flags over config-file values over built-in
defaults; every run with an output directory echoes its effective settings
to run_config.json there. Exit codes: 0 success, 1 runtime failure,
2 usage or config error.
"""
from __future__ import annotations

import os

# LIFT_THREADS caps numeric parallelism; BLAS reads these at import time,
# so they must be set before numpy loads.
_threads = os.environ.get("LIFT_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import labels as labels_mod
from . import metrics as metrics_mod
from . import model as model_mod
from . import motion_image as mi
from . import plots, synthgen, training
from .errors import LiftError
from .skeleton import load_sequence, mediapipe_to_h36m, save_sequence

log = logging.getLogger("lift")


class UsageError(LiftError):
    """Bad flags, malformed config, or missing input paths (exit code 2)."""


def _worker_count() -> int:
    raw = os.environ.get("LIFT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"LIFT_THREADS must be an integer, got {raw!r}") from None


def _require_file(path: str | Path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {p}")
    return p


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = _require_file(path, "config file")
    try:
        with open(p, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{p}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError(f"{p}: config must be a JSON object")
    known = {"seed", "encoder", "model", "train", "synth", "labels"}
    unknown = set(raw) - known
    if unknown:
        raise UsageError(f"{p}: unknown config sections {sorted(unknown)}")
    return raw


def _merge_section(file_cfg: dict, name: str, overrides: dict) -> dict:
    section = dict(file_cfg.get(name, {}))
    if not isinstance(section, dict):
        raise UsageError(f"config section {name!r} must be an object")
    for key, val in overrides.items():
        if val is not None:
            section[key] = val
    return section


def _build(cls, section: dict, what: str):
    try:
        return cls(**section)
    except (TypeError, ValueError, LiftError) as exc:
        raise UsageError(f"bad {what} config: {exc}") from exc


def _effective_seed(args, file_cfg: dict) -> int:
    if args.seed is not None:
        return args.seed
    return int(file_cfg.get("seed", 0))


def _out_dir(args, default: str | None = None) -> Path:
    out = args.out or default
    if out is None:
        raise UsageError("--out is required for this command")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_sidecar(out_dir: Path, command: str, seed: int, **sections) -> None:
    doc = {"command": command, "seed": seed}
    doc.update(sections)
    with open(out_dir / "run_config.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_fractions(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"split fractions need three comma-separated values, got {text!r}")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise UsageError(f"bad split fractions {text!r}") from None


def _parse_counts(text: str) -> tuple[int, ...]:
    """Accepts "3,4,5" or a range "3-8"."""
    try:
        if "-" in text and "," not in text:
            lo, hi = text.split("-")
            return tuple(range(int(lo), int(hi) + 1))
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise UsageError(f"bad counts {text!r}; use e.g. 3,5,7 or 3-8") from None


# -- gen-synth ---------------------------------------------------------------

def cmd_gen_synth(args) -> int:
    file_cfg = _load_config_file(args.config)
    seed = _effective_seed(args, file_cfg)
    section = _merge_section(file_cfg, "synth", {
        "primitives": tuple(args.primitives.split(",")) if args.primitives else None,
        "counts": _parse_counts(args.counts) if args.counts else None,
        "subjects": args.subjects,
        "fps": args.fps,
        "noise_std": args.noise_std,
    })
    section.setdefault("seed", seed)
    if args.spec is not None:
        spec_path = _require_file(args.spec, "synth spec")
        if section.keys() - {"seed"}:
            raise UsageError("--spec cannot be combined with other synth overrides")
        spec = synthgen.load_synth_spec(spec_path)
    else:
        if "counts" in section:
            section["counts"] = tuple(section["counts"])
        if "primitives" in section:
            section["primitives"] = tuple(section["primitives"])
        spec = _build(synthgen.SynthSpec, section, "synth")

    out = _out_dir(args)
    entries = synthgen.gen_dataset(spec, out)
    _write_sidecar(out, "gen-synth", spec.seed, synth=asdict(spec))
    log.info("wrote %d videos under %s", len(entries), out)
    print(f"generated {len(entries)} videos -> {out / 'manifest.jsonl'}")
    return 0


# -- encode ------------------------------------------------------------------

def _encoder_config(args, file_cfg: dict) -> mi.EncoderConfig:
    section = _merge_section(file_cfg, "encoder", {
        "smooth_window": args.smooth_window,
        "points_per_chain": args.points_per_chain,
        "downsample_factor": args.downsample_factor,
        "norm_scale": args.norm_scale,
        "truncate": args.truncate,
        "smooth_first": args.smooth_first,
    })
    return _build(mi.EncoderConfig, section, "encoder")


def _load_skeleton(path: Path, hpe_source: str):
    if hpe_source == "mediapipe":
        return mediapipe_to_h36m(load_sequence(path, format="mediapipe-jsonl"))
    return load_sequence(path, format="h36m-jsonl")


def cmd_encode(args) -> int:
    file_cfg = _load_config_file(args.config)
    seed = _effective_seed(args, file_cfg)
    cfg = _encoder_config(args, file_cfg)
    manifest = _require_file(args.manifest, "manifest")
    entries = labels_mod.read_manifest(manifest)
    out = _out_dir(args)
    base = manifest.parent

    def encode_one(entry):
        seq = _load_skeleton(base / entry.skeleton_path, args.hpe_source)
        image = mi.encode(seq, cfg)
        mi.save_image(image, out / f"{entry.video_id}.img")

    failures: list[tuple[str, str]] = []
    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [(e, pool.submit(encode_one, e)) for e in entries]
            for entry, fut in futures:
                try:
                    fut.result()
                except (LiftError, OSError, ValueError) as exc:
                    failures.append((entry.video_id, str(exc)))
    else:
        for entry in entries:
            try:
                encode_one(entry)
            except (LiftError, OSError, ValueError) as exc:
                failures.append((entry.video_id, str(exc)))

    _write_sidecar(out, "encode", seed, encoder=asdict(cfg),
                   hpe_source=args.hpe_source)
    done = len(entries) - len(failures)
    print(f"encoded {done}/{len(entries)} videos -> {out}")
    for vid, msg in failures:
        print(f"  FAILED {vid}: {msg}", file=sys.stderr)
    return 1 if failures else 0


# -- shared dataset assembly ---------------------------------------------------

def _labels_section(args, file_cfg: dict) -> dict:
    return _merge_section(file_cfg, "labels", {
        "qa_per_task": getattr(args, "qa_per_task", None),
        "uncategorized_weight": getattr(args, "uncategorized_weight", None),
    })


def _category_table(labels_cfg: dict) -> labels_mod.CategoryTable:
    weight = labels_cfg.get("uncategorized_weight")
    return labels_mod.load_categories(uncategorized_weight=weight)


def _build_lexicon(entries, templates) -> dict[str, int]:
    questions = {labels_mod.normalize_question(t) for t in templates.detection}
    for entry in entries:
        exercise = " ".join(entry.label_norm)
        for t in templates.counting:
            questions.add(labels_mod.normalize_question(t.format(exercise=exercise)))
    return model_mod.build_lexicon(sorted(questions))


def _expand_qa(entries, vocab, templates, seed: int, per_task: int | None):
    samples = []
    for entry in entries:
        samples.extend(labels_mod.make_qa_samples(
            entry.video_id, entry.label_norm, entry.count, vocab,
            templates=templates, seed=seed, per_task=per_task))
    return samples


def _load_patches(entries, images_dir: Path, patch_size: int, dtype) -> tuple[dict, tuple[int, int]]:
    table: dict[str, np.ndarray] = {}
    dims: tuple[int, int] | None = None
    for entry in entries:
        path = images_dir / f"{entry.video_id}.img"
        if not path.is_file():
            raise UsageError(f"missing motion image for {entry.video_id}: {path}")
        image = mi.load_image(path)
        if dims is None:
            dims = (image.height, image.width)
        elif dims != (image.height, image.width):
            raise UsageError(
                f"{path}: image is {image.height}x{image.width}, others are "
                f"{dims[0]}x{dims[1]}")
        table[entry.video_id] = model_mod.extract_patches(
            image.pixels, patch_size).astype(dtype)
    assert dims is not None
    return table, dims


def _vocab_from_extra(extra: dict) -> labels_mod.Vocabulary:
    try:
        vocab_doc = extra["vocab"]
        classes = tuple(vocab_doc["classes"])
        weights = np.array([float(w) for w in vocab_doc["weights"]])
        catmap = vocab_doc["categories"]
    except (KeyError, TypeError) as exc:
        raise UsageError(f"checkpoint is missing vocabulary data: {exc}") from exc
    cats = tuple(str(catmap.get(c, labels_mod.UNCATEGORIZED)) for c in classes)
    return labels_mod.Vocabulary(classes=classes, weights=weights, categories=cats)


# -- train ---------------------------------------------------------------------

def cmd_train(args) -> int:
    file_cfg = _load_config_file(args.config)
    seed = _effective_seed(args, file_cfg)
    manifest = _require_file(args.manifest, "manifest")
    images_dir = Path(args.images)
    if not images_dir.is_dir():
        raise UsageError(f"images directory not found: {images_dir}")
    out = _out_dir(args)

    labels_cfg = _labels_section(args, file_cfg)
    per_task = labels_cfg.get("qa_per_task", 1)
    table = _category_table(labels_cfg)

    train_section = _merge_section(file_cfg, "train", {
        "learning_rate": args.learning_rate,
        "batch_size": args.batch_size,
        "patience": args.patience,
        "max_epochs": args.max_epochs,
        "split_fractions": _parse_fractions(args.split_fractions)
        if args.split_fractions else None,
    })
    if "split_fractions" in train_section:
        train_section["split_fractions"] = tuple(train_section["split_fractions"])
    train_section["seed"] = seed
    train_cfg = _build(training.TrainConfig, train_section, "train")

    entries = labels_mod.read_manifest(manifest)
    train_e, val_e, test_e = training.split_dataset(
        entries, train_cfg.split_fractions, seed)
    labels_mod.write_manifest(entries, out / "manifest.jsonl")

    vocab = labels_mod.build_vocabulary([e.label_norm for e in entries], table)
    templates = labels_mod.load_templates(args.templates)
    lexicon = _build_lexicon(entries, templates)

    model_section = _merge_section(file_cfg, "model", {
        "embed_dim": args.embed_dim,
        "num_layers": args.num_layers,
        "num_heads": args.num_heads,
        "patch_size": args.patch_size,
        "max_text_len": args.max_text_len,
        "dtype": args.dtype,
    })
    for key in ("text_vocab_size", "num_classes", "image_height", "image_width"):
        if key in model_section:
            raise UsageError(f"model config {key!r} is derived automatically")
    model_section.setdefault("seed", seed)
    probe = _build(model_mod.ModelConfig, {
        **model_section, "text_vocab_size": len(lexicon),
        "num_classes": vocab.num_classes}, "model")

    patch_table, (h, w) = _load_patches(
        entries, images_dir, probe.patch_size, probe.np_dtype)
    model_cfg = _build(model_mod.ModelConfig, {
        **model_section, "text_vocab_size": len(lexicon),
        "num_classes": vocab.num_classes, "image_height": h, "image_width": w},
        "model")

    train_samples = training.prepare_samples(
        _expand_qa(train_e, vocab, templates, seed, per_task),
        patch_table, lexicon, model_cfg)
    val_samples = training.prepare_samples(
        _expand_qa(val_e, vocab, templates, seed, per_task),
        patch_table, lexicon, model_cfg)
    log.info("training on %d samples (%d videos), validating on %d (%d videos)",
             len(train_samples), len(train_e), len(val_samples), len(val_e))

    result = training.train(train_samples, val_samples, model_cfg, train_cfg)

    extra = {
        "lexicon": lexicon,
        "vocab": {
            "classes": list(vocab.classes),
            "weights": [float(x) for x in vocab.weights],
            "categories": {c: k for c, k in zip(vocab.classes, vocab.categories)},
        },
    }
    ckpt_path = out / "model.ckpt"
    model_mod.save_checkpoint(ckpt_path, result.model, extra=extra)
    training.save_history(result.history, out / "history.csv")
    if result.history:
        plots.plot_loss_curves(result.history, out / "loss_curves.png")
    _write_sidecar(out, "train", seed, model=asdict(model_cfg),
                   train=asdict(train_cfg),
                   labels={"qa_per_task": per_task,
                           "uncategorized_weight": table.uncategorized_weight},
                   splits={"train": len(train_e), "val": len(val_e),
                           "test": len(test_e)})
    print(f"trained {len(result.history)} epochs ({result.stop_reason}) "
          f"-> {ckpt_path}")
    if result.history:
        best = min(h.val_loss for h in result.history) if val_samples else float("nan")
        print(f"best val loss {best:.6f}")
    if result.diverged:
        print("training diverged; kept the last finite checkpoint", file=sys.stderr)
        return 1
    return 0


# -- eval ------------------------------------------------------------------------

def _records_from_samples(model, samples, vocab, batch_size: int = 32):
    """Forward all samples and wrap distributions into eval records."""
    records = []
    seen: dict[tuple[str, str], int] = {}
    for i in range(0, len(samples), batch_size):
        chunk = samples[i:i + batch_size]
        logits, _ = model.forward_batch([s.patches for s in chunk],
                                        [s.tokens for s in chunk])
        probs = model_mod.softmax(logits)
        for s, p in zip(chunk, probs):
            idx = seen.get((s.image_ref, s.task), 0)
            seen[(s.image_ref, s.task)] = idx + 1
            records.append(metrics_mod.EvalRecord(
                sample_id=f"{s.image_ref}:{s.task}:{idx}",
                task=s.task,
                ground_truth=s.ground_truth,
                probs=np.asarray(p, dtype=np.float64)))
    return records


def cmd_eval(args) -> int:
    file_cfg = _load_config_file(args.config)
    seed = _effective_seed(args, file_cfg)
    manifest = _require_file(args.manifest, "manifest")
    ckpt = _require_file(args.checkpoint, "checkpoint")
    images_dir = Path(args.images)
    if not images_dir.is_dir():
        raise UsageError(f"images directory not found: {images_dir}")
    out = _out_dir(args)
    tau = args.tau if args.tau is not None else metrics_mod.DEFAULT_TAU

    entries = labels_mod.read_manifest(manifest)
    if args.split != "all":
        chosen = [e for e in entries if e.split == args.split]
        if not chosen:
            raise UsageError(
                f"no videos with split {args.split!r} in {manifest}; "
                "point --manifest at a training run's manifest or use --split all")
    else:
        chosen = entries

    model, extra = model_mod.load_checkpoint(ckpt)
    vocab = _vocab_from_extra(extra)
    lexicon = {str(k): int(v) for k, v in extra.get("lexicon", {}).items()}
    if not lexicon:
        raise UsageError("checkpoint is missing its lexicon")
    templates = labels_mod.load_templates(args.templates)

    patch_table, _ = _load_patches(chosen, images_dir, model.cfg.patch_size,
                                   model.cfg.np_dtype)
    samples = training.prepare_samples(
        _expand_qa(chosen, vocab, templates, seed, args.qa_per_task),
        patch_table, lexicon, model.cfg)

    records = _records_from_samples(model, samples, vocab)
    metrics_mod.write_records(records, out / "records.jsonl", vocab.classes, tau)
    report = metrics_mod.build_report(records, vocab, tau)
    written = metrics_mod.save_report(report, out)
    _write_sidecar(out, "eval", seed, checkpoint=str(ckpt), split=args.split,
                   tau=tau, num_samples=len(records))

    print(f"evaluated {len(records)} samples from {len(chosen)} videos "
          f"(split={args.split})")
    if report.detection_accuracy is not None:
        print(f"detection accuracy {report.detection_accuracy:.4f} "
              f"(exact match {report.exact_match_rate:.4f})")
    if report.obo is not None:
        print(f"counting OBO {report.obo:.4f}, MAE {report.mae:.4f}")
    print(f"wrote {len(written) + 1} files -> {out}")
    return 0


# -- predict ----------------------------------------------------------------------

_COUNTING_CUES = {"many", "count", "number", "total"}


def cmd_predict(args) -> int:
    file_cfg = _load_config_file(args.config)
    cfg = _encoder_config(args, file_cfg)
    ckpt = _require_file(args.checkpoint, "checkpoint")
    skel = _require_file(args.skeleton, "skeleton file")
    tau = args.tau if args.tau is not None else metrics_mod.DEFAULT_TAU

    model, extra = model_mod.load_checkpoint(ckpt)
    vocab = _vocab_from_extra(extra)
    lexicon = {str(k): int(v) for k, v in extra.get("lexicon", {}).items()}
    if not lexicon:
        raise UsageError("checkpoint is missing its lexicon")

    seq = _load_skeleton(skel, args.hpe_source)
    image = mi.encode(seq, cfg)
    question = labels_mod.normalize_question(args.question)
    tokens = model_mod.tokenize(question, lexicon, model.cfg.max_text_len)
    logits = model.forward(image, tokens)
    probs = model_mod.softmax(logits)

    task = args.task
    if task == "auto":
        task = "counting" if _COUNTING_CUES & set(question.split()) else "detection"
    if task == "counting":
        print(model_mod.predict_count(probs, vocab))
    else:
        hits = model_mod.predict_detection(probs, vocab, tau)
        if not hits:
            print(f"(no classes at or above tau={tau})")
        for cls, p in hits:
            print(f"{cls}\t{p:.4f}")
    return 0


# -- score ---------------------------------------------------------------------

def cmd_score(args) -> int:
    records_path = _require_file(args.records, "records file")
    out = _out_dir(args)
    records, classes, header_tau = metrics_mod.read_records(records_path)
    tau = args.tau if args.tau is not None else header_tau
    vocab = metrics_mod.vocabulary_from_classes(classes)
    report = metrics_mod.build_report(records, vocab, tau)
    written = metrics_mod.save_report(report, out)
    _write_sidecar(out, "score", args.seed if args.seed is not None else 0,
                   records=str(records_path), tau=tau)
    print(json.dumps({k: v for k, v in report.to_dict().items()
                      if not isinstance(v, dict)}, indent=2))
    print(f"wrote {len(written) + 1} files -> {out}")
    return 0


# -- convert ---------------------------------------------------------------------

def cmd_convert(args) -> int:
    src = _require_file(args.input, "input skeleton")
    if args.out is None:
        raise UsageError("--out is required for convert (output file path)")
    out_path = Path(args.out)
    if out_path.suffix == "" and not out_path.exists():
        raise UsageError(f"--out must be a file path, got {out_path}")
    with open(src, encoding="utf-8") as fh:
        first = fh.readline()
    try:
        declared = json.loads(first).get("format", "")
    except json.JSONDecodeError:
        declared = ""
    if declared == "mediapipe33":
        seq = mediapipe_to_h36m(load_sequence(src, format="mediapipe-jsonl"))
    elif declared == "h36m17":
        seq = load_sequence(src, format="h36m-jsonl")
    else:
        raise UsageError(f"{src}: cannot determine input format (header says "
                         f"{declared!r})")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_sequence(seq, out_path)
    print(f"wrote {out_path} ({seq.frames.shape[0]} frames)")
    return 0


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="seed propagated to every module (default 0)")
    common.add_argument("--config", default=None,
                        help="JSON config file; flags override its values")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--quiet", action="store_true",
                        help="only warnings and errors")

    encoder = argparse.ArgumentParser(add_help=False)
    encoder.add_argument("--smooth-window", type=int, default=None)
    encoder.add_argument("--points-per-chain", type=int, default=None)
    encoder.add_argument("--downsample-factor", type=int, default=None)
    encoder.add_argument("--norm-scale", type=float, default=None)
    encoder.add_argument("--truncate", action=argparse.BooleanOptionalAction,
                         default=None,
                         help="clip over-length sequences instead of failing")
    encoder.add_argument("--smooth-first", action=argparse.BooleanOptionalAction,
                         default=None,
                         help="smooth before downsampling (default) or after")
    encoder.add_argument("--hpe-source", choices=("h36m", "mediapipe"),
                         default="h36m", help="skeleton file flavor")

    parser = argparse.ArgumentParser(
        prog="lift",
        description="Motion-image encoding, question-conditioned training, "
                    "and evaluation for exercise detection and rep counting.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", parents=[common],
                       help="generate a synthetic skeleton dataset")
    p.add_argument("--spec", default=None, help="SynthSpec JSON file")
    p.add_argument("--primitives", default=None,
                   help="comma-separated primitive names")
    p.add_argument("--counts", default=None, help="e.g. 3,5,7 or 3-8")
    p.add_argument("--subjects", type=int, default=None)
    p.add_argument("--fps", type=float, default=None)
    p.add_argument("--noise-std", type=float, default=None)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("encode", parents=[common, encoder],
                       help="encode manifest videos into motion images")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("train", parents=[common],
                       help="train a model on an encoded dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--images", required=True, help="directory of .img files")
    p.add_argument("--templates", default=None, help="question template JSON")
    p.add_argument("--embed-dim", type=int, default=None)
    p.add_argument("--num-layers", type=int, default=None)
    p.add_argument("--num-heads", type=int, default=None)
    p.add_argument("--patch-size", type=int, default=None)
    p.add_argument("--max-text-len", type=int, default=None)
    p.add_argument("--dtype", choices=("float64", "float32"), default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--split-fractions", default=None, help="e.g. 0.8,0.1,0.1")
    p.add_argument("--qa-per-task", type=int, default=None,
                   help="templates drawn per task per video (default 1)")
    p.add_argument("--uncategorized-weight", type=float, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common],
                       help="evaluate a checkpoint and write report files")
    p.add_argument("--manifest", required=True,
                   help="manifest with split column (train writes one)")
    p.add_argument("--images", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--templates", default=None)
    p.add_argument("--split", choices=("train", "val", "test", "all"),
                   default="test")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--qa-per-task", type=int, default=None,
                   help="templates per task per video (default: all)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", parents=[common, encoder],
                       help="answer one question about one skeleton file")
    p.add_argument("--skeleton", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--task", choices=("auto", "counting", "detection"),
                   default="auto")
    p.add_argument("--tau", type=float, default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("score", parents=[common],
                       help="re-score a records file into report files")
    p.add_argument("--records", required=True)
    p.add_argument("--tau", type=float, default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("convert", parents=[common],
                       help="convert landmark skeletons to the 17-joint format")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_convert)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LiftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

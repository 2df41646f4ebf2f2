"""Compact vision-language transformer over motion images and questions.

Word-level question tokens and image patches are embedded, concatenated,
and run through pre-norm self-attention blocks with full (unmasked)
attention; the start-token output feeds a linear classifier over the
answer vocabulary. Forward, the weighted cross-entropy loss, and exact
analytic gradients are implemented directly on numpy arrays so training
needs no autograd framework.
"""
from __future__ import annotations

import json
import math
import os
import struct
import tempfile
import warnings
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import erf

from .errors import FormatError, SchemaError, ValidationError
from .labels import DegenerateTargetWarning, Vocabulary

CHECKPOINT_MAGIC = b"LIFTCKPT"

PAD_ID = 0
START_ID = 1
UNK_ID = 2
RESERVED_TOKENS = ("<pad>", "<start>", "<unk>")

LN_EPS = 1e-6
INIT_STD = 0.02

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ModelConfig:
    text_vocab_size: int
    num_classes: int
    embed_dim: int = 192
    num_layers: int = 4
    num_heads: int = 4
    patch_size: int = 32
    max_text_len: int = 24
    image_height: int = 384
    image_width: int = 640
    seed: int = 0
    dtype: str = "float64"

    def __post_init__(self) -> None:
        if self.embed_dim % self.num_heads != 0:
            raise ValidationError(
                f"embed_dim {self.embed_dim} not divisible by num_heads {self.num_heads}")
        if self.image_height % self.patch_size or self.image_width % self.patch_size:
            raise ValidationError(
                f"image {self.image_height}x{self.image_width} not divisible "
                f"by patch_size {self.patch_size}")
        if self.dtype not in ("float64", "float32"):
            raise ValidationError(f"dtype must be float64 or float32, got {self.dtype!r}")
        for name in ("text_vocab_size", "num_classes", "embed_dim", "num_layers",
                     "num_heads", "patch_size", "max_text_len"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")

    @property
    def grid_rows(self) -> int:
        return self.image_height // self.patch_size

    @property
    def grid_cols(self) -> int:
        return self.image_width // self.patch_size

    @property
    def num_patches(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * 3

    @property
    def seq_len(self) -> int:
        return self.max_text_len + self.num_patches

    @property
    def np_dtype(self) -> np.dtype:
        return np.dtype(self.dtype)


def build_lexicon(questions: Iterable[str]) -> dict[str, int]:
    """Word -> id over normalized question strings, after the reserved ids."""
    words = sorted({w for q in questions for w in q.split()})
    lexicon = {tok: i for i, tok in enumerate(RESERVED_TOKENS)}
    for w in words:
        if w not in lexicon:
            lexicon[w] = len(lexicon)
    return lexicon


def save_lexicon(lexicon: dict[str, int], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(lexicon, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_lexicon(path: str | Path) -> dict[str, int]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: lexicon must be a JSON object")
    return {str(k): int(v) for k, v in raw.items()}


def tokenize(question: str, lexicon: dict[str, int], max_len: int = 24) -> list[int]:
    """Start token plus word ids, unknown words mapped to UNK, truncated."""
    ids = [START_ID]
    for w in question.lower().split():
        ids.append(lexicon.get(w, UNK_ID))
    return ids[:max_len]


def pad_tokens(ids: Sequence[int], max_len: int) -> np.ndarray:
    out = np.full(max_len, PAD_ID, dtype=np.int64)
    ids = list(ids)[:max_len]
    out[: len(ids)] = ids
    return out


def extract_patches(pixels: np.ndarray, patch_size: int) -> np.ndarray:
    """(H, W, 3) image -> (num_patches, patch_size * patch_size * 3),
    patches ordered row-major over the patch grid."""
    h, w, c = pixels.shape
    if h % patch_size or w % patch_size:
        raise ValidationError(f"image {h}x{w} not divisible by patch {patch_size}")
    gh, gw = h // patch_size, w // patch_size
    tiled = pixels.reshape(gh, patch_size, gw, patch_size, c)
    return tiled.transpose(0, 2, 1, 3, 4).reshape(gh * gw, patch_size * patch_size * c)


def init_parameters(cfg: ModelConfig) -> dict[str, np.ndarray]:
    """Seeded Gaussian init (std 0.02), zero biases, unit layer-norm gains."""
    rng = np.random.default_rng(cfg.seed)
    d = cfg.embed_dim

    def normal(*shape: int) -> np.ndarray:
        return rng.normal(0.0, INIT_STD, size=shape)

    params: dict[str, np.ndarray] = {
        "text.embed": normal(cfg.text_vocab_size, d),
        "patch.w": normal(cfg.patch_dim, d),
        "patch.b": np.zeros(d),
        "type.embed": normal(2, d),
        "pos.text": normal(cfg.max_text_len, d),
        "pos.patch": normal(cfg.num_patches, d),
    }
    for i in range(cfg.num_layers):
        p = f"block{i}"
        params[f"{p}.ln1.g"] = np.ones(d)
        params[f"{p}.ln1.b"] = np.zeros(d)
        for name in ("wq", "wk", "wv", "wo"):
            params[f"{p}.attn.{name}"] = normal(d, d)
        for name in ("bq", "bk", "bv", "bo"):
            params[f"{p}.attn.{name}"] = np.zeros(d)
        params[f"{p}.ln2.g"] = np.ones(d)
        params[f"{p}.ln2.b"] = np.zeros(d)
        params[f"{p}.ffn.w1"] = normal(d, 4 * d)
        params[f"{p}.ffn.b1"] = np.zeros(4 * d)
        params[f"{p}.ffn.w2"] = normal(4 * d, d)
        params[f"{p}.ffn.b2"] = np.zeros(d)
    params["final.g"] = np.ones(d)
    params["final.b"] = np.zeros(d)
    params["head.w"] = normal(d, cfg.num_classes)
    params["head.b"] = np.zeros(cfg.num_classes)
    return {k: v.astype(cfg.np_dtype) for k, v in params.items()}


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x / _SQRT2)) + x * np.exp(-0.5 * x * x) * _INV_SQRT_2PI


def _layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    inv = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + LN_EPS)
    xhat = centered * inv
    return xhat * g + b, mu, inv


def _layer_norm_backward(dy: np.ndarray, x: np.ndarray, mu: np.ndarray,
                         inv: np.ndarray, g: np.ndarray):
    xhat = (x - mu) * inv
    dg = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    db = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * g
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dg, db


def loss(logits: np.ndarray, target: np.ndarray) -> float:
    """Weighted cross-entropy, Σ_j y_j · (−log softmax(z)_j), stabilized."""
    value, _ = loss_batch(logits[None, :], target[None, :])
    return float(value[0])


def loss_batch(logits: np.ndarray, targets: np.ndarray):
    """Per-sample losses (B,) and d(Σ losses)/dlogits (B, C)."""
    if logits.shape != targets.shape:
        raise ValidationError(
            f"logits shape {logits.shape} != targets shape {targets.shape}")
    if not np.isfinite(logits).all():
        raise ValidationError("non-finite logits")
    m = logits.max(axis=-1, keepdims=True)
    shifted = logits - m
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - lse
    losses = -(targets * logp).sum(axis=-1)
    mass = targets.sum(axis=-1, keepdims=True)
    if np.any(mass == 0.0):
        warnings.warn("all-zero target: sample contributes zero loss",
                      DegenerateTargetWarning, stacklevel=2)
    dlogits = softmax(logits) * mass - targets
    return losses, dlogits


class Model:
    """Holds a ModelConfig and its parameter dict; pure-numpy forward/backward."""

    def __init__(self, cfg: ModelConfig, params: dict[str, np.ndarray] | None = None):
        self.cfg = cfg
        self.params = init_parameters(cfg) if params is None else params
        expected = set(init_parameters_shapes(cfg))
        if set(self.params) != expected:
            missing = expected - set(self.params)
            extra = set(self.params) - expected
            raise ValidationError(
                f"parameter names mismatch (missing {sorted(missing)}, extra {sorted(extra)})")

    # -- forward ---------------------------------------------------------

    def _prepare_patches(self, images) -> np.ndarray:
        cfg = self.cfg
        arrs = []
        for im in images:
            pixels = getattr(im, "pixels", im)
            pixels = np.asarray(pixels)
            if pixels.ndim == 2 and pixels.shape == (cfg.num_patches, cfg.patch_dim):
                arrs.append(pixels)
                continue
            if pixels.shape != (cfg.image_height, cfg.image_width, 3):
                raise ValidationError(
                    f"image shape {pixels.shape} != "
                    f"({cfg.image_height}, {cfg.image_width}, 3)")
            arrs.append(extract_patches(pixels, cfg.patch_size))
        return np.stack(arrs).astype(cfg.np_dtype, copy=False)

    def _prepare_tokens(self, token_batch) -> np.ndarray:
        cfg = self.cfg
        rows = [pad_tokens(t, cfg.max_text_len) for t in token_batch]
        tokens = np.stack(rows)
        if tokens.min() < 0 or tokens.max() >= cfg.text_vocab_size:
            raise ValidationError("token id outside [0, text_vocab_size)")
        return tokens

    def forward(self, image, tokens: Sequence[int]) -> np.ndarray:
        """Single-sample logits (num_classes,)."""
        logits, _ = self.forward_batch([image], [tokens])
        return logits[0]

    def forward_batch(self, images, token_batch, want_cache: bool = False):
        """Batched logits (B, num_classes); optionally an activation cache
        holding what backward_batch needs."""
        cfg = self.cfg
        p = self.params
        patches = self._prepare_patches(images)
        tokens = self._prepare_tokens(token_batch)

        text_x = p["text.embed"][tokens] + p["pos.text"] + p["type.embed"][0]
        img_x = patches @ p["patch.w"] + p["patch.b"] + p["pos.patch"] + p["type.embed"][1]
        x = np.concatenate([text_x, img_x], axis=1)

        cache: dict | None = None
        if want_cache:
            cache = {"patches": patches, "tokens": tokens, "blocks": []}

        nh, dh = cfg.num_heads, cfg.embed_dim // cfg.num_heads
        scale = 1.0 / math.sqrt(dh)
        b, s, d = x.shape

        def split_heads(t: np.ndarray) -> np.ndarray:
            return t.reshape(b, s, nh, dh).transpose(0, 2, 1, 3)

        for i in range(cfg.num_layers):
            pre = f"block{i}"
            x_in = x
            h, mu1, inv1 = _layer_norm(x_in, p[f"{pre}.ln1.g"], p[f"{pre}.ln1.b"])
            q = split_heads(h @ p[f"{pre}.attn.wq"] + p[f"{pre}.attn.bq"])
            k = split_heads(h @ p[f"{pre}.attn.wk"] + p[f"{pre}.attn.bk"])
            v = split_heads(h @ p[f"{pre}.attn.wv"] + p[f"{pre}.attn.bv"])
            att = softmax(q @ k.swapaxes(-1, -2) * scale)
            ctx = (att @ v).transpose(0, 2, 1, 3).reshape(b, s, d)
            x_mid = x_in + ctx @ p[f"{pre}.attn.wo"] + p[f"{pre}.attn.bo"]

            h2, mu2, inv2 = _layer_norm(x_mid, p[f"{pre}.ln2.g"], p[f"{pre}.ln2.b"])
            u = h2 @ p[f"{pre}.ffn.w1"] + p[f"{pre}.ffn.b1"]
            geled = gelu(u)
            x = x_mid + geled @ p[f"{pre}.ffn.w2"] + p[f"{pre}.ffn.b2"]

            if want_cache:
                cache["blocks"].append({
                    "x_in": x_in, "mu1": mu1, "inv1": inv1,
                    "q": q, "k": k, "v": v, "att": att, "ctx": ctx,
                    "x_mid": x_mid, "mu2": mu2, "inv2": inv2,
                    "u": u, "gelu": geled,
                })

        xf, muf, invf = _layer_norm(x, p["final.g"], p["final.b"])
        cls = xf[:, 0, :]
        logits = cls @ p["head.w"] + p["head.b"]
        if want_cache:
            cache.update({"x_final": x, "muf": muf, "invf": invf, "cls": cls})
        return logits, cache

    # -- backward --------------------------------------------------------

    def backward(self, image, tokens: Sequence[int],
                 target: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of the single-sample loss w.r.t. every parameter."""
        return self.loss_and_grads([image], [tokens], np.asarray(target)[None, :])[2]

    def loss_and_grads(self, images, token_batch, targets):
        """(per-sample losses, logits, summed-batch gradients)."""
        logits, cache = self.forward_batch(images, token_batch, want_cache=True)
        targets = np.asarray(targets)
        losses, dlogits = loss_batch(logits, targets.astype(logits.dtype, copy=False))
        grads = self.backward_batch(cache, dlogits)
        return losses, logits, grads

    def backward_batch(self, cache: dict, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        cfg = self.cfg
        p = self.params
        grads: dict[str, np.ndarray] = {}
        nh, dh = cfg.num_heads, cfg.embed_dim // cfg.num_heads
        scale = 1.0 / math.sqrt(dh)
        b = dlogits.shape[0]
        s, d = cfg.seq_len, cfg.embed_dim

        grads["head.w"] = cache["cls"].T @ dlogits
        grads["head.b"] = dlogits.sum(axis=0)
        dxf = np.zeros((b, s, d), dtype=dlogits.dtype)
        dxf[:, 0, :] = dlogits @ p["head.w"].T
        dx, grads["final.g"], grads["final.b"] = _layer_norm_backward(
            dxf, cache["x_final"], cache["muf"], cache["invf"], p["final.g"])

        def merge_heads(t: np.ndarray) -> np.ndarray:
            return t.transpose(0, 2, 1, 3).reshape(b, s, d)

        for i in reversed(range(cfg.num_layers)):
            pre = f"block{i}"
            blk = cache["blocks"][i]

            # feed-forward sublayer
            dgel = dx @ p[f"{pre}.ffn.w2"].T
            grads[f"{pre}.ffn.w2"] = blk["gelu"].reshape(-1, 4 * d).T @ dx.reshape(-1, d)
            grads[f"{pre}.ffn.b2"] = dx.sum(axis=(0, 1))
            du = dgel * gelu_grad(blk["u"])
            h2 = ((blk["x_mid"] - blk["mu2"]) * blk["inv2"]) * p[f"{pre}.ln2.g"] \
                + p[f"{pre}.ln2.b"]
            grads[f"{pre}.ffn.w1"] = h2.reshape(-1, d).T @ du.reshape(-1, 4 * d)
            grads[f"{pre}.ffn.b1"] = du.sum(axis=(0, 1))
            dh2 = du @ p[f"{pre}.ffn.w1"].T
            dmid, grads[f"{pre}.ln2.g"], grads[f"{pre}.ln2.b"] = _layer_norm_backward(
                dh2, blk["x_mid"], blk["mu2"], blk["inv2"], p[f"{pre}.ln2.g"])
            dmid = dmid + dx  # residual

            # attention sublayer
            grads[f"{pre}.attn.wo"] = blk["ctx"].reshape(-1, d).T @ dmid.reshape(-1, d)
            grads[f"{pre}.attn.bo"] = dmid.sum(axis=(0, 1))
            dctx = (dmid @ p[f"{pre}.attn.wo"].T).reshape(b, s, nh, dh).transpose(0, 2, 1, 3)
            datt = dctx @ blk["v"].swapaxes(-1, -2)
            dv = blk["att"].swapaxes(-1, -2) @ dctx
            dscores = (datt - (datt * blk["att"]).sum(axis=-1, keepdims=True)) * blk["att"]
            dq = dscores @ blk["k"] * scale
            dk = dscores.swapaxes(-1, -2) @ blk["q"] * scale

            h1 = ((blk["x_in"] - blk["mu1"]) * blk["inv1"]) * p[f"{pre}.ln1.g"] \
                + p[f"{pre}.ln1.b"]
            h1_flat = h1.reshape(-1, d)
            dh1 = np.zeros_like(h1)
            for name, dproj in (("wq", dq), ("wk", dk), ("wv", dv)):
                flat = merge_heads(dproj).reshape(-1, d)
                grads[f"{pre}.attn.{name}"] = h1_flat.T @ flat
                grads[f"{pre}.attn.b{name[1]}"] = flat.sum(axis=0)
                dh1 += (flat @ p[f"{pre}.attn.{name}"].T).reshape(b, s, d)
            dx_ln, grads[f"{pre}.ln1.g"], grads[f"{pre}.ln1.b"] = _layer_norm_backward(
                dh1, blk["x_in"], blk["mu1"], blk["inv1"], p[f"{pre}.ln1.g"])
            dx = dx_ln + dmid  # residual

        # split back into text and image streams
        lt = cfg.max_text_len
        dtext, dimg = dx[:, :lt, :], dx[:, lt:, :]
        grads["pos.text"] = dtext.sum(axis=0)
        grads["pos.patch"] = dimg.sum(axis=0)
        dtype_embed = np.zeros_like(p["type.embed"])
        dtype_embed[0] = dtext.sum(axis=(0, 1))
        dtype_embed[1] = dimg.sum(axis=(0, 1))
        grads["type.embed"] = dtype_embed
        grads["patch.w"] = cache["patches"].reshape(-1, cfg.patch_dim).T \
            @ dimg.reshape(-1, d)
        grads["patch.b"] = dimg.sum(axis=(0, 1))
        dembed = np.zeros_like(p["text.embed"])
        np.add.at(dembed, cache["tokens"], dtext)
        grads["text.embed"] = dembed
        return grads


def init_parameters_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Parameter names and shapes without allocating the tensors."""
    d = cfg.embed_dim
    shapes: dict[str, tuple[int, ...]] = {
        "text.embed": (cfg.text_vocab_size, d),
        "patch.w": (cfg.patch_dim, d),
        "patch.b": (d,),
        "type.embed": (2, d),
        "pos.text": (cfg.max_text_len, d),
        "pos.patch": (cfg.num_patches, d),
        "final.g": (d,), "final.b": (d,),
        "head.w": (d, cfg.num_classes), "head.b": (cfg.num_classes,),
    }
    for i in range(cfg.num_layers):
        p = f"block{i}"
        shapes[f"{p}.ln1.g"] = (d,)
        shapes[f"{p}.ln1.b"] = (d,)
        for name in ("wq", "wk", "wv", "wo"):
            shapes[f"{p}.attn.{name}"] = (d, d)
        for name in ("bq", "bk", "bv", "bo"):
            shapes[f"{p}.attn.{name}"] = (d,)
        shapes[f"{p}.ln2.g"] = (d,)
        shapes[f"{p}.ln2.b"] = (d,)
        shapes[f"{p}.ffn.w1"] = (d, 4 * d)
        shapes[f"{p}.ffn.b1"] = (4 * d,)
        shapes[f"{p}.ffn.w2"] = (4 * d, d)
        shapes[f"{p}.ffn.b2"] = (d,)
    return shapes


# -- prediction ------------------------------------------------------------

def predict_detection(probs: np.ndarray, vocab: Vocabulary,
                      tau: float = 0.05) -> list[tuple[str, float]]:
    """Classes with probability >= tau, most confident first."""
    hits = [(vocab.classes[j], float(probs[j]))
            for j in range(len(probs)) if probs[j] >= tau]
    return sorted(hits, key=lambda wp: (-wp[1], wp[0]))


def top_class(probs: np.ndarray, vocab: Vocabulary) -> str:
    """Unrestricted argmax over all classes; ties go to the lower index."""
    return vocab.classes[int(np.argmax(probs))]


def predict_count(probs: np.ndarray, vocab: Vocabulary,
                  restrict: bool = True) -> int | None:
    """Most confident repetition count.

    With restrict=True the argmax runs over the integer classes only,
    ties broken toward the smaller integer. With restrict=False the
    global argmax is taken; a non-integer winner returns None.
    """
    if restrict:
        idx = vocab.integer_indices()
        return int(1 + np.argmax(probs[idx]))
    winner = top_class(probs, vocab)
    try:
        value = int(winner)
    except ValueError:
        return None
    return value


# -- checkpoint i/o ---------------------------------------------------------

def save_checkpoint(path: str | Path, model: Model,
                    extra: dict | None = None) -> None:
    """Atomic write: magic, length-prefixed JSON header (config echo, extras,
    tensor manifest), then tensors as 64-bit little-endian floats."""
    path = Path(path)
    names = sorted(model.params)
    header = {
        "config": asdict(model.cfg),
        "extra": extra or {},
        "tensors": [[n, list(model.params[n].shape)] for n in names],
    }
    blob = json.dumps(header).encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            for n in names:
                fh.write(np.ascontiguousarray(
                    model.params[n], dtype="<f8").tobytes())
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str | Path) -> tuple[Model, dict]:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        raw_len = fh.read(4)
        if len(raw_len) != 4:
            raise FormatError(f"{path}: truncated header length")
        (hlen,) = struct.unpack("<I", raw_len)
        blob = fh.read(hlen)
        if len(blob) != hlen:
            raise FormatError(f"{path}: truncated header")
        try:
            header = json.loads(blob.decode("utf-8"))
            cfg = ModelConfig(**header["config"])
            manifest = header["tensors"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise FormatError(f"{path}: malformed checkpoint header: {exc}") from exc
        params: dict[str, np.ndarray] = {}
        for name, shape in manifest:
            count = int(np.prod(shape)) if shape else 1
            data = fh.read(count * 8)
            if len(data) != count * 8:
                raise FormatError(f"{path}: truncated tensor {name!r}")
            arr = np.frombuffer(data, dtype="<f8").reshape(shape)
            params[name] = arr.astype(cfg.np_dtype)
        trailing = fh.read(1)
        if trailing:
            raise FormatError(f"{path}: trailing bytes after tensors")
    model = Model(cfg, params)
    for name, arr in params.items():
        if not np.isfinite(arr).all():
            raise ValidationError(f"{path}: non-finite values in tensor {name!r}")
    return model, header.get("extra", {})

"""Exercise label normalization, weighted vocabulary, and QA sample generation.

Raw labels ("1-leg RDL") are normalized into word lists, every word is
weighted by the category table shipped in data/word_categories.json, and
each video expands into question-answer samples for the two tasks
(exercise detection and repetition counting).
"""
from __future__ import annotations

import json
import re
import warnings
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import NormalizationError, SchemaError, ValidationError

Label = list[str]

# The only weights a word category may carry.
ALLOWED_WEIGHTS = (0.0, 0.1, 0.4, 0.5, 1.0)

# Counting classes: the answer space for "how many repetitions".
MIN_COUNT = 1
MAX_COUNT = 30
INTEGER_CLASSES = tuple(str(i) for i in range(MIN_COUNT, MAX_COUNT + 1))
INTEGER_CATEGORY = "Integers"
UNCATEGORIZED = "Uncategorized"

DATA_DIR = Path(__file__).resolve().parent / "data"

# Token-level abbreviation expansions, applied before singularization.
ABBREVIATIONS: dict[str, tuple[str, ...]] = {
    "l": ("left",),
    "r": ("right",),
    "rdl": ("romanian", "deadlift"),
}

# Multi-token rewrites, applied before any character-level cleanup.
_PHRASE_ABBREVIATIONS = (("1-leg", "single leg"),)
_PHRASE_PATTERNS = tuple(
    (re.compile(rf"\b{re.escape(src)}\b"), dst) for src, dst in _PHRASE_ABBREVIATIONS
)

# Hyphens between alphanumerics fuse the halves ("push-up" -> "pushup").
_HYPHEN_BETWEEN = re.compile(r"(?<=[a-z0-9])-(?=[a-z0-9])")
# Everything outside the label alphabet becomes a separator.
_NON_LABEL_CHARS = re.compile(r"[^a-z0-9+& ]")
_CONJUNCTION_SYMBOLS = re.compile(r"[+&]")

_SIBILANT_PLURAL_SUFFIXES = ("ches", "shes", "sses", "xes", "zes")


def _plural_stem(token: str) -> str | None:
    """The singular a plural token would reduce to, or None if not plural-shaped."""
    if token.endswith("ies") and len(token) > 4:
        return token[:-3] + "y"
    if token.endswith(_SIBILANT_PLURAL_SUFFIXES):
        return token[:-2]
    if token.endswith("s") and not token.endswith("ss") and len(token) > 3:
        return token[:-1]
    return None


class UnknownWordWarning(UserWarning):
    """A label word is absent from the vocabulary and was skipped."""


class DegenerateTargetWarning(UserWarning):
    """An encoded target vector came out all zero."""


@dataclass(frozen=True)
class WordCategory:
    name: str
    weight: float
    words: tuple[str, ...]


@dataclass(frozen=True)
class CategoryTable:
    """Word -> category lookup built from the shipped category file."""

    categories: tuple[WordCategory, ...]
    uncategorized_weight: float
    _category_of: dict[str, WordCategory] = field(repr=False, compare=False, default_factory=dict)
    _body_parts: frozenset[str] = field(repr=False, compare=False, default=frozenset())

    @property
    def all_words(self) -> frozenset[str]:
        return frozenset(self._category_of)

    @property
    def body_part_words(self) -> frozenset[str]:
        return self._body_parts

    def _resolve(self, word: str):
        cat = self._category_of.get(word)
        if cat is None:
            # Anatomical plurals stay plural in labels ("arms"), but the
            # table lists singulars; look those up through their stem. The
            # bare -s fallback catches short ones like "abs".
            stem = _plural_stem(word)
            if stem is None and word.endswith("s") and not word.endswith("ss"):
                stem = word[:-1]
            if stem is not None and stem in self._body_parts:
                cat = self._category_of.get(stem)
        return cat

    def category_of(self, word: str) -> str:
        if word in INTEGER_CLASSES:
            return INTEGER_CATEGORY
        cat = self._resolve(word)
        return cat.name if cat is not None else UNCATEGORIZED

    def weight(self, word: str) -> float:
        if word in INTEGER_CLASSES:
            return 1.0
        cat = self._resolve(word)
        if cat is None or cat.name == UNCATEGORIZED:
            return self.uncategorized_weight
        return cat.weight


def _canonical_table_word(word: str) -> str:
    # Table entries follow the same character rules as normalized labels.
    return _HYPHEN_BETWEEN.sub("", word.lower())


def load_categories(path: str | Path | None = None,
                    uncategorized_weight: float | None = None) -> CategoryTable:
    """Load a category table, enforcing the one-category-per-word invariant."""
    path = Path(path) if path is not None else DATA_DIR / "word_categories.json"
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: category file must be a JSON object")

    categories: list[WordCategory] = []
    owner: dict[str, WordCategory] = {}
    for name, entry in raw.items():
        if not isinstance(entry, dict) or "weight" not in entry or "words" not in entry:
            raise SchemaError(f"{path}: category {name!r} needs 'weight' and 'words'")
        weight = float(entry["weight"])
        if name == UNCATEGORIZED and uncategorized_weight is not None:
            weight = float(uncategorized_weight)
        if weight not in ALLOWED_WEIGHTS:
            raise SchemaError(f"{path}: category {name!r} weight {weight} not in {ALLOWED_WEIGHTS}")
        words = tuple(_canonical_table_word(w) for w in entry["words"])
        cat = WordCategory(name=name, weight=weight, words=words)
        for word in words:
            if word in owner:
                raise SchemaError(
                    f"{path}: word {word!r} appears in both "
                    f"{owner[word].name!r} and {name!r}")
            owner[word] = cat
        categories.append(cat)

    body = frozenset(
        w for c in categories if c.name == "Body Part Noun" for w in c.words)
    return CategoryTable(
        categories=tuple(categories),
        uncategorized_weight=uncategorized_weight if uncategorized_weight is not None
        else next((c.weight for c in categories if c.name == UNCATEGORIZED), 0.0),
        _category_of=owner,
        _body_parts=body,
    )


_DEFAULT_TABLE: CategoryTable | None = None


def default_categories() -> CategoryTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = load_categories()
    return _DEFAULT_TABLE


def _singularize(token: str, table: CategoryTable) -> str:
    # Words listed in any category are canonical spellings; keep them.
    if token in table.all_words:
        return token
    stem = _plural_stem(token)
    if stem is None:
        return token
    # Anatomical plurals keep their plurality ("arms" stays "arms").
    if stem in table.body_part_words:
        return token
    return stem


def normalize_label(raw: str, table: CategoryTable | None = None) -> Label:
    """Normalize a raw exercise label into an ordered list of words.

    Lowercase, expand abbreviations, fuse hyphenated words, strip
    apostrophes and punctuation (keeping the conjunction symbols + and &),
    and singularize verbs while preserving anatomical plurals.
    """
    if not raw or not raw.strip():
        raise NormalizationError("label is empty")
    if table is None:
        table = default_categories()

    s = raw.lower()
    for pattern, replacement in _PHRASE_PATTERNS:
        s = pattern.sub(replacement, s)
    s = s.replace("'", "")
    s = _HYPHEN_BETWEEN.sub("", s)
    s = _CONJUNCTION_SYMBOLS.sub(lambda m: f" {m.group(0)} ", s)
    s = _NON_LABEL_CHARS.sub(" ", s)

    words: Label = []
    for token in s.split():
        for part in ABBREVIATIONS.get(token, (token,)):
            words.append(_singularize(part, table))
    if not words:
        raise NormalizationError(f"label {raw!r} is empty after normalization")
    return words


def word_weight(word: str, table: CategoryTable | None = None) -> float:
    """Weight of a vocabulary word per its category; unknown words get the
    Uncategorized weight and integer classes get 1.0."""
    if table is None:
        table = default_categories()
    return table.weight(word)


@dataclass(frozen=True, eq=False)
class Vocabulary:
    """Ordered answer classes: sorted unique label words, then "1".."30"."""

    classes: tuple[str, ...]
    weights: np.ndarray
    categories: tuple[str, ...]
    _index: dict[str, int] = field(repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        if len(set(self.classes)) != len(self.classes):
            raise ValidationError("vocabulary classes contain duplicates")
        missing = [c for c in INTEGER_CLASSES if c not in self.classes]
        if missing:
            raise ValidationError(f"vocabulary is missing integer classes {missing}")
        if not self._index:
            object.__setattr__(
                self, "_index", {c: i for i, c in enumerate(self.classes)})

    def __len__(self) -> int:
        return len(self.classes)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def __contains__(self, cls: str) -> bool:
        return cls in self._index

    def index_of(self, cls: str) -> int:
        try:
            return self._index[cls]
        except KeyError:
            raise ValidationError(f"class {cls!r} not in vocabulary") from None

    def weight_of(self, cls: str) -> float:
        return float(self.weights[self.index_of(cls)])

    def integer_indices(self) -> np.ndarray:
        """Indices of the classes "1".."30" in ascending numeric order."""
        return np.array([self.index_of(c) for c in INTEGER_CLASSES], dtype=np.int64)


def build_vocabulary(labels: Iterable[Label],
                     table: CategoryTable | None = None) -> Vocabulary:
    """Collect unique words across labels and append the integer classes.

    Order independent of label input order; integer-looking words in the
    1..30 range are absorbed by the integer classes instead of duplicating.
    """
    if table is None:
        table = default_categories()
    words = sorted({w for label in labels for w in label} - set(INTEGER_CLASSES))
    classes = tuple(words) + INTEGER_CLASSES
    weights = np.array([table.weight(c) for c in classes], dtype=np.float64)
    categories = tuple(table.category_of(c) for c in classes)
    return Vocabulary(classes=classes, weights=weights, categories=categories)


def save_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    doc = {
        "classes": list(vocab.classes),
        "weights": [float(w) for w in vocab.weights],
        "categories": {c: cat for c, cat in zip(vocab.classes, vocab.categories)},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_vocabulary(path: str | Path) -> Vocabulary:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        classes = tuple(doc["classes"])
        weights = np.array([float(w) for w in doc["weights"]], dtype=np.float64)
        catmap = doc["categories"]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: malformed vocabulary file: {exc}") from exc
    if len(weights) != len(classes):
        raise SchemaError(f"{path}: {len(classes)} classes but {len(weights)} weights")
    categories = tuple(str(catmap.get(c, UNCATEGORIZED)) for c in classes)
    return Vocabulary(classes=classes, weights=weights, categories=categories)


def encode_target(sample: Label | int, vocab: Vocabulary) -> np.ndarray:
    """Weighted multi-hot target for detection, one-hot for counting."""
    values = np.zeros(vocab.num_classes, dtype=np.float64)
    if isinstance(sample, bool):
        raise ValidationError("target must be a label or a count integer")
    if isinstance(sample, (int, np.integer)):
        count = int(sample)
        if not MIN_COUNT <= count <= MAX_COUNT:
            raise ValidationError(
                f"count {count} outside {MIN_COUNT}..{MAX_COUNT}")
        values[vocab.index_of(str(count))] = 1.0
        return values

    seen: set[str] = set()
    for word in sample:
        if word in seen:
            continue
        seen.add(word)
        if word not in vocab:
            warnings.warn(f"label word {word!r} not in vocabulary; skipped",
                          UnknownWordWarning, stacklevel=2)
            continue
        values[vocab.index_of(word)] = vocab.weight_of(word)
    if not values.any():
        warnings.warn("encoded target is all zero", DegenerateTargetWarning,
                      stacklevel=2)
    return values


@dataclass(frozen=True)
class QuestionTemplates:
    counting: tuple[str, ...]
    detection: tuple[str, ...]


def load_templates(path: str | Path | None = None) -> QuestionTemplates:
    path = Path(path) if path is not None else DATA_DIR / "question_templates.json"
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        counting = tuple(str(t) for t in raw["counting"])
        detection = tuple(str(t) for t in raw["detection"])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: template file needs 'counting' and 'detection' lists") from exc
    return QuestionTemplates(counting=counting, detection=detection)


def normalize_question(text: str) -> str:
    """Character-level cleanup only; question words are not singularized."""
    s = text.lower().replace("'", "")
    s = _HYPHEN_BETWEEN.sub("", s)
    s = _CONJUNCTION_SYMBOLS.sub(lambda m: f" {m.group(0)} ", s)
    s = _NON_LABEL_CHARS.sub(" ", s)
    return " ".join(s.split())


@dataclass(frozen=True)
class QASample:
    image_ref: str
    question: str
    task: str  # "detection" or "counting"
    target: np.ndarray
    ground_truth: object  # Label for detection, int for counting


def make_qa_samples(image_ref: str, label: Label, count: int, vocab: Vocabulary,
                    templates: QuestionTemplates | None = None, seed: int = 0,
                    per_task: int | None = None,
                    keep_degenerate: bool = True) -> list[QASample]:
    """Expand one video into QA samples, counting templates first.

    With per_task set, that many templates are drawn per task with an RNG
    keyed on (seed, image_ref) so the draw is stable across runs.
    """
    if templates is None:
        templates = load_templates()
    if not templates.counting or not templates.detection:
        raise ValidationError("need at least one template per task")

    def pick(n: int, rng: np.random.Generator) -> list[int]:
        if per_task is None or per_task >= n:
            return list(range(n))
        return sorted(rng.choice(n, size=per_task, replace=False).tolist())

    rng = np.random.default_rng([seed, zlib.crc32(str(image_ref).encode())])
    exercise = " ".join(label)
    samples: list[QASample] = []
    for ti in pick(len(templates.counting), rng):
        question = normalize_question(templates.counting[ti].format(exercise=exercise))
        samples.append(QASample(image_ref=image_ref, question=question,
                                task="counting",
                                target=encode_target(count, vocab),
                                ground_truth=int(count)))
    for ti in pick(len(templates.detection), rng):
        question = normalize_question(templates.detection[ti])
        target = encode_target(list(label), vocab)
        if not target.any() and not keep_degenerate:
            continue
        samples.append(QASample(image_ref=image_ref, question=question,
                                task="detection", target=target,
                                ground_truth=list(label)))
    return samples


@dataclass
class ManifestEntry:
    """One dataset video: where its skeleton lives and what it shows."""

    video_id: str
    skeleton_path: str
    label_raw: str
    label_norm: Label
    count: int
    split: str = ""


def write_manifest(entries: Sequence[ManifestEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(json.dumps({
                "id": e.video_id,
                "skeleton_path": e.skeleton_path,
                "label_raw": e.label_raw,
                "label_norm": " ".join(e.label_norm),
                "count": int(e.count),
                "split": e.split,
            }) + "\n")


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    entries: list[ManifestEntry] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                entries.append(ManifestEntry(
                    video_id=str(rec["id"]),
                    skeleton_path=str(rec["skeleton_path"]),
                    label_raw=str(rec["label_raw"]),
                    label_norm=str(rec["label_norm"]).split(),
                    count=int(rec["count"]),
                    split=str(rec.get("split", "")),
                ))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: bad manifest record: {exc}") from exc
    return entries

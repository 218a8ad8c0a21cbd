"""Token-level class-probability sources.

Two producers satisfy one contract: a native averaged-perceptron baseline
tagger, and probability files written by any external model (see the
bridge package). Either way a tweet yields a ProbMatrix, one row of
[p(O), p(B-DRUG), p(I-DRUG)] per token, and ``decode`` turns rows into
repaired BIO labels by argmax.

Probability file format (``medtag-probs-v1``)
---------------------------------------------
UTF-8 JSONL. First line is the header comment ``#schema=medtag-probs-v1``.
Each following line: ``{"id": str, "tokens": [{"start": int, "end": int}],
"probs": [[pO, pB, pI], ...]}`` with one probability row per token, rows
summing to 1 within 1e-6. Class order is fixed to [O, B-DRUG, I-DRUG].
Floats are serialized with shortest round-trip precision (at most 17
significant digits), so write-then-load is lossless.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alignment import CLASS_ORDER, LABEL_TO_INDEX, O, repair_bio
from .errors import ConfigError, DataValidationError, MedtagError
from .fileio import atomic_write, dump_json_line, iter_jsonl
from .rng import SplitMix64

PROBS_SCHEMA = "medtag-probs-v1"
MODEL_FORMAT = "medtag-model-v1"

FEATURE_TEMPLATES = (
    "bias",
    "lower",
    "shape",
    "prefix3",
    "prefix4",
    "suffix3",
    "suffix4",
    "gazetteer",
    "prev_gazetteer",
)

ROW_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class ProbMatrix:
    """Per-tweet class probabilities: one row per token, columns [O, B, I]."""

    tweet_id: str
    token_offsets: tuple[tuple[int, int], ...]
    probs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.probs, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            if arr.size == 0:
                arr = arr.reshape(0, 3)
            else:
                raise DataValidationError(
                    f"tweet {self.tweet_id!r}: probability rows must have 3 entries"
                )
        if arr.shape[0] != len(self.token_offsets):
            raise DataValidationError(
                f"tweet {self.tweet_id!r}: {arr.shape[0]} probability rows for "
                f"{len(self.token_offsets)} tokens"
            )
        if arr.size:
            if not np.isfinite(arr).all():
                raise DataValidationError(f"tweet {self.tweet_id!r}: non-finite probability")
            if (arr < 0).any() or (arr > 1).any():
                raise DataValidationError(
                    f"tweet {self.tweet_id!r}: probabilities must lie in [0, 1]"
                )
            sums = arr.sum(axis=1)
            bad = np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE)[0]
            if bad.size:
                raise DataValidationError(
                    f"tweet {self.tweet_id!r}: row {int(bad[0])} sums to "
                    f"{sums[bad[0]]!r}, expected 1 within {ROW_SUM_TOLERANCE}"
                )
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)
        object.__setattr__(self, "token_offsets", tuple((int(s), int(e)) for s, e in self.token_offsets))

    def __len__(self) -> int:
        return len(self.token_offsets)

    def equals(self, other: "ProbMatrix") -> bool:
        return (
            self.tweet_id == other.tweet_id
            and self.token_offsets == other.token_offsets
            and np.array_equal(self.probs, other.probs)
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    learning_rate: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not math.isfinite(self.learning_rate) or self.learning_rate <= 0:
            raise ConfigError(f"learning rate must be finite and > 0, got {self.learning_rate}")


@dataclass(frozen=True)
class BaselineModel:
    """Linear tagger: per-feature class scores plus a training-set gazetteer."""

    gazetteer: frozenset[str]
    weights: dict[str, tuple[float, float, float]] = field(compare=False)
    templates: tuple[str, ...] = FEATURE_TEMPLATES
    best_epoch: int = 0
    dev_f1: float = 0.0
    selection: str = "averaged"


def _token_shape(text: str) -> str:
    # Character-class sketch with runs squeezed: "Rx40mg" -> "Xxdx".
    out: list[str] = []
    previous = ""
    for ch in text:
        if ch.isupper():
            cls = "X"
        elif ch.islower():
            cls = "x"
        elif ch.isdigit():
            cls = "d"
        else:
            cls = "o"
        if cls != previous:
            out.append(cls)
            previous = cls
    return "".join(out)


def token_features(tokens, i: int, gazetteer: frozenset[str]) -> list[str]:
    """Feature strings for token i; the template set is fixed per model file.

    The constant bias feature accumulates the class prior; without it a
    token sharing only broad features (e.g. an unseen all-lowercase word)
    is decided by whatever microscopic lean the averaged shape weights
    carry, which collapses precision.
    """
    text = tokens[i].text
    low = text.lower()
    feats = [
        "bias",
        f"lower={low}",
        f"shape={_token_shape(text)}",
        f"prefix3={low[:3]}",
        f"prefix4={low[:4]}",
        f"suffix3={low[-3:]}",
        f"suffix4={low[-4:]}",
    ]
    if low in gazetteer:
        feats.append("gazetteer=1")
    if i > 0 and tokens[i - 1].text.lower() in gazetteer:
        feats.append("prev_gazetteer=1")
    return feats


def _scores(weights, feats) -> list[float]:
    scores = [0.0, 0.0, 0.0]
    for f in feats:
        w = weights.get(f)
        if w is not None:
            scores[0] += w[0]
            scores[1] += w[1]
            scores[2] += w[2]
    return scores


def _argmax_low(scores) -> int:
    # Ties break toward the lower class index; O wins exact three-way ties.
    best = 0
    for c in (1, 2):
        if scores[c] > scores[best]:
            best = c
    return best


def _token_micro_f1(weights, gazetteer, labeled) -> float:
    """Token-level micro F1 over the two entity classes (O excluded)."""
    tp = fp = fn = 0
    for item in labeled:
        for i in range(len(item.tokens)):
            feats = token_features(item.tokens, i, gazetteer)
            pred = _argmax_low(_scores(weights, feats))
            gold = LABEL_TO_INDEX[item.labels[i]]
            if pred == gold:
                if gold != 0:
                    tp += 1
            else:
                if pred != 0:
                    fp += 1
                if gold != 0:
                    fn += 1
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def train_baseline(train, dev, config: TrainConfig) -> BaselineModel:
    """Train an averaged perceptron and keep the best checkpoint on dev.

    The gazetteer is every lowercased token string labeled B-DRUG or
    I-DRUG in the training data. After each epoch two candidate
    checkpoints are scored on dev by token-level micro F1 over the entity
    classes: the time-averaged weights and the current (raw) weights.
    Averaging wins on noisy data; on cleanly separable data it can retain
    tiny transient leans from the first updates long after mistakes stop,
    while the raw weights are exact, so both compete and the highest dev
    score (earliest on ties) is returned. Deterministic for fixed
    (data, config, seed).
    """
    if not train:
        raise DataValidationError("training set is empty")
    if not dev:
        raise DataValidationError(
            "development set is empty; pass a dev split so the best epoch can be selected"
        )
    gazetteer = frozenset(
        token.text.lower()
        for item in train
        for token, label in zip(item.tokens, item.labels)
        if label != O
    )
    lr = config.learning_rate
    weights: dict[str, list[float]] = {}
    totals: dict[str, list[float]] = {}
    step = 1
    rng = SplitMix64(config.seed)
    order = list(range(len(train)))
    best_f1 = -1.0
    best_epoch = 0
    best_selection = "averaged"
    best_weights: dict[str, tuple[float, float, float]] = {}
    for epoch in range(1, config.epochs + 1):
        rng.shuffle(order)
        for idx in order:
            item = train[idx]
            for i in range(len(item.tokens)):
                feats = token_features(item.tokens, i, gazetteer)
                pred = _argmax_low(_scores(weights, feats))
                gold = LABEL_TO_INDEX[item.labels[i]]
                if pred != gold:
                    for f in feats:
                        w = weights.setdefault(f, [0.0, 0.0, 0.0])
                        u = totals.setdefault(f, [0.0, 0.0, 0.0])
                        w[gold] += lr
                        w[pred] -= lr
                        u[gold] += step * lr
                        u[pred] -= step * lr
                step += 1
        averaged = {
            f: (
                w[0] - totals[f][0] / step,
                w[1] - totals[f][1] / step,
                w[2] - totals[f][2] / step,
            )
            for f, w in weights.items()
        }
        current = {f: (w[0], w[1], w[2]) for f, w in weights.items()}
        for selection, candidate in (("averaged", averaged), ("current", current)):
            f1 = _token_micro_f1(candidate, gazetteer, dev)
            if f1 > best_f1:
                best_f1 = f1
                best_epoch = epoch
                best_selection = selection
                best_weights = candidate
    for w in best_weights.values():
        if not all(math.isfinite(v) for v in w):
            raise MedtagError("training produced non-finite weights")
    return BaselineModel(
        gazetteer=gazetteer,
        weights=best_weights,
        best_epoch=best_epoch,
        dev_f1=best_f1,
        selection=best_selection,
    )


def _softmax(scores: list[float]) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64)
    arr = arr - arr.max()
    exp = np.exp(arr)
    return exp / exp.sum()


def predict_probs(model: BaselineModel, tokens, *, tweet_id: str = "") -> ProbMatrix:
    """One softmax probability row per token; rows sum to 1."""
    rows = np.zeros((len(tokens), 3), dtype=np.float64)
    for i in range(len(tokens)):
        feats = token_features(tokens, i, model.gazetteer)
        rows[i] = _softmax(_scores(model.weights, feats))
    offsets = tuple((t.start, t.end) for t in tokens)
    return ProbMatrix(tweet_id=tweet_id, token_offsets=offsets, probs=rows)


def decode(matrix: ProbMatrix) -> list[str]:
    """Argmax each row (ties toward lower class index), then repair BIO."""
    if len(matrix) == 0:
        return []
    raw = [CLASS_ORDER[int(c)] for c in np.argmax(matrix.probs, axis=1)]
    return repair_bio(raw)


def save_model(path: str | Path, model: BaselineModel) -> None:
    """Versioned JSON model file; key order is fixed so equal models are byte-equal."""
    payload = {
        "format": MODEL_FORMAT,
        "templates": list(model.templates),
        "best_epoch": model.best_epoch,
        "dev_f1": model.dev_f1,
        "selection": model.selection,
        "gazetteer": sorted(model.gazetteer),
        "weights": {f: list(model.weights[f]) for f in sorted(model.weights)},
    }
    with atomic_write(path) as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True)
        fh.write("\n")


def load_model(path: str | Path) -> BaselineModel:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataValidationError(f"{path}: malformed model JSON: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("format") != MODEL_FORMAT:
        raise DataValidationError(f"{path}: not a {MODEL_FORMAT} model file")
    try:
        weights = {
            f: (float(w[0]), float(w[1]), float(w[2])) for f, w in obj["weights"].items()
        }
        return BaselineModel(
            gazetteer=frozenset(obj["gazetteer"]),
            weights=weights,
            templates=tuple(obj["templates"]),
            best_epoch=int(obj.get("best_epoch", 0)),
            dev_f1=float(obj.get("dev_f1", 0.0)),
            selection=str(obj.get("selection", "averaged")),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise DataValidationError(f"{path}: bad model payload: {exc}") from exc


def write_prob_file(path: str | Path, matrices: list[ProbMatrix]) -> None:
    with atomic_write(path) as fh:
        fh.write(f"#schema={PROBS_SCHEMA}\n")
        for m in matrices:
            fh.write(
                dump_json_line(
                    {
                        "id": m.tweet_id,
                        "tokens": [{"start": s, "end": e} for s, e in m.token_offsets],
                        "probs": [[float(x) for x in row] for row in m.probs],
                    }
                )
                + "\n"
            )


def load_prob_file(path: str | Path) -> list[ProbMatrix]:
    """Read and validate a medtag-probs-v1 file."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if first.strip() != f"#schema={PROBS_SCHEMA}":
        raise DataValidationError(
            f"{path}: missing '#schema={PROBS_SCHEMA}' header on line 1"
        )
    matrices: list[ProbMatrix] = []
    seen: set[str] = set()
    for line_no, obj in iter_jsonl(path):
        tweet_id = obj.get("id")
        raw_tokens = obj.get("tokens")
        raw_probs = obj.get("probs")
        if (
            not isinstance(tweet_id, str)
            or not isinstance(raw_tokens, list)
            or not isinstance(raw_probs, list)
        ):
            raise DataValidationError(
                f"{path}:{line_no}: expected fields 'id', 'tokens', 'probs'"
            )
        if tweet_id in seen:
            raise DataValidationError(f"{path}:{line_no}: duplicate tweet id {tweet_id!r}")
        seen.add(tweet_id)
        if len(raw_tokens) != len(raw_probs):
            raise DataValidationError(
                f"{path}:{line_no}: {len(raw_probs)} probability rows for "
                f"{len(raw_tokens)} tokens"
            )
        try:
            offsets = tuple((int(t["start"]), int(t["end"])) for t in raw_tokens)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataValidationError(f"{path}:{line_no}: bad token offsets: {exc}") from exc
        for row in raw_probs:
            if not isinstance(row, list) or len(row) != 3:
                raise DataValidationError(
                    f"{path}:{line_no}: each probability row needs exactly 3 entries"
                )
        try:
            arr = np.asarray(raw_probs, dtype=np.float64).reshape(len(offsets), 3)
            matrices.append(ProbMatrix(tweet_id=tweet_id, token_offsets=offsets, probs=arr))
        except (DataValidationError, TypeError, ValueError) as exc:
            raise DataValidationError(f"{path}:{line_no}: {exc}") from exc
    return matrices

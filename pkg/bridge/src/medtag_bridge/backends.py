"""Model backends.

A backend turns one tweet's token texts into one class distribution per
token. Subword models see each token split into subtokens; the exported
row for a token is the class distribution of its first subtoken, which
mirrors how standard token-classification heads are read out.

Three backends exist:

``dummy``
    Uniform logits over fixed-size character chunks. No dependencies;
    useful for plumbing tests and as a worked example of the contract.
``<path>.json``
    A lexicon stub: logits looked up by lowercased first chunk. Lets tests
    drive non-uniform, fully deterministic outputs without a real model.
``<anything else>``
    A Hugging Face token-classification checkpoint (model id or local
    directory), loaded through transformers. The model's ``id2label`` must
    name the three classes O, B-DRUG, I-DRUG (case-insensitive).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, ModelLoadError, SequenceOverflowError

CANONICAL_LABELS = ("O", "B-DRUG", "I-DRUG")

DEFAULT_CHUNK_SIZE = 4


def chunk_subtokens(text: str, size: int) -> list[str]:
    return [text[i : i + size] for i in range(0, len(text), size)]


def softmax(logits) -> np.ndarray:
    arr = np.asarray(logits, dtype=np.float64)
    arr = arr - arr.max()
    exp = np.exp(arr)
    return exp / exp.sum()


def _check_budget(tweet_id: str, n_subtokens: int, max_seq_len: int) -> None:
    if n_subtokens > max_seq_len:
        raise SequenceOverflowError(
            f"tweet {tweet_id!r}: {n_subtokens} subtokens exceed the maximum "
            f"sequence length {max_seq_len}; refusing to truncate"
        )


@dataclass(frozen=True)
class DummyUniformModel:
    """Uniform logits; every exported row is (1/3, 1/3, 1/3)."""

    chunk_size: int = DEFAULT_CHUNK_SIZE
    label_order: tuple[str, ...] = CANONICAL_LABELS

    def token_distributions(self, tweet_id: str, texts: list[str], max_seq_len: int) -> np.ndarray:
        total = sum(len(chunk_subtokens(t, self.chunk_size)) for t in texts)
        _check_budget(tweet_id, total, max_seq_len)
        return np.full((len(texts), 3), 1 / 3)


@dataclass(frozen=True)
class StubLexiconModel:
    """Deterministic logits keyed by each token's lowercased first chunk."""

    label_order: tuple[str, ...]
    chunk_size: int
    default_logits: tuple[float, float, float]
    lexicon: dict[str, tuple[float, float, float]]

    @classmethod
    def load(cls, path: str | Path) -> "StubLexiconModel":
        try:
            with open(path, encoding="utf-8") as fh:
                obj = json.load(fh)
        except OSError as exc:
            raise ModelLoadError(f"cannot read stub model {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ModelLoadError(f"{path}: malformed stub model JSON: {exc}") from exc
        if obj.get("format") != "medtag-bridge-stub-v1":
            raise ModelLoadError(f"{path}: not a medtag-bridge-stub-v1 file")
        try:
            label_order = tuple(obj["label_order"])
            lexicon = {
                key: tuple(float(v) for v in values)
                for key, values in obj.get("lexicon", {}).items()
            }
            model = cls(
                label_order=label_order,
                chunk_size=int(obj.get("chunk_size", DEFAULT_CHUNK_SIZE)),
                default_logits=tuple(float(v) for v in obj.get("default_logits", (0.0, 0.0, 0.0))),
                lexicon=lexicon,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelLoadError(f"{path}: bad stub model payload: {exc}") from exc
        if sorted(model.label_order) != sorted(CANONICAL_LABELS):
            raise ModelLoadError(
                f"{path}: label_order must be a permutation of {CANONICAL_LABELS}"
            )
        for key, values in model.lexicon.items():
            if len(values) != 3 or not all(math.isfinite(v) for v in values):
                raise ModelLoadError(f"{path}: logits for {key!r} must be 3 finite numbers")
        return model

    def token_distributions(self, tweet_id: str, texts: list[str], max_seq_len: int) -> np.ndarray:
        chunks_per_token = [chunk_subtokens(t, self.chunk_size) for t in texts]
        _check_budget(tweet_id, sum(len(c) for c in chunks_per_token), max_seq_len)
        rows = np.zeros((len(texts), 3))
        for i, chunks in enumerate(chunks_per_token):
            first = chunks[0].lower()
            rows[i] = softmax(self.lexicon.get(first, self.default_logits))
        return rows


class TransformersModel:
    """Hugging Face token-classification checkpoint behind the contract."""

    def __init__(self, spec: str, device: str | None = None) -> None:
        try:
            import torch
            from transformers import AutoModelForTokenClassification, AutoTokenizer
        except ImportError as exc:
            raise ModelLoadError(
                "the transformers backend needs the 'transformers' and 'torch' "
                f"packages: {exc}"
            ) from exc
        self._torch = torch
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(spec)
            self.model = AutoModelForTokenClassification.from_pretrained(spec)
        except Exception as exc:
            raise ModelLoadError(f"cannot load model {spec!r}: {exc}") from exc
        self.model.eval()
        if device:
            try:
                self.model.to(device)
            except Exception as exc:
                raise ModelLoadError(f"cannot move model to device {device!r}: {exc}") from exc
        self.device = device
        id2label = self.model.config.id2label
        normalized = {int(i): str(label).strip().upper() for i, label in id2label.items()}
        order = tuple(normalized[i] for i in sorted(normalized))
        if sorted(order) != sorted(CANONICAL_LABELS):
            raise ModelLoadError(
                f"model labels {order} cannot be remapped to {CANONICAL_LABELS}"
            )
        self.label_order = order

    def token_distributions(self, tweet_id: str, texts: list[str], max_seq_len: int) -> np.ndarray:
        if not texts:
            return np.zeros((0, 3))
        encoding = self.tokenizer(
            texts,
            is_split_into_words=True,
            truncation=False,
            return_tensors="pt",
        )
        n_subtokens = encoding["input_ids"].shape[1]
        _check_budget(tweet_id, int(n_subtokens), max_seq_len)
        word_ids = encoding.word_ids()
        first_position: dict[int, int] = {}
        for position, word in enumerate(word_ids):
            if word is not None and word not in first_position:
                first_position[word] = position
        missing = [i for i in range(len(texts)) if i not in first_position]
        if missing:
            raise DataError(
                f"tweet {tweet_id!r}: tokens {missing} produced no subtokens"
            )
        if self.device:
            encoding = {k: v.to(self.device) for k, v in encoding.items()}
        with self._torch.no_grad():
            logits = self.model(**encoding).logits[0]
        rows = np.zeros((len(texts), 3))
        for i in range(len(texts)):
            rows[i] = softmax(logits[first_position[i]].cpu().numpy())
        return rows


def load_backend(spec: str, device: str | None = None):
    """Resolve a --model value to a backend instance."""
    if spec == "dummy":
        return DummyUniformModel()
    if spec.endswith(".json"):
        return StubLexiconModel.load(spec)
    return TransformersModel(spec, device)

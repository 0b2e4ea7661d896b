"""Paragraph topic classification.

A ParagraphEncoder turns a token-id sequence into a fixed-width vector; a
linear layer over that vector scores every topic plus NOISE.  The bundled
encoder is a trainable mean-of-embeddings model, deliberately small; the
contract exists so a stronger encoder can drop in without touching the
classifier or the training loop.
"""

from __future__ import annotations

import logging
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .corpus import TopicParagraphExample

__all__ = [
    "ParagraphEncoder",
    "MeanEmbeddingEncoder",
    "DetectorModel",
    "detect_topics",
    "train_detector",
    "evaluate_detector",
    "DetectorMetrics",
    "TopicMetrics",
    "write_detector_report",
]

logger = logging.getLogger(__name__)


class ParagraphEncoder(ABC):
    """Contract: token ids in, [1, output_dim] vector out."""

    output_dim: int

    @abstractmethod
    def encode(self, token_ids: Sequence[int]) -> ad.Tensor:
        ...

    @abstractmethod
    def parameters(self) -> dict[str, ad.Tensor]:
        ...


class MeanEmbeddingEncoder(ParagraphEncoder):
    """Mean of trainable token embeddings, then one affine + tanh layer.

    An empty paragraph encodes as tanh of the bias alone.
    """

    def __init__(self, vocab_size: int, embed_dim: int, output_dim: int,
                 rng: np.random.Generator):
        self.embed_dim = embed_dim
        self.output_dim = output_dim
        self.embed = ad.parameter(rng, (vocab_size, embed_dim))
        self.proj_W = ad.parameter(rng, (embed_dim, output_dim))
        self.proj_b = ad.zero_parameter((1, output_dim))

    def encode(self, token_ids: Sequence[int]) -> ad.Tensor:
        ids = list(token_ids)
        if not ids:
            mean = ad.zeros((1, self.embed_dim))
        else:
            vectors = ad.embedding_lookup(self.embed, ids)  # [n, embed_dim]
            weights = ad.Tensor(np.full((1, len(ids)), 1.0 / len(ids), dtype=ad.default_dtype()))
            mean = ad.matmul(weights, vectors)  # [1, embed_dim]
        return ad.tanh(ad.affine(mean, self.proj_W, self.proj_b))

    def parameters(self) -> dict[str, ad.Tensor]:
        return {"embed": self.embed, "proj_W": self.proj_W, "proj_b": self.proj_b}


class DetectorModel:
    """Encoder + linear classifier over topics (NOISE is the last index)."""

    def __init__(self, encoder: ParagraphEncoder, n_classes: int, rng: np.random.Generator):
        if n_classes < 2:
            raise ValueError(f"need at least 2 classes (one topic + NOISE), got {n_classes}")
        self.encoder = encoder
        self.n_classes = n_classes
        self.cls_W = ad.parameter(rng, (encoder.output_dim, n_classes))
        self.cls_b = ad.zero_parameter((1, n_classes))

    def logits(self, token_ids: Sequence[int]) -> ad.Tensor:
        return ad.affine(self.encoder.encode(token_ids), self.cls_W, self.cls_b)

    def parameters(self) -> dict[str, ad.Tensor]:
        params = {f"encoder.{name}": p for name, p in self.encoder.parameters().items()}
        params["cls_W"] = self.cls_W
        params["cls_b"] = self.cls_b
        return params


def detect_topics(paragraphs: Sequence[Sequence[int]], model: DetectorModel) -> list[int]:
    """Most-probable topic per paragraph; ties break to the lowest index."""
    return [int(np.argmax(model.logits(ids).data)) for ids in paragraphs]


def _example_nll(model: DetectorModel, example: TopicParagraphExample) -> ad.Tensor:
    probs = ad.softmax(model.logits(example.token_ids), axis=1)
    return ad.mul(ad.log(ad.pick(probs, 0, example.topic_index), floor=1e-12), -1.0)


def _accuracy(model: DetectorModel, examples: Sequence[TopicParagraphExample]) -> float:
    if not examples:
        return float("nan")
    hits = sum(
        1 for ex in examples
        if int(np.argmax(model.logits(ex.token_ids).data)) == ex.topic_index
    )
    return hits / len(examples)


def train_detector(model: DetectorModel, train: Sequence[TopicParagraphExample],
                   valid: Sequence[TopicParagraphExample], epochs: int = 4,
                   lr: float = 3e-5, seed: int = 42) -> list[dict]:
    """Adam on per-example NLL; keeps the best-validation checkpoint.

    Returns one history row per epoch: epoch, lr, train_loss,
    valid_accuracy, wall_seconds.
    """
    if not train:
        raise ValueError("empty training set")
    present = {ex.topic_index for ex in train}
    for topic in range(model.n_classes):
        if topic not in present:
            logger.warning("topic %d has no training examples", topic)
    rng = np.random.default_rng(seed)
    optimizer = ad.Adam(model.parameters(), lr=lr)
    history: list[dict] = []
    best_accuracy = -1.0
    best_state: dict[str, np.ndarray] = {}
    for epoch in range(1, epochs + 1):
        started = time.perf_counter()
        losses = []
        for index in rng.permutation(len(train)):
            example = train[index]
            with ad.tape() as recording:
                loss = _example_nll(model, example)
                recording.backward(loss)
            optimizer.step()
            optimizer.zero_grad()
            losses.append(loss.item())
        valid_accuracy = _accuracy(model, valid)
        history.append({
            "epoch": epoch,
            "lr": lr,
            "train_loss": float(np.mean(losses)),
            "valid_accuracy": valid_accuracy,
            "wall_seconds": time.perf_counter() - started,
        })
        score = valid_accuracy if valid else -float(np.mean(losses))
        if score > best_accuracy:
            best_accuracy = score
            best_state = {name: p.data.copy() for name, p in model.parameters().items()}
    if best_state:
        for name, p in model.parameters().items():
            p.data[...] = best_state[name]
    return history


@dataclass
class TopicMetrics:
    topic_index: int
    precision: float
    recall: float
    support: int


@dataclass
class DetectorMetrics:
    accuracy: float
    per_topic: list[TopicMetrics]
    n_examples: int


def evaluate_detector(model: DetectorModel,
                      examples: Sequence[TopicParagraphExample]) -> DetectorMetrics:
    """Accuracy plus one-vs-rest precision/recall per topic."""
    if not examples:
        raise ValueError("empty evaluation set")
    n = model.n_classes
    confusion = np.zeros((n, n), dtype=np.int64)  # [true, predicted]
    for example in examples:
        predicted = int(np.argmax(model.logits(example.token_ids).data))
        confusion[example.topic_index, predicted] += 1
    accuracy = float(np.trace(confusion)) / len(examples)
    per_topic = []
    for topic in range(n):
        true_positive = int(confusion[topic, topic])
        predicted_count = int(confusion[:, topic].sum())
        support = int(confusion[topic, :].sum())
        precision = true_positive / predicted_count if predicted_count else 0.0
        recall = true_positive / support if support else 0.0
        per_topic.append(TopicMetrics(topic, precision, recall, support))
    return DetectorMetrics(accuracy=accuracy, per_topic=per_topic, n_examples=len(examples))


def write_detector_report(path, metrics: DetectorMetrics, topic_names: Sequence[str]) -> None:
    """Tab-separated per-topic rows plus an aggregate line."""
    if len(topic_names) != len(metrics.per_topic):
        raise ValueError(f"{len(topic_names)} topic names for {len(metrics.per_topic)} topics")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("topic\tprecision\trecall\tsupport\n")
        for name, row in zip(topic_names, metrics.per_topic):
            handle.write(f"{name}\t{row.precision:.6f}\t{row.recall:.6f}\t{row.support}\n")
        handle.write(f"ALL\taccuracy={metrics.accuracy:.6f}\t\t{metrics.n_examples}\n")

"""The feedforward baseline classifier: mean-pooled token embeddings
into a 1024-unit tanh hidden layer, then a softmax over the training
labels.

The hidden layer doubles as the tweet feature extractor for the
zero-shot rankers: its activations are the p-dimensional semantic
feature every ranking method consumes.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .embedding import EmbeddingMatrix, Vocabulary, load_embeddings, mean_pool
from .errors import DataError, NumericalError
from .ingest import Dataset
from .numeric import (
    CROSS_ENTROPY_FLOOR,
    AdamState,
    DenseLayer,
    adam_step,
    softmax,
    xavier_uniform,
)


@dataclass
class TrainSpec:
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    learning_rate: float = 0.001
    hidden_units: int = 1024

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class BaselineClassifier:
    hidden: DenseLayer  # (hidden_units, d), tanh
    output: DenseLayer  # (n_labels, hidden_units), softmax
    label_order: list[str]
    vocab: Vocabulary
    emb: EmbeddingMatrix
    loss_history: list[float] = field(default_factory=list)

    @property
    def feature_dim(self) -> int:
        return self.hidden.weights.shape[0]


def pooled_features(
    token_lists, vocab: Vocabulary, emb: EmbeddingMatrix
) -> np.ndarray:
    """Mean-pooled embedding for each token list, stacked (m, d)."""
    return np.stack([mean_pool(tokens, vocab, emb)[0] for tokens in token_lists])


def train_baseline(
    train: Dataset,
    vocab: Vocabulary,
    emb: EmbeddingMatrix,
    spec: TrainSpec,
) -> BaselineClassifier:
    """Minibatch Adam training on mean cross-entropy, shuffled each
    epoch by the seed. Xavier-uniform weights, zero biases."""
    label_order = list(train.label_set)
    if len(label_order) < 2:
        raise DataError("need at least 2 labels to train a classifier")
    label_index = {label: i for i, label in enumerate(label_order)}
    for tokens, label in train.examples:
        if label not in label_index:
            raise DataError(f"training example labeled {label!r} not in label set")

    X = pooled_features((t for t, _ in train.examples), vocab, emb)
    y = np.array([label_index[label] for _, label in train.examples])
    m, d = X.shape
    n_out = len(label_order)

    rng = np.random.default_rng(spec.seed)
    Wh = xavier_uniform(d, spec.hidden_units, rng)
    bh = np.zeros(spec.hidden_units)
    Wo = xavier_uniform(spec.hidden_units, n_out, rng)
    bo = np.zeros(n_out)
    params = [Wh, bh, Wo, bo]
    state = AdamState.for_params(params, learning_rate=spec.learning_rate)

    onehot = np.zeros((m, n_out))
    onehot[np.arange(m), y] = 1.0

    loss_history: list[float] = []
    for epoch in range(spec.epochs):
        order = rng.permutation(m)
        total = 0.0
        for start in range(0, m, spec.batch_size):
            idx = order[start : start + spec.batch_size]
            Xb, Yb = X[idx], onehot[idx]
            B = len(idx)
            Wh, bh, Wo, bo = params
            H = np.tanh(Xb @ Wh.T + bh)
            P = softmax(H @ Wo.T + bo)
            total -= float(
                np.log(np.maximum(P[np.arange(B), y[idx]], CROSS_ENTROPY_FLOOR)).sum()
            )
            dlogits = (P - Yb) / B
            dWo = dlogits.T @ H
            dbo = dlogits.sum(axis=0)
            dH = dlogits @ Wo
            dZ = dH * (1.0 - H * H)
            dWh = dZ.T @ Xb
            dbh = dZ.sum(axis=0)
            params, state = adam_step(params, [dWh, dbh, dWo, dbo], state)
        mean_loss = total / m
        if not np.isfinite(mean_loss):
            raise NumericalError(
                f"baseline loss diverged at epoch {epoch}; "
                f"last finite epoch losses: {loss_history[-3:]}"
            )
        loss_history.append(mean_loss)

    Wh, bh, Wo, bo = params
    return BaselineClassifier(
        hidden=DenseLayer(weights=Wh, bias=bh, activation="tanh"),
        output=DenseLayer(weights=Wo, bias=bo, activation="softmax"),
        label_order=label_order,
        vocab=vocab,
        emb=emb,
        loss_history=loss_history,
    )


def extract_features(model: BaselineClassifier, tokens) -> np.ndarray:
    """The hidden layer's tanh activations for one tweet: the semantic
    feature vector used by every ranking method."""
    x, _ = mean_pool(tokens, model.vocab, model.emb)
    return model.hidden.apply(x)


def extract_features_batch(model: BaselineClassifier, token_lists) -> np.ndarray:
    X = pooled_features(token_lists, model.vocab, model.emb)
    return model.hidden.apply_batch(X)


def predict_proba(model: BaselineClassifier, tokens) -> np.ndarray:
    """Probability vector over model.label_order; the exact softmax of
    the output layer applied to the extracted feature."""
    return model.output.apply(extract_features(model, tokens))


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _layer_to_json(layer: DenseLayer) -> dict:
    return {
        "weights": layer.weights.tolist(),
        "bias": layer.bias.tolist(),
        "activation": layer.activation,
    }


def _layer_from_json(obj: dict) -> DenseLayer:
    return DenseLayer(
        weights=np.array(obj["weights"], dtype=float),
        bias=np.array(obj["bias"], dtype=float),
        activation=obj["activation"],
    )


def baseline_bundle_dict(
    model: BaselineClassifier, embedding_path: str, config: dict | None = None
) -> dict:
    """JSON-serializable bundle: label order, layer weights, and a
    path-plus-hash reference to the embedding file."""
    return {
        "kind": "baseline",
        "label_order": model.label_order,
        "feature_dim": model.feature_dim,
        "embedding": {"path": str(embedding_path), "sha256": file_sha256(embedding_path)},
        "hidden": _layer_to_json(model.hidden),
        "output": _layer_to_json(model.output),
        "loss_history": model.loss_history,
        "config": config or {},
    }


def save_baseline_bundle(
    model: BaselineClassifier, path, embedding_path: str, config: dict | None = None
) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(baseline_bundle_dict(model, embedding_path, config), fh, sort_keys=True)
        fh.write("\n")


def baseline_from_bundle_dict(obj: dict, base_dir: str = ".") -> BaselineClassifier:
    emb_path = obj["embedding"]["path"]
    if not os.path.isabs(emb_path):
        emb_path = os.path.join(base_dir, emb_path)
    if not os.path.exists(emb_path):
        raise DataError(f"embedding file {emb_path!r} referenced by bundle is missing")
    actual = file_sha256(emb_path)
    if actual != obj["embedding"]["sha256"]:
        raise DataError(
            f"embedding file {emb_path!r} hash {actual} does not match bundle"
        )
    vocab, emb = load_embeddings(emb_path)
    return BaselineClassifier(
        hidden=_layer_from_json(obj["hidden"]),
        output=_layer_from_json(obj["output"]),
        label_order=list(obj["label_order"]),
        vocab=vocab,
        emb=emb,
        loss_history=list(obj.get("loss_history", [])),
    )


def load_baseline_bundle(path) -> BaselineClassifier:
    with open(path, "r", encoding="ascii") as fh:
        obj = json.load(fh)
    if obj.get("kind") != "baseline":
        raise DataError(f"{path}: not a baseline model bundle")
    return baseline_from_bundle_dict(obj, base_dir=os.path.dirname(os.path.abspath(path)))

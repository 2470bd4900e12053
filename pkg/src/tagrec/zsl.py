"""Zero-shot and few-shot hashtag ranking.

Three rankers share one ingredient set: a tweet feature vector x (the
baseline classifier's hidden activations), and per-label attribute
vectors (the word embedding of each '#label' token).

- ConSE embeds a tweet into attribute space as the probability-weighted
  convex combination of the training labels' attribute vectors, then
  ranks candidates by cosine.
- ESZSL fits a bilinear compatibility matrix W in closed form from two
  regularized Gram solves and ranks by x^T W a.
- DEM maps attribute vectors into feature space through one ReLU layer
  trained by least squares and ranks by distance to x.

Ties everywhere break by candidate order, which makes every ranking
reproducible and testable.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .embedding import EmbeddingMatrix, Vocabulary, cosine, label_embedding
from .errors import DataError, NotPositiveDefiniteError, NumericalError
from .ingest import Dataset
from .numeric import AdamState, DenseLayer, adam_step, relu, xavier_uniform
from .supervised import (
    BaselineClassifier,
    TrainSpec,
    baseline_bundle_dict,
    baseline_from_bundle_dict,
    extract_features,
    file_sha256,
    predict_proba,
)

logger = logging.getLogger(__name__)


@dataclass
class ZslSplit:
    seen: list[str]
    unseen: list[str]
    seed: int

    def __post_init__(self):
        if not self.seen or not self.unseen:
            raise ValueError("both seen and unseen label lists must be non-empty")
        if set(self.seen) & set(self.unseen):
            raise ValueError("seen and unseen labels overlap")


@dataclass
class AttributeMatrix:
    """Per-label attribute vectors as columns, in label order."""

    matrix: np.ndarray  # (s, n_labels)
    labels: list[str]
    label_index: dict[str, int]

    @classmethod
    def from_labels(
        cls, labels, vocab: Vocabulary, emb: EmbeddingMatrix
    ) -> "AttributeMatrix":
        labels = list(labels)
        cols = [label_embedding(label, vocab, emb) for label in labels]
        return cls(
            matrix=np.stack(cols, axis=1),
            labels=labels,
            label_index={label: i for i, label in enumerate(labels)},
        )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def column(self, label: str) -> np.ndarray:
        return self.matrix[:, self.label_index[label]]


@dataclass
class ConseModel:
    classifier: BaselineClassifier
    seen_embeddings: AttributeMatrix
    T: int


@dataclass
class EszslModel:
    W: np.ndarray  # (p, s)
    gamma: float


@dataclass
class DemModel:
    mapper: DenseLayer  # (p, s), relu
    loss_history: list[float] = field(default_factory=list)


@dataclass
class Prediction:
    """Candidate labels with scores, best first."""

    ranked: list[tuple[str, float]]
    all_oov: bool = False

    def labels(self) -> list[str]:
        return [label for label, _ in self.ranked]

    def top(self, k: int) -> "Prediction":
        return Prediction(ranked=self.ranked[:k], all_oov=self.all_oov)


def _ranked(labels, scores) -> Prediction:
    order = sorted(range(len(labels)), key=lambda i: (-scores[i], i))
    return Prediction(ranked=[(labels[i], float(scores[i])) for i in order])


def make_split(labels, n_seen: int, n_unseen: int, seed: int) -> ZslSplit:
    """Seeded uniform shuffle of the label pool; the first n_seen labels
    are seen, the next n_unseen unseen."""
    labels = list(labels)
    if n_seen + n_unseen > len(labels):
        raise DataError(
            f"split {n_seen}/{n_unseen} needs {n_seen + n_unseen} labels, "
            f"pool has {len(labels)}"
        )
    perm = np.random.default_rng(seed).permutation(len(labels))
    shuffled = [labels[i] for i in perm]
    return ZslSplit(seen=shuffled[:n_seen], unseen=shuffled[n_seen : n_seen + n_unseen], seed=seed)


def subset_by_labels(dataset: Dataset, labels) -> Dataset:
    """Examples whose label is in `labels`, with that list as the new
    ordered label set."""
    labels = list(labels)
    keep = set(labels)
    return Dataset(
        examples=[(tokens, lab) for tokens, lab in dataset.examples if lab in keep],
        label_set=labels,
    )


def conse_embed(probs: np.ndarray, seen_embeddings: AttributeMatrix, T: int) -> np.ndarray:
    """Convex combination of the T most probable training labels'
    attribute vectors, normalized by their accumulated probability."""
    probs = np.asarray(probs, dtype=float)
    n = len(seen_embeddings.labels)
    if probs.shape != (n,):
        raise ValueError(f"probs shape {probs.shape} does not match {n} labels")
    if abs(float(probs.sum()) - 1.0) > 1e-6:
        raise ValueError(f"probabilities sum to {probs.sum()}, expected 1")
    if not 1 <= T <= n:
        raise ValueError(f"T must be in [1, {n}], got {T}")
    top = sorted(range(n), key=lambda i: (-probs[i], i))[:T]
    z = float(probs[top].sum())
    if z == 0.0:
        raise NumericalError("all top-T probabilities are zero")
    return (seen_embeddings.matrix[:, top] @ probs[top]) / z


def conse_rank(f_x: np.ndarray, unseen_embeddings: AttributeMatrix) -> Prediction:
    """Candidates by descending cosine to the combined embedding."""
    scores = [cosine(f_x, unseen_embeddings.matrix[:, i]) for i in range(len(unseen_embeddings.labels))]
    return _ranked(unseen_embeddings.labels, scores)


def eszsl_fit(X: np.ndarray, Y: np.ndarray, A: np.ndarray, gamma: float) -> EszslModel:
    """Closed-form bilinear fit W = (X X^T + gI)^-1 X Y A^T (A A^T + gI)^-1,
    computed as two SPD solves.

    X is (p, m) features-as-columns, Y is (m, n) one-hot rows, A is
    (s, n) attributes-as-columns.
    """
    X, Y, A = np.asarray(X, float), np.asarray(Y, float), np.asarray(A, float)
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    p, m = X.shape
    if Y.shape[0] != m:
        raise ValueError(f"Y has {Y.shape[0]} rows for {m} examples")
    if A.shape[1] != Y.shape[1]:
        raise ValueError(f"A has {A.shape[1]} columns for {Y.shape[1]} labels")
    row_sums = Y.sum(axis=1)
    if not (np.all((Y == 0) | (Y == 1)) and np.all(row_sums == 1)):
        raise DataError("Y rows must be one-hot")

    from .numeric import spd_solve

    right = X @ Y @ A.T  # (p, s)
    try:
        half = spd_solve(X @ X.T + gamma * np.eye(p), right)
    except NotPositiveDefiniteError as exc:
        raise NotPositiveDefiniteError(
            "feature Gram X X^T + gamma I is not positive definite"
        ) from exc
    try:
        W = spd_solve(A @ A.T + gamma * np.eye(A.shape[0]), half.T).T
    except NotPositiveDefiniteError as exc:
        raise NotPositiveDefiniteError(
            "attribute Gram A A^T + gamma I is not positive definite"
        ) from exc
    if not np.all(np.isfinite(W)):
        raise NumericalError("non-finite entries in fitted W")
    return EszslModel(W=W, gamma=gamma)


def eszsl_objective(W, X, Y, A, gamma) -> float:
    """The regularized least-squares objective whose exact minimizer is
    the closed form used by eszsl_fit."""
    fit = np.linalg.norm(X.T @ W @ A - Y) ** 2
    reg = (
        gamma * np.linalg.norm(W @ A) ** 2
        + gamma * np.linalg.norm(X.T @ W) ** 2
        + gamma**2 * np.linalg.norm(W) ** 2
    )
    return float(fit + reg)


def eszsl_objective_grad(W, X, Y, A, gamma) -> np.ndarray:
    """Analytic gradient of eszsl_objective with respect to W; zero at
    the closed-form solution."""
    return 2.0 * (
        X @ (X.T @ W @ A - Y) @ A.T
        + gamma * (W @ (A @ A.T))
        + gamma * ((X @ X.T) @ W)
        + gamma**2 * W
    )


def eszsl_rank(model: EszslModel, x: np.ndarray, unseen_attrs: AttributeMatrix) -> Prediction:
    """Candidates by descending bilinear score x^T W a."""
    # one dot product per candidate: identical attribute columns then
    # score bit-identically, so the label-order tie rule stays exact
    xw = x @ model.W
    scores = [float(xw @ unseen_attrs.matrix[:, i]) for i in range(len(unseen_attrs.labels))]
    return _ranked(unseen_attrs.labels, scores)


def dem_loss_and_grad(
    weights: np.ndarray, bias: np.ndarray, features: np.ndarray, label_vectors: np.ndarray
) -> tuple[float, tuple[np.ndarray, np.ndarray]]:
    """Mean squared reconstruction error (1/m) sum ||x - relu(W s + b)||^2
    and its gradients in (W, b)."""
    m = features.shape[0]
    Z = label_vectors @ weights.T + bias  # (m, p)
    R = relu(Z)
    E = R - features
    loss = float((E * E).sum() / m)
    dZ = (2.0 / m) * E * (Z > 0)
    dW = dZ.T @ label_vectors
    db = dZ.sum(axis=0)
    return loss, (dW, db)


def dem_fit(
    features: np.ndarray, true_label_embeddings: np.ndarray, spec: TrainSpec
) -> DemModel:
    """Train the attribute-to-feature ReLU mapper by least squares with
    minibatch Adam; Xavier-uniform weights, zero bias, seeded shuffle."""
    X = np.asarray(features, dtype=float)
    S = np.asarray(true_label_embeddings, dtype=float)
    if X.shape[0] != S.shape[0] or X.shape[0] < 1:
        raise ValueError(f"got {X.shape[0]} features for {S.shape[0]} label vectors")
    m, p = X.shape
    s_dim = S.shape[1]
    rng = np.random.default_rng(spec.seed)
    W = xavier_uniform(s_dim, p, rng)
    b = np.zeros(p)
    params = [W, b]
    state = AdamState.for_params(params, learning_rate=spec.learning_rate)
    loss_history: list[float] = []
    for epoch in range(spec.epochs):
        order = rng.permutation(m)
        total = 0.0
        for start in range(0, m, spec.batch_size):
            idx = order[start : start + spec.batch_size]
            loss, (dW, db) = dem_loss_and_grad(params[0], params[1], X[idx], S[idx])
            total += loss * len(idx)
            params, state = adam_step(params, [dW, db], state)
        mean_loss = total / m
        if not np.isfinite(mean_loss):
            raise NumericalError(f"DEM loss diverged at epoch {epoch}")
        loss_history.append(mean_loss)
    return DemModel(
        mapper=DenseLayer(weights=params[0], bias=params[1], activation="relu"),
        loss_history=loss_history,
    )


def dem_rank(model: DemModel, x: np.ndarray, unseen_attrs: AttributeMatrix) -> Prediction:
    """Candidates by ascending Euclidean distance between x and each
    mapped attribute vector; score is the negated distance."""
    # per-candidate evaluation, for the same tie-exactness reason as
    # eszsl_rank
    W, b = model.mapper.weights, model.mapper.bias
    scores = [
        -float(np.linalg.norm(relu(W @ unseen_attrs.matrix[:, i] + b) - x))
        for i in range(len(unseen_attrs.labels))
    ]
    return _ranked(unseen_attrs.labels, scores)


def make_conse(
    classifier: BaselineClassifier,
    vocab: Vocabulary,
    emb: EmbeddingMatrix,
    T: int | None = None,
) -> ConseModel:
    """ConSE head over the classifier's training labels; T defaults to
    every training label."""
    seen_embeddings = AttributeMatrix.from_labels(classifier.label_order, vocab, emb)
    return ConseModel(
        classifier=classifier,
        seen_embeddings=seen_embeddings,
        T=T if T is not None else len(classifier.label_order),
    )


def fsl_augment(
    train: Dataset,
    unseen_pool: Dataset,
    shots_min: int = 5,
    shots_max: int = 10,
    seed: int = 0,
) -> tuple[Dataset, list[int]]:
    """Append a few seeded examples of each previously unseen label.

    For every label of the pool, k ~ uniform{shots_min..shots_max}
    examples are drawn without replacement and appended after the
    (unchanged) seen examples. Returns the augmented dataset and the
    drawn pool indices, so evaluation can exclude them from the test
    pool. shots_max = 0 reduces to the zero-shot setting: the train set
    comes back unchanged.
    """
    if shots_min < 0 or shots_max < shots_min:
        raise ValueError(f"bad shot range [{shots_min}, {shots_max}]")
    if shots_max == 0:
        return Dataset(examples=list(train.examples), label_set=list(train.label_set)), []
    by_label: dict[str, list[int]] = {label: [] for label in unseen_pool.label_set}
    for i, (_, label) in enumerate(unseen_pool.examples):
        by_label[label].append(i)
    rng = np.random.default_rng(seed)
    examples = list(train.examples)
    used: list[int] = []
    for label in unseen_pool.label_set:
        pool = by_label[label]
        if len(pool) < shots_min:
            raise DataError(
                f"label {label!r} has only {len(pool)} pool examples, "
                f"fewer than shots_min={shots_min}"
            )
        k = int(rng.integers(shots_min, shots_max + 1))
        k = min(k, len(pool))
        chosen = sorted(int(c) for c in rng.choice(len(pool), size=k, replace=False))
        for c in chosen:
            idx = pool[c]
            used.append(idx)
            tokens, lab = unseen_pool.examples[idx]
            examples.append((list(tokens), lab))
    label_set = list(train.label_set) + [
        label for label in unseen_pool.label_set if label not in set(train.label_set)
    ]
    return Dataset(examples=examples, label_set=label_set), used


@dataclass
class ZslBundle:
    """A trained ranker ready for recommendation: the shared feature
    extractor plus one method-specific head."""

    method: str  # conse | eszsl | dem
    classifier: BaselineClassifier
    head: ConseModel | EszslModel | DemModel
    split: ZslSplit | None = None


def rank_candidates(bundle: ZslBundle, tokens, candidates) -> Prediction:
    """Run the appropriate ranker over the candidate labels for one
    tokenized tweet."""
    attrs = AttributeMatrix.from_labels(candidates, bundle.classifier.vocab, bundle.classifier.emb)
    if bundle.method == "conse":
        probs = predict_proba(bundle.classifier, tokens)
        f_x = conse_embed(probs, bundle.head.seen_embeddings, bundle.head.T)
        return conse_rank(f_x, attrs)
    if bundle.method == "eszsl":
        return eszsl_rank(bundle.head, extract_features(bundle.classifier, tokens), attrs)
    if bundle.method == "dem":
        return dem_rank(bundle.head, extract_features(bundle.classifier, tokens), attrs)
    raise ValueError(f"unknown method {bundle.method!r}")


def recommend(bundle: ZslBundle, tokens, candidates, k: int) -> Prediction:
    """Top-k candidate hashtags for one tweet. A tweet with no
    in-vocabulary tokens still gets a ranking (from the zero feature)
    but the prediction is flagged."""
    if k < 1:
        raise ValueError("k must be >= 1")
    candidates = list(candidates)
    if not candidates:
        raise DataError("candidate label set is empty")
    prediction = rank_candidates(bundle, tokens, candidates)
    prediction.all_oov = all(t not in bundle.classifier.vocab.index for t in tokens)
    if prediction.all_oov:
        logger.warning("no in-vocabulary tokens; ranking from the zero feature")
    return prediction.top(k)


def _head_to_json(bundle: ZslBundle) -> dict:
    if bundle.method == "conse":
        return {
            "T": bundle.head.T,
            "labels": bundle.head.seen_embeddings.labels,
            "vectors": bundle.head.seen_embeddings.matrix.T.tolist(),
        }
    if bundle.method == "eszsl":
        return {"gamma": bundle.head.gamma, "W": bundle.head.W.tolist()}
    if bundle.method == "dem":
        return {
            "weights": bundle.head.mapper.weights.tolist(),
            "bias": bundle.head.mapper.bias.tolist(),
            "loss_history": bundle.head.loss_history,
        }
    raise ValueError(f"unknown method {bundle.method!r}")


def _head_from_json(method: str, obj: dict, classifier: BaselineClassifier):
    if method == "conse":
        labels = list(obj["labels"])
        return ConseModel(
            classifier=classifier,
            seen_embeddings=AttributeMatrix(
                matrix=np.array(obj["vectors"], dtype=float).T,
                labels=labels,
                label_index={label: i for i, label in enumerate(labels)},
            ),
            T=int(obj["T"]),
        )
    if method == "eszsl":
        return EszslModel(W=np.array(obj["W"], dtype=float), gamma=float(obj["gamma"]))
    if method == "dem":
        return DemModel(
            mapper=DenseLayer(
                weights=np.array(obj["weights"], dtype=float),
                bias=np.array(obj["bias"], dtype=float),
                activation="relu",
            ),
            loss_history=list(obj.get("loss_history", [])),
        )
    raise DataError(f"unknown method {method!r} in bundle")


def save_zsl_bundle(
    bundle: ZslBundle, path, embedding_path: str, config: dict | None = None
) -> None:
    obj = {
        "kind": "zsl",
        "method": bundle.method,
        "split": (
            {"seen": bundle.split.seen, "unseen": bundle.split.unseen, "seed": bundle.split.seed}
            if bundle.split
            else None
        ),
        "attribute_source": {
            "path": str(embedding_path),
            "sha256": file_sha256(embedding_path),
        },
        "classifier": baseline_bundle_dict(bundle.classifier, embedding_path),
        "head": _head_to_json(bundle),
        "config": config or {},
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(obj, fh, sort_keys=True)
        fh.write("\n")


def load_zsl_bundle(path) -> ZslBundle:
    with open(path, "r", encoding="ascii") as fh:
        obj = json.load(fh)
    if obj.get("kind") != "zsl":
        raise DataError(f"{path}: not a zero-shot model bundle")
    base_dir = os.path.dirname(os.path.abspath(path))
    classifier = baseline_from_bundle_dict(obj["classifier"], base_dir=base_dir)
    split = None
    if obj.get("split"):
        split = ZslSplit(
            seen=list(obj["split"]["seen"]),
            unseen=list(obj["split"]["unseen"]),
            seed=int(obj["split"]["seed"]),
        )
    return ZslBundle(
        method=obj["method"],
        classifier=classifier,
        head=_head_from_json(obj["method"], obj["head"], classifier),
        split=split,
    )

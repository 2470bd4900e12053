"""Skip-gram word embeddings with negative sampling, plus the lookup
utilities built on top of them (mean pooling, cosine, per-hashtag
attribute vectors).

The trainer is single-threaded and bit-deterministic given the seed:
reproducibility matters more than throughput at the corpus sizes this
package targets. Embeddings are exchanged in the word2vec text format
("V d" header, then one "token v1 ... vd" row per word).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

from .errors import DataError, NumericalError


@dataclass
class Vocabulary:
    """Token table with dense indices, ordered by descending frequency
    then lexicographically."""

    tokens: list[str]
    counts: list[int]
    index: dict[str, int]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index


@dataclass
class EmbeddingMatrix:
    """Input (word) and output (context) vector tables, one row per
    vocabulary entry."""

    input_vectors: np.ndarray  # (V, d)
    output_vectors: np.ndarray  # (V, d)

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]


@dataclass
class SgnsConfig:
    dim: int = 150
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_count: int = 1
    seed: int = 0
    subsample_threshold: float | None = None

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


def build_vocab(sentences: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Count tokens over the corpus and keep those with frequency >=
    min_count, indexed by (-frequency, token)."""
    freq = Counter()
    for sentence in sentences:
        freq.update(sentence)
    kept = sorted(
        ((t, c) for t, c in freq.items() if c >= min_count),
        key=lambda tc: (-tc[1], tc[0]),
    )
    if not kept:
        raise DataError("empty vocabulary: no token reached min_count")
    tokens = [t for t, _ in kept]
    counts = [c for _, c in kept]
    return Vocabulary(tokens=tokens, counts=counts, index={t: i for i, t in enumerate(tokens)})


def skipgram_pairs(seq: Sequence[int], window: int) -> list[tuple[int, int]]:
    """All (center, context) pairs with |i - j| <= window, in scan order."""
    if window < 1:
        raise ValueError("window must be >= 1")
    n = len(seq)
    pairs = []
    for i in range(n):
        for j in range(max(0, i - window), min(n, i + window + 1)):
            if j != i:
                pairs.append((seq[i], seq[j]))
    return pairs


def noise_distribution(vocab: Vocabulary) -> np.ndarray:
    """Negative-sampling distribution: unigram counts raised to 0.75,
    normalized to sum to 1."""
    powered = np.asarray(vocab.counts, dtype=float) ** 0.75
    return powered / powered.sum()


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    # log sigma(x) = -log(1 + exp(-x)), computed stably for any sign
    return -np.logaddexp(0.0, -x)


def _eval_pair_loss(
    inp: np.ndarray,
    out: np.ndarray,
    centers: np.ndarray,
    contexts: np.ndarray,
    negatives: np.ndarray,
    block: int = 65536,
) -> float:
    """Mean per-pair loss over a fixed set of (center, context,
    negatives) triples; chunked so memory stays bounded."""
    total = 0.0
    for start in range(0, len(centers), block):
        sl = slice(start, start + block)
        v = inp[centers[sl]]
        pos = np.einsum("nd,nd->n", v, out[contexts[sl]])
        neg = np.einsum("nd,nkd->nk", v, out[negatives[sl]])
        total -= float(_log_sigmoid(pos).sum() + _log_sigmoid(-neg).sum())
    return total / len(centers)


def train_sgns(
    sentences: Sequence[Sequence[str]],
    vocab: Vocabulary,
    config: SgnsConfig,
) -> tuple[EmbeddingMatrix, list[float]]:
    """Train skip-gram embeddings with negative sampling.

    Per (center, context) pair the loss is
    -log sigma(u_c . v_w) - sum_k log sigma(-u_nk . v_w) with the k
    negatives drawn from the unigram^0.75 distribution; one SGD update
    is applied per pair in scan order, with the step size decaying
    linearly from the configured rate to 1e-4 of it over the run.
    Input vectors start uniform in [-0.5/d, 0.5/d], output vectors at
    zero.

    Returns the embedding and one loss value per epoch. The loss is
    measured after each epoch over the full pair set against a single
    fixed draw of negatives, so the curve tracks parameter movement
    rather than sampling noise.
    """
    rng = np.random.default_rng(config.seed)
    V, d = len(vocab), config.dim
    inp = (rng.random((V, d)) - 0.5) / d
    out = np.zeros((V, d))
    lr0 = config.learning_rate
    k = config.negatives

    indexed = [
        [vocab.index[t] for t in sentence if t in vocab.index] for sentence in sentences
    ]
    noise_cdf = np.cumsum(noise_distribution(vocab))
    if config.subsample_threshold is not None:
        rel_freq = np.asarray(vocab.counts, dtype=float)
        rel_freq /= rel_freq.sum()
        keep_prob = np.minimum(1.0, np.sqrt(config.subsample_threshold / rel_freq))
    else:
        keep_prob = None

    all_pairs = [p for sent in indexed for p in skipgram_pairs(sent, config.window)]
    if not all_pairs:
        return EmbeddingMatrix(input_vectors=inp, output_vectors=out), []
    eval_centers = np.array([w for w, _ in all_pairs], dtype=np.intp)
    eval_contexts = np.array([c for _, c in all_pairs], dtype=np.intp)
    eval_rng = np.random.default_rng([config.seed, 1])
    eval_negatives = np.searchsorted(
        noise_cdf, eval_rng.random((len(all_pairs), k))
    ).astype(np.intp)

    planned = config.epochs * len(all_pairs)
    processed = 0
    epoch_losses: list[float] = []
    for epoch in range(config.epochs):
        for sent in indexed:
            if keep_prob is not None and sent:
                mask = rng.random(len(sent)) < keep_prob[sent]
                sent = [w for w, m in zip(sent, mask) if m]
            pairs = skipgram_pairs(sent, config.window)
            if not pairs:
                continue
            negatives = np.searchsorted(noise_cdf, rng.random((len(pairs), k)))
            for (w, c), negs in zip(pairs, negatives):
                lr = lr0 * max(1e-4, 1.0 - processed / planned)
                processed += 1
                ids = np.empty(k + 1, dtype=np.intp)
                ids[0] = c
                ids[1:] = negs
                v = inp[w]
                u = out[ids]
                scores = u @ v
                g = expit(scores)
                g[0] -= 1.0
                grad_v = g @ u
                # negatives may repeat, so accumulate rather than assign
                np.add.at(out, ids, (-lr * g)[:, None] * v)
                inp[w] = v - lr * grad_v
        mean_loss = _eval_pair_loss(inp, out, eval_centers, eval_contexts, eval_negatives)
        if not np.isfinite(mean_loss):
            raise NumericalError(
                f"non-finite skip-gram loss at epoch {epoch} "
                f"(last finite epoch means: {epoch_losses})"
            )
        epoch_losses.append(mean_loss)
    return EmbeddingMatrix(input_vectors=inp, output_vectors=out), epoch_losses


def save_embeddings(emb: EmbeddingMatrix, vocab: Vocabulary, path) -> None:
    """Write input vectors in word2vec text format with 17 significant
    digits per value (enough to round-trip float64 exactly)."""
    vecs = emb.input_vectors
    # utf-8: the minimally preprocessed training corpus keeps accented
    # tokens, so the vocabulary is not guaranteed to be ASCII
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(vocab)} {emb.dim}\n")
        for i, token in enumerate(vocab.tokens):
            fh.write(token + " " + " ".join(f"{x:.17g}" for x in vecs[i]) + "\n")


def load_embeddings(path) -> tuple[Vocabulary, EmbeddingMatrix]:
    """Stream a word2vec text file back into a vocabulary and embedding.

    Counts are not part of the format, so every loaded token gets
    frequency 1; context vectors likewise start at zero.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise DataError(f"{path}:1: malformed header {header!r}")
        try:
            n_rows, dim = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise DataError(f"{path}:1: non-numeric header {header!r}") from exc
        vectors = np.empty((n_rows, dim))
        tokens: list[str] = []
        index: dict[str, int] = {}
        for lineno, line in enumerate(fh, start=2):
            fields = line.rstrip("\n").split(" ")
            if len(tokens) >= n_rows:
                raise DataError(f"{path}:{lineno}: more rows than header declares")
            if len(fields) != dim + 1:
                raise DataError(
                    f"{path}:{lineno}: expected {dim} values, got {len(fields) - 1}"
                )
            token = fields[0]
            if token in index:
                raise DataError(f"{path}:{lineno}: duplicate token {token!r}")
            try:
                vectors[len(tokens)] = [float(f) for f in fields[1:]]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric field") from exc
            index[token] = len(tokens)
            tokens.append(token)
    if len(tokens) != n_rows:
        raise DataError(f"{path}: header declares {n_rows} rows, found {len(tokens)}")
    vocab = Vocabulary(tokens=tokens, counts=[1] * len(tokens), index=index)
    emb = EmbeddingMatrix(input_vectors=vectors, output_vectors=np.zeros_like(vectors))
    return vocab, emb


def mean_pool(
    tokens: Sequence[str], vocab: Vocabulary, emb: EmbeddingMatrix
) -> tuple[np.ndarray, bool]:
    """Arithmetic mean of the input vectors of in-vocabulary tokens.

    Returns (vector, all_oov); an input with no known tokens pools to
    the zero vector with the flag set, so inference never aborts.
    """
    rows = [vocab.index[t] for t in tokens if t in vocab.index]
    if not rows:
        return np.zeros(emb.dim), True
    return emb.input_vectors[rows].mean(axis=0), False


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; defined as 0 when either vector has zero norm."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(u @ v / (nu * nv))


def label_embedding(hashtag: str, vocab: Vocabulary, emb: EmbeddingMatrix) -> np.ndarray:
    """Attribute vector of a hashtag label: the embedding row of the
    token '#<hashtag>'. Raises if that token never made it into the
    vocabulary; the caller must restrict the label set instead."""
    token = "#" + hashtag
    if token not in vocab.index:
        raise DataError(
            f"label {hashtag!r} has no embedding: token {token!r} not in vocabulary"
        )
    return emb.input_vectors[vocab.index[token]]

"""The video retrieval model: exhaustive softmax scoring over the corpus,
in-batch contrastive losses with analytic gradients, and toy-scale training
of a shared linear projection.

Scoring: g = encode(query context), logits z_i = (g . Y_i) / tau,
p = softmax(z). Ranking ties are broken by ascending corpus position so
every result is a total, reproducible order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from dialret import kernels
from dialret.corpus import Corpus, DialogHistory, EMPTY_HISTORY
from dialret.encoders import (
    Encoder,
    EncoderSpec,
    LinearProjectionEncoder,
    fit_encoder,
    identity_projection,
)
from dialret.errors import DialretError, IndexMismatchError, TrainingError

SEP = " | "


@dataclass
class Index:
    """Stacked item embeddings, row i = embedding of corpus record i."""

    item_ids: list[str]
    Y: np.ndarray
    encoder_fingerprint: str

    def __post_init__(self) -> None:
        self.Y = np.ascontiguousarray(self.Y, dtype=np.float64)
        if self.Y.ndim != 2 or self.Y.shape[0] != len(self.item_ids):
            raise DialretError("index row count must equal id count")
        if not np.all(np.isfinite(self.Y)):
            raise DialretError("index contains non-finite embeddings")
        self._row_of = {vid: i for i, vid in enumerate(self.item_ids)}

    def __len__(self) -> int:
        return len(self.item_ids)

    def row_of(self, item_id: str) -> int:
        return self._row_of[item_id]


@dataclass
class RetrievalResult:
    """Probability vector over the corpus plus the derived ranking."""

    item_ids: list[str]
    probabilities: np.ndarray
    ranking: list[str] = field(init=False)
    rank_of: dict[str, int] = field(init=False)

    def __post_init__(self) -> None:
        p = self.probabilities
        order = np.argsort(-p, kind="stable")  # ties keep corpus position order
        self.ranking = [self.item_ids[i] for i in order]
        self.rank_of = {vid: r + 1 for r, vid in enumerate(self.ranking)}
        self._pos = {vid: i for i, vid in enumerate(self.item_ids)}

    def probability_of(self, item_id: str) -> float:
        return float(self.probabilities[self._pos[item_id]])

    def top_k(self, k: int) -> list[tuple[str, float]]:
        return [(vid, self.probability_of(vid)) for vid in self.ranking[:k]]


def build_index(corpus: Corpus, encoder: Encoder) -> Index:
    rows = [encoder.encode_item(rec) for rec in corpus]
    Y = np.vstack(rows) if rows else np.zeros((0, encoder.dim))
    return Index([rec.id for rec in corpus], Y, encoder.fingerprint())


def build_query_context(T: str, H: DialogHistory) -> str:
    """Initial query and all turns joined with the literal separator token."""
    parts = [T]
    for turn in H.turns:
        parts.append(turn.question)
        parts.append(turn.answer)
    return SEP.join(parts)


def vrm(T: str, H: DialogHistory, encoder: Encoder, index: Index) -> RetrievalResult:
    """Retrieval probability distribution for the concatenated query context."""
    if encoder.fingerprint() != index.encoder_fingerprint:
        raise IndexMismatchError(
            "index was built with a different encoder "
            f"({index.encoder_fingerprint} != {encoder.fingerprint()})"
        )
    g = encoder.encode_text(build_query_context(T, H))
    p = kernels.softmax_scores(g, index.Y, encoder.tau)
    return RetrievalResult(index.item_ids, p)


# ---------------------------------------------------------------------------
# contrastive losses (Eq. style: raw dot products, in-batch negatives)

@dataclass
class Batch:
    """Positive (item, text) embedding pairs; pair j matches pair j."""

    F: np.ndarray  # item embeddings, B x d
    G: np.ndarray  # text embeddings, B x d

    def __post_init__(self) -> None:
        self.F = np.atleast_2d(np.asarray(self.F, dtype=np.float64))
        self.G = np.atleast_2d(np.asarray(self.G, dtype=np.float64))
        if self.F.shape != self.G.shape:
            raise DialretError(
                f"batch shape mismatch: {self.F.shape} vs {self.G.shape}"
            )
        if self.F.shape[0] < 1:
            raise DialretError("batch must contain at least one pair")

    @property
    def size(self) -> int:
        return self.F.shape[0]


def loss_v2t(batch: Batch) -> float:
    return kernels.pair_losses(batch.F, batch.G)[0]


def loss_t2v(batch: Batch) -> float:
    return kernels.pair_losses(batch.F, batch.G)[1]


def loss_sym(batch: Batch) -> float:
    v2t, t2v = kernels.pair_losses(batch.F, batch.G)
    return v2t + t2v


def loss_gradients(batch: Batch) -> tuple[float, np.ndarray, np.ndarray]:
    """loss_sym plus d(loss)/dF and d(loss)/dG."""
    return kernels.sym_loss_and_grads(batch.F, batch.G)


# ---------------------------------------------------------------------------
# training

@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 8
    batch_size: int = 16
    learning_rate: float = 0.1
    seed: int = 0


@dataclass
class TrainingResult:
    encoder: LinearProjectionEncoder
    epoch_losses: list[float]


def _normalize_rows(raw: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    return np.where(norms > 0, raw / np.where(norms == 0, 1.0, norms), raw)


def _norm_backward(raw: np.ndarray, out: np.ndarray, grad_out: np.ndarray,
                   normalized: bool) -> np.ndarray:
    """Chain rule through the optional L2 normalization of the projection."""
    if not normalized:
        return grad_out
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        return grad_out
    return (grad_out - out * float(out @ grad_out)) / norm


def train_linear_projection(
    corpus: Corpus,
    base_spec: EncoderSpec,
    config: TrainConfig = TrainConfig(),
    projection_dim: int | None = None,
    normalize: bool = True,
    tau: float = 1.0,
) -> TrainingResult:
    """Gradient descent on the symmetric loss over (summary, initial_query)
    positive pairs, updating the single projection shared by both towers.

    Deterministic given config.seed; the batch remainder smaller than
    batch_size is dropped each epoch.
    """
    if len(corpus) < config.batch_size:
        raise TrainingError(
            f"corpus has {len(corpus)} records < batch_size {config.batch_size}"
        )
    base = fit_encoder(corpus, base_spec)
    dim = projection_dim if projection_dim is not None else base.dim
    spec = EncoderSpec(
        kind="linear_projection",
        dim=dim,
        normalize=normalize,
        tau=tau,
        params={"base": base_spec.to_json_obj()},
    )
    spec.validate()
    W = identity_projection(dim, base.dim)

    base_f = np.vstack([base.encode_item(rec) for rec in corpus])
    base_g = np.vstack(
        [base.encode_text(build_query_context(rec.initial_query, EMPTY_HISTORY))
         for rec in corpus]
    )

    rng = np.random.default_rng(config.seed)
    n = len(corpus)
    B = config.batch_size
    epoch_losses: list[float] = []
    for _epoch in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n - B + 1, B):
            idx = order[start:start + B]
            bf = base_f[idx]
            bg = base_g[idx]
            raw_f = bf @ W.T
            raw_g = bg @ W.T
            if normalize:
                F = _normalize_rows(raw_f)
                G = _normalize_rows(raw_g)
            else:
                F, G = raw_f, raw_g
            loss, dF, dG = kernels.sym_loss_and_grads(F, G)
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {_epoch}, batch start {start}"
                )
            losses.append(loss)
            dW = np.zeros_like(W)
            for j in range(B):
                df = _norm_backward(raw_f[j], F[j], dF[j], normalize)
                dg = _norm_backward(raw_g[j], G[j], dG[j], normalize)
                dW += np.outer(df, bf[j]) + np.outer(dg, bg[j])
            W -= config.learning_rate * dW
        epoch_losses.append(float(np.mean(losses)))

    encoder = LinearProjectionEncoder(spec, base, W)
    return TrainingResult(encoder, epoch_losses)


# ---------------------------------------------------------------------------
# binary index persistence

_MAGIC = b"DRIX"
_VERSION = 1


def save_index(index: Index, path) -> None:
    """Little-endian binary layout: magic, version, N, d, fingerprint,
    row-major float64 matrix, then length-prefixed UTF-8 ids."""
    n, d = index.Y.shape
    fp = index.encoder_fingerprint.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IQQI", _VERSION, n, d, len(fp)))
        fh.write(fp)
        fh.write(index.Y.astype("<f8").tobytes(order="C"))
        for vid in index.item_ids:
            raw = vid.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)


def load_index(path) -> Index:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise DialretError(f"{path}: not an index file (bad magic)")
        version, n, d, fp_len = struct.unpack("<IQQI", fh.read(24))
        if version != _VERSION:
            raise DialretError(f"{path}: unsupported index version {version}")
        fingerprint = fh.read(fp_len).decode("utf-8")
        Y = np.frombuffer(fh.read(n * d * 8), dtype="<f8").reshape(n, d).copy()
        ids = []
        for _ in range(n):
            (length,) = struct.unpack("<I", fh.read(4))
            ids.append(fh.read(length).decode("utf-8"))
    return Index(ids, Y, fingerprint)

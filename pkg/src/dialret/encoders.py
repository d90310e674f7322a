"""Pluggable deterministic text-to-vector encoders.

Both retrieval towers are text encoders here: items are encoded through
their summaries, queries through the concatenated query+history context.
Four kinds are supported:

- ``tfidf``: vocabulary and idf fitted on the corpus, idf(w) = ln(N/(1+df)) + 1.
- ``hashed_ngram``: token n-grams hashed into a fixed number of buckets.
- ``precomputed``: vectors loaded from a JSONL file (or given inline), for
  plugging in embeddings produced offline; lookup is by record id, and
  ``encode_text`` only resolves strings that are literal table keys.
- ``linear_projection``: a trainable matrix W over a frozen base encoder;
  this is where the learnable retrieval parameters live.

Tokenization is lowercase, splitting on maximal runs of non-alphanumeric
characters; out-of-vocabulary tokens are ignored at encode time.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from dialret.corpus import Corpus, VideoRecord
from dialret.errors import EncoderError

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

KINDS = ("tfidf", "hashed_ngram", "precomputed", "linear_projection")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class EncoderSpec:
    """Declarative encoder configuration; serializes to JSON for CLI use."""

    kind: str
    dim: int | None = None
    normalize: bool = True
    tau: float = 1.0
    params: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise EncoderError(f"unknown encoder kind {self.kind!r}")
        if self.tau <= 0:
            raise EncoderError("temperature tau must be > 0")
        if self.kind in ("hashed_ngram", "linear_projection"):
            if self.dim is None or self.dim < 1:
                raise EncoderError(f"{self.kind} requires dim >= 1")
        if self.kind == "linear_projection" and "base" not in self.params:
            raise EncoderError("linear_projection requires params.base")

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "normalize": self.normalize,
            "tau": self.tau,
            "params": self.params,
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "EncoderSpec":
        return EncoderSpec(
            kind=obj["kind"],
            dim=obj.get("dim"),
            normalize=obj.get("normalize", True),
            tau=obj.get("tau", 1.0),
            params=obj.get("params", {}),
        )


def _normalized(v: np.ndarray, enabled: bool) -> np.ndarray:
    if not enabled:
        return v
    norm = float(np.linalg.norm(v))
    if norm > 0.0:
        v = v / norm
    return v


class Encoder:
    """A fitted encoder. Immutable except for the trainable projection W."""

    def __init__(self, spec: EncoderSpec):
        self.spec = spec

    @property
    def dim(self) -> int:
        raise NotImplementedError

    @property
    def tau(self) -> float:
        return self.spec.tau

    def encode_text(self, text: str) -> np.ndarray:
        raise NotImplementedError

    def encode_item(self, record: VideoRecord) -> np.ndarray:
        return self.encode_text(record.summary)

    def state_obj(self) -> dict:
        """JSON-ready fitted state; the fingerprint hashes this."""
        raise NotImplementedError

    def fingerprint(self) -> str:
        payload = json.dumps(
            {"spec": self.spec.to_json_obj(), "state": self.state_obj()},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def to_json_obj(self) -> dict:
        return {"spec": self.spec.to_json_obj(), "state": self.state_obj()}


class TfidfEncoder(Encoder):
    def __init__(self, spec: EncoderSpec, vocab: list[str], idf: list[float]):
        super().__init__(spec)
        self.vocab = vocab
        self.idf = idf
        self._slot = {w: i for i, w in enumerate(vocab)}

    @property
    def dim(self) -> int:
        return len(self.vocab)

    def encode_text(self, text: str) -> np.ndarray:
        v = np.zeros(len(self.vocab), dtype=np.float64)
        for token, count in Counter(tokenize(text)).items():
            slot = self._slot.get(token)
            if slot is not None:
                v[slot] = count * self.idf[slot]
        return _normalized(v, self.spec.normalize)

    def state_obj(self) -> dict:
        return {"vocab": self.vocab, "idf": self.idf}


class HashedNgramEncoder(Encoder):
    def __init__(self, spec: EncoderSpec):
        super().__init__(spec)
        self.n = int(spec.params.get("n", 1))
        self.seed = int(spec.params.get("seed", 0))
        if self.n < 1:
            raise EncoderError("hashed_ngram n must be >= 1")
        self._key = str(self.seed).encode("utf-8")

    @property
    def dim(self) -> int:
        return int(self.spec.dim)

    def _bucket(self, gram: str) -> int:
        digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8,
                                 key=self._key).digest()
        return int.from_bytes(digest, "little") % self.dim

    def encode_text(self, text: str) -> np.ndarray:
        tokens = tokenize(text)
        v = np.zeros(self.dim, dtype=np.float64)
        for i in range(len(tokens) - self.n + 1):
            gram = " ".join(tokens[i:i + self.n])
            v[self._bucket(gram)] += 1.0
        return _normalized(v, self.spec.normalize)

    def state_obj(self) -> dict:
        return {"n": self.n, "seed": self.seed, "dim": self.dim}


class PrecomputedEncoder(Encoder):
    def __init__(self, spec: EncoderSpec, table: dict[str, list[float]], dim: int):
        super().__init__(spec)
        self.table = table
        self._dim = dim

    @property
    def dim(self) -> int:
        return self._dim

    def _lookup(self, key: str) -> np.ndarray:
        try:
            vec = self.table[key]
        except KeyError:
            raise EncoderError(f"no precomputed vector for {key!r}") from None
        return _normalized(np.asarray(vec, dtype=np.float64), self.spec.normalize)

    def encode_text(self, text: str) -> np.ndarray:
        return self._lookup(text)

    def encode_item(self, record: VideoRecord) -> np.ndarray:
        return self._lookup(record.id)

    def state_obj(self) -> dict:
        return {"dim": self._dim, "table": self.table}


class LinearProjectionEncoder(Encoder):
    """W (dim x base_dim) applied on top of a frozen base encoder."""

    def __init__(self, spec: EncoderSpec, base: Encoder, W: np.ndarray):
        super().__init__(spec)
        self.base = base
        self.W = np.asarray(W, dtype=np.float64)
        if self.W.shape != (int(spec.dim), base.dim):
            raise EncoderError(
                f"W shape {self.W.shape} != ({spec.dim}, {base.dim})"
            )

    @property
    def dim(self) -> int:
        return int(self.spec.dim)

    def project(self, base_vec: np.ndarray) -> np.ndarray:
        return _normalized(self.W @ base_vec, self.spec.normalize)

    def encode_text(self, text: str) -> np.ndarray:
        return self.project(self.base.encode_text(text))

    def encode_item(self, record: VideoRecord) -> np.ndarray:
        return self.project(self.base.encode_item(record))

    def state_obj(self) -> dict:
        return {"base": self.base.to_json_obj(), "W": self.W.tolist()}


def load_precomputed_vectors(path) -> tuple[dict[str, list[float]], int]:
    """Parse the precomputed-vector JSONL file: header {"dim": d}, then
    one {"id", "vector"} object per line."""
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
            dim = int(header["dim"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            raise EncoderError(
                f"{path}: first line must be a {{\"dim\": d}} header"
            ) from None
        table: dict[str, list[float]] = {}
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            vec = [float(x) for x in obj["vector"]]
            if len(vec) != dim:
                raise EncoderError(
                    f"{path} line {line_no}: vector length {len(vec)} != dim {dim}"
                )
            table[str(obj["id"])] = vec
    return table, dim


def identity_projection(dim: int, base_dim: int) -> np.ndarray:
    """Identity padded or truncated to (dim, base_dim)."""
    W = np.zeros((dim, base_dim), dtype=np.float64)
    for i in range(min(dim, base_dim)):
        W[i, i] = 1.0
    return W


def fit_encoder(corpus: Corpus, spec: EncoderSpec) -> Encoder:
    """Fit (or just validate) an encoder against the corpus."""
    spec.validate()
    if spec.kind == "tfidf":
        if len(corpus) == 0:
            raise EncoderError("tfidf requires a non-empty corpus")
        df: Counter[str] = Counter()
        for rec in corpus:
            doc_parts = [rec.summary, rec.initial_query]
            for pair in rec.qa_pool:
                doc_parts.append(pair.question)
                doc_parts.append(pair.answer)
            df.update(set(tokenize(" ".join(doc_parts))))
        vocab = sorted(df)
        n_docs = len(corpus)
        idf = [math.log(n_docs / (1 + df[w])) + 1.0 for w in vocab]
        return TfidfEncoder(spec, vocab, idf)

    if spec.kind == "hashed_ngram":
        return HashedNgramEncoder(spec)

    if spec.kind == "precomputed":
        if "table" in spec.params:
            table = {k: [float(x) for x in v] for k, v in spec.params["table"].items()}
            dims = {len(v) for v in table.values()}
            if len(dims) != 1:
                raise EncoderError("precomputed table has inconsistent dims")
            dim = dims.pop()
        elif "path" in spec.params:
            table, dim = load_precomputed_vectors(spec.params["path"])
        else:
            raise EncoderError("precomputed requires params.table or params.path")
        for rec in corpus:
            if rec.id not in table:
                raise EncoderError(f"no precomputed vector for {rec.id!r}")
        return PrecomputedEncoder(spec, table, dim)

    # linear_projection
    base_spec = spec.params["base"]
    if isinstance(base_spec, dict):
        base_spec = EncoderSpec.from_json_obj(base_spec)
    if base_spec.kind == "linear_projection":
        raise EncoderError("linear_projection must wrap a non-trainable base")
    base = fit_encoder(corpus, base_spec)
    return LinearProjectionEncoder(
        spec, base, identity_projection(int(spec.dim), base.dim)
    )


def encoder_from_json_obj(obj: dict) -> Encoder:
    """Rebuild a fitted encoder from its serialized form."""
    spec = EncoderSpec.from_json_obj(obj["spec"])
    spec.validate()
    state = obj["state"]
    if spec.kind == "tfidf":
        return TfidfEncoder(spec, list(state["vocab"]),
                            [float(x) for x in state["idf"]])
    if spec.kind == "hashed_ngram":
        return HashedNgramEncoder(spec)
    if spec.kind == "precomputed":
        return PrecomputedEncoder(spec, dict(state["table"]), int(state["dim"]))
    base = encoder_from_json_obj(state["base"])
    return LinearProjectionEncoder(spec, base, np.asarray(state["W"]))


def save_encoder(encoder: Encoder, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(encoder.to_json_obj(), fh)
        fh.write("\n")


def load_encoder(path) -> Encoder:
    with open(path, encoding="utf-8") as fh:
        return encoder_from_json_obj(json.load(fh))


# module-level operation aliases matching the component surface
def encode_text(encoder: Encoder, text: str) -> np.ndarray:
    return encoder.encode_text(text)


def encode_item(encoder: Encoder, record: VideoRecord) -> np.ndarray:
    return encoder.encode_item(record)

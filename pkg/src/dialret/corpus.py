"""Corpus data model: retrievable items, their QA pools, and dialog histories.

The on-disk format is JSON-lines, one record per line, UTF-8, with canonical
key order (id, summary, initial_query, qa_pool). A QA pair's position inside
its pool is its ``source_index``; the file stores pairs as question/answer
objects and the index is implied by array position.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from dialret.errors import CorpusError


@dataclass(frozen=True)
class QAPair:
    """One annotated question/answer pair.

    ``source_index`` is the 0-based position within the owning record's pool.
    History turns that did not come from a pool (e.g. typed by a human) carry
    source_index -1.
    """

    question: str
    answer: str
    source_index: int = -1

    def validate(self) -> None:
        if not self.question.strip():
            raise CorpusError("QA pair has empty question")
        if not self.answer.strip():
            raise CorpusError("QA pair has empty answer")


@dataclass(frozen=True)
class VideoRecord:
    """A retrievable item: text summary stands in for the video content."""

    id: str
    summary: str
    initial_query: str
    qa_pool: tuple[QAPair, ...] = ()

    def validate(self) -> None:
        if not self.id:
            raise CorpusError("record has empty id")
        if not self.summary.strip():
            raise CorpusError(f"record {self.id!r} has empty summary")
        for i, pair in enumerate(self.qa_pool):
            pair.validate()
            if pair.source_index != i:
                raise CorpusError(
                    f"record {self.id!r}: pool entry {i} has source_index "
                    f"{pair.source_index}; expected contiguous 0..m-1"
                )

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "summary": self.summary,
            "initial_query": self.initial_query,
            "qa_pool": [
                {"question": p.question, "answer": p.answer} for p in self.qa_pool
            ],
        }


@dataclass
class Corpus:
    """An ordered collection of records with unique ids."""

    records: list[VideoRecord]
    split_tag: str = "unsplit"

    def __post_init__(self) -> None:
        self._by_id = {r.id: i for i, r in enumerate(self.records)}

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def position_of(self, record_id: str) -> int:
        try:
            return self._by_id[record_id]
        except KeyError:
            raise CorpusError(f"unknown record id {record_id!r}") from None

    def get(self, record_id: str) -> VideoRecord:
        return self.records[self.position_of(record_id)]

    def validate(self) -> None:
        if not self.records:
            raise CorpusError("corpus is empty (N >= 1 required)")
        seen: dict[str, int] = {}
        for i, rec in enumerate(self.records):
            rec.validate()
            if rec.id in seen:
                raise CorpusError(
                    f"duplicate id {rec.id!r} at records {seen[rec.id]} and {i}"
                )
            seen[rec.id] = i


@dataclass(frozen=True)
class DialogHistory:
    """Ordered question/answer turns accumulated over dialog rounds."""

    turns: tuple[QAPair, ...] = ()

    def __len__(self) -> int:
        return len(self.turns)

    def with_turn(self, pair: QAPair) -> "DialogHistory":
        return DialogHistory(self.turns + (pair,))

    def used_source_indices(self) -> set[int]:
        return {t.source_index for t in self.turns if t.source_index >= 0}


EMPTY_HISTORY = DialogHistory()


def _record_from_obj(obj: dict, line_no: int) -> VideoRecord:
    if not isinstance(obj, dict):
        raise CorpusError(f"line {line_no}: record is not a JSON object")
    for key in ("id", "summary", "initial_query", "qa_pool"):
        if key not in obj:
            raise CorpusError(f"line {line_no}: missing required field {key!r}")
    pool = obj["qa_pool"]
    if not isinstance(pool, list):
        raise CorpusError(f"line {line_no}: qa_pool is not an array")
    pairs = []
    for i, entry in enumerate(pool):
        if not isinstance(entry, dict) or "question" not in entry or "answer" not in entry:
            raise CorpusError(
                f"line {line_no}: qa_pool entry {i} needs question and answer"
            )
        pairs.append(QAPair(str(entry["question"]), str(entry["answer"]), i))
    return VideoRecord(
        id=str(obj["id"]),
        summary=str(obj["summary"]),
        initial_query=str(obj["initial_query"]),
        qa_pool=tuple(pairs),
    )


def load_corpus(path, split_tag: str = "unsplit") -> Corpus:
    """Load and validate a JSONL corpus; record order equals file order."""
    records: list[VideoRecord] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: malformed JSON ({exc.msg})") from exc
            rec = _record_from_obj(obj, line_no)
            try:
                rec.validate()
            except CorpusError as exc:
                raise CorpusError(f"line {line_no}: {exc}") from None
            if rec.id in seen:
                raise CorpusError(
                    f"duplicate id {rec.id!r} on lines {seen[rec.id]} and {line_no}"
                )
            seen[rec.id] = line_no
            records.append(rec)
    if not records:
        raise CorpusError(f"{path}: empty corpus file")
    return Corpus(records, split_tag=split_tag)


def save_corpus(corpus: Corpus, path) -> None:
    """Write the canonical JSONL form; load_corpus(save_corpus(c)) == c."""
    corpus.validate()
    with open(path, "w", encoding="utf-8") as fh:
        for rec in corpus.records:
            fh.write(json.dumps(rec.to_json_obj(), ensure_ascii=False,
                                separators=(",", ":")))
            fh.write("\n")


@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs for the deterministic synthetic corpus generator.

    Records are grouped into themes; a record's initial query is exactly its
    theme's tokens, so round-0 retrieval is ambiguous among theme mates.
    Each record additionally owns ``discriminative_tokens_per_answer``
    vocabulary tokens that appear in its summary and in every one of its
    answers but nowhere else. Questions quote another record's summary noise
    (the annotator asking about confusable content), so a single round is
    rarely decisive and evidence accumulates over rounds.
    """

    n_videos: int = 100
    m_qa: int = 10
    vocab_size: int = 500
    discriminative_tokens_per_answer: int = 1
    seed: int = 42

    theme_size: int = 3           # tokens per theme (= query length)
    summary_noise_tokens: int = 6
    question_tokens: int = 6

    @property
    def n_themes(self) -> int:
        return max(2, self.n_videos // 10)

    def validate(self) -> None:
        if self.n_videos < 1 or self.m_qa < 1 or self.vocab_size < 1:
            raise CorpusError("n_videos, m_qa and vocab_size must all be >= 1")
        if self.discriminative_tokens_per_answer < 0:
            raise CorpusError("discriminative_tokens_per_answer must be >= 0")
        reserved = self.n_videos * self.discriminative_tokens_per_answer
        needed = self.n_themes * self.theme_size + self.question_tokens + 2
        if self.vocab_size - reserved < needed:
            raise CorpusError(
                f"vocab_size={self.vocab_size} too small: need "
                f"{reserved} distinct discriminative tokens plus at least "
                f"{needed} shared tokens"
            )


def _word(i: int) -> str:
    return f"w{i:05d}"


def gen_synthetic(config: SyntheticConfig) -> Corpus:
    """Generate a corpus that is a pure function of its config."""
    config.validate()
    rng = random.Random(config.seed)
    dt = config.discriminative_tokens_per_answer
    vocab = [_word(i) for i in range(config.vocab_size)]
    reserved = config.n_videos * dt
    shared = vocab[reserved:]
    themes = [
        shared[t * config.theme_size:(t + 1) * config.theme_size]
        for t in range(config.n_themes)
    ]
    filler = shared[config.n_themes * config.theme_size:]

    # first pass: per-record identity (unique tokens, theme, summary noise)
    identity = []
    for v in range(config.n_videos):
        disc = vocab[v * dt:(v + 1) * dt]
        theme = list(themes[rng.randrange(config.n_themes)])
        rng.shuffle(theme)
        noise = [rng.choice(filler) for _ in range(config.summary_noise_tokens)]
        identity.append((disc, theme, noise))

    records = []
    for v in range(config.n_videos):
        disc, theme, noise = identity[v]
        summary = " ".join(theme + disc + noise)
        pool = []
        for j in range(config.m_qa):
            if config.n_videos > 1:
                other = rng.randrange(config.n_videos - 1)
                if other >= v:
                    other += 1
                confusable = list(dict.fromkeys(identity[other][2]))
            else:
                confusable = []
            q_tokens = confusable[:config.question_tokens]
            if len(q_tokens) < config.question_tokens:
                q_tokens += rng.sample(filler,
                                       config.question_tokens - len(q_tokens))
            answer_noise = [rng.choice(filler) for _ in range(rng.randint(1, 2))]
            pool.append(QAPair(" ".join(q_tokens),
                               " ".join(disc + answer_noise), j))
        records.append(
            VideoRecord(
                id=f"v{v:04d}",
                summary=summary,
                initial_query=" ".join(theme),
                qa_pool=tuple(pool),
            )
        )
    return Corpus(records, split_tag="synthetic")

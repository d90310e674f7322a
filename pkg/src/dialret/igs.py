"""Information-guided supervision: for each record, greedily order its QA
pool by how much each unused pair improves the record's own retrieval
probability, and export the per-round targets (with the round's top-k
candidate summaries) as training data for a downstream question generator.

The retriever is frozen throughout; repeated builds are byte-identical.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

from dialret.corpus import Corpus, DialogHistory, EMPTY_HISTORY, QAPair, VideoRecord
from dialret.encoders import Encoder
from dialret.errors import DialretError, PoolExhaustedError
from dialret.retrieval import Index, vrm

logger = logging.getLogger(__name__)

DEFAULT_ROUNDS = 3   # retrieval gains plateau after three dialog rounds
DEFAULT_TOP_K = 4    # four candidate summaries in the supervision context


@dataclass(frozen=True)
class IGSContext:
    initial_query: str
    topk_summaries: tuple[str, ...]
    history: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class IGSTarget:
    video_id: str
    round: int  # 1-based
    question: str
    answer: str
    context: IGSContext
    achieved_probability: float


@dataclass
class IGSDataset:
    rounds: list[list[IGSTarget]]
    config: dict

    def __iter__(self):
        for targets in self.rounds:
            yield from targets

    def total(self) -> int:
        return sum(len(r) for r in self.rounds)


def select_best_qa(
    record: VideoRecord,
    H: DialogHistory,
    encoder: Encoder,
    index: Index,
) -> tuple[QAPair, float]:
    """Exhaustive argmax over unused pool pairs of the record's retrieval
    probability after appending the pair; ties go to the lowest source_index.
    """
    used = H.used_source_indices()
    row = index.row_of(record.id)
    best_pair: QAPair | None = None
    best_p = -1.0
    for pair in record.qa_pool:
        if pair.source_index in used:
            continue
        result = vrm(record.initial_query, H.with_turn(pair), encoder, index)
        p = float(result.probabilities[row])
        if p > best_p:
            best_pair, best_p = pair, p
    if best_pair is None:
        raise PoolExhaustedError(f"record {record.id!r} has no unused QA pairs")
    return best_pair, best_p


def build_igs_dataset(
    corpus: Corpus,
    encoder: Encoder,
    index: Index,
    M: int = DEFAULT_ROUNDS,
    k: int = DEFAULT_TOP_K,
    strict: bool = False,
) -> IGSDataset:
    """Run the greedy search for every record over M rounds.

    Records with fewer than M pool pairs are skipped with a warning, or
    rejected outright when strict is set.
    """
    if M < 0:
        raise DialretError("M must be >= 0")
    if k < 1:
        raise DialretError("k must be >= 1")
    rounds: list[list[IGSTarget]] = [[] for _ in range(M)]
    skipped: list[str] = []
    for record in corpus:
        if len(record.qa_pool) < M:
            if strict:
                raise DialretError(
                    f"record {record.id!r} has {len(record.qa_pool)} pairs < M={M}"
                )
            skipped.append(record.id)
            continue
        history = EMPTY_HISTORY
        for t in range(M):
            current = vrm(record.initial_query, history, encoder, index)
            topk = tuple(
                corpus.get(vid).summary for vid in current.ranking[:k]
            )
            pair, achieved = select_best_qa(record, history, encoder, index)
            rounds[t].append(
                IGSTarget(
                    video_id=record.id,
                    round=t + 1,
                    question=pair.question,
                    answer=pair.answer,
                    context=IGSContext(
                        initial_query=record.initial_query,
                        topk_summaries=topk,
                        history=tuple(
                            (turn.question, turn.answer) for turn in history.turns
                        ),
                    ),
                    achieved_probability=achieved,
                )
            )
            history = history.with_turn(pair)
    if skipped:
        logger.warning(
            "igs: skipped %d records with pools smaller than M=%d: %s",
            len(skipped), M, ", ".join(skipped[:10]),
        )
    return IGSDataset(
        rounds,
        config={
            "M": M,
            "k": k,
            "encoder_fingerprint": index.encoder_fingerprint,
            "skipped": skipped,
        },
    )


def export_igs(dataset: IGSDataset, path) -> None:
    """JSONL: one header line with the config snapshot, then one target per
    line grouped by round then corpus order."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"config": dataset.config}, ensure_ascii=False,
                            separators=(",", ":")))
        fh.write("\n")
        for target in dataset:
            obj = {
                "video_id": target.video_id,
                "round": target.round,
                "question": target.question,
                "answer": target.answer,
                "context": {
                    "initial_query": target.context.initial_query,
                    "topk_summaries": list(target.context.topk_summaries),
                    "history": [list(t) for t in target.context.history],
                },
                "achieved_probability": target.achieved_probability,
            }
            fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")


def load_igs(path) -> IGSDataset:
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        config = header["config"]
        rounds: list[list[IGSTarget]] = [[] for _ in range(int(config["M"]))]
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            target = IGSTarget(
                video_id=obj["video_id"],
                round=int(obj["round"]),
                question=obj["question"],
                answer=obj["answer"],
                context=IGSContext(
                    initial_query=obj["context"]["initial_query"],
                    topk_summaries=tuple(obj["context"]["topk_summaries"]),
                    history=tuple(
                        (q, a) for q, a in obj["context"]["history"]
                    ),
                ),
                achieved_probability=float(obj["achieved_probability"]),
            )
            rounds[target.round - 1].append(target)
    return IGSDataset(rounds, config)

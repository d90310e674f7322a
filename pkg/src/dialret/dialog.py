"""Multi-round interaction loop: question-selection policies, the lookup
answer oracle standing in for the human respondent, and session execution
with a per-round retrieval trace.

Policies:

- ``igs_oracle``: greedy best pair by appended ground-truth probability
  (inference-time upper bound).
- ``original_order``: lowest unused source_index, i.e. the annotators'
  order (the retrieval-agnostic baseline).
- ``random``: uniform over unused pairs from a seeded PRNG.
- ``candidate_aware``: the pair whose appended retrieval distribution,
  restricted to the round's current top-k candidates and renormalized,
  has minimal Shannon entropy. A selection-based analog of a generator
  conditioned on retrieved candidates; ties go to lowest source_index.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field

from dialret.corpus import Corpus, DialogHistory, EMPTY_HISTORY, QAPair, VideoRecord
from dialret.encoders import Encoder
from dialret.errors import DialretError, NoAnswerError, PoolExhaustedError
from dialret.igs import select_best_qa
from dialret.retrieval import Index, RetrievalResult, vrm

POLICY_KINDS = ("igs_oracle", "original_order", "random", "candidate_aware")


@dataclass(frozen=True)
class Policy:
    kind: str
    seed: int | None = None
    k: int = 4

    def validate(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise DialretError(f"unknown policy kind {self.kind!r}")
        if self.kind == "random" and self.seed is None:
            raise DialretError("random policy requires a seed")
        if self.kind == "candidate_aware" and self.k < 1:
            raise DialretError("candidate_aware requires k >= 1")

    def label(self) -> str:
        if self.kind == "random":
            return f"random(seed={self.seed})"
        if self.kind == "candidate_aware":
            return f"candidate_aware(k={self.k})"
        return self.kind


def session_rng(seed: int | None, target_id: str) -> random.Random:
    """Per-session PRNG derived stably from (seed, target), so experiments
    are deterministic regardless of session execution order."""
    digest = hashlib.sha256(f"{seed}\x1f{target_id}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _unused_pairs(record: VideoRecord, H: DialogHistory) -> list[QAPair]:
    used = H.used_source_indices()
    return [p for p in record.qa_pool if p.source_index not in used]


def restricted_entropy(result: RetrievalResult, candidate_ids: list[str]) -> float:
    """Shannon entropy (nats) of the distribution renormalized over the
    given candidate set."""
    probs = [result.probability_of(vid) for vid in candidate_ids]
    total = sum(probs)
    entropy = 0.0
    for p in probs:
        q = p / total
        if q > 0.0:
            entropy -= q * math.log(q)
    return entropy


def ask(
    policy: Policy,
    record: VideoRecord,
    H: DialogHistory,
    encoder: Encoder,
    index: Index,
    rng: random.Random | None = None,
) -> QAPair:
    """Select the next question/answer pair from the record's unused pool."""
    policy.validate()
    unused = _unused_pairs(record, H)
    if not unused:
        raise PoolExhaustedError(f"record {record.id!r}: QA pool exhausted")

    if policy.kind == "igs_oracle":
        pair, _ = select_best_qa(record, H, encoder, index)
        return pair

    if policy.kind == "original_order":
        return min(unused, key=lambda p: p.source_index)

    if policy.kind == "random":
        if rng is None:
            raise DialretError("random policy needs the session PRNG")
        return rng.choice(unused)

    # candidate_aware
    current = vrm(record.initial_query, H, encoder, index)
    candidates = current.ranking[:policy.k]
    best_pair: QAPair | None = None
    best_entropy = math.inf
    for pair in unused:
        appended = vrm(record.initial_query, H.with_turn(pair), encoder, index)
        entropy = restricted_entropy(appended, candidates)
        if entropy < best_entropy:
            best_pair, best_entropy = pair, entropy
    assert best_pair is not None
    return best_pair


def answer_oracle(record: VideoRecord, question: str) -> str:
    """Return the annotated answer for a pool question (exact match after
    trimming); unknown questions are an explicit error."""
    wanted = question.strip()
    for pair in record.qa_pool:
        if pair.question.strip() == wanted:
            return pair.answer
    raise NoAnswerError(
        f"record {record.id!r} has no annotated answer for {question!r}"
    )


@dataclass
class Session:
    """One simulated retrieval dialog about a hidden target."""

    target_id: str
    initial_query: str
    history: DialogHistory = EMPTY_HISTORY
    trace: list[RetrievalResult] = field(default_factory=list)
    early_stopped: bool = False

    @property
    def rounds_completed(self) -> int:
        return len(self.history)

    def target_ranks(self) -> list[int]:
        return [r.rank_of[self.target_id] for r in self.trace]

    def target_probabilities(self) -> list[float]:
        return [r.probability_of(self.target_id) for r in self.trace]

    def trace_obj(self, top_n: int = 10) -> dict:
        """JSON-ready per-round snapshot: top ids, probabilities, rank."""
        return {
            "target_id": self.target_id,
            "initial_query": self.initial_query,
            "rounds_completed": self.rounds_completed,
            "early_stopped": self.early_stopped,
            "history": [[t.question, t.answer] for t in self.history.turns],
            "rounds": [
                {
                    "round": t,
                    "top": [
                        {"id": vid, "probability": p}
                        for vid, p in result.top_k(top_n)
                    ],
                    "ground_truth_rank": result.rank_of[self.target_id],
                }
                for t, result in enumerate(self.trace)
            ],
        }


def run_session(
    corpus: Corpus,
    target_id: str,
    policy: Policy,
    M: int,
    encoder: Encoder,
    index: Index,
) -> Session:
    """Simulate M dialog rounds about the target; stops early (flagged) if
    the pool runs out first. trace[t] is the retrieval state after t turns."""
    record = corpus.get(target_id)
    policy.validate()
    rng = session_rng(policy.seed, target_id)
    session = Session(target_id=target_id, initial_query=record.initial_query)
    session.trace.append(vrm(record.initial_query, session.history, encoder, index))
    for _ in range(M):
        if not _unused_pairs(record, session.history):
            session.early_stopped = True
            break
        pair = ask(policy, record, session.history, encoder, index, rng=rng)
        answer = answer_oracle(record, pair.question)
        session.history = session.history.with_turn(
            QAPair(pair.question, answer, pair.source_index)
        )
        session.trace.append(
            vrm(record.initial_query, session.history, encoder, index)
        )
    return session


@dataclass
class ExperimentResult:
    """Per-round ground-truth ranks and probabilities over the whole corpus."""

    rounds: int
    target_ids: list[str]
    ranks_per_round: list[list[int]]   # [round t][included record j]
    probs_per_round: list[list[float]]
    skipped_ids: list[str]


def run_experiment(
    corpus: Corpus,
    policy: Policy,
    M: int,
    encoder: Encoder,
    index: Index,
) -> ExperimentResult:
    """Run a full-corpus simulation: one session per record as target.

    Records whose pools cannot support M rounds are skipped entirely so
    every round has rank lists of equal length.
    """
    target_ids: list[str] = []
    skipped: list[str] = []
    ranks: list[list[int]] = [[] for _ in range(M + 1)]
    probs: list[list[float]] = [[] for _ in range(M + 1)]
    for record in corpus:
        if len(record.qa_pool) < M:
            skipped.append(record.id)
            continue
        session = run_session(corpus, record.id, policy, M, encoder, index)
        target_ids.append(record.id)
        for t, result in enumerate(session.trace):
            ranks[t].append(result.rank_of[record.id])
            probs[t].append(result.probability_of(record.id))
    return ExperimentResult(
        rounds=M,
        target_ids=target_ids,
        ranks_per_round=ranks,
        probs_per_round=probs,
        skipped_ids=skipped,
    )

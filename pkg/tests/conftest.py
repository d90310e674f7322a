from __future__ import annotations

import pytest

from dialret.corpus import Corpus, QAPair, SyntheticConfig, VideoRecord, gen_synthetic
from dialret.encoders import EncoderSpec, fit_encoder
from dialret.retrieval import build_index


def make_record(rid: str, summary: str, query: str, qa: list[tuple[str, str]] = ()):
    pool = tuple(QAPair(q, a, i) for i, (q, a) in enumerate(qa))
    return VideoRecord(id=rid, summary=summary, initial_query=query, qa_pool=pool)


@pytest.fixture
def tiny_corpus() -> Corpus:
    return Corpus(
        [
            make_record(
                "v1", "a man cooks pasta in a red kitchen", "cooking videos",
                [("what dish", "pasta with basil"), ("kitchen color", "red walls")],
            ),
            make_record(
                "v2", "a woman bakes bread outdoors", "cooking videos",
                [("what dish", "sourdough bread"), ("where", "outdoors garden")],
            ),
            make_record(
                "v3", "two dogs play fetch in a park", "dog videos",
                [("how many dogs", "two dogs"), ("which game", "fetch ball")],
            ),
        ],
        split_tag="test",
    )


@pytest.fixture
def synth_corpus() -> Corpus:
    return gen_synthetic(
        SyntheticConfig(n_videos=30, m_qa=5, vocab_size=200,
                        discriminative_tokens_per_answer=1, seed=7)
    )


@pytest.fixture
def tfidf_spec() -> EncoderSpec:
    return EncoderSpec(kind="tfidf")


@pytest.fixture
def synth_encoder(synth_corpus, tfidf_spec):
    return fit_encoder(synth_corpus, tfidf_spec)


@pytest.fixture
def synth_index(synth_corpus, synth_encoder):
    return build_index(synth_corpus, synth_encoder)

from __future__ import annotations

import json

import pytest

from dialret.corpus import Corpus, DialogHistory, EMPTY_HISTORY, QAPair
from dialret.encoders import EncoderSpec, fit_encoder
from dialret.errors import DialretError, PoolExhaustedError
from dialret.igs import build_igs_dataset, export_igs, load_igs, select_best_qa
from dialret.retrieval import build_index, vrm

from conftest import make_record


def appended_probability(record, H, pair, encoder, index):
    result = vrm(record.initial_query, H.with_turn(pair), encoder, index)
    return result.probability_of(record.id)


def test_singleton_pool_returned_regardless_of_score(tiny_corpus):
    enc = fit_encoder(tiny_corpus, EncoderSpec(kind="tfidf"))
    index = build_index(tiny_corpus, enc)
    record = tiny_corpus.get("v1")
    h = DialogHistory((record.qa_pool[0],))
    pair, _ = select_best_qa(record, h, enc, index)
    assert pair.source_index == 1


def test_select_best_matches_brute_force(tiny_corpus):
    enc = fit_encoder(tiny_corpus, EncoderSpec(kind="tfidf"))
    index = build_index(tiny_corpus, enc)
    for record in tiny_corpus:
        chosen, achieved = select_best_qa(record, EMPTY_HISTORY, enc, index)
        probs = [appended_probability(record, EMPTY_HISTORY, p, enc, index)
                 for p in record.qa_pool]
        best = max(range(len(probs)), key=lambda i: (probs[i], -i))
        assert chosen.source_index == best
        assert achieved == pytest.approx(probs[best], abs=0)


def test_tie_broken_by_lowest_source_index():
    # two pool entries with identical text produce bitwise-equal scores
    corpus = Corpus([
        make_record("v1", "alpha beta gamma", "alpha",
                    [("same q", "same a"), ("same q", "same a")]),
        make_record("v2", "delta epsilon zeta", "delta",
                    [("other", "thing"), ("more", "stuff")]),
    ])
    enc = fit_encoder(corpus, EncoderSpec(kind="tfidf"))
    index = build_index(corpus, enc)
    pair, _ = select_best_qa(corpus.get("v1"), EMPTY_HISTORY, enc, index)
    assert pair.source_index == 0


def test_exhausted_pool_raises(tiny_corpus):
    enc = fit_encoder(tiny_corpus, EncoderSpec(kind="tfidf"))
    index = build_index(tiny_corpus, enc)
    record = tiny_corpus.get("v1")
    h = DialogHistory(record.qa_pool)
    with pytest.raises(PoolExhaustedError):
        select_best_qa(record, h, enc, index)


def test_zero_rounds_empty_dataset(synth_corpus, synth_encoder, synth_index):
    ds = build_igs_dataset(synth_corpus, synth_encoder, synth_index, M=0, k=4)
    assert ds.rounds == []
    assert ds.total() == 0


def test_round1_targets_are_exhaustively_optimal(synth_corpus, synth_encoder,
                                                 synth_index):
    ds = build_igs_dataset(synth_corpus, synth_encoder, synth_index, M=1, k=4)
    assert len(ds.rounds[0]) == len(synth_corpus)
    for target in ds.rounds[0]:
        record = synth_corpus.get(target.video_id)
        for pair in record.qa_pool:
            alt = appended_probability(record, EMPTY_HISTORY, pair,
                                       synth_encoder, synth_index)
            assert target.achieved_probability >= alt


def test_histories_have_m_distinct_pairs(synth_corpus, synth_encoder, synth_index):
    M = 3
    ds = build_igs_dataset(synth_corpus, synth_encoder, synth_index, M=M, k=4)
    per_video: dict[str, list] = {}
    for target in ds:
        per_video.setdefault(target.video_id, []).append(target)
    for vid, targets in per_video.items():
        assert len(targets) == M
        chosen = [(t.question, t.answer) for t in sorted(targets, key=lambda t: t.round)]
        assert len(set(chosen)) == M
        final = targets[-1]
        assert len(final.context.history) == M - 1
        # chosen pair never present in its own context history
        for t in targets:
            assert (t.question, t.answer) not in t.context.history


def test_context_topk_summaries_come_from_current_ranking(synth_corpus,
                                                          synth_encoder,
                                                          synth_index):
    k = 4
    ds = build_igs_dataset(synth_corpus, synth_encoder, synth_index, M=1, k=k)
    for target in ds.rounds[0][:5]:
        record = synth_corpus.get(target.video_id)
        current = vrm(record.initial_query, EMPTY_HISTORY, synth_encoder, synth_index)
        expected = tuple(synth_corpus.get(v).summary for v in current.ranking[:k])
        assert target.context.topk_summaries == expected


def test_small_pools_skipped_with_report(synth_encoder, synth_corpus, synth_index):
    # synth fixture has m=5; M=6 cannot be satisfied
    ds = build_igs_dataset(synth_corpus, synth_encoder, synth_index, M=6, k=2)
    assert ds.config["skipped"] == [r.id for r in synth_corpus]
    assert ds.total() == 0


def test_small_pools_strict_raises(synth_encoder, synth_corpus, synth_index):
    with pytest.raises(DialretError, match="pairs < M"):
        build_igs_dataset(synth_corpus, synth_encoder, synth_index, M=6, k=2,
                          strict=True)


def test_rejects_bad_k(synth_encoder, synth_corpus, synth_index):
    with pytest.raises(DialretError, match="k must be"):
        build_igs_dataset(synth_corpus, synth_encoder, synth_index, M=1, k=0)


def test_export_header_and_line_count(synth_corpus, synth_encoder, synth_index,
                                      tmp_path):
    ds = build_igs_dataset(synth_corpus, synth_encoder, synth_index, M=1, k=4)
    path = tmp_path / "igs.jsonl"
    export_igs(ds, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 + len(synth_corpus)
    header = json.loads(lines[0])
    assert header["config"]["k"] == 4
    assert header["config"]["M"] == 1
    first = json.loads(lines[1])
    assert set(first) == {"video_id", "round", "question", "answer",
                          "context", "achieved_probability"}
    assert set(first["context"]) == {"initial_query", "topk_summaries", "history"}


def test_export_import_reexport_identical(synth_corpus, synth_encoder,
                                          synth_index, tmp_path):
    ds = build_igs_dataset(synth_corpus, synth_encoder, synth_index, M=2, k=3)
    first = tmp_path / "a.jsonl"
    second = tmp_path / "b.jsonl"
    export_igs(ds, first)
    export_igs(load_igs(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_empty_dataset_export(tmp_path, synth_corpus, synth_encoder, synth_index):
    ds = build_igs_dataset(synth_corpus, synth_encoder, synth_index, M=0, k=4)
    path = tmp_path / "empty.jsonl"
    export_igs(ds, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1  # header only


def test_repeated_builds_identical(synth_corpus, synth_encoder, synth_index,
                                   tmp_path):
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    export_igs(build_igs_dataset(synth_corpus, synth_encoder, synth_index,
                                 M=2, k=4), a)
    export_igs(build_igs_dataset(synth_corpus, synth_encoder, synth_index,
                                 M=2, k=4), b)
    assert a.read_bytes() == b.read_bytes()


def test_achieved_probability_in_unit_interval(synth_corpus, synth_encoder,
                                               synth_index):
    ds = build_igs_dataset(synth_corpus, synth_encoder, synth_index, M=1, k=4)
    for target in ds:
        assert 0.0 < target.achieved_probability <= 1.0

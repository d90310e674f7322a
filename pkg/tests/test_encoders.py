from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialret.corpus import Corpus
from dialret.encoders import (
    EncoderSpec,
    encoder_from_json_obj,
    fit_encoder,
    load_encoder,
    save_encoder,
    tokenize,
)
from dialret.errors import EncoderError

from conftest import make_record


def two_doc_corpus() -> Corpus:
    # record text folds to "a b" and "a c"
    return Corpus([make_record("d1", "a b", ""), make_record("d2", "a c", "")])


def test_tokenize_lowercases_and_splits_nonalnum():
    assert tokenize("Hello, WORLD!!x2  foo_bar") == ["hello", "world", "x2", "foo", "bar"]
    assert tokenize("") == []
    assert tokenize("...") == []


def test_tfidf_fit_matches_hand_computation():
    enc = fit_encoder(two_doc_corpus(), EncoderSpec(kind="tfidf"))
    idf = dict(zip(enc.vocab, enc.idf))
    assert idf["a"] == pytest.approx(math.log(2 / 3) + 1, abs=1e-12)
    assert idf["b"] == pytest.approx(math.log(2 / 2) + 1, abs=1e-12)
    assert idf["c"] == pytest.approx(math.log(2 / 2) + 1, abs=1e-12)


def test_tfidf_encode_matches_hand_computation():
    enc = fit_encoder(two_doc_corpus(), EncoderSpec(kind="tfidf"))
    idf_a = math.log(2 / 3) + 1
    idf_b = 1.0
    raw = {"a": 2 * idf_a, "b": 1 * idf_b}
    norm = math.sqrt(sum(x * x for x in raw.values()))
    vec = enc.encode_text("a a b")
    slot = {w: i for i, w in enumerate(enc.vocab)}
    assert vec[slot["a"]] == pytest.approx(raw["a"] / norm, abs=1e-12)
    assert vec[slot["b"]] == pytest.approx(raw["b"] / norm, abs=1e-12)
    assert vec[slot["c"]] == 0.0


def test_tfidf_summary_encoding_equals_encode_item():
    corpus = two_doc_corpus()
    enc = fit_encoder(corpus, EncoderSpec(kind="tfidf"))
    assert np.array_equal(enc.encode_item(corpus.records[0]), enc.encode_text("a b"))


def test_empty_text_is_zero_vector(synth_corpus, synth_encoder):
    vec = synth_encoder.encode_text("")
    assert vec.shape == (synth_encoder.dim,)
    assert not vec.any()


def test_oov_tokens_ignored():
    enc = fit_encoder(two_doc_corpus(), EncoderSpec(kind="tfidf"))
    assert np.array_equal(enc.encode_text("a zzz"), enc.encode_text("a"))


def test_encoding_deterministic(synth_encoder):
    text = "w00012 w00034 w00012"
    assert np.array_equal(synth_encoder.encode_text(text),
                          synth_encoder.encode_text(text))


@settings(max_examples=50, deadline=None)
@given(st.text(min_size=0, max_size=60))
def test_normalized_outputs_have_unit_norm(text):
    corpus = two_doc_corpus()
    enc = fit_encoder(corpus, EncoderSpec(kind="tfidf", normalize=True))
    vec = enc.encode_text(text)
    norm = np.linalg.norm(vec)
    assert norm == 0.0 or abs(norm - 1.0) < 1e-9


def test_hashed_ngram_depends_only_on_config(tiny_corpus):
    spec = EncoderSpec(kind="hashed_ngram", dim=32, params={"n": 2, "seed": 5})
    enc1 = fit_encoder(tiny_corpus, spec)
    enc2 = fit_encoder(tiny_corpus, spec)
    text = "a man cooks pasta"
    assert np.array_equal(enc1.encode_text(text), enc2.encode_text(text))


def test_hashed_ngram_seed_changes_output_preserves_norm(tiny_corpus):
    text = "a man cooks pasta in a kitchen"
    e5 = fit_encoder(tiny_corpus, EncoderSpec(kind="hashed_ngram", dim=64,
                                              params={"n": 1, "seed": 5}))
    e6 = fit_encoder(tiny_corpus, EncoderSpec(kind="hashed_ngram", dim=64,
                                              params={"n": 1, "seed": 6}))
    v5, v6 = e5.encode_text(text), e6.encode_text(text)
    assert not np.array_equal(v5, v6)
    assert np.linalg.norm(v5) == pytest.approx(1.0, abs=1e-9)
    assert np.linalg.norm(v6) == pytest.approx(1.0, abs=1e-9)


def test_precomputed_echoes_stored_vectors(tiny_corpus):
    table = {r.id: [float(i), 1.0, 0.0] for i, r in enumerate(tiny_corpus)}
    spec = EncoderSpec(kind="precomputed", normalize=False, params={"table": table})
    enc = fit_encoder(tiny_corpus, spec)
    for rec in tiny_corpus:
        assert enc.encode_item(rec).tolist() == table[rec.id]


def test_precomputed_missing_id_named(tiny_corpus):
    table = {"v1": [1.0], "v2": [0.5]}
    with pytest.raises(EncoderError, match="v3"):
        fit_encoder(tiny_corpus, EncoderSpec(kind="precomputed",
                                             params={"table": table}))


def test_precomputed_file_roundtrip(tiny_corpus, tmp_path):
    path = tmp_path / "vecs.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"dim": 2}) + "\n")
        for i, rec in enumerate(tiny_corpus):
            fh.write(json.dumps({"id": rec.id, "vector": [float(i), 2.0]}) + "\n")
    enc = fit_encoder(tiny_corpus, EncoderSpec(kind="precomputed", normalize=False,
                                               params={"path": str(path)}))
    assert enc.encode_item(tiny_corpus.records[2]).tolist() == [2.0, 2.0]


def test_precomputed_file_requires_header(tiny_corpus, tmp_path):
    path = tmp_path / "vecs.jsonl"
    path.write_text(json.dumps({"id": "v1", "vector": [1.0]}) + "\n", encoding="utf-8")
    with pytest.raises(EncoderError, match="header"):
        fit_encoder(tiny_corpus, EncoderSpec(kind="precomputed",
                                             params={"path": str(path)}))


def test_precomputed_encode_text_requires_known_key(tiny_corpus):
    table = {r.id: [1.0, 0.0] for r in tiny_corpus}
    enc = fit_encoder(tiny_corpus, EncoderSpec(kind="precomputed",
                                               normalize=False,
                                               params={"table": table}))
    assert enc.encode_text("v1").tolist() == [1.0, 0.0]
    with pytest.raises(EncoderError, match="no precomputed vector"):
        enc.encode_text("some free text query")


def test_linear_projection_identity_matches_base(tiny_corpus):
    base_spec = EncoderSpec(kind="tfidf")
    base = fit_encoder(tiny_corpus, base_spec)
    spec = EncoderSpec(kind="linear_projection", dim=base.dim,
                       params={"base": base_spec.to_json_obj()})
    proj = fit_encoder(tiny_corpus, spec)
    text = "a man cooks pasta"
    assert np.allclose(proj.encode_text(text), base.encode_text(text), atol=1e-12)


def test_linear_projection_truncates(tiny_corpus):
    base_spec = EncoderSpec(kind="tfidf")
    base = fit_encoder(tiny_corpus, base_spec)
    proj = fit_encoder(
        tiny_corpus,
        EncoderSpec(kind="linear_projection", dim=3, normalize=False,
                    params={"base": base_spec.to_json_obj()}),
    )
    vec = proj.encode_text("a man cooks pasta")
    assert vec.shape == (3,)
    assert np.allclose(vec, base.encode_text("a man cooks pasta")[:3])


def test_linear_projection_rejects_trainable_base(tiny_corpus):
    inner = EncoderSpec(kind="linear_projection", dim=4,
                        params={"base": EncoderSpec(kind="tfidf").to_json_obj()})
    outer = EncoderSpec(kind="linear_projection", dim=4,
                        params={"base": inner.to_json_obj()})
    with pytest.raises(EncoderError, match="non-trainable"):
        fit_encoder(tiny_corpus, outer)


@pytest.mark.parametrize("bad", [
    EncoderSpec(kind="nonsense"),
    EncoderSpec(kind="tfidf", tau=0.0),
    EncoderSpec(kind="tfidf", tau=-1.0),
    EncoderSpec(kind="hashed_ngram"),
    EncoderSpec(kind="hashed_ngram", dim=0),
    EncoderSpec(kind="linear_projection", dim=4),
])
def test_spec_validation_errors(bad, tiny_corpus):
    with pytest.raises(EncoderError):
        fit_encoder(tiny_corpus, bad)


def test_fingerprint_changes_with_fitted_state(tiny_corpus, synth_corpus):
    spec = EncoderSpec(kind="tfidf")
    assert (fit_encoder(tiny_corpus, spec).fingerprint()
            != fit_encoder(synth_corpus, spec).fingerprint())
    assert (fit_encoder(tiny_corpus, spec).fingerprint()
            == fit_encoder(tiny_corpus, spec).fingerprint())


def test_encoder_save_load_roundtrip(tiny_corpus, tmp_path):
    enc = fit_encoder(tiny_corpus, EncoderSpec(kind="tfidf"))
    path = tmp_path / "enc.json"
    save_encoder(enc, path)
    loaded = load_encoder(path)
    assert loaded.fingerprint() == enc.fingerprint()
    text = "a woman bakes bread"
    assert np.array_equal(loaded.encode_text(text), enc.encode_text(text))


def test_encoder_json_obj_roundtrip(tiny_corpus):
    enc = fit_encoder(
        tiny_corpus,
        EncoderSpec(kind="linear_projection", dim=5,
                    params={"base": EncoderSpec(kind="tfidf").to_json_obj()}),
    )
    clone = encoder_from_json_obj(json.loads(json.dumps(enc.to_json_obj())))
    assert clone.fingerprint() == enc.fingerprint()

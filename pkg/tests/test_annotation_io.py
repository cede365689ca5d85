import json

import pytest

from aquallm import annotation_io
from aquallm.annotation_io import (
    AnnotatedCaption,
    ConlluError,
    CorpusError,
    ManifestError,
    Token,
    build_corpus,
    corpus_from_json,
    corpus_to_json,
    parse_conllu,
    parse_manifest,
    serialize_conllu,
    serialize_manifest,
)


def test_parse_manifest_single_entry():
    line = json.dumps({"audio_id": "a1", "audio_path": "x.wav", "split": "train",
                       "caption_ids": ["c1"]})
    manifest = parse_manifest(line.encode("utf-8"))
    assert len(manifest.entries) == 1
    assert manifest.entries[0].audio_id == "a1"
    assert manifest.entries[0].caption_ids == ("c1",)


def test_parse_manifest_empty_input():
    assert parse_manifest(b"").entries == ()


def test_parse_manifest_duplicate_audio_id():
    lines = "\n".join([
        json.dumps({"audio_id": "a1", "audio_path": "x", "split": "train", "caption_ids": ["c1"]}),
        json.dumps({"audio_id": "a1", "audio_path": "y", "split": "train", "caption_ids": ["c2"]}),
    ])
    with pytest.raises(ManifestError, match=r"line 2.*a1"):
        parse_manifest(lines)


def test_parse_manifest_unknown_split():
    line = json.dumps({"audio_id": "a1", "audio_path": "x", "split": "dev", "caption_ids": ["c1"]})
    with pytest.raises(ManifestError, match="split"):
        parse_manifest(line)


def test_parse_manifest_malformed_line_reports_number():
    with pytest.raises(ManifestError, match="line 1"):
        parse_manifest("not json")


def test_parse_manifest_ignores_unknown_keys():
    line = json.dumps({"audio_id": "a1", "audio_path": "x", "split": "test",
                       "caption_ids": ["c1"], "duration": 12.5})
    manifest = parse_manifest(line)
    assert manifest.entries[0].split == "test"


def test_manifest_round_trip(manifest_path):
    manifest = parse_manifest(manifest_path.read_bytes())
    assert parse_manifest(serialize_manifest(manifest)) == manifest


def test_parse_conllu_fixture_block(conllu_path):
    captions = parse_conllu(conllu_path.read_bytes())
    assert len(captions) == 24
    c1 = next(c for c in captions if c.caption_id == "c1")
    assert c1.audio_id == "a1"
    assert len(c1.tokens) == 9
    root = [t for t in c1.tokens if t.head == 0]
    assert [t.text for t in root] == ["rolling"]
    assert c1.tokens[0].upos == "NOUN" and c1.tokens[0].lemma == "wave"
    assert c1.tokens[6].deprel == "det"


def test_parse_conllu_ner_from_misc(conllu_path):
    captions = {c.caption_id: c for c in parse_conllu(conllu_path.read_bytes())}
    c3 = captions["c3"]
    assert c3.tokens[6].ner == "B-GPE"
    assert c3.tokens[7].ner == "I-GPE"
    assert c3.tokens[0].ner is None


def test_parse_conllu_missing_audio_id_names_ordinal():
    block = "# caption_id = c1\n# text = Hi.\n1\tHi\thi\tINTJ\t_\t_\t0\troot\t_\t_\n"
    with pytest.raises(ConlluError, match="sentence 1"):
        parse_conllu(block)


def test_parse_conllu_two_blocks_in_order():
    block = (
        "# caption_id = x1\n# audio_id = a\n# text = Hi.\n"
        "1\tHi\thi\tINTJ\t_\t_\t0\troot\t_\t_\n"
        "\n"
        "# caption_id = x2\n# audio_id = a\n# text = Yo.\n"
        "1\tYo\tyo\tINTJ\t_\t_\t0\troot\t_\t_\n"
    )
    captions = parse_conllu(block)
    assert [c.caption_id for c in captions] == ["x1", "x2"]


def test_parse_conllu_wrong_column_count():
    block = "# caption_id = c\n# audio_id = a\n# text = Hi.\n1\tHi\thi\tINTJ\t0\troot\n"
    with pytest.raises(ConlluError, match="10 columns"):
        parse_conllu(block)


def test_parse_conllu_head_out_of_range():
    block = "# caption_id = c\n# audio_id = a\n# text = Hi.\n1\tHi\thi\tINTJ\t_\t_\t7\tdep\t_\t_\n"
    with pytest.raises(ConlluError, match="root|range"):
        parse_conllu(block)


def test_parse_conllu_non_contiguous_indices():
    block = (
        "# caption_id = c\n# audio_id = a\n# text = Hi there.\n"
        "1\tHi\thi\tINTJ\t_\t_\t0\troot\t_\t_\n"
        "3\tthere\tthere\tADV\t_\t_\t1\tadvmod\t_\t_\n"
    )
    with pytest.raises(ConlluError, match="contiguous"):
        parse_conllu(block)


def test_parse_conllu_skips_mwt_and_empty_nodes():
    block = (
        "# caption_id = c\n# audio_id = a\n# text = Don't stop.\n"
        "1-2\tDon't\t_\t_\t_\t_\t_\t_\t_\t_\n"
        "1\tDo\tdo\tAUX\t_\t_\t3\taux\t_\t_\n"
        "2\tn't\tnot\tPART\t_\t_\t3\tadvmod\t_\t_\n"
        "2.1\tghost\tghost\tNOUN\t_\t_\t_\t_\t_\t_\n"
        "3\tstop\tstop\tVERB\t_\t_\t0\troot\t_\t_\n"
    )
    caption = parse_conllu(block)[0]
    assert [t.text for t in caption.tokens] == ["Do", "n't", "stop"]


def test_conllu_round_trip(conllu_path):
    captions = parse_conllu(conllu_path.read_bytes())
    again = parse_conllu(serialize_conllu(captions))
    assert again == captions


def test_single_root_enforced():
    with pytest.raises(ConlluError, match="root"):
        AnnotatedCaption(
            caption_id="c", audio_id="a", text="x y",
            tokens=(
                Token(index=1, text="x", lemma="x", upos="NOUN", head=0, deprel="root"),
                Token(index=2, text="y", lemma="y", upos="NOUN", head=0, deprel="root"),
            ),
        )


def test_token_rejects_self_head():
    with pytest.raises(ConlluError):
        Token(index=1, text="x", lemma="x", upos="NOUN", head=1, deprel="dep")


def test_build_corpus_minimal_join():
    manifest = parse_manifest(json.dumps(
        {"audio_id": "a1", "audio_path": "x", "split": "train", "caption_ids": ["c1"]}))
    caption = AnnotatedCaption(
        caption_id="c1", audio_id="a1", text="Hi.",
        tokens=(Token(index=1, text="Hi", lemma="hi", upos="INTJ", head=0, deprel="root"),),
    )
    corpus = build_corpus(manifest, [caption])
    assert corpus.num_audios == 1
    assert corpus.num_captions == 1


def test_build_corpus_missing_caption():
    manifest = parse_manifest(json.dumps(
        {"audio_id": "a1", "audio_path": "x", "split": "train", "caption_ids": ["c2"]}))
    with pytest.raises(CorpusError, match="c2"):
        build_corpus(manifest, [])


def test_build_corpus_audio_mismatch():
    manifest = parse_manifest(json.dumps(
        {"audio_id": "a1", "audio_path": "x", "split": "train", "caption_ids": ["c1"]}))
    caption = AnnotatedCaption(
        caption_id="c1", audio_id="OTHER", text="Hi.",
        tokens=(Token(index=1, text="Hi", lemma="hi", upos="INTJ", head=0, deprel="root"),),
    )
    with pytest.raises(CorpusError, match="c1"):
        build_corpus(manifest, [caption])


def test_build_corpus_unreferenced_caption_warns_not_errors(caplog, corpus, conllu_path):
    manifest = parse_manifest(json.dumps(
        {"audio_id": "a1", "audio_path": "x", "split": "train", "caption_ids": ["c1"]}))
    captions = [c for c in parse_conllu(conllu_path.read_bytes()) if c.caption_id in ("c1", "c2")]
    with caplog.at_level("WARNING"):
        built = build_corpus(manifest, captions)
    assert built.num_captions == 1
    assert any("c2" in record.message for record in caplog.records)


def test_corpus_fixture_counts(corpus):
    assert corpus.num_audios == 6
    assert corpus.num_captions == 24
    ordered = [c.caption_id for c in corpus.iter_captions()]
    assert ordered[:4] == ["c1", "c2", "c13", "c20"]


def test_corpus_json_round_trip(corpus):
    doc = corpus_to_json(corpus)
    again = corpus_from_json(doc)
    assert corpus_to_json(again) == doc
    assert again.num_captions == corpus.num_captions

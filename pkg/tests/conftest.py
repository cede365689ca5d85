import json
from pathlib import Path

import pytest

from aquallm import annotation_io
from aquallm.gateway import GatewayConfig, MockGateway

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def manifest_path() -> Path:
    return DATA_DIR / "manifest.jsonl"


@pytest.fixture(scope="session")
def conllu_path() -> Path:
    return DATA_DIR / "captions.conllu"


@pytest.fixture(scope="session")
def expected_candidates() -> dict:
    return json.loads((DATA_DIR / "expected_candidates.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def corpus(manifest_path, conllu_path) -> annotation_io.Corpus:
    manifest = annotation_io.parse_manifest(manifest_path.read_bytes())
    captions = annotation_io.parse_conllu(conllu_path.read_bytes())
    return annotation_io.build_corpus(manifest, captions)


@pytest.fixture()
def mock_gateway() -> MockGateway:
    return MockGateway(GatewayConfig(endpoint="mock"))


class HowManyGateway(MockGateway):
    """Mock variant whose generator asks "How many ...?" for numeric answers.

    Lets the zero-injection pool fill up in tests; still a pure function.
    """

    _NUMERIC_WORDS = {
        "one", "two", "three", "four", "five", "six", "seven", "eight",
        "nine", "ten", "twenty", "thirty",
    }

    def _fetch(self, task: str, body: dict) -> str:
        if task == "qg":
            first = body["answer"].split()[0].lower()
            if first.isdigit() or first in self._NUMERIC_WORDS:
                return json.dumps({"question": f"How many {body['answer']} are there?"})
        return super()._fetch(task, body)


@pytest.fixture()
def howmany_gateway() -> HowManyGateway:
    return HowManyGateway(GatewayConfig(endpoint="mock"))


def sub_corpus(corpus: annotation_io.Corpus, audio_ids: set[str]) -> annotation_io.Corpus:
    """Restrict a corpus to the given audios (fresh manifest + captions)."""
    manifest = annotation_io.CorpusManifest(
        entries=tuple(e for e in corpus.manifest.entries if e.audio_id in audio_ids),
        source_name=corpus.manifest.source_name,
    )
    captions = [corpus.captions[cid] for e in manifest.entries for cid in e.caption_ids]
    return annotation_io.build_corpus(manifest, captions)


def make_caption(caption_id: str, audio_id: str, words: list[tuple[str, str]],
                 text: str | None = None) -> annotation_io.AnnotatedCaption:
    """Build a flat-tree caption from (form, upos) pairs; token 1 is the root."""
    tokens = []
    for i, (form, upos) in enumerate(words, start=1):
        tokens.append(annotation_io.Token(
            index=i, text=form, lemma=form.lower(), upos=upos,
            head=0 if i == 1 else 1, deprel="root" if i == 1 else "dep",
        ))
    return annotation_io.AnnotatedCaption(
        caption_id=caption_id,
        audio_id=audio_id,
        text=text if text is not None else " ".join(w for w, _ in words),
        tokens=tuple(tokens),
    )

"""Corpus ingestion: audio manifest (JSONL) and caption annotations (CoNLL-U)."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")

UPOS_TAGS = frozenset({
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
})

MANIFEST_KEYS = ("audio_id", "audio_path", "split", "caption_ids")


class ManifestError(ValueError):
    """Raised for malformed or inconsistent manifest input."""


class ConlluError(ValueError):
    """Raised for malformed CoNLL-U input."""


class CorpusError(ValueError):
    """Raised when manifest and annotations cannot be joined."""


@dataclass(frozen=True)
class ManifestEntry:
    audio_id: str
    audio_path: str
    split: str
    caption_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.split not in SPLITS:
            raise ManifestError(f"unknown split {self.split!r} for audio {self.audio_id!r}")
        if not self.caption_ids:
            raise ManifestError(f"audio {self.audio_id!r} has no caption ids")
        if len(set(self.caption_ids)) != len(self.caption_ids):
            raise ManifestError(f"audio {self.audio_id!r} has duplicate caption ids")


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple[ManifestEntry, ...]
    source_name: str = ""

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for entry in self.entries:
            if entry.audio_id in seen:
                raise ManifestError(f"duplicate audio_id {entry.audio_id!r}")
            seen.add(entry.audio_id)


@dataclass(frozen=True)
class Token:
    index: int
    text: str
    lemma: str
    upos: str
    head: int
    deprel: str
    ner: str | None = None

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ConlluError(f"token index must be >= 1, got {self.index}")
        if self.head < 0:
            raise ConlluError(f"token head must be >= 0, got {self.head}")
        if self.head == self.index:
            raise ConlluError(f"token {self.index} has itself as head")
        if self.upos not in UPOS_TAGS:
            raise ConlluError(f"unknown UPOS tag {self.upos!r} on token {self.index}")
        if not self.text or any(ch.isspace() for ch in self.text):
            raise ConlluError(f"token {self.index} text must be non-empty and whitespace-free")


@dataclass(frozen=True)
class AnnotatedCaption:
    caption_id: str
    audio_id: str
    text: str
    tokens: tuple[Token, ...]

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ConlluError(f"caption {self.caption_id!r} has no tokens")
        for pos, tok in enumerate(self.tokens, start=1):
            if tok.index != pos:
                raise ConlluError(
                    f"caption {self.caption_id!r}: token indices not contiguous at {tok.index}"
                )
        n = len(self.tokens)
        roots = [tok.index for tok in self.tokens if tok.head == 0]
        if len(roots) != 1:
            raise ConlluError(f"caption {self.caption_id!r} must have exactly one root, found {roots}")
        for tok in self.tokens:
            if tok.head > n:
                raise ConlluError(
                    f"caption {self.caption_id!r}: token {tok.index} head {tok.head} out of range"
                )

    def span_text(self, start: int, end: int) -> str:
        """Surface string of the inclusive 1-based token span [start, end]."""
        return " ".join(tok.text for tok in self.tokens[start - 1:end])


@dataclass(frozen=True)
class Corpus:
    """Joined manifest + caption index; immutable after build."""

    manifest: CorpusManifest
    captions: dict[str, AnnotatedCaption] = field(default_factory=dict)

    @property
    def num_audios(self) -> int:
        return len(self.manifest.entries)

    @property
    def num_captions(self) -> int:
        return len(self.captions)

    def entry_for_audio(self, audio_id: str) -> ManifestEntry:
        for entry in self.manifest.entries:
            if entry.audio_id == audio_id:
                return entry
        raise CorpusError(f"unknown audio_id {audio_id!r}")

    def iter_captions(self):
        """Captions in manifest order (entry order, then caption_ids order)."""
        for entry in self.manifest.entries:
            for cid in entry.caption_ids:
                yield self.captions[cid]

    def audio_for_caption(self, caption_id: str) -> str:
        return self.captions[caption_id].audio_id


def parse_manifest(data: bytes | str) -> CorpusManifest:
    """Parse a line-delimited JSON manifest into a validated CorpusManifest.

    One JSON object per line with keys audio_id, audio_path, split,
    caption_ids; unknown keys are ignored. Entry order is preserved.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    entries: list[ManifestEntry] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"line {lineno}: malformed JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise ManifestError(f"line {lineno}: expected a JSON object")
        missing = [k for k in MANIFEST_KEYS if k not in obj]
        if missing:
            raise ManifestError(f"line {lineno}: missing keys {missing}")
        audio_id = obj["audio_id"]
        if not isinstance(audio_id, str) or not audio_id:
            raise ManifestError(f"line {lineno}: audio_id must be a non-empty string")
        if audio_id in seen:
            raise ManifestError(
                f"line {lineno}: duplicate audio_id {audio_id!r} (first seen on line {seen[audio_id]})"
            )
        seen[audio_id] = lineno
        split = obj["split"]
        if split not in SPLITS:
            raise ManifestError(f"line {lineno}: unknown split value {split!r}")
        caption_ids = obj["caption_ids"]
        if not isinstance(caption_ids, list) or not all(isinstance(c, str) for c in caption_ids):
            raise ManifestError(f"line {lineno}: caption_ids must be a list of strings")
        try:
            entry = ManifestEntry(
                audio_id=audio_id,
                audio_path=str(obj["audio_path"]),
                split=split,
                caption_ids=tuple(caption_ids),
            )
        except ManifestError as exc:
            raise ManifestError(f"line {lineno}: {exc}") from exc
        entries.append(entry)
    return CorpusManifest(entries=tuple(entries))


def serialize_manifest(manifest: CorpusManifest) -> str:
    """Inverse of parse_manifest for valid manifests."""
    lines = []
    for entry in manifest.entries:
        lines.append(json.dumps({
            "audio_id": entry.audio_id,
            "audio_path": entry.audio_path,
            "split": entry.split,
            "caption_ids": list(entry.caption_ids),
        }, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


def _misc_ner(misc: str) -> str | None:
    if misc == "_" or not misc:
        return None
    for part in misc.split("|"):
        if part.startswith("NER="):
            value = part[len("NER="):]
            return None if value in ("", "O") else value
    return None


def parse_conllu(data: bytes | str) -> list[AnnotatedCaption]:
    """Parse CoNLL-U sentence blocks into AnnotatedCaption records.

    Each block must carry `# caption_id`, `# audio_id` and `# text` comments.
    Multiword-token ranges and empty nodes are skipped. UPOS comes from
    column 4, HEAD from column 7, DEPREL from column 8 and the entity tag
    from a `NER=` key in MISC (column 10).
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    captions: list[AnnotatedCaption] = []
    comments: dict[str, str] = {}
    rows: list[Token] = []
    ordinal = 0

    def flush() -> None:
        nonlocal comments, rows, ordinal
        if not comments and not rows:
            return
        ordinal += 1
        for key in ("caption_id", "audio_id", "text"):
            if key not in comments:
                raise ConlluError(f"sentence {ordinal}: missing `# {key}` comment")
        caption = AnnotatedCaption(
            caption_id=comments["caption_id"],
            audio_id=comments["audio_id"],
            text=comments["text"],
            tokens=tuple(rows),
        )
        captions.append(caption)
        comments = {}
        rows = []

    for lineno, raw in enumerate(data.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                comments[key.strip()] = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluError(f"line {lineno}: expected 10 columns, got {len(cols)}")
        tok_id = cols[0]
        if "-" in tok_id or "." in tok_id:
            continue  # multiword-token range or empty node
        try:
            index = int(tok_id)
            head = int(cols[6])
        except ValueError as exc:
            raise ConlluError(f"line {lineno}: non-integer token/head index") from exc
        try:
            rows.append(Token(
                index=index,
                text=cols[1],
                lemma=cols[2],
                upos=cols[3],
                head=head,
                deprel=cols[7],
                ner=_misc_ner(cols[9]),
            ))
        except ConlluError as exc:
            raise ConlluError(f"line {lineno}: {exc}") from exc
    flush()
    return captions


def serialize_conllu(captions: list[AnnotatedCaption]) -> str:
    """Render captions back to CoNLL-U; parse_conllu inverts this exactly."""
    blocks = []
    for cap in captions:
        lines = [
            f"# caption_id = {cap.caption_id}",
            f"# audio_id = {cap.audio_id}",
            f"# text = {cap.text}",
        ]
        for tok in cap.tokens:
            misc = f"NER={tok.ner}" if tok.ner else "_"
            lines.append("\t".join([
                str(tok.index), tok.text, tok.lemma, tok.upos, "_", "_",
                str(tok.head), tok.deprel, "_", misc,
            ]))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def build_corpus(manifest: CorpusManifest, captions: list[AnnotatedCaption]) -> Corpus:
    """Join captions to manifest entries by caption_id.

    Every manifest-referenced caption must exist and agree on audio_id;
    captions referenced by no entry are dropped with a warning.
    """
    by_id: dict[str, AnnotatedCaption] = {}
    for cap in captions:
        if cap.caption_id in by_id:
            raise CorpusError(f"duplicate caption_id {cap.caption_id!r} in annotations")
        by_id[cap.caption_id] = cap

    joined: dict[str, AnnotatedCaption] = {}
    for entry in manifest.entries:
        for cid in entry.caption_ids:
            cap = by_id.get(cid)
            if cap is None:
                raise CorpusError(
                    f"manifest references caption {cid!r} (audio {entry.audio_id!r}) "
                    "but it is absent from the annotations"
                )
            if cap.audio_id != entry.audio_id:
                raise CorpusError(
                    f"caption {cid!r} claims audio {cap.audio_id!r} but the manifest "
                    f"links it to {entry.audio_id!r}"
                )
            joined[cid] = cap

    orphans = [cid for cid in by_id if cid not in joined]
    for cid in orphans:
        logger.warning("caption %r is referenced by no manifest entry; dropped", cid)

    corpus = Corpus(manifest=manifest, captions=joined)
    logger.info("corpus built: %d audios, %d captions", corpus.num_audios, corpus.num_captions)
    return corpus


def corpus_to_json(corpus: Corpus) -> str:
    """Serialize a corpus to a single JSON document (stage checkpoint)."""
    doc = {
        "source_name": corpus.manifest.source_name,
        "entries": [
            {
                "audio_id": e.audio_id,
                "audio_path": e.audio_path,
                "split": e.split,
                "caption_ids": list(e.caption_ids),
            }
            for e in corpus.manifest.entries
        ],
        "captions": [
            {
                "caption_id": c.caption_id,
                "audio_id": c.audio_id,
                "text": c.text,
                "tokens": [
                    {
                        "index": t.index, "text": t.text, "lemma": t.lemma,
                        "upos": t.upos, "head": t.head, "deprel": t.deprel,
                        "ner": t.ner,
                    }
                    for t in c.tokens
                ],
            }
            for c in corpus.iter_captions()
        ],
    }
    return json.dumps(doc, ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n"


def corpus_from_json(data: bytes | str) -> Corpus:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    doc = json.loads(data)
    manifest = CorpusManifest(
        entries=tuple(
            ManifestEntry(
                audio_id=e["audio_id"],
                audio_path=e["audio_path"],
                split=e["split"],
                caption_ids=tuple(e["caption_ids"]),
            )
            for e in doc["entries"]
        ),
        source_name=doc.get("source_name", ""),
    )
    captions = [
        AnnotatedCaption(
            caption_id=c["caption_id"],
            audio_id=c["audio_id"],
            text=c["text"],
            tokens=tuple(Token(**t) for t in c["tokens"]),
        )
        for c in doc["captions"]
    ]
    return build_corpus(manifest, captions)

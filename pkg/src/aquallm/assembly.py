"""Final dataset assembly, statistics and interchange export."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass

from .annotation_io import Corpus
from .candidates import CandidateType
from .filtering import normalize_answer
from .generation import QAPairDraft

logger = logging.getLogger(__name__)

_SPLIT_RANK = {"train": 0, "val": 1, "test": 2}

CSV_HEADER = ("file_name", "QuestionText", "answer")


@dataclass(frozen=True)
class Provenance:
    caption_id: str
    ctype: CandidateType
    origin_caption_id: str
    paraphrase_of: str | None = None


@dataclass(frozen=True)
class AQATriplet:
    audio_id: str
    audio_path: str
    question: str
    answer: str
    split: str
    provenance: Provenance

    def __post_init__(self) -> None:
        if not self.answer:
            raise ValueError("triplet answer must be non-empty")
        if not self.question.endswith("?"):
            raise ValueError("triplet question must end with '?'")


@dataclass(frozen=True)
class DatasetStats:
    num_audios: int
    num_captions: int
    num_triplets: int
    num_unique_questions: int
    num_unique_answers: int
    vocab_size: int
    corpus_vocab_size: int
    per_split: dict[str, int]
    per_ctype: dict[str, int]

    def to_json(self) -> str:
        doc = {
            "num_audios": self.num_audios,
            "num_captions": self.num_captions,
            "num_triplets": self.num_triplets,
            "num_unique_questions": self.num_unique_questions,
            "num_unique_answers": self.num_unique_answers,
            "vocab_size": self.vocab_size,
            "corpus_vocab_size": self.corpus_vocab_size,
            "per_split": self.per_split,
            "per_ctype": self.per_ctype,
        }
        return json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def _norm_text(s: str) -> str:
    return " ".join(s.lower().split())


def assemble(pairs: list[QAPairDraft], corpus: Corpus) -> list[AQATriplet]:
    """Join pairs to manifest rows, dedup per audio, emit in stable order.

    Order: split (train < val < test), then audio_id, then the pairs'
    stage order. Duplicate (question, answer) on one audio keeps the first.
    """
    entries = {e.audio_id: e for e in corpus.manifest.entries}
    keyed: list[tuple[tuple[int, str, int], AQATriplet]] = []
    seen: set[tuple[str, str, str]] = set()
    for stage_order, pair in enumerate(pairs):
        entry = entries.get(pair.audio_id)
        if entry is None:
            raise ValueError(f"pair references unknown audio_id {pair.audio_id!r}")
        dedup_key = (pair.audio_id, _norm_text(pair.question), _norm_text(pair.answer))
        if dedup_key in seen:
            continue
        seen.add(dedup_key)
        triplet = AQATriplet(
            audio_id=pair.audio_id,
            audio_path=entry.audio_path,
            question=pair.question,
            answer=pair.answer,
            split=entry.split,
            provenance=Provenance(
                caption_id=pair.caption_id,
                ctype=pair.ctype,
                origin_caption_id=pair.origin_caption_id,
                paraphrase_of=pair.paraphrase_of,
            ),
        )
        keyed.append(((_SPLIT_RANK[entry.split], pair.audio_id, stage_order), triplet))
    keyed.sort(key=lambda item: item[0])
    return [triplet for _, triplet in keyed]


def compute_stats(triplets: list[AQATriplet], corpus: Corpus) -> DatasetStats:
    """Table-style metric bundle over the assembled dataset plus corpus counts."""
    questions = {_norm_text(t.question) for t in triplets}
    answers = {_norm_text(t.answer) for t in triplets}
    vocab: set[str] = set()
    for t in triplets:
        vocab.update(normalize_answer(t.question))
        vocab.update(normalize_answer(t.answer))
    corpus_vocab: set[str] = set()
    for caption in corpus.iter_captions():
        corpus_vocab.update(normalize_answer(caption.text))
    per_split: dict[str, int] = {}
    per_ctype: dict[str, int] = {}
    for t in triplets:
        per_split[t.split] = per_split.get(t.split, 0) + 1
        ctype = t.provenance.ctype.value
        per_ctype[ctype] = per_ctype.get(ctype, 0) + 1
    return DatasetStats(
        num_audios=corpus.num_audios,
        num_captions=corpus.num_captions,
        num_triplets=len(triplets),
        num_unique_questions=len(questions),
        num_unique_answers=len(answers),
        vocab_size=len(vocab),
        corpus_vocab_size=len(corpus_vocab),
        per_split=per_split,
        per_ctype=per_ctype,
    )


def triplet_to_dict(triplet: AQATriplet) -> dict:
    return {
        "audio_id": triplet.audio_id,
        "audio_path": triplet.audio_path,
        "question": triplet.question,
        "answer": triplet.answer,
        "split": triplet.split,
        "provenance": {
            "caption_id": triplet.provenance.caption_id,
            "ctype": triplet.provenance.ctype.value,
            "origin_caption_id": triplet.provenance.origin_caption_id,
            "paraphrase_of": triplet.provenance.paraphrase_of,
        },
    }


def triplet_from_dict(doc: dict) -> AQATriplet:
    prov = doc["provenance"]
    return AQATriplet(
        audio_id=doc["audio_id"],
        audio_path=doc["audio_path"],
        question=doc["question"],
        answer=doc["answer"],
        split=doc["split"],
        provenance=Provenance(
            caption_id=prov["caption_id"],
            ctype=CandidateType(prov["ctype"]),
            origin_caption_id=prov["origin_caption_id"],
            paraphrase_of=prov.get("paraphrase_of"),
        ),
    )


def export_triplets(triplets: list[AQATriplet], fmt: str, out) -> int:
    """Write triplets to a text sink as jsonl or RFC-4180 csv; returns rows written."""
    if fmt == "jsonl":
        for t in triplets:
            out.write(json.dumps(triplet_to_dict(t), ensure_ascii=False, sort_keys=True,
                                 separators=(",", ":")) + "\n")
        return len(triplets)
    if fmt == "csv":
        writer = csv.writer(out)
        writer.writerow(CSV_HEADER)
        for t in triplets:
            writer.writerow([t.audio_path, t.question, t.answer])
        return len(triplets)
    raise ValueError(f"unknown export format {fmt!r}")


def export_triplets_str(triplets: list[AQATriplet], fmt: str) -> str:
    buf = io.StringIO(newline="")
    export_triplets(triplets, fmt, buf)
    return buf.getvalue()


def import_triplets(data: str) -> list[AQATriplet]:
    return [triplet_from_dict(json.loads(line)) for line in data.splitlines() if line.strip()]

"""Answer-candidate extraction from annotated captions.

Five in-caption rule families (noun phrases + named entities, verbal /
adjective / adverbial sequences, cardinals) produce typed spans; the
injected yes/no/zero values are built later, during question generation.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

from .annotation_io import AnnotatedCaption

OPEN_CLASS = frozenset({"ADJ", "ADV", "INTJ", "NOUN", "PROPN", "VERB"})

NOMINAL = frozenset({"NOUN", "PROPN"})

# deprels that may extend a base noun phrase leftwards from its head
NP_LEFT_DEPRELS = frozenset({"det", "amod", "compound", "nummod", "poss"})

SEQUENCE_CLOSERS = {
    "VERB": frozenset({"VERB", "NOUN", "PROPN"}),
    "ADJ": frozenset({"ADJ", "NOUN", "PROPN"}),
    "ADV": frozenset({"ADV", "NOUN", "PROPN"}),
}


class CandidateType(enum.Enum):
    NOUN = "Noun"
    VERBAL = "Verbal"
    ADJECTIVE = "Adjective"
    ADVERBIAL = "Adverbial"
    CARDINAL = "Cardinal"
    BOOLEAN_YES = "BooleanYes"
    BOOLEAN_NO = "BooleanNo"
    ZERO = "Zero"

    @property
    def is_icac(self) -> bool:
        return self in _ICAC_TYPES

    @property
    def rule_rank(self) -> int:
        return _RULE_RANK[self]


_ICAC_TYPES = frozenset({
    CandidateType.NOUN, CandidateType.VERBAL, CandidateType.ADJECTIVE,
    CandidateType.ADVERBIAL, CandidateType.CARDINAL,
})

_RULE_RANK = {
    CandidateType.NOUN: 0,
    CandidateType.VERBAL: 1,
    CandidateType.ADJECTIVE: 2,
    CandidateType.ADVERBIAL: 3,
    CandidateType.CARDINAL: 4,
    CandidateType.BOOLEAN_YES: 5,
    CandidateType.BOOLEAN_NO: 6,
    CandidateType.ZERO: 7,
}

_OCAC_TEXT = {
    CandidateType.BOOLEAN_YES: "yes",
    CandidateType.BOOLEAN_NO: "no",
    CandidateType.ZERO: "zero",
}


@dataclass(frozen=True)
class AnswerCandidate:
    caption_id: str
    ctype: CandidateType
    span: tuple[int, int] | None
    text: str

    def __post_init__(self) -> None:
        if self.ctype.is_icac:
            if self.span is None:
                raise ValueError(f"{self.ctype.value} candidate requires a span")
            start, end = self.span
            if start < 1 or start > end:
                raise ValueError(f"invalid span {self.span}")
        else:
            if self.span is not None:
                raise ValueError(f"{self.ctype.value} candidate carries no span")
            if self.text != _OCAC_TEXT[self.ctype]:
                raise ValueError(f"{self.ctype.value} text must be {_OCAC_TEXT[self.ctype]!r}")


def _span_candidate(caption: AnnotatedCaption, ctype: CandidateType,
                    start: int, end: int) -> AnswerCandidate:
    return AnswerCandidate(
        caption_id=caption.caption_id,
        ctype=ctype,
        span=(start, end),
        text=caption.span_text(start, end),
    )


def _base_np_start(caption: AnnotatedCaption, head_index: int) -> int:
    """Leftmost token of the unbroken run of NP-extending dependents of `head_index`."""
    start = head_index
    pos = head_index - 1
    while pos >= 1:
        tok = caption.tokens[pos - 1]
        if tok.head == head_index and tok.deprel in NP_LEFT_DEPRELS:
            start = pos
            pos -= 1
        else:
            break
    return start


def _entity_runs(caption: AnnotatedCaption) -> list[tuple[int, int]]:
    """Maximal BIO runs in the NER layer, as inclusive 1-based spans."""
    runs: list[tuple[int, int]] = []
    start: int | None = None
    prev_end = 0
    for tok in caption.tokens:
        tag = tok.ner
        if tag is None:
            if start is not None:
                runs.append((start, prev_end))
                start = None
            continue
        if tag.startswith("B-") or start is None:
            if start is not None:
                runs.append((start, prev_end))
            start = tok.index
        prev_end = tok.index
    if start is not None:
        runs.append((start, prev_end))
    return runs


def extract_noun_candidates(caption: AnnotatedCaption) -> list[AnswerCandidate]:
    """Base noun phrases (one maximal span per nominal head) plus entity runs."""
    spans: list[tuple[int, int]] = []
    for tok in caption.tokens:
        if tok.upos in NOMINAL:
            spans.append((_base_np_start(caption, tok.index), tok.index))
    spans.extend(_entity_runs(caption))
    seen: set[tuple[int, int]] = set()
    out: list[AnswerCandidate] = []
    for span in sorted(spans):
        if span in seen:
            continue
        seen.add(span)
        out.append(_span_candidate(caption, CandidateType.NOUN, *span))
    return out


def extract_sequence_candidates(caption: AnnotatedCaption, opener: str,
                                closers: frozenset[str] | set[str]) -> list[AnswerCandidate]:
    """Maximal spans opening on `opener`, closing on a closer tag, open-class inside.

    Within one maximal open-class run there is at most one such maximal span:
    (first opener, last closer at or after it). Any other satisfying span in
    the run is contained in it.
    """
    if opener not in SEQUENCE_CLOSERS:
        raise ValueError(f"opener must be one of {sorted(SEQUENCE_CLOSERS)}, got {opener!r}")
    ctype = {
        "VERB": CandidateType.VERBAL,
        "ADJ": CandidateType.ADJECTIVE,
        "ADV": CandidateType.ADVERBIAL,
    }[opener]
    closer_set = frozenset(closers)
    out: list[AnswerCandidate] = []
    n = len(caption.tokens)
    i = 0
    while i < n:
        if caption.tokens[i].upos not in OPEN_CLASS:
            i += 1
            continue
        j = i
        while j < n and caption.tokens[j].upos in OPEN_CLASS:
            j += 1
        run = caption.tokens[i:j]
        first_opener = next((t.index for t in run if t.upos == opener), None)
        if first_opener is not None:
            last_closer = max(
                (t.index for t in run if t.upos in closer_set and t.index >= first_opener),
                default=None,
            )
            if last_closer is not None:
                out.append(_span_candidate(caption, ctype, first_opener, last_closer))
        i = j
    return out


def extract_cardinal_candidates(caption: AnnotatedCaption) -> list[AnswerCandidate]:
    """Bare NUM tokens, plus NUM + the noun-phrase span it modifies via nummod."""
    spans: list[tuple[int, int]] = []
    for tok in caption.tokens:
        if tok.upos != "NUM":
            continue
        spans.append((tok.index, tok.index))
        if tok.deprel != "nummod" or tok.head <= tok.index:
            continue
        head_tok = caption.tokens[tok.head - 1]
        if head_tok.upos not in NOMINAL:
            continue
        np_start = _base_np_start(caption, head_tok.index)
        if np_start <= tok.index + 1:  # no gap between the NUM and the phrase
            spans.append((tok.index, head_tok.index))
    seen: set[tuple[int, int]] = set()
    out: list[AnswerCandidate] = []
    for span in sorted(spans):
        if span in seen:
            continue
        seen.add(span)
        out.append(_span_candidate(caption, CandidateType.CARDINAL, *span))
    return out


def extract_candidates(caption: AnnotatedCaption) -> list[AnswerCandidate]:
    """Union of all in-caption rules; identical spans collapse to the earliest rule."""
    merged: dict[tuple[int, int], AnswerCandidate] = {}
    rule_outputs = (
        extract_noun_candidates(caption),
        extract_sequence_candidates(caption, "VERB", SEQUENCE_CLOSERS["VERB"]),
        extract_sequence_candidates(caption, "ADJ", SEQUENCE_CLOSERS["ADJ"]),
        extract_sequence_candidates(caption, "ADV", SEQUENCE_CLOSERS["ADV"]),
        extract_cardinal_candidates(caption),
    )
    for cands in rule_outputs:
        for cand in cands:
            assert cand.span is not None
            if cand.span not in merged:
                merged[cand.span] = cand
    return sorted(
        merged.values(),
        key=lambda c: (c.span[0], c.span[1], c.ctype.rule_rank),  # type: ignore[index]
    )


# -- stage checkpoint format -------------------------------------------------

def dump_candidates(candidates: list[AnswerCandidate]) -> str:
    lines = []
    for c in candidates:
        lines.append(json.dumps({
            "caption_id": c.caption_id,
            "ctype": c.ctype.value,
            "span": list(c.span) if c.span else None,
            "text": c.text,
        }, ensure_ascii=False, sort_keys=True, separators=(",", ":")))
    return "\n".join(lines) + ("\n" if lines else "")


def load_candidates(data: str) -> list[AnswerCandidate]:
    out = []
    for line in data.splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        span = doc["span"]
        out.append(AnswerCandidate(
            caption_id=doc["caption_id"],
            ctype=CandidateType(doc["ctype"]),
            span=tuple(span) if span else None,
            text=doc["text"],
        ))
    return out

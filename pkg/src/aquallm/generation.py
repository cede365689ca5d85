"""Question generation: one draft per in-caption candidate, plus injected
yes / no / zero pairs whose questions come from other captions."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .annotation_io import AnnotatedCaption, Corpus
from .candidates import AnswerCandidate, CandidateType
from .gateway import GatewayError, ModelGateway
from .parallel import ordered_map
from .prng import SplitMix64

if TYPE_CHECKING:
    from .filtering import VerificationResult

logger = logging.getLogger(__name__)

RESAMPLE_ATTEMPTS = 5

_HOWMANY_RE = re.compile(r"^\s*how many\b", re.IGNORECASE)

_NUMBER_WORDS = frozenset({
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight",
    "nine", "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen",
    "sixteen", "seventeen", "eighteen", "nineteen", "twenty", "thirty",
    "forty", "fifty", "sixty", "seventy", "eighty", "ninety", "hundred",
    "thousand", "million",
})

_OCAC_ANSWER = {
    CandidateType.BOOLEAN_YES: "yes",
    CandidateType.BOOLEAN_NO: "no",
    CandidateType.ZERO: "zero",
}


@dataclass(frozen=True)
class QAPairDraft:
    audio_id: str
    caption_id: str
    question: str
    answer: str
    ctype: CandidateType
    origin_caption_id: str
    verified: "VerificationResult | None" = None  # filled by filtering
    paraphrase_of: str | None = None

    def __post_init__(self) -> None:
        if not self.question or not self.question.endswith("?"):
            raise ValueError("question must be non-empty and end with '?'")
        cross = self.ctype in (CandidateType.BOOLEAN_NO, CandidateType.ZERO)
        if cross != (self.origin_caption_id != self.caption_id):
            raise ValueError(
                f"{self.ctype.value} draft origin/caption ids inconsistent: "
                f"{self.origin_caption_id!r} vs {self.caption_id!r}"
            )
        expected = _OCAC_ANSWER.get(self.ctype)
        if expected is not None and self.answer != expected:
            raise ValueError(f"{self.ctype.value} draft answer must be {expected!r}")


@dataclass(frozen=True)
class InjectionConfig:
    zero_per_audio: int = 1
    seed: int = 0
    verify_negatives: bool = True

    def __post_init__(self) -> None:
        if self.zero_per_audio < 0:
            raise ValueError("injection.zero_per_audio must be >= 0")
        if not 0 <= self.seed < (1 << 64):
            raise ValueError("injection.seed must fit in 64 unsigned bits")


@dataclass
class GenerationReport:
    """Per-category skip counters accumulated over one generation run."""

    gateway_failures: int = 0
    no_pool_empty: int = 0
    no_exhausted: int = 0
    zero_pool_empty: int = 0
    zero_exhausted: int = 0
    by_ctype: dict[str, int] = field(default_factory=dict)

    def count(self, ctype: CandidateType) -> None:
        self.by_ctype[ctype.value] = self.by_ctype.get(ctype.value, 0) + 1


def generate_for_candidate(caption: AnnotatedCaption, candidate: AnswerCandidate,
                           gateway: ModelGateway) -> QAPairDraft:
    """Draft a question for one in-caption candidate via the gateway."""
    if not candidate.ctype.is_icac:
        raise ValueError(f"candidate must be in-caption, got {candidate.ctype.value}")
    if candidate.caption_id != caption.caption_id:
        raise ValueError("candidate does not belong to this caption")
    question = gateway.generate_question(caption.text, candidate.text)
    return QAPairDraft(
        audio_id=caption.audio_id,
        caption_id=caption.caption_id,
        question=question,
        answer=candidate.text,
        ctype=candidate.ctype,
        origin_caption_id=caption.caption_id,
    )


def inject_boolean_yes(caption: AnnotatedCaption, gateway: ModelGateway) -> QAPairDraft:
    question = gateway.generate_boolean_question(caption.text)
    return QAPairDraft(
        audio_id=caption.audio_id,
        caption_id=caption.caption_id,
        question=question,
        answer="yes",
        ctype=CandidateType.BOOLEAN_YES,
        origin_caption_id=caption.caption_id,
    )


def _answered_yes(gateway: ModelGateway, context: str, question: str) -> bool:
    outcome = gateway.answer_question(context, question)
    return outcome.answerable and " ".join(outcome.answer.lower().split()) == "yes"


def _answered_numeric(gateway: ModelGateway, context: str, question: str) -> bool:
    outcome = gateway.answer_question(context, question)
    if not outcome.answerable:
        return False
    tokens = outcome.answer.lower().split()
    return any(re.fullmatch(r"\d+([.,]\d+)?", t) or t in _NUMBER_WORDS for t in tokens)


def inject_boolean_no(target: AnnotatedCaption, yes_pool: list[QAPairDraft],
                      gateway: ModelGateway, rng: SplitMix64,
                      verify_negatives: bool = True,
                      report: GenerationReport | None = None) -> QAPairDraft | None:
    """Attach another audio's yes-question to `target` with the answer flipped to no.

    The sampled question must not be answerable with "yes" from the target
    caption; up to RESAMPLE_ATTEMPTS draws before giving up.
    """
    if any(d.ctype is not CandidateType.BOOLEAN_YES for d in yes_pool):
        raise ValueError("yes_pool must contain only BooleanYes drafts")
    eligible = [d for d in yes_pool if d.audio_id != target.audio_id]
    if not eligible:
        if report:
            report.no_pool_empty += 1
        return None
    for _ in range(RESAMPLE_ATTEMPTS):
        sampled = eligible[rng.next_below(len(eligible))]
        try:
            if verify_negatives and _answered_yes(gateway, target.text, sampled.question):
                continue
        except GatewayError:
            if report:
                report.gateway_failures += 1
            continue
        return QAPairDraft(
            audio_id=target.audio_id,
            caption_id=target.caption_id,
            question=sampled.question,
            answer="no",
            ctype=CandidateType.BOOLEAN_NO,
            origin_caption_id=sampled.caption_id,
        )
    if report:
        report.no_exhausted += 1
    return None


def inject_zero(target_audio: str, target_caption: AnnotatedCaption,
                howmany_pool: list[QAPairDraft], gateway: ModelGateway,
                rng: SplitMix64, verify_negatives: bool = True,
                report: GenerationReport | None = None) -> QAPairDraft | None:
    """Attach another audio's "How many" question to `target_audio` with answer zero."""
    for d in howmany_pool:
        if d.ctype is not CandidateType.CARDINAL or not _HOWMANY_RE.match(d.question):
            raise ValueError("howmany_pool must contain Cardinal 'How many' drafts")
    eligible = [d for d in howmany_pool if d.audio_id != target_audio]
    if not eligible:
        if report:
            report.zero_pool_empty += 1
        return None
    for _ in range(RESAMPLE_ATTEMPTS):
        sampled = eligible[rng.next_below(len(eligible))]
        try:
            if verify_negatives and _answered_numeric(gateway, target_caption.text, sampled.question):
                continue
        except GatewayError:
            if report:
                report.gateway_failures += 1
            continue
        return QAPairDraft(
            audio_id=target_audio,
            caption_id=target_caption.caption_id,
            question=sampled.question,
            answer="zero",
            ctype=CandidateType.ZERO,
            origin_caption_id=sampled.caption_id,
        )
    if report:
        report.zero_exhausted += 1
    return None


def generate_all(corpus: Corpus, candidates: dict[str, list[AnswerCandidate]],
                 cfg: InjectionConfig, gateway: ModelGateway,
                 workers: int = 1) -> tuple[list[QAPairDraft], GenerationReport]:
    """Run both generation phases over the whole corpus.

    Phase 1 drafts in-caption questions plus one yes-question per caption;
    phase 2 samples cross-audio no/zero injections from the completed
    pools. Output order: caption order, then candidate order, then
    injections; deterministic for a fixed (corpus, candidates, seed).
    """
    report = GenerationReport()
    captions = list(corpus.iter_captions())

    def phase1(caption: AnnotatedCaption) -> tuple[list[QAPairDraft], QAPairDraft | None, int]:
        drafts: list[QAPairDraft] = []
        failures = 0
        for cand in candidates.get(caption.caption_id, []):
            try:
                drafts.append(generate_for_candidate(caption, cand, gateway))
            except GatewayError as exc:
                logger.warning("qg failed for %s: %s", caption.caption_id, exc)
                failures += 1
        try:
            yes = inject_boolean_yes(caption, gateway)
        except GatewayError as exc:
            logger.warning("qg_boolean failed for %s: %s", caption.caption_id, exc)
            failures += 1
            yes = None
        return drafts, yes, failures

    results = ordered_map(phase1, captions, workers)
    icac_drafts: list[QAPairDraft] = []
    yes_pool: list[QAPairDraft] = []
    for drafts, yes, failures in results:
        icac_drafts.extend(drafts)
        report.gateway_failures += failures
        if yes is not None:
            yes_pool.append(yes)

    howmany_pool = [
        d for d in icac_drafts
        if d.ctype is CandidateType.CARDINAL and _HOWMANY_RE.match(d.question)
    ]

    no_drafts: list[QAPairDraft] = []
    for caption in captions:
        rng = SplitMix64(cfg.seed, f"no:{caption.caption_id}")
        draft = inject_boolean_no(
            caption, yes_pool, gateway, rng,
            verify_negatives=cfg.verify_negatives, report=report,
        )
        if draft is not None:
            no_drafts.append(draft)

    zero_drafts: list[QAPairDraft] = []
    if cfg.zero_per_audio > 0:
        for entry in corpus.manifest.entries:
            rng = SplitMix64(cfg.seed, f"zero:{entry.audio_id}")
            target_caption = corpus.captions[entry.caption_ids[0]]
            for _ in range(cfg.zero_per_audio):
                draft = inject_zero(
                    entry.audio_id, target_caption, howmany_pool, gateway, rng,
                    verify_negatives=cfg.verify_negatives, report=report,
                )
                if draft is not None:
                    zero_drafts.append(draft)

    all_drafts = icac_drafts + yes_pool + no_drafts + zero_drafts
    for d in all_drafts:
        report.count(d.ctype)
    return all_drafts, report


# -- stage checkpoint format -------------------------------------------------

def draft_to_dict(draft: QAPairDraft, include_paraphrase_of: bool = False) -> dict:
    doc = {
        "audio_id": draft.audio_id,
        "caption_id": draft.caption_id,
        "question": draft.question,
        "answer": draft.answer,
        "ctype": draft.ctype.value,
        "origin_caption_id": draft.origin_caption_id,
    }
    if include_paraphrase_of:
        doc["paraphrase_of"] = draft.paraphrase_of
    return doc


def draft_from_dict(doc: dict) -> QAPairDraft:
    return QAPairDraft(
        audio_id=doc["audio_id"],
        caption_id=doc["caption_id"],
        question=doc["question"],
        answer=doc["answer"],
        ctype=CandidateType(doc["ctype"]),
        origin_caption_id=doc["origin_caption_id"],
        paraphrase_of=doc.get("paraphrase_of"),
    )


def dump_drafts(drafts: list[QAPairDraft], include_paraphrase_of: bool = False) -> str:
    lines = [
        json.dumps(draft_to_dict(d, include_paraphrase_of), ensure_ascii=False,
                   sort_keys=True, separators=(",", ":"))
        for d in drafts
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def load_drafts(data: str) -> list[QAPairDraft]:
    return [draft_from_dict(json.loads(line)) for line in data.splitlines() if line.strip()]

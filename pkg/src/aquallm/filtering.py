"""Round-trip consistency filtering.

Each drafted question is answered again from its caption; extractive
drafts survive only when the model's answer agrees with the original
candidate at token-level F1 strictly above the threshold.
"""

from __future__ import annotations

import enum
import json
import logging
import string
from collections import Counter
from dataclasses import dataclass, field, replace

from .annotation_io import Corpus
from .candidates import CandidateType
from .gateway import GatewayError, ModelGateway
from .generation import QAPairDraft, draft_to_dict
from .parallel import ordered_map

logger = logging.getLogger(__name__)

_PUNCT = frozenset(string.punctuation)
_ARTICLES = frozenset({"a", "an", "the"})

EXTRACTIVE_TYPES = frozenset({
    CandidateType.NOUN, CandidateType.VERBAL, CandidateType.ADJECTIVE,
    CandidateType.ADVERBIAL, CandidateType.CARDINAL,
})


class RejectReason(enum.Enum):
    ACCEPTED = "Accepted"
    LOW_F1 = "LowF1"
    UNANSWERABLE = "Unanswerable"
    NEGATIVE_CHECK_FAILED = "NegativeCheckFailed"
    GATEWAY_ERROR = "GatewayError"


@dataclass(frozen=True)
class VerificationResult:
    model_answer: str
    answerable: bool
    f1: float
    accepted: bool
    reason: RejectReason

    def __post_init__(self) -> None:
        if self.accepted and self.reason is not RejectReason.ACCEPTED:
            raise ValueError("accepted result must carry reason Accepted")
        if not 0.0 <= self.f1 <= 1.0:
            raise ValueError(f"f1 out of range: {self.f1}")


@dataclass(frozen=True)
class FilterConfig:
    tau: float = 0.55

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("filter.tau must be within [0, 1]")


@dataclass
class FilterReport:
    total: int = 0
    accepted: int = 0
    by_reason: dict[str, int] = field(default_factory=dict)
    by_ctype: dict[str, int] = field(default_factory=dict)

    def record(self, draft: QAPairDraft, result: VerificationResult) -> None:
        self.total += 1
        if result.accepted:
            self.accepted += 1
        self.by_reason[result.reason.value] = self.by_reason.get(result.reason.value, 0) + 1
        self.by_ctype[draft.ctype.value] = self.by_ctype.get(draft.ctype.value, 0) + 1

    def to_json(self) -> str:
        doc = {
            "total": self.total,
            "accepted": self.accepted,
            "by_reason": self.by_reason,
            "by_ctype": self.by_ctype,
        }
        return json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def normalize_answer(s: str) -> list[str]:
    """Lowercase, strip punctuation, drop articles, split on whitespace."""
    lowered = s.lower()
    no_punct = "".join(ch for ch in lowered if ch not in _PUNCT)
    return [tok for tok in no_punct.split() if tok not in _ARTICLES]


def token_f1(prediction: str, reference: str) -> float:
    """Token-level F1 over normalized multisets; 1.0 when both normalize empty."""
    pred = normalize_answer(prediction)
    ref = normalize_answer(reference)
    if not pred and not ref:
        return 1.0
    if not pred or not ref:
        return 0.0
    overlap = sum((Counter(pred) & Counter(ref)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred)
    recall = overlap / len(ref)
    return 2 * precision * recall / (precision + recall)


def verify_pair(draft: QAPairDraft, caption_text: str, cfg: FilterConfig,
                gateway: ModelGateway, recheck_negatives: bool = False) -> VerificationResult:
    """Round-trip one draft against its caption.

    Extractive drafts are accepted iff the question is answerable and the
    model answer clears tau strictly. Yes-drafts need an explicit "yes"
    when the gateway has boolean capability and pass through otherwise;
    no/zero drafts were negatively verified at injection time and pass
    through unless recheck_negatives is set.
    """
    if draft.ctype in EXTRACTIVE_TYPES:
        try:
            outcome = gateway.answer_question(caption_text, draft.question)
        except GatewayError as exc:
            logger.warning("qa failed for %s: %s", draft.caption_id, exc)
            return VerificationResult("", False, 0.0, False, RejectReason.GATEWAY_ERROR)
        if not outcome.answerable:
            return VerificationResult("", False, 0.0, False, RejectReason.UNANSWERABLE)
        f1 = token_f1(outcome.answer, draft.answer)
        if f1 > cfg.tau:
            return VerificationResult(outcome.answer, True, f1, True, RejectReason.ACCEPTED)
        return VerificationResult(outcome.answer, True, f1, False, RejectReason.LOW_F1)

    if draft.ctype is CandidateType.BOOLEAN_YES:
        if not gateway.boolean_capable:
            # boolean_passthrough: extractive servers cannot emit yes/no
            return VerificationResult("", True, 1.0, True, RejectReason.ACCEPTED)
        try:
            outcome = gateway.answer_question(caption_text, draft.question)
        except GatewayError as exc:
            logger.warning("qa failed for %s: %s", draft.caption_id, exc)
            return VerificationResult("", False, 0.0, False, RejectReason.GATEWAY_ERROR)
        if not outcome.answerable:
            return VerificationResult("", False, 0.0, False, RejectReason.UNANSWERABLE)
        if " ".join(outcome.answer.lower().split()) == "yes":
            return VerificationResult(outcome.answer, True, 1.0, True, RejectReason.ACCEPTED)
        return VerificationResult(outcome.answer, True, 0.0, False, RejectReason.LOW_F1)

    # BooleanNo / Zero: the negative check already ran at injection time
    if recheck_negatives:
        try:
            outcome = gateway.answer_question(caption_text, draft.question)
        except GatewayError as exc:
            logger.warning("qa failed for %s: %s", draft.caption_id, exc)
            return VerificationResult("", False, 0.0, False, RejectReason.GATEWAY_ERROR)
        if outcome.answerable and " ".join(outcome.answer.lower().split()) == "yes":
            return VerificationResult(outcome.answer, True, 0.0, False,
                                      RejectReason.NEGATIVE_CHECK_FAILED)
    return VerificationResult("", True, 1.0, True, RejectReason.ACCEPTED)


def filter_pairs(drafts: list[QAPairDraft], corpus: Corpus, cfg: FilterConfig,
                 gateway: ModelGateway, workers: int = 1,
                 recheck_negatives: bool = False) -> tuple[list[QAPairDraft], FilterReport]:
    """Verify every draft; return accepted drafts (verified filled) and a report."""
    for draft in drafts:
        if draft.caption_id not in corpus.captions:
            raise ValueError(f"draft references unknown caption {draft.caption_id!r}")

    def work(draft: QAPairDraft) -> VerificationResult:
        caption_text = corpus.captions[draft.caption_id].text
        return verify_pair(draft, caption_text, cfg, gateway, recheck_negatives)

    results = ordered_map(work, drafts, workers)
    report = FilterReport()
    accepted: list[QAPairDraft] = []
    for draft, result in zip(drafts, results):
        report.record(draft, result)
        if result.accepted:
            accepted.append(replace(draft, verified=result))
    return accepted, report


# -- stage checkpoint format -------------------------------------------------

def verified_draft_to_dict(draft: QAPairDraft) -> dict:
    doc = draft_to_dict(draft)
    result = draft.verified
    if isinstance(result, VerificationResult):
        doc["verified"] = {
            "model_answer": result.model_answer,
            "answerable": result.answerable,
            "f1": result.f1,
            "accepted": result.accepted,
            "reason": result.reason.value,
        }
    else:
        doc["verified"] = None
    return doc


def verified_draft_from_dict(doc: dict) -> QAPairDraft:
    from .generation import draft_from_dict

    draft = draft_from_dict(doc)
    raw = doc.get("verified")
    if raw is not None:
        draft = replace(draft, verified=VerificationResult(
            model_answer=raw["model_answer"],
            answerable=raw["answerable"],
            f1=raw["f1"],
            accepted=raw["accepted"],
            reason=RejectReason(raw["reason"]),
        ))
    return draft


def dump_verified(drafts: list[QAPairDraft]) -> str:
    lines = [
        json.dumps(verified_draft_to_dict(d), ensure_ascii=False, sort_keys=True,
                   separators=(",", ":"))
        for d in drafts
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def load_verified(data: str) -> list[QAPairDraft]:
    return [verified_draft_from_dict(json.loads(line)) for line in data.splitlines() if line.strip()]

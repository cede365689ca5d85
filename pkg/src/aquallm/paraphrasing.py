"""Paraphrase expansion of accepted question-answer pairs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

from .annotation_io import Corpus
from .filtering import EXTRACTIVE_TYPES, FilterConfig, verify_pair
from .gateway import GatewayError, ModelGateway
from .generation import QAPairDraft
from .parallel import ordered_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParaphraseConfig:
    k: int = 5
    reverify: bool = True

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("paraphrase.k must be >= 1")


def _norm(q: str) -> str:
    return " ".join(q.lower().split())


def expand(accepted: list[QAPairDraft], corpus: Corpus, pcfg: ParaphraseConfig,
           fcfg: FilterConfig, gateway: ModelGateway, workers: int = 1) -> list[QAPairDraft]:
    """Each accepted pair, followed by its surviving paraphrases in model rank order.

    Paraphrases keep the pair's answer and ids and carry paraphrase_of =
    the original question. Rewrites that collapse onto the original or an
    earlier paraphrase (lowercase + whitespace) are dropped; extractive
    paraphrases must re-pass round-trip verification when reverify is on.
    """

    def work(pair: QAPairDraft) -> list[QAPairDraft]:
        out = [pair]
        try:
            rewrites = gateway.paraphrase_question(pair.question, pcfg.k)
        except GatewayError as exc:
            logger.warning("paraphrase failed for %s: %s", pair.caption_id, exc)
            return out
        caption_text = corpus.captions[pair.caption_id].text
        seen = {_norm(pair.question)}
        for rewrite in rewrites:
            if _norm(rewrite) in seen:
                continue
            candidate = replace(
                pair,
                question=rewrite,
                verified=None,
                paraphrase_of=pair.question,
            )
            if pcfg.reverify and pair.ctype in EXTRACTIVE_TYPES:
                try:
                    result = verify_pair(candidate, caption_text, fcfg, gateway)
                except GatewayError:
                    continue
                if not result.accepted:
                    continue
                candidate = replace(candidate, verified=result)
            seen.add(_norm(rewrite))
            out.append(candidate)
        return out

    groups = ordered_map(work, accepted, workers)
    return [draft for group in groups for draft in group]

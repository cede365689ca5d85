import random
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aquallm.candidates import CandidateType
from aquallm.filtering import (
    FilterConfig,
    RejectReason,
    VerificationResult,
    dump_verified,
    filter_pairs,
    load_verified,
    normalize_answer,
    token_f1,
    verify_pair,
)
from aquallm.gateway import MockGateway, QG_TEMPLATE
from aquallm.generation import QAPairDraft


def reference_f1(prediction: str, reference: str) -> float:
    """Independent oracle: regex normalization + sorted two-pointer overlap."""
    def norm(s: str) -> list[str]:
        s = s.lower()
        s = re.sub(r"[!-/:-@\[-`{-~]", "", s)  # ASCII punctuation ranges
        s = re.sub(r"\b(a|an|the)\b", " ", s)
        return s.split()

    p = sorted(norm(prediction))
    r = sorted(norm(reference))
    if not p and not r:
        return 1.0
    if not p or not r:
        return 0.0
    i = j = overlap = 0
    while i < len(p) and j < len(r):
        if p[i] == r[j]:
            overlap += 1
            i += 1
            j += 1
        elif p[i] < r[j]:
            i += 1
        else:
            j += 1
    if overlap == 0:
        return 0.0
    precision = overlap / len(p)
    recall = overlap / len(r)
    return 2 * precision * recall / (precision + recall)


def boundary_pair_055() -> tuple[str, str]:
    """Strings whose token F1 computes to exactly 0.55 (overlap 11, 20 vs 20 tokens)."""
    shared = [f"tok{i}" for i in range(11)]
    pred = shared + [f"px{i}" for i in range(9)]
    ref = shared + [f"rx{i}" for i in range(9)]
    return " ".join(pred), " ".join(ref)


def draft(question: str, answer: str, ctype=CandidateType.NOUN, caption_id="c1",
          audio_id="a1", origin=None) -> QAPairDraft:
    return QAPairDraft(audio_id=audio_id, caption_id=caption_id, question=question,
                       answer=answer, ctype=ctype,
                       origin_caption_id=origin if origin is not None else caption_id)


class ScriptedQA(MockGateway):
    """Gateway whose answer_question returns a fixed outcome; rest is the mock."""

    def __init__(self, answerable: bool, answer: str):
        super().__init__()
        self._outcome = (answerable, answer)

    def answer_question(self, context, question):
        from aquallm.gateway import QaOutcome
        return QaOutcome(answerable=self._outcome[0], answer=self._outcome[1])


# -- normalization ---------------------------------------------------------------

def test_normalize_drops_article_and_punct():
    assert normalize_answer("The rocks.") == ["rocks"]


def test_normalize_empty():
    assert normalize_answer("") == []
    assert normalize_answer("the a an") == []


def test_normalize_keeps_inner_words():
    assert normalize_answer("Waves of water") == ["waves", "of", "water"]


# -- token F1 ----------------------------------------------------------------------

def test_f1_identity():
    assert token_f1("rocks", "rocks") == 1.0


def test_f1_disjoint():
    assert token_f1("sand", "rocks") == 0.0


def test_f1_partial_overlap():
    assert token_f1("water waves", "waves of water") == pytest.approx(0.8, abs=1e-12)


def test_f1_article_stripped():
    assert token_f1("the rocks", "rocks") == 1.0


def test_f1_both_empty_after_normalization():
    assert token_f1("the", "a .") == 1.0


def test_f1_one_empty():
    assert token_f1("", "rocks") == 0.0
    assert token_f1("rocks", "") == 0.0


def test_f1_multiset_counts():
    # repeated tokens count per the multiset intersection
    assert token_f1("dog dog", "dog") == pytest.approx(2 / 3)


def test_f1_matches_reference_seeded():
    rng = random.Random(99)
    vocab = ["water", "rocks", "dog", "the", "a", "wind,", "Loud!", "bees", "hum", "x1"]
    for _ in range(1000):
        pred = " ".join(rng.choices(vocab, k=rng.randint(0, 6)))
        ref = " ".join(rng.choices(vocab, k=rng.randint(0, 6)))
        assert token_f1(pred, ref) == reference_f1(pred, ref), (pred, ref)


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="abc theAN.,!? ", max_size=30),
       st.text(alphabet="abc theAN.,!? ", max_size=30))
def test_f1_symmetric_and_bounded(a, b):
    f_ab = token_f1(a, b)
    assert 0.0 <= f_ab <= 1.0
    assert f_ab == token_f1(b, a)


@settings(max_examples=100, deadline=None)
@given(st.text(alphabet="xyz rocks water ", min_size=1, max_size=30))
def test_f1_self_is_one_when_nonempty(s):
    if normalize_answer(s):
        assert token_f1(s, s) == 1.0


def test_boundary_pair_is_exact():
    pred, ref = boundary_pair_055()
    assert token_f1(pred, ref) == 0.55


# -- verify_pair ---------------------------------------------------------------------

CAPTION = "Waves of water are rolling against some rocks."


def test_verify_accepts_round_trip(mock_gateway):
    d = draft(QG_TEMPLATE.format(answer="some rocks"), "some rocks")
    result = verify_pair(d, CAPTION, FilterConfig(), mock_gateway)
    assert result.accepted and result.reason is RejectReason.ACCEPTED
    assert result.f1 == 1.0 and result.model_answer == "some rocks"


def test_verify_rejects_unanswerable(mock_gateway):
    d = draft(QG_TEMPLATE.format(answer="sand dunes"), "sand dunes")
    result = verify_pair(d, CAPTION, FilterConfig(), mock_gateway)
    assert not result.accepted and result.reason is RejectReason.UNANSWERABLE


def test_verify_rejects_exact_tau():
    pred, ref = boundary_pair_055()
    gw = ScriptedQA(True, pred)
    d = draft("Whats here?", ref)
    result = verify_pair(d, CAPTION, FilterConfig(tau=0.55), gw)
    assert result.f1 == 0.55
    assert not result.accepted and result.reason is RejectReason.LOW_F1


def test_verify_accepts_just_above_tau():
    gw = ScriptedQA(True, "waves water")
    d = draft("Whats here?", "waves of water")  # f1 = 0.8
    result = verify_pair(d, CAPTION, FilterConfig(tau=0.55), gw)
    assert result.accepted


def test_verify_boolean_yes_with_capable_gateway(mock_gateway):
    q = mock_gateway.generate_boolean_question(CAPTION)
    d = draft(q, "yes", ctype=CandidateType.BOOLEAN_YES)
    result = verify_pair(d, CAPTION, FilterConfig(), mock_gateway)
    assert result.accepted and result.model_answer == "yes"


def test_verify_boolean_yes_rejected_when_clause_absent(mock_gateway):
    q = mock_gateway.generate_boolean_question("A dog barks in the distance.")
    d = draft(q, "yes", ctype=CandidateType.BOOLEAN_YES)
    result = verify_pair(d, CAPTION, FilterConfig(), mock_gateway)
    assert not result.accepted and result.reason is RejectReason.UNANSWERABLE


def test_verify_boolean_yes_passthrough_without_capability(mock_gateway):
    class NoBoolean(MockGateway):
        boolean_capable = False

    q = mock_gateway.generate_boolean_question("A dog barks in the distance.")
    d = draft(q, "yes", ctype=CandidateType.BOOLEAN_YES)
    result = verify_pair(d, CAPTION, FilterConfig(), NoBoolean())
    assert result.accepted  # boolean_passthrough


def test_verify_negative_types_pass_through(mock_gateway):
    d = draft("Is it true that a dog barks?", "no",
              ctype=CandidateType.BOOLEAN_NO, origin="other")
    result = verify_pair(d, CAPTION, FilterConfig(), mock_gateway)
    assert result.accepted


def test_verify_negative_recheck_can_fail(mock_gateway):
    q = mock_gateway.generate_boolean_question(CAPTION)  # true of the caption
    d = draft(q, "no", ctype=CandidateType.BOOLEAN_NO, origin="other")
    result = verify_pair(d, CAPTION, FilterConfig(), mock_gateway, recheck_negatives=True)
    assert not result.accepted and result.reason is RejectReason.NEGATIVE_CHECK_FAILED


def test_verify_gateway_error_reason():
    class Exploding(MockGateway):
        def answer_question(self, context, question):
            from aquallm.gateway import GatewayError
            raise GatewayError("down")

    d = draft("Whats here?", "rocks")
    result = verify_pair(d, CAPTION, FilterConfig(), Exploding())
    assert not result.accepted and result.reason is RejectReason.GATEWAY_ERROR


def test_verification_result_invariant():
    with pytest.raises(ValueError):
        VerificationResult("x", True, 1.0, True, RejectReason.LOW_F1)


# -- filter_pairs ----------------------------------------------------------------------

def test_filter_pairs_mixed(corpus, mock_gateway):
    good = [
        draft(QG_TEMPLATE.format(answer=text), text, caption_id="c1")
        for text in ["Waves", "water", "rolling", "some rocks"]
    ] + [
        draft(QG_TEMPLATE.format(answer=text), text, caption_id="c2",
              ctype=CandidateType.NOUN)
        for text in ["Two dogs", "the yard", "barking", "loudly"]
    ]
    bad = [
        draft(QG_TEMPLATE.format(answer="some rocks"), "pebbles", caption_id="c1"),
        draft(QG_TEMPLATE.format(answer="the yard"), "a garden", caption_id="c2"),
    ]
    accepted, report = filter_pairs(good + bad, corpus, FilterConfig(), mock_gateway)
    assert len(accepted) == 8
    assert report.total == 10 and report.accepted == 8
    assert report.by_reason == {"Accepted": 8, "LowF1": 2}
    assert all(d.verified is not None and d.verified.accepted for d in accepted)
    # input order preserved
    assert [d.question for d in accepted] == [d.question for d in good]


def test_filter_pairs_empty(corpus, mock_gateway):
    accepted, report = filter_pairs([], corpus, FilterConfig(), mock_gateway)
    assert accepted == [] and report.total == 0 and report.by_reason == {}


def test_filter_pairs_tau_one_rejects_everything(corpus, mock_gateway):
    exact = draft(QG_TEMPLATE.format(answer="some rocks"), "some rocks", caption_id="c1")
    partial = draft(QG_TEMPLATE.format(answer="Waves"), "Waves of water", caption_id="c1")
    accepted, report = filter_pairs([exact, partial], corpus, FilterConfig(tau=1.0), mock_gateway)
    # strict ">" means even an exact match cannot clear tau = 1.0
    assert accepted == []
    assert report.by_reason == {"LowF1": 2}


def test_filter_pairs_monotone_in_tau(corpus, mock_gateway):
    rng = random.Random(7)
    words = ["waves", "water", "rolling", "rocks", "some"]
    drafts = []
    for i in range(60):
        answer = " ".join(rng.sample(words, rng.randint(1, 4)))
        drafts.append(draft(QG_TEMPLATE.format(answer="some rocks"), answer, caption_id="c1"))
    keys = []
    for tau in (0.3, 0.55, 0.7):
        accepted, _ = filter_pairs(drafts, corpus, FilterConfig(tau=tau), mock_gateway)
        keys.append({(d.question, d.answer) for d in accepted})
    assert keys[2] <= keys[1] <= keys[0]


def test_filter_pairs_unknown_caption(mock_gateway, corpus):
    stray = draft("Whats here?", "x", caption_id="nope")
    with pytest.raises(ValueError, match="nope"):
        filter_pairs([stray], corpus, FilterConfig(), mock_gateway)


def test_filter_worker_invariance(corpus, mock_gateway):
    drafts = [
        draft(QG_TEMPLATE.format(answer=t), t, caption_id="c1")
        for t in ["Waves", "water", "some rocks", "missing thing"]
    ]
    a1, r1 = filter_pairs(drafts, corpus, FilterConfig(), MockGateway(), workers=1)
    a4, r4 = filter_pairs(drafts, corpus, FilterConfig(), MockGateway(), workers=4)
    assert a1 == a4 and r1.by_reason == r4.by_reason


def test_verified_checkpoint_round_trip(corpus, mock_gateway):
    drafts = [draft(QG_TEMPLATE.format(answer="water"), "water", caption_id="c1")]
    accepted, _ = filter_pairs(drafts, corpus, FilterConfig(), mock_gateway)
    assert load_verified(dump_verified(accepted)) == accepted


def test_rejected_pairs_satisfy_rejection_predicate(corpus, mock_gateway):
    rng = random.Random(11)
    words = ["waves", "water", "rolling", "rocks", "some", "pebble"]
    drafts = [
        draft(QG_TEMPLATE.format(answer="some rocks"), " ".join(rng.sample(words, 3)),
              caption_id="c1")
        for _ in range(30)
    ]
    cfg = FilterConfig(tau=0.55)
    gw = MockGateway()
    accepted_keys = {(d.question, d.answer) for d in filter_pairs(drafts, corpus, cfg, gw)[0]}
    for d in drafts:
        result = verify_pair(d, corpus.captions["c1"].text, cfg, gw)
        if (d.question, d.answer) not in accepted_keys:
            assert (not result.answerable) or result.f1 <= cfg.tau

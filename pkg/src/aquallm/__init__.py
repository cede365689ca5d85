"""aquallm: mine audio-captioning corpora into audio question answering datasets."""

from .annotation_io import (
    AnnotatedCaption,
    Corpus,
    CorpusManifest,
    ManifestEntry,
    Token,
    build_corpus,
    parse_conllu,
    parse_manifest,
)
from .assembly import AQATriplet, DatasetStats, assemble, compute_stats
from .candidates import AnswerCandidate, CandidateType, extract_candidates
from .filtering import FilterConfig, VerificationResult, filter_pairs, normalize_answer, token_f1
from .gateway import GatewayConfig, MockGateway, QaOutcome, create_gateway
from .generation import InjectionConfig, QAPairDraft, generate_all
from .paraphrasing import ParaphraseConfig, expand

__version__ = "0.1.0"

__all__ = [
    "AnnotatedCaption", "Corpus", "CorpusManifest", "ManifestEntry", "Token",
    "build_corpus", "parse_conllu", "parse_manifest",
    "AQATriplet", "DatasetStats", "assemble", "compute_stats",
    "AnswerCandidate", "CandidateType", "extract_candidates",
    "FilterConfig", "VerificationResult", "filter_pairs", "normalize_answer", "token_f1",
    "GatewayConfig", "MockGateway", "QaOutcome", "create_gateway",
    "InjectionConfig", "QAPairDraft", "generate_all",
    "ParaphraseConfig", "expand",
    "__version__",
]

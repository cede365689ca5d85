"""Stage-oriented command-line driver with checkpoints and resume.

Stages run in a fixed order, each coupling to the next only through its
checkpoint file in the workdir; a run ledger of content hashes makes
--resume safe over corpora where model calls are expensive.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import annotation_io, assembly, candidates, filtering, generation, paraphrasing
from .gateway import GatewayConfig, ModelGateway, create_gateway
from .prng import PRNG_ALGORITHM

logger = logging.getLogger("aquallm")

STAGES = ("ingest", "extract", "generate", "filter", "paraphrase", "assemble", "stats")

CHECKPOINTS = {
    "ingest": "01_corpus",
    "extract": "02_candidates.jsonl",
    "generate": "03_drafts.jsonl",
    "filter": "04_filtered.jsonl",
    "paraphrase": "05_paraphrased.jsonl",
    "assemble": "06_dataset.jsonl",
    "stats": "07_stats.json",
}

FILTER_REPORT_NAME = "04_filter_report.json"
LEDGER_NAME = "run.json"
LOCK_NAME = ".lock"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_STAGE = 2


class ConfigError(ValueError):
    """Invalid pipeline configuration document."""


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str) -> None:
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass(frozen=True)
class PipelineConfig:
    gateway: GatewayConfig
    filter: filtering.FilterConfig
    injection: generation.InjectionConfig
    paraphrase: paraphrasing.ParaphraseConfig
    workdir: Path | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


def _check_keys(section: str, doc: dict, allowed: tuple[str, ...]) -> None:
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        where = f"{section}." if section else ""
        raise ConfigError(f"unknown config key {where}{unknown[0]!r}")


def load_config(data: bytes | str) -> PipelineConfig:
    """Parse a JSON config document; missing fields take the documented defaults."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data) if data.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys("", doc, ("gateway", "filter", "injection", "paraphrase", "workdir", "workers"))

    def section(name: str, allowed: tuple[str, ...]) -> dict:
        sub = doc.get(name, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"config section {name!r} must be an object")
        _check_keys(name, sub, allowed)
        return sub

    try:
        gateway = GatewayConfig(**section("gateway", (
            "endpoint", "timeout", "max_retries", "backoff_base", "cache_dir", "max_in_flight")))
        fcfg = filtering.FilterConfig(**section("filter", ("tau",)))
        icfg = generation.InjectionConfig(**section("injection", (
            "zero_per_audio", "seed", "verify_negatives")))
        pcfg = paraphrasing.ParaphraseConfig(**section("paraphrase", ("k", "reverify")))
        workers = doc.get("workers", 1)
        if not isinstance(workers, int):
            raise ConfigError("workers must be an integer")
        workdir = Path(doc["workdir"]) if "workdir" in doc else None
        return PipelineConfig(
            gateway=gateway, filter=fcfg, injection=icfg, paraphrase=pcfg,
            workdir=workdir, workers=workers,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _config_fingerprint(cfg: PipelineConfig) -> str:
    doc = {
        "gateway": {
            "endpoint": cfg.gateway.endpoint,
            "timeout": cfg.gateway.timeout,
            "max_retries": cfg.gateway.max_retries,
            "backoff_base": cfg.gateway.backoff_base,
            "cache_dir": cfg.gateway.cache_dir,
            "max_in_flight": cfg.gateway.max_in_flight,
        },
        "filter": {"tau": cfg.filter.tau},
        "injection": {
            "zero_per_audio": cfg.injection.zero_per_audio,
            "seed": cfg.injection.seed,
            "verify_negatives": cfg.injection.verify_negatives,
        },
        "paraphrase": {"k": cfg.paraphrase.k, "reverify": cfg.paraphrase.reverify},
        "workers_ignored": None,  # worker count never changes output bytes
        "prng": PRNG_ALGORITHM,
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8", newline="")
    tmp.replace(path)


class PipelineRunner:
    """Owns one workdir and executes stages against it."""

    def __init__(self, cfg: PipelineConfig, workdir: Path,
                 manifest_path: Path | None = None, conllu_path: Path | None = None,
                 source_name: str = "") -> None:
        self.cfg = cfg
        self.workdir = workdir
        self.manifest_path = manifest_path
        self.conllu_path = conllu_path
        self.source_name = source_name
        self._gateway: ModelGateway | None = None
        self._config_hash = _config_fingerprint(cfg)

    # -- shared plumbing ------------------------------------------------

    @property
    def gateway(self) -> ModelGateway:
        if self._gateway is None:
            self._gateway = create_gateway(self.cfg.gateway)
        return self._gateway

    def checkpoint(self, stage: str) -> Path:
        return self.workdir / CHECKPOINTS[stage]

    def _require(self, stage: str, prerequisite: str) -> Path:
        path = self.checkpoint(prerequisite)
        if not path.exists():
            raise StageError(stage, f"missing prerequisite checkpoint {path.name}")
        return path

    def _load_corpus(self, stage: str) -> annotation_io.Corpus:
        path = self._require(stage, "ingest")
        return annotation_io.corpus_from_json(path.read_text(encoding="utf-8"))

    def stage_inputs(self, stage: str) -> list[Path]:
        if stage == "ingest":
            if self.manifest_path is None or self.conllu_path is None:
                raise StageError(stage, "manifest and conllu paths are required")
            return [self.manifest_path, self.conllu_path]
        previous = {
            "extract": ["ingest"],
            "generate": ["ingest", "extract"],
            "filter": ["ingest", "generate"],
            "paraphrase": ["ingest", "filter"],
            "assemble": ["ingest", "paraphrase"],
            "stats": ["ingest", "assemble"],
        }[stage]
        return [self.checkpoint(p) for p in previous]

    def fingerprint(self, stage: str) -> str:
        hasher = hashlib.sha256()
        hasher.update(self._config_hash.encode("ascii"))
        for path in self.stage_inputs(stage):
            if not path.exists():
                raise StageError(stage, f"missing input file {path}")
            hasher.update(b"\x00")
            hasher.update(_file_hash(path).encode("ascii"))
        return hasher.hexdigest()

    # -- ledger -----------------------------------------------------------

    def _ledger_path(self) -> Path:
        return self.workdir / LEDGER_NAME

    def read_ledger(self) -> dict:
        path = self._ledger_path()
        if not path.exists():
            return {"config_hash": self._config_hash, "stages": {}}
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            return {"config_hash": self._config_hash, "stages": {}}

    def record_stage(self, stage: str, fingerprint: str) -> None:
        ledger = self.read_ledger()
        ledger["config_hash"] = self._config_hash
        ledger["prng"] = PRNG_ALGORITHM
        ledger.setdefault("stages", {})[stage] = {
            "fingerprint": fingerprint,
            "output": CHECKPOINTS[stage],
        }
        _write_atomic(self._ledger_path(), json.dumps(ledger, sort_keys=True, indent=2) + "\n")

    # -- the stages -------------------------------------------------------

    def run_stage(self, stage: str) -> None:
        out_path = self.checkpoint(stage)
        fingerprint = self.fingerprint(stage)
        logger.info("stage %s: running", stage)
        try:
            text = getattr(self, f"_stage_{stage}")()
            _write_atomic(out_path, text)
        except StageError:
            out_path.unlink(missing_ok=True)
            raise
        except Exception as exc:
            out_path.unlink(missing_ok=True)
            raise StageError(stage, str(exc)) from exc
        self.record_stage(stage, fingerprint)
        logger.info("stage %s: wrote %s", stage, out_path.name)

    def _stage_ingest(self) -> str:
        assert self.manifest_path is not None and self.conllu_path is not None
        manifest = annotation_io.parse_manifest(self.manifest_path.read_bytes())
        if self.source_name:
            manifest = annotation_io.CorpusManifest(
                entries=manifest.entries, source_name=self.source_name)
        captions = annotation_io.parse_conllu(self.conllu_path.read_bytes())
        corpus = annotation_io.build_corpus(manifest, captions)
        return annotation_io.corpus_to_json(corpus)

    def _stage_extract(self) -> str:
        corpus = self._load_corpus("extract")
        out: list[candidates.AnswerCandidate] = []
        for caption in corpus.iter_captions():
            out.extend(candidates.extract_candidates(caption))
        return candidates.dump_candidates(out)

    def _stage_generate(self) -> str:
        corpus = self._load_corpus("generate")
        cand_path = self._require("generate", "extract")
        cands = candidates.load_candidates(cand_path.read_text(encoding="utf-8"))
        per_caption: dict[str, list[candidates.AnswerCandidate]] = {}
        for cand in cands:
            per_caption.setdefault(cand.caption_id, []).append(cand)
        drafts, report = generation.generate_all(
            corpus, per_caption, self.cfg.injection, self.gateway, self.cfg.workers)
        logger.info("generate: %d drafts (per type: %s)", len(drafts), report.by_ctype)
        return generation.dump_drafts(drafts)

    def _stage_filter(self) -> str:
        corpus = self._load_corpus("filter")
        drafts_path = self._require("filter", "generate")
        drafts = generation.load_drafts(drafts_path.read_text(encoding="utf-8"))
        accepted, report = filtering.filter_pairs(
            drafts, corpus, self.cfg.filter, self.gateway, self.cfg.workers)
        _write_atomic(self.workdir / FILTER_REPORT_NAME, report.to_json())
        logger.info("filter: accepted %d/%d", report.accepted, report.total)
        return filtering.dump_verified(accepted)

    def _stage_paraphrase(self) -> str:
        corpus = self._load_corpus("paraphrase")
        accepted_path = self._require("paraphrase", "filter")
        accepted = filtering.load_verified(accepted_path.read_text(encoding="utf-8"))
        expanded = paraphrasing.expand(
            accepted, corpus, self.cfg.paraphrase, self.cfg.filter, self.gateway,
            self.cfg.workers)
        logger.info("paraphrase: %d -> %d pairs", len(accepted), len(expanded))
        return generation.dump_drafts(expanded, include_paraphrase_of=True)

    def _stage_assemble(self) -> str:
        corpus = self._load_corpus("assemble")
        pairs_path = self._require("assemble", "paraphrase")
        pairs = generation.load_drafts(pairs_path.read_text(encoding="utf-8"))
        triplets = assembly.assemble(pairs, corpus)
        logger.info("assemble: %d triplets", len(triplets))
        return assembly.export_triplets_str(triplets, "jsonl")

    def _stage_stats(self) -> str:
        corpus = self._load_corpus("stats")
        dataset_path = self._require("stats", "assemble")
        triplets = assembly.import_triplets(dataset_path.read_text(encoding="utf-8"))
        stats = assembly.compute_stats(triplets, corpus)
        return stats.to_json()

    # -- orchestration ------------------------------------------------------

    def run_all(self, resume: bool = False) -> None:
        ledger = self.read_ledger() if resume else {"stages": {}}
        recorded = ledger.get("stages", {})
        rerun = not resume
        for stage in STAGES:
            if not rerun:
                entry = recorded.get(stage)
                try:
                    current = self.fingerprint(stage)
                except StageError:
                    current = None
                if (entry and current is not None
                        and entry.get("fingerprint") == current
                        and self.checkpoint(stage).exists()):
                    logger.info("stage %s: up to date, skipped", stage)
                    continue
                rerun = True
            self.run_stage(stage)


class WorkdirLock:
    """One pipeline run owns its workdir exclusively."""

    def __init__(self, workdir: Path) -> None:
        self.path = workdir / LOCK_NAME

    def __enter__(self) -> "WorkdirLock":
        try:
            with open(self.path, "x", encoding="utf-8") as fh:
                fh.write("locked\n")
        except FileExistsError:
            raise StageError("lock", f"workdir is locked ({self.path} exists); "
                                     "remove it if no other run is active") from None
        return self

    def __exit__(self, *exc_info) -> None:
        self.path.unlink(missing_ok=True)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> "None":  # exit 1 on usage errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="aquallm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, with_inputs: bool = False) -> None:
        p.add_argument("--workdir", required=True, type=Path)
        p.add_argument("--config", type=Path, default=None)
        p.add_argument("--gateway-endpoint", default=None,
                       help="override the configured gateway endpoint")
        if with_inputs:
            p.add_argument("--manifest", required=True, type=Path)
            p.add_argument("--conllu", required=True, type=Path)
            p.add_argument("--source-name", default="")

    run_p = sub.add_parser("run", help="execute all stages in order")
    common(run_p, with_inputs=True)
    run_p.add_argument("--resume", action="store_true",
                       help="skip stages whose checkpoints are up to date")

    ingest_p = sub.add_parser("ingest", help="parse manifest + annotations into a corpus")
    common(ingest_p, with_inputs=True)

    for stage in STAGES[1:]:
        common(sub.add_parser(stage, help=f"run only the {stage} stage"))

    export_p = sub.add_parser("export", help="export the assembled dataset")
    common(export_p)
    export_p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    export_p.add_argument("--out", type=Path, default=None,
                          help="output file (default: standard output)")
    return parser


def _load_cli_config(args: argparse.Namespace) -> PipelineConfig:
    if args.config is not None:
        try:
            raw = args.config.read_bytes()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        cfg = load_config(raw)
    else:
        cfg = load_config("{}")
    if args.gateway_endpoint:
        gw = GatewayConfig(
            endpoint=args.gateway_endpoint,
            timeout=cfg.gateway.timeout,
            max_retries=cfg.gateway.max_retries,
            backoff_base=cfg.gateway.backoff_base,
            cache_dir=cfg.gateway.cache_dir,
            max_in_flight=cfg.gateway.max_in_flight,
        )
        cfg = PipelineConfig(
            gateway=gw, filter=cfg.filter, injection=cfg.injection,
            paraphrase=cfg.paraphrase, workdir=cfg.workdir, workers=cfg.workers,
        )
    return cfg


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        cfg = _load_cli_config(args)
    except ConfigError as exc:
        print(f"aquallm: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    workdir: Path = args.workdir
    workdir.mkdir(parents=True, exist_ok=True)
    runner = PipelineRunner(
        cfg, workdir,
        manifest_path=getattr(args, "manifest", None),
        conllu_path=getattr(args, "conllu", None),
        source_name=getattr(args, "source_name", ""),
    )

    try:
        with WorkdirLock(workdir):
            if args.command == "run":
                runner.run_all(resume=args.resume)
            elif args.command == "export":
                dataset = runner._require("export", "assemble")
                triplets = assembly.import_triplets(dataset.read_text(encoding="utf-8"))
                text = assembly.export_triplets_str(triplets, args.format)
                if args.out is None:
                    sys.stdout.write(text)
                else:
                    args.out.write_text(text, encoding="utf-8", newline="")
                    logger.info("export: wrote %d triplets to %s", len(triplets), args.out)
            else:
                runner.run_stage(args.command)
                if args.command == "stats":
                    sys.stdout.write(runner.checkpoint("stats").read_text(encoding="utf-8"))
    except StageError as exc:
        print(f"aquallm: stage failure: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

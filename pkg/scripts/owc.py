import argparse
import asyncio
import json
import logging
import os
import sys
from typing import Any, List, Optional, Sequence, Tuple

from owclib.aggregate import (
    AggregateLevel,
    aggregate,
    aggregate_groups,
    class_quadrant_points,
    quadrant_stats,
    select_variant,
)
from owclib.agreement import agreement_summary
from owclib.auditlog import AuditLog, AuditReplay
from owclib.conceptsplitter import (
    ConceptSplitter,
    NgramConceptSplitter,
    PrecomputedConceptSplitter,
    SplitterMode,
)
from owclib.config import (
    DEFAULT_MAX_PROMPT_CHARS,
    ENV_EMBED_ENDPOINT,
    ENV_EMBED_MODEL,
    ENV_JUDGE_ENDPOINT,
    ENV_JUDGE_MODEL,
    ENV_LOG_LEVEL,
    AgreementBase,
    BackendDescriptor,
    BackendKind,
    RunConfig,
    TiMode,
    WrongBy,
)
from owclib.delta import delta_report, parse_model_map
from owclib.elo import elo_report_from_dict, run_elo
from owclib.embeddings import (
    Embeddings,
    MockEmbeddingService,
    OpenAIEmbeddingService,
    ReplayEmbeddingService,
)
from owclib.errors import EXIT_BACKEND, EXIT_GENERIC, EXIT_IO, AnalysisError, ConfigError, OwcError
from owclib.judges import Judge, MockJudgeService, OpenAIJudgeService, ReplayJudgeService
from owclib.loaders import (
    load_manifest,
    load_predictions,
    load_published_table,
    load_splits,
    load_tags,
)
from owclib.records import (
    DEFAULT_VARIANT,
    KNOWN_DATASET_GROUPS,
    EloConfig,
    PredictionRecord,
    SampleRecord,
    ThresholdConfig,
    validate_run_bundle,
)
from owclib.report import (
    ReportBundle,
    agreement_sections,
    aggregate_section,
    class_points_section,
    delta_section,
    elo_section,
    quadrant_section,
    tagmatch_section,
)
from owclib.runstore import RunStore
from owclib.scorestrategy import ScoreStrategy
from owclib.tagmatch import tag_match, tag_match_report_from_dict
from owclib.templates import render_catalogue, render_stopwords

logger = logging.getLogger("owc")

MOCK_EMBED_MODEL = "mock-trigram-256"
MOCK_JUDGE_MODEL = "mock-rules"
ELO_ANALYSIS = "elo.json"
TAGMATCH_ANALYSIS = "tagmatch.json"


def configure_logging(verbose: bool):
    level = logging.INFO if verbose else os.getenv(ENV_LOG_LEVEL, "WARNING").upper()
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(level)


def load_samples(paths: Sequence[str]) -> List[SampleRecord]:
    samples: List[SampleRecord] = []
    for path in paths:
        samples.extend(load_manifest(path).samples)
    return samples


def load_all_predictions(paths: Sequence[str]) -> List[PredictionRecord]:
    predictions: List[PredictionRecord] = []
    for path in paths:
        predictions.extend(load_predictions(path))
    return predictions


def samples_for(args: Any, run_store: RunStore) -> List[SampleRecord]:
    if args.samples:
        return load_samples(args.samples)
    samples = run_store.read_samples()
    if not samples:
        raise ConfigError(f"No --samples given and run store {run_store.root} holds no samples")
    return samples


def backend_descriptors(args: Any) -> Tuple[BackendDescriptor, BackendDescriptor]:
    embed_model = args.embed_model or os.getenv(ENV_EMBED_MODEL)
    judge_model = args.judge_model or os.getenv(ENV_JUDGE_MODEL)
    if args.replay_audit:
        embed_kind, judge_kind = BackendKind.ReplayEmbed, BackendKind.ReplayJudge
    elif args.mock:
        embed_kind, judge_kind = BackendKind.MockEmbed, BackendKind.MockJudge
    else:
        embed_kind, judge_kind = BackendKind.RemoteEmbed, BackendKind.RemoteJudge
        if not embed_model or not judge_model:
            raise ConfigError(
                f"Remote backends need --embed-model/{ENV_EMBED_MODEL} and --judge-model/{ENV_JUDGE_MODEL}"
            )
    common = {"parallelism": args.parallelism, "timeout_ms": args.timeout_ms, "seed": args.seed}
    embed = BackendDescriptor(
        embed_kind,
        embed_model or MOCK_EMBED_MODEL,
        endpoint=args.embed_endpoint or os.getenv(ENV_EMBED_ENDPOINT),
        **common,
    )
    judge = BackendDescriptor(
        judge_kind,
        judge_model or MOCK_JUDGE_MODEL,
        endpoint=args.judge_endpoint or os.getenv(ENV_JUDGE_ENDPOINT),
        **common,
    )
    return embed, judge


class Backends:
    """The embedder and judge of one CLI run, with the audit log or replay they share."""

    def __init__(self, args: Any):
        self.embed_descriptor, self.judge_descriptor = backend_descriptors(args)
        self.audit_log = AuditLog(args.audit_log) if args.audit_log else None
        replay = AuditReplay.load(args.replay_audit) if args.replay_audit else None

        self.embedder: Embeddings
        if self.embed_descriptor.kind == BackendKind.ReplayEmbed:
            assert replay is not None
            self.embedder = ReplayEmbeddingService(self.embed_descriptor, replay)
        elif self.embed_descriptor.kind == BackendKind.MockEmbed:
            self.embedder = MockEmbeddingService(self.embed_descriptor, self.audit_log)
        else:
            self.embedder = OpenAIEmbeddingService(self.embed_descriptor, self.audit_log, verbose=args.verbose)

        self.judge_rules_digest = ""
        self.judge: Judge
        if self.judge_descriptor.kind == BackendKind.ReplayJudge:
            assert replay is not None
            self.judge = ReplayJudgeService(self.judge_descriptor, replay)
        elif self.judge_descriptor.kind == BackendKind.MockJudge:
            rules = MockJudgeService.load_rules(args.mock_judge_rules) if args.mock_judge_rules else {}
            mock_judge = MockJudgeService.from_dict(self.judge_descriptor, rules, self.audit_log)
            self.judge_rules_digest = mock_judge.digest()
            self.judge = mock_judge
        else:
            self.judge = OpenAIJudgeService(self.judge_descriptor, self.audit_log, verbose=args.verbose)


def thresholds_from(args: Any) -> ThresholdConfig:
    return ThresholdConfig(
        cs_threshold=args.cs_threshold,
        li_threshold=args.li_threshold,
        tag_match_threshold=args.tag_match_threshold,
    )


def splitter_from(args: Any) -> ConceptSplitter:
    mode = SplitterMode(args.splitter)
    if mode == SplitterMode.BuiltinNgram:
        return NgramConceptSplitter()
    if not args.splits:
        raise ConfigError("--splitter external_precomputed requires --splits")
    return PrecomputedConceptSplitter(load_splits(args.splits))


def run_config_from(args: Any, backends: Backends) -> RunConfig:
    return RunConfig(
        embed=backends.embed_descriptor,
        judge=backends.judge_descriptor,
        thresholds=thresholds_from(args),
        elo=EloConfig(
            initial_rating=getattr(args, "initial_rating", EloConfig.initial_rating),
            k_factor=getattr(args, "k_factor", EloConfig.k_factor),
            pairs_per_dataset=getattr(args, "pairs_per_dataset", EloConfig.pairs_per_dataset),
            seed=args.seed,
        ),
        ti_mode=TiMode(args.ti_mode),
        splitter_mode=SplitterMode(args.splitter),
        max_prompt_chars=args.max_prompt_chars,
        seed=args.seed,
        judge_rules_digest=backends.judge_rules_digest,
    )


def log_effective_config(args: Any, run_config: Optional[RunConfig] = None):
    flags = {name: value for name, value in sorted(vars(args).items()) if name != "func"}
    effective = {"flags": flags, "run_config": run_config.snapshot() if run_config else None}
    logger.info("Effective configuration: %s", json.dumps(effective, sort_keys=True, default=str))


def emit(bundle: ReportBundle, out_dir: Optional[str]):
    print(bundle.to_markdown(), end="")
    if out_dir:
        bundle.write(out_dir)


async def cmd_score(args: Any) -> int:
    samples = load_samples(args.samples)
    predictions = load_all_predictions(args.predictions)
    for diagnostic in validate_run_bundle(samples, predictions):
        logger.warning("%s", diagnostic)

    backends = Backends(args)
    run_config = run_config_from(args, backends)
    log_effective_config(args, run_config)
    strategy = ScoreStrategy(
        samples,
        predictions,
        backends.embedder,
        backends.judge,
        splitter_from(args),
        run_config,
        parallelism=args.parallelism,
        limit=args.limit,
        force_resume=args.force_resume,
    )
    run_store = RunStore(args.store_dir)
    await strategy.setup(run_store)
    summary = await strategy.run(run_store)
    print(summary.describe())
    exit_code = summary.failure_exit_code()
    if exit_code is not None and not args.allow_partial:
        return exit_code
    return 0


def report_from_published(args: Any) -> ReportBundle:
    dataset_table = load_published_table(args.published_csv)
    group_table = aggregate_groups(dataset_table, KNOWN_DATASET_GROUPS)
    bundle = ReportBundle("Published results")
    if args.level in ("dataset", "both"):
        bundle.sections.append(aggregate_section(dataset_table, "datasets", "Results per dataset"))
    if args.level in ("group", "both"):
        bundle.sections.append(aggregate_section(group_table, "groups", "Results averaged on the grouped datasets"))
    return bundle


def report_from_store(args: Any) -> ReportBundle:
    run_store = RunStore(args.store_dir)
    scores = select_variant(run_store.require_scores(), args.variant)
    failed = [score for score in scores if score.failed]
    if failed and not args.allow_partial:
        raise AnalysisError(
            f"{len(failed)} scores failed in {run_store.root}; rerun `owc score` or pass --allow-partial"
        )
    samples = run_store.read_samples()
    thresholds = thresholds_from(args)
    bundle = ReportBundle(f"Open-world results ({args.variant})")
    levels = [AggregateLevel.Dataset, AggregateLevel.Group] if args.level == "both" else [AggregateLevel(args.level)]
    for level in levels:
        scope = "datasets" if level == AggregateLevel.Dataset else "groups"
        bundle.sections.append(
            aggregate_section(aggregate(scores, samples, level), scope, f"Metrics per {level.value}")
        )
        bundle.sections.append(
            quadrant_section(
                quadrant_stats(scores, samples, thresholds, level),
                f"quadrants_{scope}",
                f"Prediction types per {level.value}",
            )
        )
    bundle.sections.append(class_points_section(class_quadrant_points(scores, samples, thresholds)))
    if len({score.model_id for score in scores}) >= 2:
        summary = agreement_summary(scores, AgreementBase(args.agreement_base), thresholds)
        bundle.sections.extend(agreement_sections(summary))
    stored = run_store.read_analysis(ELO_ANALYSIS)
    if stored is not None:
        bundle.sections.append(elo_section(elo_report_from_dict(stored)))
    stored = run_store.read_analysis(TAGMATCH_ANALYSIS)
    if stored is not None:
        bundle.sections.append(tagmatch_section(tag_match_report_from_dict(stored)))
    return bundle


async def cmd_report(args: Any) -> int:
    log_effective_config(args)
    if args.published_csv:
        bundle = report_from_published(args)
        out_dir = args.out_dir
    else:
        bundle = report_from_store(args)
        out_dir = args.out_dir or os.path.join(args.store_dir, "report")
    emit(bundle, out_dir)
    return 0


async def cmd_elo(args: Any) -> int:
    run_store = RunStore(args.store_dir)
    samples = samples_for(args, run_store)
    predictions = load_all_predictions(args.predictions)
    backends = Backends(args)
    run_config = run_config_from(args, backends)
    log_effective_config(args, run_config)
    report = await run_elo(
        predictions,
        samples,
        backends.judge,
        run_config.elo,
        variant_id=args.variant,
        parallelism=args.parallelism,
        max_prompt_chars=args.max_prompt_chars,
    )
    if run_store.exists():
        run_store.write_analysis(ELO_ANALYSIS, report.to_dict())
    emit(ReportBundle("Elo ranking", [elo_section(report)]), args.out_dir)
    return 0


async def cmd_agree(args: Any) -> int:
    log_effective_config(args)
    run_store = RunStore(args.store_dir)
    scores = select_variant(run_store.require_scores(), args.variant)
    summary = agreement_summary(scores, AgreementBase(args.agreement_base), thresholds_from(args))
    emit(ReportBundle("Agreement", agreement_sections(summary)), args.out_dir)
    return 0


async def cmd_tagmatch(args: Any) -> int:
    run_store = RunStore(args.store_dir)
    scores = select_variant(run_store.require_scores(), args.variant)
    predictions = load_all_predictions(args.predictions)
    tags = load_tags(args.tags)
    backends = Backends(args)
    log_effective_config(args, run_config_from(args, backends))
    report = await tag_match(
        scores,
        predictions,
        tags,
        backends.embedder,
        thresholds_from(args),
        splitter_from(args),
        WrongBy(args.wrong_by),
    )
    if run_store.exists():
        run_store.write_analysis(TAGMATCH_ANALYSIS, report.to_dict())
    emit(ReportBundle("Tag matching", [tagmatch_section(report)]), args.out_dir)
    if report.failures and not args.allow_partial:
        return EXIT_BACKEND
    return 0


async def cmd_delta(args: Any) -> int:
    log_effective_config(args)
    base_store = RunStore(args.store_dir)
    variant_store = RunStore(args.variant_store_dir or args.store_dir)
    base_scores = select_variant(base_store.require_scores(), args.base_variant)
    variant_scores = select_variant(variant_store.require_scores(), args.variant)
    try:
        model_map = parse_model_map(args.model_map or [])
    except ValueError as error:
        raise ConfigError(str(error)) from error
    samples = base_store.read_samples() + variant_store.read_samples()
    report = delta_report(base_scores, variant_scores, samples, thresholds_from(args), model_map or None)
    title = f"Deltas {args.variant} vs {args.base_variant} (percentage points)"
    emit(ReportBundle("Deltas", [delta_section(report, title)]), args.out_dir)
    return 0


async def cmd_templates(args: Any) -> int:
    log_effective_config(args)
    print(render_stopwords() if args.stopwords else render_catalogue(), end="")
    return 0


async def cmd_validate(args: Any) -> int:
    log_effective_config(args)
    samples = load_samples(args.samples)
    predictions = load_all_predictions(args.predictions)
    diagnostics = validate_run_bundle(samples, predictions)
    for diagnostic in diagnostics:
        print(diagnostic)
    print(f"{len(samples)} samples, {len(predictions)} predictions, {len(diagnostics)} diagnostics")
    return EXIT_IO if diagnostics else 0


def common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--store-dir", default="owc-run", help="Run store directory (default: owc-run)")
    common.add_argument("--out-dir", help="Also write report.md and per-section CSV/JSON files here")
    common.add_argument("--seed", type=int, default=0, help="Seed of mock backends and Elo sampling")
    common.add_argument("--mock", action="store_true", help="Use the in-process mock embedder and rule-table judge")
    common.add_argument("--parallelism", type=int, default=4, help="Maximum concurrent backend requests")
    common.add_argument("--timeout-ms", type=int, default=30000, help="Per-request backend timeout")
    common.add_argument("--ti-mode", choices=[mode.value for mode in TiMode], default=TiMode.Token.value)
    common.add_argument(
        "--agreement-base", choices=[base.value for base in AgreementBase], default=AgreementBase.Jaccard.value
    )
    common.add_argument("--wrong-by", choices=[by.value for by in WrongBy], default=WrongBy.LI.value)
    common.add_argument("--allow-partial", action="store_true", help="Exit 0 even when some records failed")
    common.add_argument("--variant", default=DEFAULT_VARIANT, help="Prompt variant to analyze")
    common.add_argument("--embed-endpoint", help=f"OpenAI-compatible embeddings base URL (env {ENV_EMBED_ENDPOINT})")
    common.add_argument("--judge-endpoint", help=f"OpenAI-compatible chat base URL (env {ENV_JUDGE_ENDPOINT})")
    common.add_argument("--embed-model", help=f"Embedding model name (env {ENV_EMBED_MODEL})")
    common.add_argument("--judge-model", help=f"Judge model name (env {ENV_JUDGE_MODEL})")
    common.add_argument("--mock-judge-rules", help="JSON rule table for the mock judge")
    common.add_argument("--audit-log", help="Append every backend request and reply to this JSONL file")
    common.add_argument("--replay-audit", help="Answer backend requests from an audit log instead of the network")
    common.add_argument("--cs-threshold", type=float, default=ThresholdConfig.cs_threshold)
    common.add_argument("--li-threshold", type=float, default=ThresholdConfig.li_threshold)
    common.add_argument("--tag-match-threshold", type=float, default=ThresholdConfig.tag_match_threshold)
    common.add_argument("--max-prompt-chars", type=int, default=DEFAULT_MAX_PROMPT_CHARS)
    common.add_argument(
        "--splitter", choices=[mode.value for mode in SplitterMode], default=SplitterMode.BuiltinNgram.value
    )
    common.add_argument("--splits", help="Precomputed concept spans (JSONL), for --splitter external_precomputed")
    common.add_argument("--verbose", "-v", action="store_true", help="Verbose output")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="owc",
        description="Score free-form image classifier outputs with open-world metrics and analyze the results.",
        epilog="Example: owc.py score --samples c101.jsonl --predictions preds.jsonl --mock --store-dir run",
    )
    common = common_parser()
    commands = parser.add_subparsers(dest="command", required=True)

    score = commands.add_parser("score", parents=[common], help="Compute TI, LI, SS and CS for every prediction")
    score.add_argument("--samples", action="append", required=True, help="Dataset manifest (repeatable)")
    score.add_argument("--predictions", action="append", required=True, help="Predictions JSONL (repeatable)")
    score.add_argument("--force-resume", action="store_true", help="Resume even if the configuration changed")
    score.add_argument("--limit", type=int, help="Score at most this many pending predictions")
    score.set_defaults(func=cmd_score)

    report = commands.add_parser("report", parents=[common], help="Render aggregate tables from a run store")
    report.add_argument("--level", choices=["dataset", "group", "both"], default="both")
    report.add_argument("--published-csv", help="Render published per-dataset results instead of a run store")
    report.set_defaults(func=cmd_report)

    elo = commands.add_parser("elo", parents=[common], help="Rank models from pairwise judge verdicts")
    elo.add_argument("--samples", action="append", help="Dataset manifest (default: samples in the run store)")
    elo.add_argument("--predictions", action="append", required=True, help="Predictions JSONL (repeatable)")
    elo.add_argument("--k-factor", type=float, default=EloConfig.k_factor)
    elo.add_argument("--initial-rating", type=float, default=EloConfig.initial_rating)
    elo.add_argument("--pairs-per-dataset", type=int, default=EloConfig.pairs_per_dataset)
    elo.set_defaults(func=cmd_elo)

    agree = commands.add_parser("agree", parents=[common], help="Agreement buckets and pairwise agreement")
    agree.set_defaults(func=cmd_agree)

    tagmatch = commands.add_parser("tagmatch", parents=[common], help="Match wrong predictions against image tags")
    tagmatch.add_argument("--predictions", action="append", required=True, help="Predictions JSONL (repeatable)")
    tagmatch.add_argument("--tags", required=True, help="Per-image tags JSONL")
    tagmatch.set_defaults(func=cmd_tagmatch)

    delta = commands.add_parser("delta", parents=[common], help="Compare a prompt variant or model pair")
    delta.add_argument("--base-variant", default=DEFAULT_VARIANT)
    delta.add_argument("--variant-store-dir", help="Run store holding the variant scores (default: --store-dir)")
    delta.add_argument("--model-map", action="append", help="BASE=VARIANT model pair (repeatable)")
    delta.set_defaults(func=cmd_delta)

    templates = commands.add_parser("templates", parents=[common], help="Print the prompt variant catalogue")
    templates.add_argument("--stopwords", action="store_true", help="Print the stopword list instead")
    templates.set_defaults(func=cmd_templates)

    validate = commands.add_parser("validate", parents=[common], help="Check a bundle without scoring it")
    validate.add_argument("--samples", action="append", required=True, help="Dataset manifest (repeatable)")
    validate.add_argument("--predictions", action="append", required=True, help="Predictions JSONL (repeatable)")
    validate.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return asyncio.run(args.func(args))
    except OwcError as error:
        print(f"Error: {error}", file=sys.stderr)
        return error.exit_code
    except Exception:
        logger.exception("Unexpected failure")
        return EXIT_GENERIC


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point.

Subcommands cover the whole workflow: generate, detect, evaluate, redact,
judge, stats, annotate. Settings come from an optional JSON config file
overridden by flags; the effective configuration is echoed to stderr at
startup. Output files are written atomically, and with the scripted
provider plus a fixed seed every run is byte-identical.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import uvicorn

from .dataset import (
    DatasetParseError,
    DatasetValidationError,
    atomic_write_text,
    compute_stats,
    format_stats_table,
    load_dataset,
    save_dataset,
    stats_to_record,
)
from .detector import (
    DetectionParseError,
    detect_llm,
    detect_rules,
    load_predictions,
    localize_predictions,
    prediction_to_record,
)
from .gateway import (
    ENDPOINT_ENV,
    Gateway,
    HttpProvider,
    LlmParams,
    MockProvider,
    ProviderError,
)
from .judge import InvalidInputError, VerdictParseError, run_utility_eval
from .judge import report_to_record as utility_report_to_record
from .metrics import (
    MatchConfig,
    UnknownSampleIdError,
    compute_metrics,
    dumps_report,
    format_report_table,
)
from .model import PiiSpan
from .offline import ScriptedProvider
from .redact import MaskStrategy, RangeOutOfBoundsError, redact_context
from .review import ReviewStore, create_app
from .synth import (
    EmptyQuestionError,
    PiiDroppedError,
    PiiFormatError,
    ReconcileFailureError,
    generate_dataset,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_PROVIDER = 4
EXIT_DETECT = 5
EXIT_METRICS = 6
EXIT_REDACT = 7
EXIT_SYNTH = 8
EXIT_JUDGE = 9
EXIT_CONFIG = 10


class ConfigError(ValueError):
    """Config file missing, malformed, or holding unknown keys."""


@dataclasses.dataclass(slots=True)
class RunConfig:
    provider: str = "scripted"
    model: str = "mock"
    endpoint: str | None = None
    seed: int = 0
    parallel: int = 4
    match_threshold: float = 0.5
    run_log: str | None = None
    fixtures: str | None = None


_CONFIG_KEYS = {f.name for f in dataclasses.fields(RunConfig)}


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        return RunConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def merge_flags(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Flags override file values; only flags the user actually set apply."""
    overrides = {
        name: getattr(args, name)
        for name in _CONFIG_KEYS
        if getattr(args, name, None) is not None
    }
    return dataclasses.replace(cfg, **overrides)


def echo_config(cfg: RunConfig) -> None:
    print("effective config: " + json.dumps(dataclasses.asdict(cfg)), file=sys.stderr)


def build_gateway(cfg: RunConfig) -> Gateway:
    if cfg.provider == "scripted":
        provider = ScriptedProvider(seed=cfg.seed)
    elif cfg.provider == "mock":
        fixtures = {}
        if cfg.fixtures:
            fixtures = json.loads(Path(cfg.fixtures).read_text(encoding="utf-8"))
        provider = MockProvider(fixtures)
    elif cfg.provider == "http":
        provider = HttpProvider(endpoint=cfg.endpoint)
    else:
        raise ConfigError(f"unknown provider {cfg.provider!r}; use scripted, mock, or http")
    params = LlmParams(model_name=cfg.model)
    return Gateway(provider, params, max_parallel=cfg.parallel, run_log_path=cfg.run_log)


def write_jsonl(records: list[dict], path: str) -> None:
    atomic_write_text(path, "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records))


def _spans_by_id_from_predictions(
    samples, pred_path: str
) -> tuple[dict[str, list[PiiSpan]], int]:
    """Localize a predictions file against the samples' contexts."""
    by_id = {s.id: s for s in samples}
    spans_by_id: dict[str, list[PiiSpan]] = {}
    unlocalizable = 0
    for sid, result in load_predictions(pred_path).items():
        sample = by_id.get(sid)
        if sample is None:
            # kept so compute_metrics can flag the stray id properly
            spans_by_id[sid] = []
            continue
        spans, missed = localize_predictions(sample.context, result)
        spans_by_id[sid] = spans
        unlocalizable += missed
    return spans_by_id, unlocalizable


def cmd_generate(args: argparse.Namespace, cfg: RunConfig) -> int:
    gateway = build_gateway(cfg)
    result = generate_dataset(
        gateway,
        seed=cfg.seed,
        max_samples=args.max_samples,
        topics_per_pair=args.topics,
        subtopics_per_topic=args.subtopics,
        workers=cfg.parallel,
    )
    save_dataset(result.samples, args.out)
    print(
        f"tree: {result.tree.raw_triplets} raw triplets, "
        f"{result.tree.unique_triplets} unique, shortfall {result.tree.shortfall}",
        file=sys.stderr,
    )
    print(
        f"wrote {len(result.samples)} samples to {args.out} "
        f"({len(result.errors)} failed)",
        file=sys.stderr,
    )
    for index, message in result.errors:
        print(f"  sample {index}: {message}", file=sys.stderr)
    if result.errors and not result.samples:
        return EXIT_SYNTH
    return EXIT_OK


def cmd_detect(args: argparse.Namespace, cfg: RunConfig) -> int:
    samples = load_dataset(args.data)
    records = []
    if args.engine == "rules":
        for sample in samples:
            records.append(prediction_to_record(sample.id, detect_rules(sample.context)))
    else:
        gateway = build_gateway(cfg)
        for sample in samples:
            result = detect_llm(
                sample.context, sample.question, gateway,
                instruction_variant=args.variant,
            )
            records.append(prediction_to_record(sample.id, result))
    write_jsonl(records, args.out)
    print(f"wrote predictions for {len(records)} samples to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace, cfg: RunConfig) -> int:
    gold = load_dataset(args.gold)
    spans_by_id, unlocalizable = _spans_by_id_from_predictions(gold, args.pred)
    if unlocalizable:
        print(f"warning: {unlocalizable} entries could not be localized", file=sys.stderr)
    report = compute_metrics(gold, spans_by_id, MatchConfig(match_threshold=cfg.match_threshold))
    print(format_report_table(report, label=args.label))
    if args.out:
        atomic_write_text(args.out, dumps_report(report) + "\n")
    return EXIT_OK


def cmd_redact(args: argparse.Namespace, cfg: RunConfig) -> int:
    samples = load_dataset(args.data)
    strategy = {
        "full": MaskStrategy.FULL,
        "low-relevance": MaskStrategy.LOW_RELEVANCE_ONLY,
    }[args.strategy]
    spans_by_id: dict[str, list[PiiSpan]] | None = None
    if args.pred:
        spans_by_id, unlocalizable = _spans_by_id_from_predictions(samples, args.pred)
        if unlocalizable:
            print(f"warning: {unlocalizable} entries could not be localized", file=sys.stderr)
    records = []
    for sample in samples:
        spans = spans_by_id.get(sample.id, []) if spans_by_id is not None else sample.spans
        text, plan = redact_context(sample.context, spans, strategy)
        records.append(
            {
                "id": sample.id,
                "context": text,
                "question": sample.question,
                "strategy": strategy.value,
                "n_replacements": len(plan.replacements),
                "merged": plan.merged,
            }
        )
    write_jsonl(records, args.out)
    print(f"wrote {len(records)} redacted contexts to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_judge(args: argparse.Namespace, cfg: RunConfig) -> int:
    samples = load_dataset(args.data)
    spans_by_id = None
    if args.pred:
        localized, unlocalizable = _spans_by_id_from_predictions(samples, args.pred)
        if unlocalizable:
            print(f"warning: {unlocalizable} entries could not be localized", file=sys.stderr)
        spans_by_id = {sid: tuple(spans) for sid, spans in localized.items()}
    gateway = build_gateway(cfg)
    report = run_utility_eval(gateway, samples, spans_by_id, single_pass=args.single_pass)
    pref = "--" if report.preference_score is None else f"{report.preference_score:.4f}"
    strict = "--" if report.strict_score is None else f"{report.strict_score:.4f}"
    print(
        f"pairs {report.n_pairs}  wins(low-relevance) {report.wins_low_relevance}  "
        f"wins(full) {report.wins_full}  equal {report.equals}  "
        f"preference {pref}  strict {strict}"
    )
    for sid, message in report.errors:
        print(f"  {sid}: {message}", file=sys.stderr)
    if args.out:
        atomic_write_text(
            args.out, json.dumps(utility_report_to_record(report), indent=2) + "\n"
        )
    return EXIT_OK


def cmd_stats(args: argparse.Namespace, cfg: RunConfig) -> int:
    samples = load_dataset(args.data)
    stats = compute_stats(samples)
    print(format_stats_table(stats))
    if args.out:
        atomic_write_text(args.out, json.dumps(stats_to_record(stats), indent=2) + "\n")
    return EXIT_OK


def cmd_annotate(args: argparse.Namespace, cfg: RunConfig) -> int:
    store = ReviewStore(args.data)
    ui_dir = args.ui_dir
    if ui_dir is None and Path("frontend/dist/index.html").is_file():
        ui_dir = "frontend/dist"
    app = create_app(store, frontend_dir=ui_dir)
    print(f"serving review UI on http://{args.host}:{args.port}", file=sys.stderr)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON config file; flags override its values")
    shared.add_argument("--seed", type=int, help="seed for all pipeline randomness")
    shared.add_argument("--provider", choices=["scripted", "mock", "http"],
                        help="LLM provider (default scripted)")
    shared.add_argument("--model", help="model name passed to the provider")
    shared.add_argument("--endpoint", help=f"HTTP endpoint (or set {ENDPOINT_ENV})")
    shared.add_argument("--parallel", type=int, help="max concurrent provider calls")
    shared.add_argument("--match-threshold", type=float, dest="match_threshold",
                        help="span match threshold (default 0.5)")
    shared.add_argument("--run-log", dest="run_log", help="JSONL gateway call log path")
    shared.add_argument("--fixtures", help="JSON fixture map for the mock provider")

    parser = argparse.ArgumentParser(prog="piiscope", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[shared], help="synthesize a raw dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--max-samples", type=int, dest="max_samples")
    p.add_argument("--topics", type=int, default=10, help="topics per type pair")
    p.add_argument("--subtopics", type=int, default=20, help="subtopics per topic")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("detect", parents=[shared], help="run PII detection over a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--engine", choices=["llm", "rules"], default="llm")
    p.add_argument("--variant", choices=["pretrained", "finetuned"], default="finetuned",
                   help="instruction variant for the llm engine")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", parents=[shared], help="score predictions against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--out", help="write the structured report here")
    p.add_argument("--label", default="system", help="row label in the table")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("redact", parents=[shared], help="mask PII spans in contexts")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--strategy", choices=["full", "low-relevance"], required=True)
    p.add_argument("--pred", help="mask predicted spans instead of gold spans")
    p.set_defaults(func=cmd_redact)

    p = sub.add_parser("judge", parents=[shared], help="pairwise utility evaluation")
    p.add_argument("--data", required=True)
    p.add_argument("--pred", help="mask predicted spans instead of gold spans")
    p.add_argument("--out", help="write the structured report here")
    p.add_argument("--single-pass", action="store_true", dest="single_pass",
                   help="judge each pair once instead of twice with swap")
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("stats", parents=[shared], help="per-type dataset statistics")
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="write the structured stats here")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("annotate", parents=[shared], help="start the review service")
    p.add_argument("--data", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8400)
    p.add_argument("--ui-dir", dest="ui_dir", help="built frontend directory")
    p.set_defaults(func=cmd_annotate)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = merge_flags(load_config(args.config), args)
        echo_config(cfg)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetParseError, DatasetValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ProviderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except DetectionParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DETECT
    except UnknownSampleIdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_METRICS
    except RangeOutOfBoundsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REDACT
    except (PiiFormatError, PiiDroppedError, EmptyQuestionError, ReconcileFailureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SYNTH
    except (VerdictParseError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_JUDGE
    except Exception as exc:  # noqa: BLE001 - last resort, still typed in the message
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    raise SystemExit(main())

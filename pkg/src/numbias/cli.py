"""Command-line entry point: ``numbias {audit,calibrate,sweep,features}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import report as rpt
from .analysis import (
    DEFAULT_RANGES,
    DEFAULT_TEMPERATURES,
    Axis,
    SweepSpec,
    UnigramLogprobProvider,
    compute_features,
    feature_correlation,
    run_sweep,
    text_pair,
)
from .calibration import (
    estimate_marginal,
    fit_beta,
    interval_masses,
    model_marginal_as_prior,
    pool_samples,
    calibrate_dataset,
)
from .dataset import DEFAULT_GOLD_SPAN, Example, ScoreRange, Task, load_dataset, load_gold, rescale_gold
from .judge import (
    EndpointConfig,
    GenerationConfig,
    HttpJudge,
    Judge,
    ReplayCache,
    ReplayJudge,
    SyntheticJudge,
    SyntheticJudgeParams,
)
from .pipeline import generate
from .prompting import PromptTemplate, builtin_template

logger = logging.getLogger("numbias")


class UsageError(Exception):
    pass


def _range(text: str) -> ScoreRange:
    try:
        return ScoreRange.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _span(text: str) -> tuple[float, float]:
    lo, sep, hi = text.partition(":")
    try:
        return float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ranges(text: str) -> list[ScoreRange]:
    return [_range(t) for t in text.split(",") if t.strip()]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, type=Path, help="JSON-lines dataset")
    p.add_argument("--task", required=True, choices=[t.value for t in Task])
    p.add_argument("--range", dest="score_range", type=_range, default=ScoreRange(0, 9), help="MIN:MAX (default 0:9)")
    p.add_argument("--temperature", type=float, default=0.7)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--max-tokens", type=int, default=5)
    p.add_argument("--backend", choices=["http", "synthetic", "replay"], default="synthetic")
    p.add_argument("--endpoint", help="chat-completions base URL (http backend)")
    p.add_argument("--model", default="", help="model name sent to the endpoint")
    p.add_argument("--seed", type=int, help="required for the synthetic backend")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--out", required=True, type=Path, help="report path (JSON)")
    p.add_argument("--cache", type=Path, help="replay cache file (written by http/synthetic, read by replay)")
    p.add_argument("--gold-span", type=_span, help="LO:HI span of the dataset's gold scores")
    p.add_argument("--template", type=Path, help="custom template file instead of the built-in one")
    p.add_argument("--transcripts", action="store_true", help="embed raw generations in the report")
    g = p.add_argument_group("synthetic judge")
    g.add_argument("--mode-value", type=int, default=8)
    g.add_argument("--concentration", type=float, default=0.9)
    g.add_argument("--reference-temperature", type=float, default=0.7)
    g.add_argument("--noise", type=int, default=1, help="noise half-width in score units")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="numbias", description="Audit numerical bias in LLM judge scores.")
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("audit", help="score a dataset and report bias metrics"))

    cal = sub.add_parser("calibrate", help="audit plus importance-weighted calibration")
    _common(cal)
    cal.add_argument("--calibration-data", required=True, type=Path, help="gold file used to fit the Beta prior")
    cal.add_argument("--marginal-pool", type=int, default=1000)
    cal.add_argument("--smoothing", type=float, default=1.0)
    cal.add_argument(
        "--prior",
        choices=["beta", "marginal"],
        default="beta",
        help="target marginal; 'marginal' reuses p(y) (identity calibration)",
    )

    sw = sub.add_parser("sweep", help="temperature or score-range sweep")
    _common(sw)
    sw.add_argument("--axis", choices=[a.value for a in Axis], default="temperature")
    sw.add_argument("--temperatures", type=_floats, default=list(DEFAULT_TEMPERATURES))
    sw.add_argument("--ranges", type=_ranges, default=list(DEFAULT_RANGES))

    ft = sub.add_parser("features", help="correlate input features with the mode ratio")
    _common(ft)
    ft.add_argument("--perplexity", choices=["none", "unigram"], default="none")
    return parser


def _mode_for(mode: int, base: ScoreRange, target: ScoreRange) -> int:
    # carry the synthetic mode to another range by the same linear map used for gold
    if target == base:
        return mode
    v = target.min + (mode - base.min) * (target.max - target.min) / (base.max - base.min)
    return min(max(int(np.floor(v + 0.5)), target.min), target.max)


def _synthetic_params(args, score_range: ScoreRange) -> SyntheticJudgeParams:
    return SyntheticJudgeParams(
        mode_value=args.mode_value,
        base_concentration=args.concentration,
        reference_temperature=args.reference_temperature,
        noise_halfwidth=args.noise,
        seed=args.seed,
    )


def build_judge(args) -> Callable[[ScoreRange], Judge]:
    """Factory from score range to backend (only the synthetic mode depends on the range)."""
    cache = ReplayCache(args.cache) if args.cache else None
    if args.backend == "synthetic":
        base = _synthetic_params(args, args.score_range)

        def synthetic(score_range: ScoreRange) -> Judge:
            params = replace(base, mode_value=_mode_for(base.mode_value, args.score_range, score_range))
            return SyntheticJudge(params, cache)

        return synthetic
    if args.backend == "replay":
        judge = ReplayJudge(cache, model=args.model)
        return lambda _r: judge
    endpoint = EndpointConfig.from_env(args.endpoint, args.model)
    http = HttpJudge(endpoint, cache)
    return lambda _r: http


def run_config(args, **extra) -> dict:
    cfg = {
        "command": args.command,
        "task": args.task,
        "range": str(args.score_range),
        "temperature": args.temperature,
        "n_samples": args.samples,
        "max_tokens": args.max_tokens,
        "backend": args.backend,
        "model": args.model,
        "seed": args.seed,
        "gold_span": list(args.gold_span),
        "data": args.data.name,
        "data_sha256": rpt.file_digest(args.data),
        "template": args.template.name if args.template else "builtin",
    }
    if args.backend == "synthetic":
        cfg["synthetic"] = asdict(_synthetic_params(args, args.score_range))
    if args.backend == "http":
        cfg["endpoint"] = args.endpoint
    cfg.update(extra)
    return cfg


def _validate(parser: argparse.ArgumentParser, args) -> None:
    if not args.data.is_file():
        parser.error(f"dataset not found: {args.data}")
    if args.backend == "synthetic" and args.seed is None:
        parser.error("--seed is required for the synthetic backend")
    if args.backend == "http" and not args.endpoint:
        parser.error("--endpoint is required for the http backend")
    if args.backend == "replay" and (args.cache is None or not args.cache.is_file()):
        parser.error("--cache must name an existing replay cache for the replay backend")
    if args.template is not None and not args.template.is_file():
        parser.error(f"template not found: {args.template}")
    if args.command == "calibrate" and not args.calibration_data.is_file():
        parser.error(f"calibration data not found: {args.calibration_data}")
    task = Task(args.task)
    if args.gold_span is None:
        args.gold_span = DEFAULT_GOLD_SPAN[task]


def _load(args) -> tuple[list[Example], PromptTemplate]:
    task = Task(args.task)
    examples = load_dataset(args.data, task)
    template = PromptTemplate.from_file(args.template, task) if args.template else builtin_template(task)
    return examples, template


def _gen_config(args, temperature: Optional[float] = None) -> GenerationConfig:
    return GenerationConfig(
        n_samples=args.samples,
        temperature=args.temperature if temperature is None else temperature,
        max_tokens=args.max_tokens,
    )


def cmd_audit(args) -> dict:
    examples, template = _load(args)
    judge = build_judge(args)(args.score_range)
    run = generate(examples, template, judge, args.score_range, _gen_config(args), args.gold_span, args.parallelism)
    report = rpt.new_report("audit", run_config(args))
    report.update(rpt.audit_sections(run, args.transcripts))
    rpt.write_histograms(run, args.out)
    return report


def cmd_calibrate(args) -> dict:
    examples, template = _load(args)
    judge = build_judge(args)(args.score_range)
    run = generate(examples, template, judge, args.score_range, _gen_config(args), args.gold_span, args.parallelism)
    report = rpt.new_report(
        "calibrate",
        run_config(
            args,
            calibration_data=args.calibration_data.name,
            calibration_data_sha256=rpt.file_digest(args.calibration_data),
            marginal_pool=args.marginal_pool,
            smoothing=args.smoothing,
            prior=args.prior,
        ),
    )
    report.update(rpt.audit_sections(run, args.transcripts))
    rpt.write_histograms(run, args.out)

    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    pool = pool_samples(run.sample_sets, args.marginal_pool, rng)
    p = estimate_marginal(pool, args.score_range.support, args.smoothing)
    beta = None
    if args.prior == "marginal":
        q = model_marginal_as_prior(p)
    else:
        gold = rescale_gold(load_gold(args.calibration_data), *args.gold_span, args.score_range)
        beta = fit_beta(gold, args.score_range)
        q = interval_masses(beta, args.score_range)
    calibrated = calibrate_dataset(run.sample_sets, p, q)
    report["calibration"] = rpt.calibration_section(
        run, calibrated, p, q, beta, args.prior, args.smoothing, args.marginal_pool
    )
    rpt.write_csv(
        rpt.sidecar(args.out, "calibrated_hist"),
        ["support", "count"],
        report["calibration"]["distribution_calibrated"].items(),
    )
    return report


def cmd_sweep(args) -> dict:
    examples, template = _load(args)
    axis = Axis(args.axis)
    spec = SweepSpec(
        axis=axis,
        temperatures=tuple(args.temperatures),
        ranges=tuple(args.ranges),
        fixed_temperature=args.temperature,
        fixed_range=args.score_range,
    )
    result = run_sweep(
        examples,
        template,
        build_judge(args),
        spec,
        args.gold_span,
        n_samples=args.samples,
        max_tokens=args.max_tokens,
        parallelism=args.parallelism,
    )
    report = rpt.new_report(
        "sweep",
        run_config(
            args,
            axis=axis.value,
            temperatures=list(spec.temperatures),
            ranges=[str(r) for r in spec.ranges],
        ),
    )
    report["sweep"] = rpt.sweep_section(result)
    failed = [{"setting": s.setting, "error": s.error} for s in result.settings if s.error]
    if failed:
        report["errors"] = failed
    rpt.write_sweep_csv(result, args.out)
    return report


def cmd_features(args) -> dict:
    examples, template = _load(args)
    judge = build_judge(args)(args.score_range)
    run = generate(examples, template, judge, args.score_range, _gen_config(args), args.gold_span, args.parallelism)
    provider = None
    if args.perplexity == "unigram":
        provider = UnigramLogprobProvider([t for ex in examples for t in text_pair(ex)])
    features = [compute_features(ex, provider) for ex in examples]
    mode = run.mode()
    ratios = run.mode_ratios(mode)
    table = feature_correlation(features, ratios)
    if provider is None:
        table = [c for c in table if c.feature in ("source_length", "word_overlap")]
    report = rpt.new_report("features", run_config(args, perplexity=args.perplexity))
    report.update(rpt.audit_sections(run, args.transcripts))
    report["features"] = rpt.features_section([ex.id for ex in examples], features, ratios, table, mode)
    rpt.write_histograms(run, args.out)
    rpt.write_features_csv(report["features"], args.out)
    return report


COMMANDS = {"audit": cmd_audit, "calibrate": cmd_calibrate, "sweep": cmd_sweep, "features": cmd_features}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    _validate(parser, args)
    try:
        report = COMMANDS[args.command](args)
    except Exception as exc:
        logger.error("%s failed: %s", args.command, exc)
        partial = rpt.new_report(args.command, {"command": args.command, "data": str(args.data)})
        partial["error"] = {"type": type(exc).__name__, "message": str(exc)}
        rpt.write_report(partial, args.out)
        return 1
    rpt.write_report(report, args.out)
    if report.get("errors"):
        logger.error("%d example(s) failed in the judge backend; see the report's errors", len(report["errors"]))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure (including replay mismatch),
2 configuration error.
"""

from __future__ import annotations

import argparse
import difflib
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .bus import load_trace
from .detectors import DetectorConfig
from .harness import (
    HarnessError,
    evaluate_detector,
    generate_dataset,
    read_samples_csv,
    run_timeline_experiment,
    timeline_from_pipeline,
    trace_text,
    write_jsonl,
    write_run_outputs,
    write_samples_csv,
)
from .kpm import DetectorKind
from .pipeline import run_scenario
from .prompt import PromptTemplate
from .ran_sim import ConfigError
from .scenario import Scenario, ScenarioError, apply_overrides, load_scenario, parse_detector_kind, scenario_from_dict

log = logging.getLogger("ricguard")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _add_detector_flags(p):
    p.add_argument("--detector", help="oracle | static | mock | llm")
    p.add_argument("--confirmations", type=int, help="K for the static-threshold detector")
    p.add_argument("--accuracy", type=float, action="append",
                   help="MockLlm accuracy (repeat under eval to build a table)")
    p.add_argument("--endpoint", help="chat-completions URL for the llm detector")
    p.add_argument("--model", help="model name for the llm detector")
    p.add_argument("--debug-prompts", action="store_true", help="log LLM request/response bodies")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ricguard", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario through the full RIC pipeline")
    sim.add_argument("--scenario", default="paper_default", help="TOML path or built-in name")
    _add_detector_flags(sim)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--duration", type=int, help="duration in ms")
    sim.add_argument("--out", help="output directory")
    sim.add_argument("--no-figures", action="store_true")
    sim.add_argument("--wall-clock", action="store_true", help="free-running clock (latency measurement)")
    sim.add_argument("--speedup", type=float, default=1.0, help="wall-clock speed factor")

    gen = sub.add_parser("gen-dataset", help="write a labelled instruction-tuning corpus")
    gen.add_argument("--scenario", help="take base_limit_per_ue from this scenario")
    gen.add_argument("-n", "--n", type=int, default=1000)
    gen.add_argument("--seed", type=int, default=7)
    gen.add_argument("--ue-range", type=int, nargs=2, default=(1, 3), metavar=("MIN", "MAX"))
    gen.add_argument("--pkt-range", type=int, nargs=2, default=(0, 2000), metavar=("MIN", "MAX"))
    gen.add_argument("--out", default="out/dataset")

    ev = sub.add_parser("eval", help="measure detector accuracy on a labelled dataset")
    ev.add_argument("--scenario", help="detector defaults come from this scenario")
    ev.add_argument("--dataset", help="samples CSV written by gen-dataset")
    ev.add_argument("-n", "--n", type=int, default=1000, help="samples to generate when --dataset is absent")
    ev.add_argument("--seed", type=int, default=7)
    _add_detector_flags(ev)
    ev.add_argument("--max-error-rate", type=float, default=None)
    ev.add_argument("--workers", type=int, default=1, help="concurrent requests (llm backend only)")
    ev.add_argument("--out", default="out/eval")
    ev.add_argument("--no-figures", action="store_true")

    cmp_ = sub.add_parser("compare", help="oracle vs static-threshold detection on one scenario")
    cmp_.add_argument("--scenario", default="paper_default")
    cmp_.add_argument("--confirmations", type=int, default=5)
    cmp_.add_argument("--seed", type=int)
    cmp_.add_argument("--out", default="out/compare")
    cmp_.add_argument("--no-figures", action="store_true")

    rp = sub.add_parser("replay", help="re-run a dumped bus trace and check it is byte-identical")
    rp.add_argument("trace", help="trace.jsonl written by simulate")
    return parser


def _scenario_from_args(args) -> Scenario:
    sc = load_scenario(args.scenario)
    accuracy = args.accuracy[0] if getattr(args, "accuracy", None) else None
    return apply_overrides(
        sc,
        detector=args.detector,
        confirmations=args.confirmations,
        accuracy=accuracy,
        seed=args.seed,
        duration=args.duration,
        out=args.out,
        endpoint=args.endpoint,
        model=args.model,
        debug_prompts=args.debug_prompts,
    )


def cmd_simulate(args) -> int:
    sc = _scenario_from_args(args).check()
    result = timeline_from_pipeline(run_scenario(sc, wall_clock=args.wall_clock, speedup=args.speedup))
    paths = write_run_outputs(result, sc.output_dir, figures=not args.no_figures)
    ev = result.events()
    print(f"detection={ev['detection']} mitigation={ev['mitigation']} recovery={ev['recovery']}")
    for name, path in paths.items():
        print(f"{name}: {path}")
    return EXIT_OK


def cmd_gen_dataset(args) -> int:
    base = load_scenario(args.scenario).detector.base_limit_per_ue if args.scenario else PromptTemplate().base_limit_per_ue
    samples, lines = generate_dataset(args.n, args.seed, tuple(args.ue_range), tuple(args.pkt_range), PromptTemplate(base))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(lines, out / "dataset.jsonl")
    write_samples_csv(samples, out / "samples.csv")
    n_mal = sum(1 for s in samples if s.label.value == "Malicious")
    print(f"{len(samples)} samples ({n_mal} malicious) -> {out / 'dataset.jsonl'}, {out / 'samples.csv'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    det = load_scenario(args.scenario).detector if args.scenario else DetectorConfig()
    det = replace(det)
    if args.detector:
        det.backend = parse_detector_kind(args.detector)
    if args.confirmations is not None:
        det.confirmations = args.confirmations
    if args.endpoint:
        det.endpoint = args.endpoint
    if args.model:
        det.model = args.model
    det.debug_prompts = det.debug_prompts or args.debug_prompts
    accuracies = args.accuracy or [det.accuracy]
    configs = []
    for acc in accuracies:
        cfg = replace(det, accuracy=acc)
        errs = cfg.validate()
        if errs:
            raise ScenarioError(errs)
        name = f"{cfg.backend.value}({acc:g})" if cfg.backend is DetectorKind.MOCK_LLM else cfg.backend.value
        configs.append((name, cfg))
        if cfg.backend is not DetectorKind.MOCK_LLM:
            break

    if args.dataset:
        samples = read_samples_csv(args.dataset)
    else:
        samples, _ = generate_dataset(args.n, args.seed, template=PromptTemplate(det.base_limit_per_ue))
    results = [
        evaluate_detector(samples, cfg, max_error_rate=args.max_error_rate, workers=args.workers, label=name)
        for name, cfg in configs
    ]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "accuracy.json").write_text(json.dumps([r.to_dict() for r in results], indent=2) + "\n", encoding="utf-8")
    if not args.no_figures:
        from .plotting import plot_accuracy

        plot_accuracy(results, out / "accuracy.png")
    for r in results:
        flag = " ABORTED" if r.aborted else ""
        print(f"{r.label}: accuracy={r.accuracy:.4f} ({r.n_correct}/{r.n_samples}, undecided={r.n_undecided}){flag}")
    return EXIT_RUNTIME if any(r.aborted for r in results) else EXIT_OK


def cmd_compare(args) -> int:
    base = load_scenario(args.scenario)
    if args.seed is not None:
        base = replace(base, seed=args.seed)
    runs = {}
    for name, kind in (("oracle", DetectorKind.RULE_ORACLE), (f"static K={args.confirmations}", DetectorKind.STATIC_THRESHOLD)):
        det = replace(base.detector, backend=kind, confirmations=args.confirmations)
        runs[name] = run_timeline_experiment(replace(base, detector=det).check())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {name: r.events() for name, r in runs.items()}
    (out / "compare.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    if not args.no_figures:
        from .plotting import plot_detection_comparison

        plot_detection_comparison(runs, out / "compare.png")
    for name, ev in summary.items():
        print(f"{name}: detection={ev['detection']} mitigation={ev['mitigation']}")
    return EXIT_OK


def cmd_replay(args) -> int:
    path = Path(args.trace)
    text = path.read_text(encoding="utf-8")
    first = text.split("\n", 1)[0]
    try:
        header = json.loads(first)["header"]
    except (ValueError, KeyError):
        raise ScenarioError([f"{path}: first line is not a trace header"]) from None
    load_trace(path)  # rejects malformed message lines
    sc = scenario_from_dict(header["scenario"]).check()
    fresh = trace_text(run_scenario(sc))
    if fresh == text:
        print(f"replay OK: {len(text.splitlines()) - 1} messages identical")
        return EXIT_OK
    diff = difflib.unified_diff(text.splitlines(), fresh.splitlines(), "recorded", "replayed", n=0, lineterm="")
    for line in list(diff)[:20]:
        print(line)
    print("replay MISMATCH")
    return EXIT_RUNTIME


COMMANDS = {
    "simulate": cmd_simulate,
    "gen-dataset": cmd_gen_dataset,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "replay": cmd_replay,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "debug_prompts", False):
        logging.getLogger("ricguard.detectors").setLevel(logging.INFO)
    try:
        return COMMANDS[args.command](args)
    except (ScenarioError, ConfigError, HarnessError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

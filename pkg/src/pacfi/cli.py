"""Command-line entry point: ``pacfi <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from pacfi import __version__
from pacfi.analyzer import (
    DEFAULT_DEPTH_CAP,
    ContextCorpus,
    IrError,
    Level,
    annotate,
    build_corpus,
    estimate_diversity_score,
    find_retbind_candidates,
    format_precision,
    parse_annotations,
    parse_ir,
    precision_report,
    random_corpus,
    record_scores,
)
from pacfi.analyzer.annotations import AnnotationError
from pacfi.analyzer.corpus import HISTOGRAM_BINS
from pacfi.asm import parse_listing
from pacfi.asm.listing import ListingError
from pacfi.pa.schemes import ContextScheme
from pacfi.resources import resolve_input
from pacfi.serialize import dumps
from pacfi.sim import ATTACKS, Capabilities, Defense, Scenario, load_scenario, simulate
from pacfi.validator import Principle, validate_image

EXIT_OK, EXIT_FINDINGS, EXIT_USAGE = 0, 1, 2
LEVELS = sorted(Level, key=lambda lv: lv.rank)


class UsageError(Exception):
    pass


def _depth_cap(text: str) -> int | None:
    if text.lower() == "none":
        return None
    try:
        cap = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"depth cap must be an integer or 'none', got {text!r}") from None
    if cap < 0:
        raise argparse.ArgumentTypeError("depth cap must be non-negative")
    return cap


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return n


def _read(path: str) -> str:
    try:
        return resolve_input(path).read_text(encoding="utf-8")
    except (FileNotFoundError, IsADirectoryError) as exc:
        raise UsageError(str(exc)) from None


def _program(path: str):
    return parse_ir(_read(path))


def _annotations(path: str | None):
    return parse_annotations(_read(path)) if path else ()


def _corpus(spec: str, annotations: str | None = None, depth_cap=DEFAULT_DEPTH_CAP) -> ContextCorpus:
    """An IR program, a saved corpus (JSON), or ``random:SEED``."""
    if spec.startswith("random:"):
        return random_corpus(int(spec.split(":", 1)[1]))
    text = _read(spec)
    if text.lstrip().startswith("{"):
        return ContextCorpus.from_payload(json.loads(text))
    return build_corpus(parse_ir(text), _annotations(annotations), depth_cap=depth_cap)


# ---- subcommands ----

def cmd_validate(args) -> tuple[dict, str, int]:
    functions = []
    for path in args.inputs:
        functions.extend(parse_listing(_read(path)))
    principles = frozenset(Principle(p) for p in args.principles) if args.principles else frozenset(Principle)
    report = validate_image(functions, principles, jobs=args.jobs)
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    payload = {"inputs": list(args.inputs), **report.to_payload()}
    return payload, report.to_table(), EXIT_FINDINGS if report.has_definite else EXIT_OK


def cmd_analyze(args) -> tuple[dict, str, int]:
    program = _program(args.input)
    if args.field and not args.record:
        raise UsageError("--field needs --record")
    if args.record:
        if program.record(args.record) is None:
            raise UsageError(f"unknown record {args.record!r}")
        if args.field:
            try:
                reports = [estimate_diversity_score(program, args.record, args.field, args.depth_cap)]
            except KeyError as exc:
                raise UsageError(exc.args[0]) from None
        else:
            reports = record_scores(program, args.record, args.depth_cap)
    else:
        reports = [r for rec in program.records for r in record_scores(program, rec.name, args.depth_cap)]
    retbind = find_retbind_candidates(program)
    payload = {
        "input": args.input,
        "depth_cap": args.depth_cap,
        "reports": [r.to_record() for r in reports],
        "retbind_candidates": [{"function": f, "callsites": n} for f, n in retbind],
    }
    lines = [f"{r.record}.{r.field}  ds={r.ds}" + (f"  ({len(r.unresolved)} unresolved)" if r.unresolved else "")
             for r in reports]
    for r in reports:
        lines += [f"  note: {d}" for d in r.diagnostics]
    if retbind:
        lines.append("retbind candidates: " + ", ".join(f"{f} ({n} call sites)" for f, n in retbind))
    return payload, "\n".join(lines) + "\n", EXIT_OK


def cmd_annotate(args) -> tuple[dict, str, int]:
    program = _program(args.input)
    result = annotate(program, args.precision, args.depth_cap)
    if args.output_annotations:
        Path(args.output_annotations).write_text(result.text(), encoding="utf-8")
    payload = {"input": args.input, "precision": args.precision, "depth_cap": args.depth_cap,
               "complete": result.complete, **result.to_payload()}
    text = result.text() + "".join(f"# residual: {r}\n" for r in result.residual)
    return payload, text, EXIT_OK


def _merge_views(views: list[dict]) -> dict:
    hist = {label: sum(v["histogram"][label] for v in views) for _, _, label in HISTOGRAM_BINS}
    n = sum(v["sites"] for v in views)
    return {"sites": n, "le5_share": hist["<=5"] / n if n else 0.0,
            "gt100_share": hist[">100"] / n if n else 0.0,
            "max": max((v["max"] for v in views), default=0), "histogram": hist}


def _level_reports(corpora: list[ContextCorpus]) -> list[dict]:
    out = []
    for level in LEVELS:
        reps = [precision_report(c.at(level)) for c in corpora]
        out.append({"level": level.value, "contexts": sum(r["contexts"] for r in reps),
                    "allowed": _merge_views([r["allowed"] for r in reps]),
                    "diversity": _merge_views([r["diversity"] for r in reps])})
    return out


def cmd_report(args) -> tuple[dict, str, int]:
    if bool(args.input) == bool(args.random):
        raise UsageError("give either an input file or --random N")
    source = args.input
    if args.input and args.auto_annotate:
        corpora = [annotate(_program(args.input), args.auto_annotate, args.depth_cap).corpus]
    elif args.input:
        corpora = [_corpus(args.input, args.annotations, args.depth_cap)]
    else:
        corpora = [random_corpus(args.seed + k) for k in range(args.random)]
        source = f"random:{args.seed}..{args.seed + args.random - 1}"
    reports = _level_reports(corpora)
    files = []
    if not args.no_figures:
        from pacfi.plotting import write_report

        files = [p.name for p in write_report(reports, args.out_dir)]
    payload = {"source": source, "corpora": len(corpora), "levels": reports,
               "files": files, "out_dir": str(args.out_dir) if files else None}
    text = format_precision(reports)
    if files:
        text += f"wrote {', '.join(files)} to {args.out_dir}\n"
    return payload, text, EXIT_OK


def _scenario(args) -> Scenario:
    if args.scenario:
        try:
            base = load_scenario(resolve_input(args.scenario))
        except FileNotFoundError as exc:
            raise UsageError(str(exc)) from None
    else:
        if not args.attack:
            raise UsageError("--attack or --scenario is required")
        base = Scenario(args.attack)
    d = base.defense
    scheme = ContextScheme(args.scheme) if args.scheme else d.preempt_scheme
    if args.no_timebind and not args.scheme:
        scheme = ContextScheme.BASE_CHAIN
    defense = Defense(
        level=Level(args.level) if args.level else d.level,
        preempt_scheme=scheme,
        backoff=args.backoff or d.backoff,
        key_split=d.key_split and not args.no_key_split,
        pac_bits=args.pac_bits if args.pac_bits is not None else d.pac_bits,
        va_bits=args.va_bits if args.va_bits is not None else d.va_bits,
        enhanced_pac2=args.enhanced_pac2 or d.enhanced_pac2,
        fpac=args.fpac or d.fpac,
        base_delay=args.base_delay if args.base_delay is not None else d.base_delay,
    )
    attack = args.attack or base.attack
    corpus, listing, function = base.corpus, base.listing, base.function
    if args.corpus:
        corpus = _corpus(args.corpus, args.annotations)
    if attack == "replay" and corpus is None:
        corpus = random_corpus(args.seed if args.seed is not None else base.seed)
    if args.listing:
        listing = _read(args.listing)
    if attack == "toctou" and listing is None:
        listing = _read("toctou.s")
        function = function or "spill_reload"
    caps = base.capabilities
    if args.no_read or args.no_write or args.no_preempt:
        caps = Capabilities(caps.read_all and not args.no_read, caps.write_all and not args.no_write,
                            caps.preempt_at_will and not args.no_preempt)
    return Scenario(
        attack=attack,
        seed=args.seed if args.seed is not None else base.seed,
        defense=defense, capabilities=caps, corpus=corpus, listing=listing,
        function=args.function or function,
        trials=args.trials if args.trials is not None else base.trials,
        max_attempts=args.max_attempts if args.max_attempts is not None else base.max_attempts,
        callee_spills=tuple(args.spill) if args.spill else base.callee_spills,
        params=base.params,
    )


def cmd_simulate(args) -> tuple[dict, str, int]:
    scn = _scenario(args)
    kw = {"slow": True} if args.slow and scn.attack == "bruteforce" else {}
    outcome = simulate(scn, **kw)
    payload = outcome.to_payload()
    if args.no_transcript:
        payload.pop("transcript")
    if args.save_scenario:
        Path(args.save_scenario).write_text(dumps(scn.to_payload(), "scenario"), encoding="utf-8")
    d = scn.defense
    lines = [f"attack     {scn.attack} (seed {scn.seed})",
             f"defense    level={d.level.value} scheme={d.preempt_scheme.value} pac_bits={d.pac_bits} "
             f"backoff={'on' if d.backoff else 'off'}",
             f"result     {'SUCCESS' if outcome.success else 'failed'} after {outcome.attempts} attempts"]
    for k, v in sorted(outcome.details.items()):
        if isinstance(v, (list, dict)) and len(v) > 12:
            v = f"<{len(v)} entries>"
        lines.append(f"  {k}: {v}")
    return payload, "\n".join(lines) + "\n", EXIT_OK


def cmd_selftest(args) -> tuple[dict, str, int]:
    from pacfi.selftest import run_selftest

    results = run_selftest()
    ok = all(r["passed"] for r in results)
    text = "".join(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']}: {r['detail']}\n" for r in results)
    text += f"{sum(r['passed'] for r in results)}/{len(results)} checks passed\n"
    return {"checks": results, "passed": ok}, text, EXIT_OK if ok else EXIT_FINDINGS


# ---- argument parsing ----

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("human", "json"), default="human",
                        help="human-readable text or structured JSON")
    common.add_argument("-o", "--output", help="write the report here instead of stdout")

    p = argparse.ArgumentParser(prog="pacfi", description="Pointer-authentication CFI toolkit.")
    p.add_argument("--version", action="version", version=f"pacfi {__version__}")
    sub = p.add_subparsers(dest="command", metavar="{validate,analyze,annotate,report,simulate,selftest}")
    sub.required = True

    v = sub.add_parser("validate", parents=[common], help="check PA invariants over listings")
    v.add_argument("inputs", nargs="+", help="listing files")
    v.add_argument("--jobs", type=_positive, default=1, help="validate functions on N threads")
    v.add_argument("--principles", nargs="+", choices=[x.value for x in Principle])
    v.add_argument("--csv", help="also write findings as CSV")
    v.set_defaults(func=cmd_validate)

    a = sub.add_parser("analyze", parents=[common], help="diversity scores and retbind candidates")
    a.add_argument("input", help="IR program")
    a.add_argument("--record")
    a.add_argument("--field")
    a.add_argument("--depth-cap", type=_depth_cap, default=DEFAULT_DEPTH_CAP)
    a.set_defaults(func=cmd_analyze)

    n = sub.add_parser("annotate", parents=[common], help="choose objbind/retbind annotations")
    n.add_argument("input", help="IR program")
    n.add_argument("--precision", type=_positive, default=5, help="target allowed-target bound")
    n.add_argument("--depth-cap", type=_depth_cap, default=DEFAULT_DEPTH_CAP)
    n.add_argument("--annotations-out", dest="output_annotations", help="write the annotation file here")
    n.set_defaults(func=cmd_annotate)

    r = sub.add_parser("report", parents=[common], help="precision histograms per refinement level")
    r.add_argument("input", nargs="?", help="IR program or saved corpus (JSON)")
    r.add_argument("--annotations", help="annotation file applied to an IR input")
    r.add_argument("--auto-annotate", type=_positive, metavar="N",
                   help="place annotations for allowed-target bound N before reporting")
    r.add_argument("--random", type=_positive, help="use N random corpora instead of an input")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--depth-cap", type=_depth_cap, default=DEFAULT_DEPTH_CAP)
    r.add_argument("--out-dir", type=Path, default=Path("report"), help="directory for CSV and figures")
    r.add_argument("--no-figures", action="store_true", help="skip the CSV and figure files")
    r.set_defaults(func=cmd_report)

    s = sub.add_parser("simulate", parents=[common], help="run an attack scenario")
    s.add_argument("--attack", choices=ATTACKS)
    s.add_argument("--scenario", help="scenario file (JSON); flags override its fields")
    s.add_argument("--seed", type=int)
    s.add_argument("--trials", type=_positive)
    s.add_argument("--max-attempts", type=_positive)
    s.add_argument("--pac-bits", type=int, choices=range(1, 32), metavar="BITS")
    s.add_argument("--va-bits", type=int, choices=range(36, 53), metavar="BITS")
    s.add_argument("--level", choices=[lv.value for lv in LEVELS], help="forward-edge context level")
    s.add_argument("--scheme", choices=[c.value for c in ContextScheme], help="preemption signing scheme")
    s.add_argument("--no-timebind", action="store_true", help="shorthand for --scheme base-chain")
    s.add_argument("--backoff", action="store_true")
    s.add_argument("--base-delay", type=_positive)
    s.add_argument("--enhanced-pac2", action="store_true")
    s.add_argument("--fpac", action="store_true")
    s.add_argument("--no-key-split", action="store_true")
    s.add_argument("--no-read", action="store_true", help="attacker cannot read memory")
    s.add_argument("--no-write", action="store_true", help="attacker cannot write memory")
    s.add_argument("--no-preempt", action="store_true", help="attacker cannot interleave")
    s.add_argument("--corpus", help="IR program, saved corpus, or random:SEED (replay)")
    s.add_argument("--annotations", help="annotation file for an IR corpus")
    s.add_argument("--listing", help="listing file (toctou)")
    s.add_argument("--function", help="function in the listing (toctou)")
    s.add_argument("--spill", action="append", metavar="REG", help="register the modeled callee spills")
    s.add_argument("--slow", action="store_true", help="authenticate every brute-force guess")
    s.add_argument("--no-transcript", action="store_true", help="omit the transcript from JSON output")
    s.add_argument("--save-scenario", help="write the effective scenario here")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("selftest", parents=[common], help="golden vectors and fixture suite")
    t.set_defaults(func=cmd_selftest)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        payload, text, code = args.func(args)
    except UsageError as exc:
        print(f"pacfi {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IrError, ListingError, AnnotationError, json.JSONDecodeError) as exc:
        print(f"pacfi {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = dumps(payload, args.command) if args.format == "json" else text
    if args.output:
        Path(args.output).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

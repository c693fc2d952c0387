"""Command-line entry point.

Exit codes are shared by every command: 0 success, 1 the input was
processed but failed the check (findings, mismatch, untranslatable
element, deadlock), 2 the command could not do its job (unreadable or
malformed input, bad options).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from ontoflow import engine, sbpm, verifier
from ontoflow.bpmn import canonicalize, first_difference, parse_bpmn, serialize_bpmn
from ontoflow.errors import OntoflowError
from ontoflow.ontology import parse, serialize
from ontoflow.reference import build_reference, load_extension, load_table
from ontoflow.transform import bpmn_to_owl, compare_to_reference, model_from_ontology, owl_to_bpmn

OK, FAILED, OPERATIONAL = 0, 1, 2


class UsageError(Exception):
    pass


def _fail(path, exc: BaseException) -> int:
    where = f"{path}: " if path else ""
    print(f"ontoflow: error: {where}{type(exc).__name__}: {exc}", file=sys.stderr)
    return OPERATIONAL


def _read(path) -> bytes:
    return Path(path).read_bytes()


def _write(out: Optional[str], data: bytes) -> None:
    if out is None or out == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(out).write_bytes(data)


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    cfg = json.loads(_read(path))
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    return cfg


def _reference(args, cfg: dict):
    ref = build_reference()
    ext = args.extension or cfg.get("extension")
    if ext:
        ref = load_extension(ref, _read(ext))
    table = load_table(ref, args.table or cfg.get("table"))
    return ref, table


def _severity(args, cfg: dict) -> dict:
    overrides = dict(cfg.get("severity", {}))
    for item in args.severity or ():
        key, sep, level = item.partition("=")
        if not sep:
            raise UsageError(f"--severity expects KIND[@Class]=level, got {item!r}")
        overrides[key] = level
    return overrides


def _load_bpmn_or_model(path: str):
    """A .owl input is read as a model ontology and turned back into its document."""
    data = _read(path)
    if path.endswith(".owl"):
        return owl_to_bpmn(model_from_ontology(parse(data)))
    return parse_bpmn(data)


# ---------------------------------------------------------------------------
# commands


def cmd_convert(args) -> int:
    try:
        doc = parse_bpmn(_read(args.input))
        model = bpmn_to_owl(doc)
        _write(args.output, serialize(model.ontology))
        if args.compare_log:
            ref, table = _reference(args, {})
            records = compare_to_reference(model, ref, table)
            Path(args.compare_log).write_text(
                "".join(json.dumps(d.record(), sort_keys=True) + "\n" for d in records), encoding="utf-8")
    except (OSError, ValueError, OntoflowError) as exc:
        return _fail(args.input, exc)
    return OK


def cmd_verify(args) -> int:
    try:
        cfg = _load_config(args.config)
        ref, table = _reference(args, cfg)
        overrides = _severity(args, cfg)
        for k, level in overrides.items():
            if level not in ("error", "warning"):
                raise UsageError(f"severity for {k} must be error or warning, got {level!r}")
        fmt = args.format or cfg.get("format", "text")
        if fmt not in ("text", "jsonl"):
            raise UsageError(f"unknown report format {fmt!r}")
    except (OSError, ValueError, OntoflowError, UsageError) as exc:
        return _fail(args.config or args.table or args.extension, exc)
    entries = []
    for path in args.inputs:
        try:
            doc = _load_bpmn_or_model(path)
        except (OSError, ValueError, OntoflowError) as exc:
            entries.append(verifier.CorpusEntry(path, error=f"{type(exc).__name__}: {exc}"))
            continue
        entries.append(verifier.CorpusEntry(path, verifier.verify(doc, ref, table, overrides, model_id=path)))
    summary = verifier.CorpusSummary(tuple(entries))
    render = verifier.render_jsonl if fmt == "jsonl" else verifier.render_text
    try:
        _write(args.output, render(summary).encode("utf-8"))
    except OSError as exc:
        return _fail(args.output, exc)
    for e in summary.entries:
        if e.error:
            print(f"ontoflow: error: {e.path}: {e.error}", file=sys.stderr)
    return summary.exit_code


def cmd_roundtrip(args) -> int:
    try:
        doc = parse_bpmn(_read(args.input))
        if args.from_intermediate:
            owl = _read(args.from_intermediate)
        else:
            owl = serialize(bpmn_to_owl(doc).ontology)
            if args.intermediate:
                Path(args.intermediate).write_bytes(owl)
        back = owl_to_bpmn(model_from_ontology(parse(owl)))
        if args.output:
            _write(args.output, serialize_bpmn(back))
    except (OSError, ValueError, OntoflowError) as exc:
        return _fail(args.input, exc)
    a, b = canonicalize(doc), canonicalize(back)
    if a == b:
        print(f"{args.input}: round trip equal ({len(a)} canonical bytes)")
        return OK
    print(f"{args.input}: round trip differs\n{first_difference(a, b)}")
    return FAILED


def cmd_transform(args) -> int:
    try:
        doc = _load_bpmn_or_model(args.input)
    except (OSError, ValueError, OntoflowError) as exc:
        return _fail(args.input, exc)
    try:
        model = sbpm.transform(doc)
    except sbpm.SbpmError as exc:
        print(f"ontoflow: {args.input}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return FAILED
    try:
        _write(args.output, serialize(sbpm.emit_sbpm_owl(model)))
    except (OSError, OntoflowError) as exc:
        return _fail(args.output, exc)
    return OK


def _load_sbpm_input(path: str) -> sbpm.SbpmModel:
    if path.endswith(".bpmn"):
        return sbpm.transform(parse_bpmn(_read(path)))
    return sbpm.load_sbpm_owl(_read(path))


def cmd_run(args) -> int:
    try:
        model = _load_sbpm_input(args.input)
        scenario = engine.Scenario.from_json(_read(args.scenario)) if args.scenario else engine.Scenario()
        if args.max_steps is not None:
            scenario = engine.Scenario(scenario.choices, scenario.payloads, args.max_steps,
                                       scenario.multi_counts, scenario.external_messages)
        definition = engine.compile_model(model)
        trace = engine.run(definition, scenario)
        _write(args.output, trace.to_jsonl())
    except (OSError, ValueError, OntoflowError) as exc:
        return _fail(args.input, exc)
    if trace.terminal == engine.COMPLETED:
        return OK
    waiting = ", ".join(trace.footer.get("waiting", ())) or "none"
    print(f"ontoflow: {args.input}: run ended with {trace.terminal} (waiting: {waiting})", file=sys.stderr)
    return FAILED


def cmd_replay(args) -> int:
    try:
        model = _load_sbpm_input(args.input)
        scenario = engine.Scenario.from_json(_read(args.scenario)) if args.scenario else engine.Scenario()
        trace = engine.Trace.from_jsonl(_read(args.trace))
        same = engine.replay_check(engine.compile_model(model), scenario, trace)
    except (OSError, ValueError, OntoflowError) as exc:
        return _fail(args.input, exc)
    print(f"{args.trace}: {'replays identically' if same else 'does not replay'}")
    return OK if same else FAILED


def cmd_reverse(args) -> int:
    try:
        model = sbpm.load_sbpm_owl(_read(args.input))
        _write(args.output, sbpm.to_bpmn(model))
    except (OSError, ValueError, OntoflowError) as exc:
        return _fail(args.input, exc)
    return OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ontoflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def reference_options(sp) -> None:
        sp.add_argument("--extension", help="ontology file merged into the reference")
        sp.add_argument("--table", help="extra translation-table rows (scope standard serialized)")

    sp = sub.add_parser("convert", help="BPMN XML to model ontology")
    sp.add_argument("input")
    sp.add_argument("-o", "--output", help="output .owl (default stdout)")
    sp.add_argument("--compare-log", help="write differences against the reference as JSON lines")
    reference_options(sp)
    sp.set_defaults(func=cmd_convert)

    sp = sub.add_parser("verify", help="check BPMN files (or model ontologies) against the reference")
    sp.add_argument("inputs", nargs="*")
    sp.add_argument("--format", choices=("text", "jsonl"))
    sp.add_argument("-o", "--output", help="report file (default stdout)")
    sp.add_argument("--severity", action="append", metavar="KIND[@Class]=LEVEL",
                    help="downgrade or upgrade a finding kind, e.g. UnknownProperty=warning")
    sp.add_argument("--config", help="JSON file with extension, table, format and severity defaults")
    reference_options(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("roundtrip", help="BPMN -> ontology -> BPMN, compared canonically")
    sp.add_argument("input")
    sp.add_argument("--intermediate", help="also write the ontology here")
    sp.add_argument("--from-intermediate", help="read the ontology from here instead of converting")
    sp.add_argument("-o", "--output", help="write the reconstructed BPMN here")
    sp.set_defaults(func=cmd_roundtrip)

    sp = sub.add_parser("transform", help="BPMN to S-BPM ontology")
    sp.add_argument("input")
    sp.add_argument("-o", "--output", help="output .owl (default stdout)")
    sp.set_defaults(func=cmd_transform)

    sp = sub.add_parser("run", help="execute an S-BPM model under a scenario")
    sp.add_argument("input", help="S-BPM .owl (a .bpmn file is transformed first)")
    sp.add_argument("--scenario", help="scenario JSON")
    sp.add_argument("--max-steps", type=int)
    sp.add_argument("-o", "--output", help="trace .jsonl (default stdout)")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("replay", help="check that a trace is what the scenario produces")
    sp.add_argument("input")
    sp.add_argument("trace")
    sp.add_argument("--scenario")
    sp.set_defaults(func=cmd_replay)

    sp = sub.add_parser("reverse", help="S-BPM ontology back to BPMN (best effort)")
    sp.add_argument("input")
    sp.add_argument("-o", "--output", help="output .bpmn (default stdout)")
    sp.set_defaults(func=cmd_reverse)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2 already
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

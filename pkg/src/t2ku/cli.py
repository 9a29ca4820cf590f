"""Command-line front door.

Exit codes: 0 proved (or plain success), 1 unknown, 2 inconsistent,
64 usage/parse errors, 65 data errors. With ``--json`` stdout carries only
machine-readable payloads; diagnostics go to stderr either way.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bridge import Ambiguous, PatternRule, Translated, apply_forward, validate_rule
from .config import Config, load_config
from .errors import BridgeError, FormulaError, InferError, KbError, T2kuError, T2MathError
from .infer import normalize, prove, render_outline
from .kb import Store
from .logic import print_formula
from .t2math import parse
from .tptp import export_problem

EXIT_PROVED = 0
EXIT_UNKNOWN = 1
EXIT_INCONSISTENT = 2
EXIT_USAGE = 64
EXIT_DATA = 65

_VERDICT_EXITS = {"proved": EXIT_PROVED, "unknown": EXIT_UNKNOWN,
                  "inconsistent": EXIT_INCONSISTENT}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="t2ku", description=__doc__)
    parser.add_argument("--config", help="config file path (T2KU_CONFIG also works)")
    parser.add_argument("--data-dir", dest="data_dir", help="store directory")
    parser.add_argument("--json", action="store_true", help="machine-readable stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("parse", "translate", "prove"):
        p = sub.add_parser(name)
        p.add_argument("file")
    p = sub.add_parser("export-tptp")
    p.add_argument("file")
    p.add_argument("--tptp-out", dest="tptp_out", required=True)

    rule = sub.add_parser("rule")
    rule_sub = rule.add_subparsers(dest="rule_command", required=True)
    for name in ("add", "check"):
        rp = rule_sub.add_parser(name)
        rp.add_argument("rulefile")

    kbp = sub.add_parser("kb")
    kb_sub = kbp.add_subparsers(dest="kb_command", required=True)
    for name in ("import", "export"):
        kp = kb_sub.add_parser(name)
        kp.add_argument("path")

    serve = sub.add_parser("serve")
    serve.add_argument("--config", dest="serve_config")
    serve.add_argument("--port", type=int)
    serve.add_argument("--lease-seconds", dest="lease_seconds", type=float)
    serve.add_argument(
        "--global-timeout-seconds", dest="global_timeout_seconds", type=float
    )
    return parser


def _load_store(config: Config) -> Store:
    data_dir = Path(config.data_dir)
    if data_dir.exists():
        return Store.load(data_dir)
    return Store()


def _emit(payload: dict, as_json: bool, text: str | None = None) -> None:
    if as_json:
        print(json.dumps(payload, indent=2))
    elif text is not None:
        print(text)


def run(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0

    try:
        config = load_config(
            getattr(args, "serve_config", None) or args.config,
            {
                "data_dir": args.data_dir,
                "port": getattr(args, "port", None),
                "lease_seconds": getattr(args, "lease_seconds", None),
                "global_timeout_seconds": getattr(args, "global_timeout_seconds", None),
            },
        )
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return _dispatch(args, config)
    except T2MathError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (FormulaError, BridgeError, KbError, InferError) as exc:
        print(str(exc), file=sys.stderr)
        if isinstance(exc, BridgeError) and "report" in exc.details:
            print(json.dumps(exc.details["report"], indent=2), file=sys.stderr)
        return EXIT_DATA
    except T2kuError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _dispatch(args: argparse.Namespace, config: Config) -> int:
    if args.command == "parse":
        proposition = parse(_read(args.file))
        _emit(
            proposition.to_dict(),
            args.json,
            "\n".join(
                f"[{s.section}] {s.text}" for s in proposition.sentences
            ),
        )
        return 0

    if args.command == "translate":
        store = _load_store(config)
        proposition = parse(_read(args.file))
        rules = list(store.rules)
        payload: dict = {"sentences": []}
        lines = []
        ambiguous = False
        for index, sentence in enumerate(proposition.sentences):
            result = apply_forward(rules, sentence)
            if isinstance(result, Translated):
                clauses = [print_formula(c) for c in result.clauses]
                payload["sentences"].append(
                    {"index": index, "status": "translated",
                     "rule_id": result.rule_id, "clauses": clauses}
                )
                lines.extend(clauses)
            elif isinstance(result, Ambiguous):
                ambiguous = True
                payload["sentences"].append(
                    {
                        "index": index,
                        "status": "ambiguous",
                        "candidates": [
                            {"rule_id": c.rule_id,
                             "clauses": [print_formula(x) for x in c.clauses]}
                            for c in result.candidates
                        ],
                    }
                )
                lines.append(f"AMBIGUOUS: {sentence.text}")
            else:
                ambiguous = True
                payload["sentences"].append(
                    {"index": index, "status": "unparsed", "sentence": sentence.text}
                )
                lines.append(f"UNPARSED: {sentence.text}")
        _emit(payload, args.json, "\n".join(lines))
        return EXIT_DATA if ambiguous else 0

    if args.command == "prove":
        store = _load_store(config)
        proposition = parse(_read(args.file))
        goal = normalize(proposition, list(store.rules), store.kb)
        verdict = prove(goal, store.kb, config.limits)
        outline = None
        if verdict.proof is not None:
            outline = render_outline(
                verdict.proof, list(store.rules), goal.span_map, store.kb
            )
        payload = verdict.to_dict()
        if outline is not None:
            payload["outline"] = outline
        text = f"verdict: {verdict.kind}"
        if outline:
            text += "\n" + outline
        if verdict.kind == "unknown" and verdict.relevant:
            text += "\nrelevant facts:\n" + "\n".join(
                f"  {cid}: {print_formula(store.kb.clauses[cid])}"
                for cid in verdict.relevant
                if cid in store.kb.clauses
            )
        _emit(payload, args.json, text)
        return _VERDICT_EXITS[verdict.kind]

    if args.command == "export-tptp":
        store = _load_store(config)
        proposition = parse(_read(args.file))
        goal = normalize(proposition, list(store.rules), store.kb)
        document = export_problem(goal, store.kb, config.selection)
        Path(args.tptp_out).write_text(document, encoding="utf-8")
        _emit({"written": args.tptp_out}, args.json, f"wrote {args.tptp_out}")
        return 0

    if args.command == "rule":
        store = _load_store(config)
        data = json.loads(_read(args.rulefile))
        records = data if isinstance(data, list) else [data]
        reports = []
        ok = True
        for record in records:
            rule = PatternRule.from_dict(record)
            report = validate_rule(list(store.rules), rule)
            reports.append({"rule_id": rule.id, **report.to_dict()})
            if report.accepted and args.rule_command == "add":
                store.add_rule(rule, validate=False)
            ok = ok and report.accepted
        if args.rule_command == "add" and ok:
            store.commit(author="cli", message=f"add rules from {args.rulefile}")
            store.save(config.data_dir)
        _emit(
            {"reports": reports},
            args.json,
            "\n".join(
                f"{r['rule_id']}: {'accepted' if r['accepted'] else 'rejected'}"
                for r in reports
            ),
        )
        return 0 if ok else EXIT_DATA

    if args.command == "kb":
        store = _load_store(config)
        if args.kb_command == "import":
            reports = store.import_clauses(_read(args.path))
            store.commit(author="cli", message=f"import {args.path}")
            store.save(config.data_dir)
            duplicates = sum(1 for r in reports if r.duplicate)
            _emit(
                {"imported": len(reports), "duplicates": duplicates},
                args.json,
                f"imported {len(reports)} clauses ({duplicates} duplicates)",
            )
        else:
            Path(args.path).write_text(store.export_clauses(), encoding="utf-8")
            _emit({"written": args.path}, args.json, f"wrote {args.path}")
        return 0

    if args.command == "serve":
        return _serve(config)

    raise T2kuError("E_USAGE", f"unknown command {args.command!r}")


def _serve(config: Config) -> int:
    import uvicorn

    from .server import create_app
    from .yard import LocalEngine, YardStore

    store = _load_store(config)
    yard = YardStore(
        store,
        lease_seconds=config.lease_seconds,
        global_timeout_seconds=config.global_timeout_seconds,
        limits=config.limits,
        selection=config.selection,
    )
    local = LocalEngine(yard)
    local.start()
    app = create_app(yard)
    try:
        uvicorn.run(app, host="127.0.0.1", port=config.port, log_level="info")
    finally:
        local.stop()
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()

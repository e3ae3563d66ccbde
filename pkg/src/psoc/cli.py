"""``psoc`` command line: validate, compile and dump-plan.

Exit status is 0 on success, 1 when the model has errors (or warnings under
``--strict``) or a target cannot express the physics, and 2 for usage, I/O
and parse errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from .axioms import Diagnostic
from .backends.fenics import FenicsError
from .backends.nastran import NastranError
from .dsl import DEFAULT_STEPS, TARGETS, ParseFailure, ParsedModel, SimRequest
from .meshgen import MeshError
from .pipeline import ValidationFailed, compile_model, load, validate
from .plan import IllPosed, PlanError, derive_problem, render_plan

OK, FAILED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _print_diagnostics(diags: list[Diagnostic], fmt: str = "text", stream=None) -> None:
    stream = stream or sys.stdout
    for d in diags:
        if fmt == "json":
            print(json.dumps(d.to_record(), sort_keys=True), file=stream)
        else:
            print(d, file=stream)


def _load(path: str) -> ParsedModel:
    try:
        return load(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None
    except ParseFailure as exc:
        raise UsageError("\n".join(f"{path}:{e}" for e in exc.errors)) from None
    except UnicodeDecodeError:
        raise UsageError(f"{path} is not UTF-8 text") from None


def cmd_validate(args) -> int:
    model = _load(args.file)
    diags = validate(model)
    _print_diagnostics(diags, args.format)
    if any(d.is_error for d in diags):
        return FAILED
    if args.strict and diags:
        return FAILED
    return OK


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("steps must be at least 1")
    return n


def _requests(model: ParsedModel, behavior: str, target: str | None, steps: int | None) -> list[SimRequest]:
    if behavior == "all":
        sims = [s for s in model.sims if target is None or s.target == target]
        if not sims:
            raise UsageError("the model has no matching simulate requests")
    else:
        declared = [s for s in model.sims if s.behavior == behavior]
        if target is not None:
            match = [s for s in declared if s.target == target]
            sims = match or [SimRequest(behavior, target, DEFAULT_STEPS)]
        elif declared:
            sims = declared
        else:
            raise UsageError(f"no simulate request for {behavior}; pass --target")
    if steps is not None:
        sims = [SimRequest(s.behavior, s.target, steps) for s in sims]
    return sims


def cmd_compile(args) -> int:
    model = _load(args.file)
    sims = _requests(model, args.behavior, args.target, args.steps)
    try:
        results = compile_model(model, sims, args.out)
    except (ValidationFailed, PlanError, IllPosed) as exc:
        _print_diagnostics(exc.diagnostics, stream=sys.stderr)
        return FAILED
    except (NastranError, FenicsError, MeshError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILED
    except OSError as exc:
        raise UsageError(f"cannot write to {args.out}: {exc.strerror or exc}") from None
    for path in dict.fromkeys(p for r in results for p in r.files):
        print(path)
    return OK


def cmd_dump_plan(args) -> int:
    model = _load(args.file)
    declared = [s for s in model.sims if s.behavior == args.behavior]
    sim = declared[0] if declared else None
    try:
        spec = derive_problem(model.graph, args.behavior, sim, model.meshes)
    except PlanError as exc:
        _print_diagnostics(exc.diagnostics, stream=sys.stderr)
        return FAILED
    sys.stdout.write(render_plan(spec))
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psoc", description="Compile physics models into solver inputs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model and report diagnostics")
    p.add_argument("file")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--strict", action="store_true", help="treat warnings as failures")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("compile", help="emit solver input artifacts")
    p.add_argument("file")
    p.add_argument("--behavior", required=True, help="behavior instance id, or 'all'")
    p.add_argument("--target", choices=TARGETS)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=_positive)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("dump-plan", help="print the problem plan of one behavior")
    p.add_argument("file")
    p.add_argument("--behavior", required=True)
    p.set_defaults(func=cmd_dump_plan)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())

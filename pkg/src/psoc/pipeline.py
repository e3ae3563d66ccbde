"""Parse → validate → plan → emit, shared by the CLI and the tests."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources

from .axioms import Diagnostic, check_all, sort_diagnostics
from .backends.fenics import emit_script
from .backends.nastran import deck_file_name, emit_deck
from .core import ModelGraph
from .dsl import ParsedModel, SimRequest, parse
from .meshgen import mesh_for, mesh_paths, write_mesh_files
from .plan import (
    IllPosed,
    PlanError,
    ProblemSpec,
    derive_problem,
    detect_coupling,
    instantiate_ices,
    well_posedness,
)


class ValidationFailed(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


@dataclass
class CompileResult:
    behavior: str
    target: str
    files: list[str]
    graph: ModelGraph
    spec: ProblemSpec
    notes: list[Diagnostic] = field(default_factory=list)


def case_study_text() -> str:
    """Source of the bundled pipe elbow model."""
    return resources.files("psoc").joinpath("models/pipe_elbow.pso").read_text(encoding="utf-8")


def load(path: str) -> ParsedModel:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def plan_diagnostics(model: ParsedModel, sim: SimRequest) -> tuple[ProblemSpec | None, list[Diagnostic]]:
    try:
        spec = derive_problem(model.graph, sim.behavior, sim, model.meshes)
    except PlanError as exc:
        return None, list(exc.diagnostics)
    return spec, list(spec.notes) + well_posedness(spec)


def validate(model: ParsedModel, notes: bool = True) -> list[Diagnostic]:
    """Axiom diagnostics, then planning and well-posedness for every simulate request.

    Planning is skipped when the axioms already report errors, since a
    structurally broken graph yields only derivative noise downstream.
    """
    diags = check_all(model.graph, notes=notes)
    if any(d.is_error for d in diags):
        return diags
    seen = set()
    for sim in model.sims:
        if sim.behavior in seen:
            continue
        seen.add(sim.behavior)
        diags += plan_diagnostics(model, sim)[1]
    diags += detect_coupling(model.graph).notes
    return sort_diagnostics(dict.fromkeys(diags))


def compile_request(model: ParsedModel, sim: SimRequest, out_dir: str) -> CompileResult:
    """Emit the artifacts of one simulate request into ``out_dir``.

    Raises :class:`PlanError`, :class:`IllPosed` or the backend's own errors;
    nothing is written unless emission succeeds.
    """
    spec = derive_problem(model.graph, sim.behavior, sim, model.meshes)
    extended = instantiate_ices(model.graph, spec, sim)
    directive = spec.mesh_directive
    if sim.target == "fenics":
        paths = mesh_paths(directive, out_dir)
        artifact = emit_script(spec, paths)
        os.makedirs(out_dir, exist_ok=True)
        required = [b.surface for b in spec.boundary]
        files = list(write_mesh_files(mesh_for(directive, tets=True), directive, out_dir, required))
        script = os.path.join(out_dir, artifact.file_name)
        _write(script, artifact.body)
        files.append(script)
    elif sim.target == "nastran":
        deck = emit_deck(spec, mesh_for(directive))
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, deck_file_name(spec))
        _write(path, deck.render())
        files = [path]
    else:
        raise ValueError(f"unknown target {sim.target!r}")
    return CompileResult(sim.behavior, sim.target, files, extended, spec, list(spec.notes))


def compile_model(model: ParsedModel, sims: list[SimRequest], out_dir: str) -> list[CompileResult]:
    errors = [d for d in validate(model, notes=False) if d.is_error]
    if errors:
        raise ValidationFailed(errors)
    return [compile_request(model, sim, out_dir) for sim in sims]


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


__all__ = [
    "CompileResult",
    "IllPosed",
    "ValidationFailed",
    "case_study_text",
    "compile_model",
    "compile_request",
    "load",
    "plan_diagnostics",
    "validate",
]

"""Compile PSO-Physics models of physical phenomena into solver inputs."""

from .core import Assertion, Instance, ModelGraph, QuantityValue, RelationKind, Taxonomy, default_taxonomy
from .dsl import ParseFailure, parse, serialize_canonical

__version__ = "0.1.0"

__all__ = [
    "Assertion",
    "Instance",
    "ModelGraph",
    "ParseFailure",
    "QuantityValue",
    "RelationKind",
    "Taxonomy",
    "default_taxonomy",
    "parse",
    "serialize_canonical",
]

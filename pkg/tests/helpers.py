"""Independent oracles and generators shared by the test modules."""

from __future__ import annotations

import re

import numpy as np
from hypothesis import strategies as st

from psoc.core import (
    BUILTIN_CLASSES,
    Assertion,
    Instance,
    ModelGraph,
    QuantityValue,
    RelationKind,
    Taxonomy,
    default_taxonomy,
)


def edit(text: str, drop=(), add=()) -> str:
    """Remove exact statement lines and append new ones."""
    lines = text.split("\n")
    for target in drop:
        hits = [i for i, line in enumerate(lines) if line.strip() == target]
        assert hits, f"line not found: {target}"
        for i in reversed(hits):
            del lines[i]
    return "\n".join(lines + list(add)) + "\n"


def reachability(nodes: list[str], edges) -> set[tuple[str, str]]:
    """Pairs (a, b) with a path of length >= 1 from a to b, by boolean matrix squaring."""
    index = {n: i for i, n in enumerate(nodes)}
    m = np.zeros((len(nodes), len(nodes)), dtype=bool)
    for a, b in edges:
        m[index[a], index[b]] = True
    reach = m.copy()
    for _ in range(max(1, len(nodes)).bit_length() + 1):
        reach = reach | ((reach.astype(int) @ reach.astype(int)) > 0)
    return {(nodes[i], nodes[j]) for i, j in zip(*np.nonzero(reach))}


def components_closure(edges) -> set[tuple[str, str]]:
    """Symmetric-transitive closure via union-find: all pairs within a connected component."""
    parent: dict[str, str] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    groups: dict[str, list[str]] = {}
    for x in list(parent):
        groups.setdefault(find(x), []).append(x)
    return {(a, b) for g in groups.values() for a in g for b in g}


def tet_volume(a, b, c, d) -> float:
    return float(np.linalg.det(np.array([np.subtract(b, a), np.subtract(c, a), np.subtract(d, a)]))) / 6.0


NAMES = st.from_regex(r"[a-z][a-z0-9_]{0,7}", fullmatch=True)
CLASS_NAMES = st.from_regex(r"U[A-Za-z0-9]{0,6}", fullmatch=True)
LABELS = st.one_of(st.none(), st.text(st.characters(blacklist_characters="\n", blacklist_categories=("Cs",)), max_size=12))
UNITS = st.one_of(st.just(""), st.from_regex(r"[A-Za-z][A-Za-z0-9/^*()_.-]{0,7}", fullmatch=True))
MAGNITUDES = st.floats(allow_nan=False, allow_infinity=False)


@st.composite
def taxonomies(draw) -> Taxonomy:
    parents = dict(default_taxonomy().parent)
    known = sorted(BUILTIN_CLASSES)
    for name in draw(st.lists(CLASS_NAMES, max_size=4, unique=True)):
        if name in parents:
            continue
        parents[name] = draw(st.sampled_from(known))
        known.append(name)
    return Taxonomy(parents)


@st.composite
def model_graphs(draw, max_instances: int = 10) -> ModelGraph:
    tax = draw(taxonomies())
    classes = sorted(tax.classes)
    ids = draw(st.lists(NAMES, max_size=max_instances, unique=True))
    instances = {i: Instance(i, draw(st.sampled_from(classes)), draw(LABELS)) for i in ids}
    assertions = []
    values = {}
    if ids:
        assertions = draw(st.lists(
            st.builds(Assertion, st.sampled_from(ids), st.sampled_from(list(RelationKind)), st.sampled_from(ids)),
            max_size=20,
        ))
        for i in draw(st.lists(st.sampled_from(ids), unique=True)):
            values[i] = QuantityValue(draw(MAGNITUDES), draw(UNITS))
    return ModelGraph(tax, instances, tuple(assertions), values)


@st.composite
def edge_sets(draw, max_nodes: int = 10):
    n = draw(st.integers(1, max_nodes))
    nodes = [f"n{i}" for i in range(n)]
    edges = draw(st.lists(st.tuples(st.sampled_from(nodes), st.sampled_from(nodes)), max_size=25))
    return nodes, edges


TAG = re.compile(r"#\s\[(\w+)\]")

# PASS/FAIL lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE: list[str] = []

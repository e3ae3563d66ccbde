"""Target emitters: FEniCS scripts and NASTRAN bulk-data decks."""

from .fenics import ScriptArtifact, emit_script, script_file_name
from .nastran import Deck, UnsupportedPhysics, deck_file_name, emit_deck, parse_deck

__all__ = [
    "Deck",
    "ScriptArtifact",
    "UnsupportedPhysics",
    "deck_file_name",
    "emit_deck",
    "emit_script",
    "parse_deck",
    "script_file_name",
]

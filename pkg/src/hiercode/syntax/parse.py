"""Grammar registry and the parse entry point.

Each supported grammar bundles a parser function with two config files
shipped alongside this module: a statement set (node types that mark the
global/local boundary of a hierarchy path) and a block set (node types
that open a lexical scope, used as scope-probe ground truth).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ..errors import UnreadableSource, UnsupportedLanguage
from . import clang, pylang
from .tree import CSTNode

_GRAMMAR_DIR = Path(__file__).parent / "grammars"


def load_type_set(path: Path) -> frozenset[str]:
    """Read a node-type set file: one name per line, '#' comments."""
    names = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            names.append(line)
    return frozenset(names)


@dataclass(frozen=True)
class Grammar:
    """A language known to the extractor."""

    name: str
    parse: Callable[[str], CSTNode] = field(repr=False)
    statements: frozenset[str]
    blocks: frozenset[str]


_REGISTRY: dict[str, Grammar] = {}


def _register(name: str, parse_fn: Callable[[str], CSTNode]) -> None:
    _REGISTRY[name] = Grammar(
        name=name,
        parse=parse_fn,
        statements=load_type_set(_GRAMMAR_DIR / f"{name}.statements.txt"),
        blocks=load_type_set(_GRAMMAR_DIR / f"{name}.blocks.txt"),
    )


_register("python", pylang.parse)
_register("cpp", clang.parse)


def available_grammars() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def get_grammar(language: str) -> Grammar:
    try:
        return _REGISTRY[language]
    except KeyError:
        raise UnsupportedLanguage(
            f"unknown grammar {language!r}; available: {', '.join(available_grammars())}"
        ) from None


def parse_to_cst(source: str | bytes, language: str) -> CSTNode:
    """Parse source into a CST whose leaves are the lexical tokens.

    Recoverable errors become ERROR nodes; an input where nothing parsed
    comes back as a single ERROR root, never an exception.
    """
    grammar = get_grammar(language)
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise UnreadableSource(f"source is not valid UTF-8: {exc}") from None
    tree = grammar.parse(source)
    if tree.children and all(child.type == "ERROR" for child in tree.children):
        merged: list[CSTNode] = []
        for child in tree.children:
            merged.extend(child.children)
        return CSTNode("ERROR", merged)
    return tree

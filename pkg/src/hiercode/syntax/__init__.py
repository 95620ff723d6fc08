"""Concrete syntax trees and per-token hierarchy path extraction."""

from .parse import Grammar, available_grammars, get_grammar, parse_to_cst
from .paths import (
    DEFAULT_SKIP_TYPES,
    HIERARCHY_MODES,
    PAD_TYPE,
    UNK_TYPE,
    HierarchyPath,
    NodeTypeVocabulary,
    TokenizedProgram,
    extract_token_paths,
    program_from_record,
    program_to_record,
    project_hierarchy,
    split_path,
    tokenize_program,
    truncate_path,
)
from .tree import CSTNode

__all__ = [
    "CSTNode",
    "DEFAULT_SKIP_TYPES",
    "Grammar",
    "HIERARCHY_MODES",
    "HierarchyPath",
    "NodeTypeVocabulary",
    "PAD_TYPE",
    "TokenizedProgram",
    "UNK_TYPE",
    "available_grammars",
    "extract_token_paths",
    "get_grammar",
    "parse_to_cst",
    "program_from_record",
    "program_to_record",
    "project_hierarchy",
    "split_path",
    "tokenize_program",
    "truncate_path",
]
